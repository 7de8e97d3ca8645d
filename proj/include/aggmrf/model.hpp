#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "aggmrf/projection.hpp"

namespace aggmrf {

/// Parameters of pi(x, y) ∝ exp(phi(x) · (mu + y·theta)), indexed like the
/// projection rows.
struct ModelParams {
    std::shared_ptr<const ProjectionSet> projection;
    std::vector<double> mu;
    std::vector<double> theta;

    static ModelParams zeros(std::shared_ptr<const ProjectionSet> ps);

    const ProjectionSet& ps() const { return *projection; }
    std::size_t size() const noexcept { return mu.size(); }
    bool finite() const noexcept;
};

/// Logistic function; the argument is clamped to ±700 and evaluated on the
/// branch that cannot overflow.
double sigmoid(double z) noexcept;

double log_potential(const ModelParams& p, std::span<const Modality> x, int y);

/// phi(x) · theta.
double logit(const ModelParams& p, std::span<const Modality> x);

/// P(Y=1 | X=x) under the joint model.
double predict_proba(const ModelParams& p, std::span<const Modality> x);

/// P(X_d = m | X_{-d} = x_{-d}, Y = y) for every modality m. Only the tables
/// containing feature d are touched.
std::vector<double> conditional_feature_dist(const ModelParams& p, std::span<const Modality> x,
                                             std::size_t d, int y);

inline constexpr std::uint64_t kDefaultEnumerationCap = 2'000'000;

/// Full joint distribution over X × {0,1}, by enumeration.
struct ExactJoint {
    std::vector<Modality> states;  // S feature vectors, row-major
    std::vector<double> prob;      // index 2*s + y
    double log_z = 0;
    std::size_t dims = 0;

    std::size_t num_states() const noexcept { return prob.size() / 2; }
    std::span<const Modality> x(std::size_t s) const { return {states.data() + s * dims, dims}; }
};

/// Throws when 2·|X| exceeds cap.
ExactJoint exact_joint(const ModelParams& p, std::uint64_t cap = kDefaultEnumerationCap);

struct ExactMoments {
    double log_z = 0;
    double z = 0;  // may overflow to inf; log_z is authoritative
    double n = 0;
    std::vector<double> expected_d;
    std::vector<double> expected_c;
};

/// Expected aggregates of n iid samples from the model.
ExactMoments exact_moments(const ModelParams& p, double n,
                           std::uint64_t cap = kDefaultEnumerationCap);
ExactMoments moments_of(const ModelParams& p, const ExactJoint& joint, double n);

/// -sum_i log pi(x_i, y_i). Test oracle only.
double exact_nll_of_dataset(const ModelParams& p, const Dataset& ds,
                            std::uint64_t cap = kDefaultEnumerationCap);

void save_model(const ModelParams& p, const std::filesystem::path& path);
/// Throws on a malformed file or when K / fingerprint disagree with ps.
ModelParams load_model(const std::filesystem::path& path, std::shared_ptr<const ProjectionSet> ps);

}  // namespace aggmrf
