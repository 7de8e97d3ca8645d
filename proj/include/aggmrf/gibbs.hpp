#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "aggmrf/model.hpp"

namespace aggmrf {

enum class InitStrategy { marginals, uniform };

/// Persistent Gibbs particles. Particle i owns its own counter-based random
/// stream seeded from (seed, i), so results do not depend on how particles
/// are split across workers.
struct GibbsState {
    std::size_t dims = 0;
    std::vector<Modality> particles;  // n' × dims, row-major
    std::vector<std::uint8_t> labels;
    std::vector<std::uint64_t> streams;
    std::uint64_t seed = 0;
    std::uint64_t sweeps = 0;

    std::size_t size() const noexcept { return labels.size(); }
    std::span<const Modality> x(std::size_t i) const { return {particles.data() + i * dims, dims}; }

    bool operator==(const GibbsState&) const = default;
};

GibbsState init_state(const ProjectionSet& ps, const AggregatedData& agg, std::size_t n_prime,
                      std::uint64_t seed, InitStrategy strategy);

/// One systematic-scan sweep: each particle draws its label from
/// P(Y | x), then resamples features 0..D-1 in order from their conditionals.
void sweep(GibbsState& state, const ModelParams& p, int workers = 1);

/// Particle-scale sums (before any n/n' scaling).
struct MomentEstimate {
    std::vector<double> d_hat;
    std::vector<double> c_hat;
    /// Number of particles the sums run over (n').
    double sample_size = 0;
};

/// d_hat = sum_i phi(x_i); c_hat = sum_i P(Y=1|x_i) phi(x_i). The sampled
/// labels are not used. Reduction runs in particle-index order.
MomentEstimate estimate_moments(const GibbsState& state, const ModelParams& p);

/// sum_i y_i phi(x_i) with the labels drawn during the last sweep; the
/// higher-variance estimator that estimate_moments replaces.
std::vector<double> label_sampled_c(const GibbsState& state, const ProjectionSet& ps);

void save_state(const GibbsState& state, const std::filesystem::path& path);
GibbsState load_state(const std::filesystem::path& path);

}  // namespace aggmrf
