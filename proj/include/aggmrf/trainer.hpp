#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "aggmrf/gibbs.hpp"
#include "aggmrf/model.hpp"

namespace aggmrf {

enum class GradientMode { plain, rescaled };
enum class ExpectationMode { gibbs, exact };

struct TrainConfig {
    int iterations = 100;
    std::size_t n_prime = 10'000;
    /// Non-positive step sizes are replaced by default_steps().
    double step_mu = 0;
    double step_theta = 0;
    bool fast_weights = false;
    double lambda_mu = 1;
    double lambda_theta = 1;
    GradientMode gradient = GradientMode::rescaled;
    ExpectationMode expectation = ExpectationMode::gibbs;
    bool precondition = true;
    std::uint64_t seed = 0;
    /// Guard added to every divisor; non-positive means 1e-9 · n.
    double epsilon_div = 0;
    InitStrategy init = InitStrategy::marginals;
    int workers = 1;
    std::uint64_t enumeration_cap = kDefaultEnumerationCap;

    /// Optional test set scored every eval_period iterations (and at the end).
    const Dataset* test = nullptr;
    int eval_period = 0;
};

struct TraceRow {
    int iter = 0;
    double grad_mu_norm = 0;
    double grad_theta_norm = 0;
    /// max_k |d̂_k - d_k| / n of the estimates used at this iteration.
    double moment_gap = 0;
    std::optional<double> test_nllh;
    double seconds = 0;
};

struct TrainTrace {
    std::vector<TraceRow> rows;

    /// Equal in every column except wall time.
    bool same_values(const TrainTrace& other) const;
    void write_csv(const std::filesystem::path& path) const;
};

struct Gradients {
    std::vector<double> mu;
    std::vector<double> theta;
};

/// Expectations at data scale: d̂ and ĉ already multiplied by n / n'.
struct ScaledMoments {
    std::vector<double> d_hat;
    std::vector<double> c_hat;
};

ScaledMoments scale_to_data(const MomentEstimate& est, double n);

double resolved_epsilon(const TrainConfig& cfg, double n);

/// g_mu = d̂ - d + 2 λ_mu mu;
/// plain:    g_theta = ĉ - c + 2 λ_theta theta;
/// rescaled: g_theta = d / max(d̂, ε) · ĉ - c + 2 λ_theta theta, so the
/// guard leaves d̂ = d exactly equivalent to the plain gradient.
Gradients compute_gradients(const AggregatedData& agg, const ScaledMoments& est,
                            const ModelParams& p, const TrainConfig& cfg);

/// Divides by the approximate diagonal Hessian: d̂ + 2 λ_mu + ε and
/// ĉ + 2 λ_theta + ε.
Gradients precondition(const Gradients& g, const ScaledMoments& est, const TrainConfig& cfg,
                       double n);

/// Step sizes (alpha_mu, alpha_theta): 1/tables each, alpha_mu five times
/// larger with fast weights.
std::pair<double, double> default_steps(std::size_t tables, bool fast_weights);

struct TrainResult {
    ModelParams params;
    TrainTrace trace;
    /// Best-on-test snapshot when a test set is attached, else the final params.
    ModelParams best_params;
    int best_iteration = 0;
    std::optional<double> best_test_nllh;
};

/// Persistent contrastive divergence from zero parameters. Throws
/// NumericalError naming the iteration if parameters become non-finite.
TrainResult pcd_train(const AggregatedData& agg, std::shared_ptr<const ProjectionSet> ps,
                      const TrainConfig& cfg);

/// Regularized objective used by the descent property test:
/// exact NLL of a dataset + λ_mu |mu|² + λ_theta |theta|².
double regularized_objective(const ModelParams& p, const Dataset& ds, double lambda_mu,
                             double lambda_theta, std::uint64_t cap = kDefaultEnumerationCap);

}  // namespace aggmrf
