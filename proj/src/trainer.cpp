#include "aggmrf/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "aggmrf/metrics.hpp"
#include "text_util.hpp"

namespace aggmrf {

namespace {

double norm2(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

bool same_double(double a, double b) {
    return a == b || (std::isnan(a) && std::isnan(b));
}

}  // namespace

bool TrainTrace::same_values(const TrainTrace& other) const {
    if (rows.size() != other.rows.size()) return false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& a = rows[i];
        const auto& b = other.rows[i];
        if (a.iter != b.iter || !same_double(a.grad_mu_norm, b.grad_mu_norm) ||
            !same_double(a.grad_theta_norm, b.grad_theta_norm) || !same_double(a.moment_gap, b.moment_gap) ||
            a.test_nllh.has_value() != b.test_nllh.has_value() ||
            (a.test_nllh && !same_double(*a.test_nllh, *b.test_nllh)))
            return false;
    }
    return true;
}

void TrainTrace::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "iter,grad_mu_norm,grad_theta_norm,moment_gap,test_nllh,seconds\n";
    for (const auto& r : rows) {
        out << r.iter << ',' << detail::format_real(r.grad_mu_norm) << ','
            << detail::format_real(r.grad_theta_norm) << ',' << detail::format_real(r.moment_gap) << ','
            << (r.test_nllh ? detail::format_real(*r.test_nllh) : std::string()) << ','
            << detail::format_real(r.seconds) << '\n';
    }
}

ScaledMoments scale_to_data(const MomentEstimate& est, double n) {
    const double factor = est.sample_size > 0 ? n / est.sample_size : 0.0;
    ScaledMoments s{est.d_hat, est.c_hat};
    for (double& v : s.d_hat) v *= factor;
    for (double& v : s.c_hat) v *= factor;
    return s;
}

double resolved_epsilon(const TrainConfig& cfg, double n) {
    if (cfg.epsilon_div > 0) return cfg.epsilon_div;
    return n > 0 ? 1e-9 * n : 1e-9;
}

Gradients compute_gradients(const AggregatedData& agg, const ScaledMoments& est, const ModelParams& p,
                            const TrainConfig& cfg) {
    const std::size_t K = p.size();
    const double eps = resolved_epsilon(cfg, agg.n);
    Gradients g;
    g.mu.resize(K);
    g.theta.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        g.mu[k] = est.d_hat[k] - agg.d[k] + 2 * cfg.lambda_mu * p.mu[k];
        const double expected_c = cfg.gradient == GradientMode::rescaled
                                      ? agg.d[k] / std::max(est.d_hat[k], eps) * est.c_hat[k]
                                      : est.c_hat[k];
        g.theta[k] = expected_c - agg.c[k] + 2 * cfg.lambda_theta * p.theta[k];
    }
    return g;
}

Gradients precondition(const Gradients& g, const ScaledMoments& est, const TrainConfig& cfg, double n) {
    const double eps = resolved_epsilon(cfg, n);
    Gradients dir{g.mu, g.theta};
    for (std::size_t k = 0; k < dir.mu.size(); ++k) {
        dir.mu[k] /= est.d_hat[k] + 2 * cfg.lambda_mu + eps;
        dir.theta[k] /= est.c_hat[k] + 2 * cfg.lambda_theta + eps;
    }
    return dir;
}

std::pair<double, double> default_steps(std::size_t tables, bool fast_weights) {
    if (tables < 1) throw Error("default_steps needs at least one table");
    const double base = 1.0 / static_cast<double>(tables);
    return {fast_weights ? 5 * base : base, base};
}

TrainResult pcd_train(const AggregatedData& agg, std::shared_ptr<const ProjectionSet> ps,
                      const TrainConfig& cfg) {
    if (cfg.iterations < 1) throw Error("iterations must be >= 1");
    check_aggregates(*ps, agg);
    if (cfg.lambda_mu < 0 || cfg.lambda_theta < 0) throw Error("regularization must be >= 0");

    auto [alpha_mu, alpha_theta] = default_steps(ps->num_tables(), cfg.fast_weights);
    if (cfg.step_mu > 0) alpha_mu = cfg.step_mu;
    if (cfg.step_theta > 0) alpha_theta = cfg.step_theta;

    TrainResult result{ModelParams::zeros(ps), {}, {}, 0, std::nullopt};
    ModelParams& p = result.params;

    const bool exact = cfg.expectation == ExpectationMode::exact;
    GibbsState state;
    if (!exact) state = init_state(*ps, agg, cfg.n_prime, cfg.seed, cfg.init);

    const auto start = std::chrono::steady_clock::now();
    for (int t = 1; t <= cfg.iterations; ++t) {
        ScaledMoments est;
        if (exact) {
            auto m = exact_moments(p, agg.n, cfg.enumeration_cap);
            est = {std::move(m.expected_d), std::move(m.expected_c)};
        } else {
            sweep(state, p, cfg.workers);
            est = scale_to_data(estimate_moments(state, p), agg.n);
        }

        const Gradients g = compute_gradients(agg, est, p, cfg);
        const Gradients dir = cfg.precondition ? precondition(g, est, cfg, agg.n) : g;
        for (std::size_t k = 0; k < p.size(); ++k) {
            p.mu[k] -= alpha_mu * dir.mu[k];
            p.theta[k] -= alpha_theta * dir.theta[k];
        }
        if (!p.finite())
            throw NumericalError("non-finite parameters at iteration " + std::to_string(t), t);

        TraceRow row;
        row.iter = t;
        row.grad_mu_norm = norm2(g.mu);
        row.grad_theta_norm = norm2(g.theta);
        double gap = 0;
        for (std::size_t k = 0; k < p.size(); ++k) gap = std::max(gap, std::abs(est.d_hat[k] - agg.d[k]));
        row.moment_gap = agg.n > 0 ? gap / agg.n : gap;
        if (cfg.test && cfg.eval_period > 0 && (t % cfg.eval_period == 0 || t == cfg.iterations)) {
            row.test_nllh = evaluate(p, *cfg.test).nllh;
            if (!result.best_test_nllh || *row.test_nllh > *result.best_test_nllh) {
                result.best_test_nllh = row.test_nllh;
                result.best_iteration = t;
                result.best_params = p;
            }
        }
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.trace.rows.push_back(row);
    }
    if (!result.best_test_nllh) {
        result.best_params = p;
        result.best_iteration = cfg.iterations;
    }
    return result;
}

double regularized_objective(const ModelParams& p, const Dataset& ds, double lambda_mu, double lambda_theta,
                             std::uint64_t cap) {
    double penalty = 0;
    for (std::size_t k = 0; k < p.size(); ++k)
        penalty += lambda_mu * p.mu[k] * p.mu[k] + lambda_theta * p.theta[k] * p.theta[k];
    return exact_nll_of_dataset(p, ds, cap) + penalty;
}

}  // namespace aggmrf
