#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "aggmrf/metrics.hpp"
#include "aggmrf/trainer.hpp"

namespace aggmrf {

/// sigma(phi(x) · w) over a projection's rows: the conditional shape of the
/// MRF, fitted on record-level data.
struct LogisticModel {
    std::shared_ptr<const ProjectionSet> projection;
    std::vector<double> weights;
    double lambda = 0;
    int iterations = 0;
    double grad_norm = 0;

    double predict(std::span<const Modality> x) const;
};

struct LogisticOptions {
    double lambda = 1;
    int max_iterations = 2000;
    /// Stop when the gradient of the mean objective falls below this.
    double tolerance = 1e-6;
};

/// Minimizes mean log-loss + lambda |w|² / n with full-batch gradient descent
/// preconditioned by the diagonal Hessian, step 1/tables. Records sharing the
/// same encoding are merged first, so cost scales with distinct patterns.
LogisticModel train_logistic(const Dataset& ds, std::shared_ptr<const ProjectionSet> ps,
                             const LogisticOptions& options);

EvalReport evaluate(const LogisticModel& model, const Dataset& test);

struct GridChoice {
    LogisticModel model;
    EvalReport report;
};

/// Trains one model per lambda and keeps the best test NLLH.
GridChoice best_logistic(const Dataset& train, const Dataset& test,
                         std::shared_ptr<const ProjectionSet> ps, std::span<const double> lambdas,
                         int max_iterations = 2000);

/// Powers of two 2^lo .. 2^hi.
std::vector<double> log2_grid(int lo, int hi);

/// Closed-form Naive Bayes posterior computed from single-feature tables:
/// prior and per-modality class frequencies, with optional additive smoothing.
double closed_form_nb_proba(const ProjectionSet& single, const AggregatedData& agg,
                            std::span<const Modality> x, double smoothing = 0.0);

struct NaiveBayesResult {
    ModelParams params;
    int best_iteration = 0;
    EvalReport best_report;
    TrainTrace trace;
};

/// PCD on single-feature tables, scored on the test set every eval period
/// (1 when unset); returns the best-scoring iterate. Best-on-test selection
/// overstates what a deployable stopping rule would achieve.
NaiveBayesResult train_naive_bayes(const AggregatedData& agg_single,
                                   std::shared_ptr<const ProjectionSet> ps_single, TrainConfig cfg,
                                   const Dataset& test);

struct PairChoice {
    std::size_t first = 0;
    std::size_t second = 0;
    LogisticModel model;
    EvalReport report;
};

/// Logistic on {x_i, x_j, (x_i, x_j)} for every pair; best test NLLH wins.
PairChoice best_two_features(const Dataset& train, const Dataset& test, double lambda,
                             int workers = 1);

/// Restricts records to the given feature columns (in the given order).
Dataset select_features(const Dataset& ds, std::span<const std::size_t> features);

/// X1, X2 ~ Bernoulli(0.5), X3 = X1 xor X2, Y ~ Bernoulli(0.25 + 0.5 X3).
Dataset generate_xor(std::size_t n, std::uint64_t seed);

}  // namespace aggmrf
