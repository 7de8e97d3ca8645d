#pragma once

#include <span>
#include <string>

#include "aggmrf/model.hpp"

namespace aggmrf {

/// Test-set quality of a P(Y=1|X) model.
///   log_loss      = -mean(y log p + (1-y) log(1-p)), p clamped to [1e-12, 1-1e-12]
///   label_entropy = -(ȳ log ȳ + (1-ȳ) log(1-ȳ))
///   nllh          = 1 - log_loss / label_entropy
/// so predicting the constant ȳ scores exactly 0, better models score
/// higher, and perfect predictions approach 1.
struct EvalReport {
    double nllh = 0;
    double log_loss = 0;
    double label_entropy = 0;
    std::size_t n_test = 0;

    std::string to_json() const;
};

/// Throws "degenerate labels" when every label is identical.
EvalReport nllh(std::span<const double> predictions, std::span<const int> labels);

/// Scores predict_proba of the model on a dataset.
EvalReport evaluate(const ModelParams& p, const Dataset& test);

}  // namespace aggmrf
