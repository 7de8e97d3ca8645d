#include "aggmrf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "text_util.hpp"

namespace aggmrf {

std::string EvalReport::to_json() const {
    return "{\"nllh\": " + detail::format_real(nllh) + ", \"log_loss\": " + detail::format_real(log_loss) +
           ", \"entropy\": " + detail::format_real(label_entropy) + ", \"n\": " + std::to_string(n_test) + "}";
}

EvalReport nllh(std::span<const double> predictions, std::span<const int> labels) {
    if (predictions.size() != labels.size()) throw Error("predictions and labels differ in length");
    if (labels.empty()) throw Error("degenerate labels: empty test set");
    constexpr double lo = 1e-12, hi = 1.0 - 1e-12;
    double loss = 0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = std::clamp(predictions[i], lo, hi);
        if (labels[i]) {
            loss -= std::log(p);
            ++positives;
        } else {
            loss -= std::log1p(-p);
        }
    }
    if (positives == 0 || positives == labels.size()) throw Error("degenerate labels");
    EvalReport r;
    r.n_test = labels.size();
    r.log_loss = loss / static_cast<double>(labels.size());
    const double ybar = static_cast<double>(positives) / static_cast<double>(labels.size());
    r.label_entropy = -(ybar * std::log(ybar) + (1 - ybar) * std::log(1 - ybar));
    r.nllh = 1.0 - r.log_loss / r.label_entropy;
    return r;
}

EvalReport evaluate(const ModelParams& p, const Dataset& test) {
    std::vector<double> preds(test.size());
    std::vector<int> labels(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        preds[i] = predict_proba(p, test.x(i));
        labels[i] = test.y(i);
    }
    return nllh(preds, labels);
}

}  // namespace aggmrf
