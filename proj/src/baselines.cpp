#include "aggmrf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include "aggmrf/parallel.hpp"
#include "aggmrf/rng.hpp"

namespace aggmrf {

double LogisticModel::predict(std::span<const Modality> x) const {
    const auto& ps = *projection;
    double z = 0;
    for (std::size_t t = 0; t < ps.num_tables(); ++t) z += weights[ps.map_row(ps.base_row(t, x))];
    return sigmoid(z);
}

EvalReport evaluate(const LogisticModel& model, const Dataset& test) {
    std::vector<double> preds(test.size());
    std::vector<int> labels(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        preds[i] = model.predict(test.x(i));
        labels[i] = test.y(i);
    }
    return nllh(preds, labels);
}

namespace {

struct VectorHash {
    std::size_t operator()(const std::vector<std::size_t>& v) const noexcept {
        std::uint64_t h = 0x51ed270b27a3f1a5ULL;
        for (auto x : v) h = mix64(h ^ x);
        return static_cast<std::size_t>(h);
    }
};

/// Distinct encodings with their record and positive counts, in order of
/// first occurrence.
struct Patterns {
    std::size_t width = 0;
    std::vector<std::size_t> rows;
    std::vector<double> count;
    std::vector<double> positives;

    std::size_t size() const noexcept { return count.size(); }
};

Patterns compress(const Dataset& ds, const ProjectionSet& ps) {
    Patterns pat;
    pat.width = ps.num_tables();
    std::unordered_map<std::vector<std::size_t>, std::size_t, VectorHash> index;
    index.reserve(ds.size());
    std::vector<std::size_t> key(pat.width);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        ps.rows_of(ds.x(i), key);
        auto [it, inserted] = index.try_emplace(key, pat.count.size());
        if (inserted) {
            pat.rows.insert(pat.rows.end(), key.begin(), key.end());
            pat.count.push_back(0);
            pat.positives.push_back(0);
        }
        pat.count[it->second] += 1;
        pat.positives[it->second] += ds.y(i);
    }
    return pat;
}

}  // namespace

LogisticModel train_logistic(const Dataset& ds, std::shared_ptr<const ProjectionSet> ps,
                             const LogisticOptions& options) {
    if (ds.empty()) throw Error("train_logistic: empty dataset");
    if (options.lambda < 0) throw Error("train_logistic: lambda must be >= 0");
    const Patterns pat = compress(ds, *ps);
    const std::size_t K = ps->size();
    const double n = static_cast<double>(ds.size());
    const double step = 1.0 / static_cast<double>(ps->num_tables());

    LogisticModel model;
    model.projection = ps;
    model.lambda = options.lambda;
    model.weights.assign(K, 0.0);
    std::vector<double> grad(K), hess(K);

    for (int it = 0; it < options.max_iterations; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(hess.begin(), hess.end(), 0.0);
        for (std::size_t u = 0; u < pat.size(); ++u) {
            const std::size_t* rows = pat.rows.data() + u * pat.width;
            double z = 0;
            for (std::size_t t = 0; t < pat.width; ++t) z += model.weights[rows[t]];
            const double s = sigmoid(z);
            const double r = pat.count[u] * s - pat.positives[u];
            const double h = pat.count[u] * s * (1 - s);
            for (std::size_t t = 0; t < pat.width; ++t) {
                grad[rows[t]] += r;
                hess[rows[t]] += h;
            }
        }
        double gnorm = 0;
        for (std::size_t k = 0; k < K; ++k) {
            grad[k] = (grad[k] + 2 * options.lambda * model.weights[k]) / n;
            gnorm += grad[k] * grad[k];
        }
        model.grad_norm = std::sqrt(gnorm);
        model.iterations = it;
        if (model.grad_norm < options.tolerance) break;
        for (std::size_t k = 0; k < K; ++k) {
            const double curvature = (hess[k] + 2 * options.lambda) / n + 1e-12;
            model.weights[k] -= step * grad[k] / curvature;
        }
        model.iterations = it + 1;
    }
    return model;
}

std::vector<double> log2_grid(int lo, int hi) {
    std::vector<double> out;
    for (int e = lo; e <= hi; ++e) out.push_back(std::ldexp(1.0, e));
    return out;
}

GridChoice best_logistic(const Dataset& train, const Dataset& test, std::shared_ptr<const ProjectionSet> ps,
                         std::span<const double> lambdas, int max_iterations) {
    if (lambdas.empty()) throw Error("empty regularization grid");
    std::optional<GridChoice> best;
    for (double lambda : lambdas) {
        auto model = train_logistic(train, ps, {lambda, max_iterations, 1e-6});
        auto report = evaluate(model, test);
        if (!best || report.nllh > best->report.nllh) best = GridChoice{std::move(model), report};
    }
    return std::move(*best);
}

double closed_form_nb_proba(const ProjectionSet& single, const AggregatedData& agg,
                            std::span<const Modality> x, double smoothing) {
    if (single.kind() != ProjectionKind::single) throw Error("closed-form NB needs single-feature tables");
    const auto& t0 = single.tables()[0];
    double pos = 0;
    for (std::size_t r = 0; r < t0.rows; ++r) pos += agg.c[t0.offset + r];
    const double neg = agg.n - pos;
    double z = std::log(pos / neg);
    for (std::size_t d = 0; d < single.num_tables(); ++d) {
        const auto& t = single.tables()[d];
        const std::size_t k = t.offset + x[d];
        const double M = static_cast<double>(t.rows);
        const double p1 = (agg.c[k] + smoothing) / (pos + smoothing * M);
        const double p0 = (agg.d[k] - agg.c[k] + smoothing) / (neg + smoothing * M);
        z += std::log(p1) - std::log(p0);
    }
    return sigmoid(z);
}

NaiveBayesResult train_naive_bayes(const AggregatedData& agg_single, std::shared_ptr<const ProjectionSet> ps_single,
                                   TrainConfig cfg, const Dataset& test) {
    if (ps_single->kind() != ProjectionKind::single)
        throw Error("Naive Bayes training needs a single-feature projection");
    cfg.test = &test;
    if (cfg.eval_period <= 0) cfg.eval_period = 1;
    auto run = pcd_train(agg_single, ps_single, cfg);
    NaiveBayesResult out;
    out.params = std::move(run.best_params);
    out.best_iteration = run.best_iteration;
    out.best_report = evaluate(out.params, test);
    out.trace = std::move(run.trace);
    return out;
}

Dataset select_features(const Dataset& ds, std::span<const std::size_t> features) {
    std::vector<Feature> f;
    for (auto d : features) f.push_back(ds.schema()[d]);
    Dataset out{Schema(std::move(f))};
    out.reserve(ds.size());
    std::vector<Modality> x(features.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto src = ds.x(i);
        for (std::size_t j = 0; j < features.size(); ++j) x[j] = src[features[j]];
        out.add(x, ds.y(i));
    }
    return out;
}

PairChoice best_two_features(const Dataset& train, const Dataset& test, double lambda, int workers) {
    const std::size_t D = train.dims();
    if (D < 2) throw Error("best_two_features needs at least 2 features");
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = i + 1; j < D; ++j) pairs.emplace_back(i, j);

    std::vector<PairChoice> results(pairs.size());
    parallel_for(pairs.size(), workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t q = begin; q < end; ++q) {
            const std::size_t cols[2] = {pairs[q].first, pairs[q].second};
            const auto sub_train = select_features(train, cols);
            const auto sub_test = select_features(test, cols);
            auto ps = std::make_shared<const ProjectionSet>(
                ProjectionSet::build_pairwise(sub_train.schema(), true));
            auto model = train_logistic(sub_train, ps, {lambda, 2000, 1e-6});
            results[q].first = cols[0];
            results[q].second = cols[1];
            results[q].report = evaluate(model, sub_test);
            results[q].model = std::move(model);
        }
    });
    std::size_t best = 0;
    for (std::size_t q = 1; q < results.size(); ++q)
        if (results[q].report.nllh > results[best].report.nllh) best = q;
    return std::move(results[best]);
}

Dataset generate_xor(std::size_t n, std::uint64_t seed) {
    if (n < 1) throw Error("generate_xor needs n >= 1");
    Dataset ds{Schema({{"x1", 2}, {"x2", 2}, {"x3", 2}})};
    ds.reserve(n);
    SplitMix64 rng(stream_key(seed, 0x0a0b));
    for (std::size_t i = 0; i < n; ++i) {
        const Modality x1 = rng() >> 63;
        const Modality x2 = rng() >> 63;
        const Modality x3 = x1 ^ x2;
        const int y = rng.uniform() < 0.25 + 0.5 * x3 ? 1 : 0;
        const Modality x[3] = {x1, x2, x3};
        ds.add(x, y);
    }
    return ds;
}

}  // namespace aggmrf
