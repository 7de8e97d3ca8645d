#include "aggmrf/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "aggmrf/parallel.hpp"
#include "aggmrf/rng.hpp"
#include "text_util.hpp"

namespace aggmrf {

namespace {

Modality draw_from_weights(std::span<const double> cumulative, SplitMix64& rng) {
    const double u = rng.uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<Modality>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                          static_cast<std::ptrdiff_t>(cumulative.size()) - 1));
}

/// Where feature d sits inside one table: the candidate row for modality m
/// is base(x) + m * stride.
struct Slot {
    std::size_t offset;
    std::size_t stride;
    std::vector<std::pair<std::size_t, std::size_t>> others;  // (feature, stride)
};

std::vector<std::vector<Slot>> slots_by_feature(const ProjectionSet& ps) {
    std::vector<std::vector<Slot>> slots(ps.schema().size());
    for (std::size_t d = 0; d < slots.size(); ++d) {
        for (std::size_t t : ps.tables_of(d)) {
            const auto& tab = ps.tables()[t];
            Slot s{tab.offset, 0, {}};
            for (std::size_t j = 0; j < tab.features.size(); ++j) {
                if (tab.features[j] == d)
                    s.stride = tab.strides[j];
                else
                    s.others.emplace_back(tab.features[j], tab.strides[j]);
            }
            slots[d].push_back(std::move(s));
        }
    }
    return slots;
}

template <bool Hashed>
void sweep_range(GibbsState& state, const ProjectionSet& ps, const std::vector<std::vector<Slot>>& slots,
                 std::span<const double> theta, std::span<const double> w0, std::span<const double> w1,
                 std::size_t begin, std::size_t end) {
    const auto& schema = ps.schema();
    const std::size_t D = state.dims;
    const auto buckets = ps.bucket_map();
    auto map = [&](std::size_t r) -> std::size_t {
        if constexpr (Hashed) return buckets[r];
        else return r;
    };
    Modality max_m = 0;
    for (const auto& f : schema.features()) max_m = std::max(max_m, f.cardinality);
    std::vector<double> score(max_m);

    for (std::size_t i = begin; i < end; ++i) {
        SplitMix64 rng(state.streams[i]);
        Modality* x = state.particles.data() + i * D;
        const std::span<const Modality> xs(x, D);

        double lg = 0;
        for (std::size_t t = 0; t < ps.num_tables(); ++t) lg += theta[map(ps.base_row(t, xs))];
        const int y = rng.uniform() < sigmoid(lg) ? 1 : 0;
        state.labels[i] = static_cast<std::uint8_t>(y);
        const double* w = y ? w1.data() : w0.data();

        for (std::size_t d = 0; d < D; ++d) {
            const Modality M = schema.cardinality(d);
            if (M == 1) continue;
            std::fill(score.begin(), score.begin() + M, 0.0);
            for (const Slot& s : slots[d]) {
                std::size_t base = s.offset;
                for (const auto& [f, stride] : s.others) base += x[f] * stride;
                for (Modality m = 0; m < M; ++m) score[m] += w[map(base + m * s.stride)];
            }
            const double top = *std::max_element(score.begin(), score.begin() + M);
            double acc = 0;
            for (Modality m = 0; m < M; ++m) score[m] = (acc += std::exp(score[m] - top));
            x[d] = draw_from_weights(std::span<const double>(score.data(), M), rng);
        }
        state.streams[i] = rng.state();
    }
}

}  // namespace

GibbsState init_state(const ProjectionSet& ps, const AggregatedData& agg, std::size_t n_prime,
                      std::uint64_t seed, InitStrategy strategy) {
    if (n_prime < 1) throw Error("n' must be >= 1");
    const auto& schema = ps.schema();
    const std::size_t D = schema.size();

    std::vector<std::vector<double>> cumulative(D);
    for (std::size_t d = 0; d < D; ++d) {
        std::vector<double> w(schema.cardinality(d), 1.0);
        if (strategy == InitStrategy::marginals) {
            w = feature_marginal(ps, agg, d);
            if (std::all_of(w.begin(), w.end(), [](double v) { return v <= 0; }))
                std::fill(w.begin(), w.end(), 1.0);
        }
        double acc = 0;
        for (double& v : w) v = (acc += std::max(v, 0.0));
        cumulative[d] = std::move(w);
    }

    GibbsState state;
    state.dims = D;
    state.seed = seed;
    state.particles.resize(n_prime * D);
    state.labels.assign(n_prime, 0);
    state.streams.resize(n_prime);
    for (std::size_t i = 0; i < n_prime; ++i) {
        SplitMix64 rng(stream_key(seed, i));
        for (std::size_t d = 0; d < D; ++d)
            state.particles[i * D + d] = draw_from_weights(cumulative[d], rng);
        state.streams[i] = rng.state();
    }
    return state;
}

void sweep(GibbsState& state, const ModelParams& p, int workers) {
    const auto& ps = p.ps();
    if (state.dims != ps.schema().size()) throw Error("Gibbs state does not match the projection");
    const auto slots = slots_by_feature(ps);
    std::vector<double> w1(p.size());
    for (std::size_t k = 0; k < w1.size(); ++k) w1[k] = p.mu[k] + p.theta[k];

    parallel_for(state.size(), workers, [&](std::size_t begin, std::size_t end) {
        if (ps.hashed())
            sweep_range<true>(state, ps, slots, p.theta, p.mu, w1, begin, end);
        else
            sweep_range<false>(state, ps, slots, p.theta, p.mu, w1, begin, end);
    });
    ++state.sweeps;
}

MomentEstimate estimate_moments(const GibbsState& state, const ModelParams& p) {
    const auto& ps = p.ps();
    MomentEstimate est;
    est.sample_size = static_cast<double>(state.size());
    est.d_hat.assign(ps.size(), 0.0);
    est.c_hat.assign(ps.size(), 0.0);
    std::vector<std::size_t> rows(ps.num_tables());
    for (std::size_t i = 0; i < state.size(); ++i) {
        ps.rows_of(state.x(i), rows);
        double lg = 0;
        for (std::size_t k : rows) lg += p.theta[k];
        const double prob = sigmoid(lg);
        for (std::size_t k : rows) {
            est.d_hat[k] += 1.0;
            est.c_hat[k] += prob;
        }
    }
    return est;
}

std::vector<double> label_sampled_c(const GibbsState& state, const ProjectionSet& ps) {
    std::vector<double> c(ps.size(), 0.0);
    std::vector<std::size_t> rows(ps.num_tables());
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (!state.labels[i]) continue;
        ps.rows_of(state.x(i), rows);
        for (std::size_t k : rows) c[k] += 1.0;
    }
    return c;
}

void save_state(const GibbsState& state, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "gibbs v1 n'=" << state.size() << " sweep=" << state.sweeps << " seed=" << state.seed
        << " dims=" << state.dims << '\n';
    out.write(reinterpret_cast<const char*>(state.particles.data()),
              static_cast<std::streamsize>(state.particles.size() * sizeof(Modality)));
    out.write(reinterpret_cast<const char*>(state.labels.data()),
              static_cast<std::streamsize>(state.labels.size()));
    out.write(reinterpret_cast<const char*>(state.streams.data()),
              static_cast<std::streamsize>(state.streams.size() * sizeof(std::uint64_t)));
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

GibbsState load_state(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || !line.starts_with("gibbs v1 ")) throw Error("not a gibbs v1 file");
    const auto head = detail::parse_fields(line);
    GibbsState state;
    const auto n = static_cast<std::size_t>(detail::field_int(head, "n'"));
    state.sweeps = detail::parse_uint(detail::field(head, "sweep"));
    state.seed = detail::parse_uint(detail::field(head, "seed"));
    state.dims = static_cast<std::size_t>(detail::field_int(head, "dims"));
    state.particles.resize(n * state.dims);
    state.labels.resize(n);
    state.streams.resize(n);
    in.read(reinterpret_cast<char*>(state.particles.data()),
            static_cast<std::streamsize>(state.particles.size() * sizeof(Modality)));
    in.read(reinterpret_cast<char*>(state.labels.data()), static_cast<std::streamsize>(n));
    in.read(reinterpret_cast<char*>(state.streams.data()),
            static_cast<std::streamsize>(n * sizeof(std::uint64_t)));
    if (!in) throw Error("Gibbs checkpoint truncated");
    return state;
}

}  // namespace aggmrf
