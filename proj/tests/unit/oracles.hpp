#pragma once
// Reference implementations used only by tests. They follow the model's
// definitions literally (dense phi vectors, naive enumeration) and share no
// indexing or normalization code with the library.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "aggmrf/model.hpp"

namespace oracle {

using aggmrf::Dataset;
using aggmrf::Modality;
using aggmrf::Schema;

/// The feature subsets of single / pairwise families, in the documented order.
inline std::vector<std::vector<std::size_t>> table_subsets(std::size_t D, bool singles, bool pairs) {
    std::vector<std::vector<std::size_t>> out;
    if (singles)
        for (std::size_t d = 0; d < D; ++d) out.push_back({d});
    if (pairs)
        for (std::size_t i = 0; i < D; ++i)
            for (std::size_t j = i + 1; j < D; ++j) out.push_back({i, j});
    return out;
}

/// All modality tuples of a subset, first feature varying slowest.
inline std::vector<std::vector<Modality>> tuples(const Schema& s, const std::vector<std::size_t>& subset) {
    std::vector<std::vector<Modality>> out{{}};
    for (auto d : subset) {
        std::vector<std::vector<Modality>> next;
        for (const auto& t : out)
            for (Modality m = 0; m < s.cardinality(d); ++m) {
                auto u = t;
                u.push_back(m);
                next.push_back(u);
            }
        out = std::move(next);
    }
    return out;
}

/// Dense phi(x) by literal membership tests over every row of every table.
inline std::vector<double> dense_phi(const Schema& s, const std::vector<std::vector<std::size_t>>& subsets,
                                     std::span<const Modality> x) {
    std::vector<double> phi;
    for (const auto& sub : subsets)
        for (const auto& t : tuples(s, sub)) {
            bool match = true;
            for (std::size_t j = 0; j < sub.size(); ++j) match = match && x[sub[j]] == t[j];
            phi.push_back(match ? 1.0 : 0.0);
        }
    return phi;
}

/// Pushes a dense base phi through a bucket map.
inline std::vector<double> hashed_phi(const std::vector<double>& base, std::span<const std::uint32_t> bucket,
                                      std::size_t buckets) {
    std::vector<double> out(buckets, 0.0);
    for (std::size_t k = 0; k < base.size(); ++k) out[bucket[k]] += base[k];
    return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline std::vector<std::vector<Modality>> all_states(const Schema& s) {
    std::vector<std::size_t> every(s.size());
    for (std::size_t d = 0; d < s.size(); ++d) every[d] = d;
    return tuples(s, every);
}

/// Brute-force joint over X × {0,1} for an unhashed family.
struct Joint {
    std::vector<std::vector<Modality>> xs;
    std::vector<std::vector<double>> phis;
    std::vector<double> p0, p1;
    double log_z = 0;
};

inline Joint joint(const Schema& s, const std::vector<std::vector<std::size_t>>& subsets,
                   const std::vector<double>& mu, const std::vector<double>& theta) {
    Joint j;
    j.xs = all_states(s);
    std::vector<double> e0, e1;
    double top = -INFINITY;
    for (const auto& x : j.xs) {
        j.phis.push_back(dense_phi(s, subsets, x));
        e0.push_back(dot(j.phis.back(), mu));
        e1.push_back(dot(j.phis.back(), mu) + dot(j.phis.back(), theta));
        top = std::max({top, e0.back(), e1.back()});
    }
    double z = 0;
    for (std::size_t i = 0; i < e0.size(); ++i) z += std::exp(e0[i] - top) + std::exp(e1[i] - top);
    j.log_z = top + std::log(z);
    for (std::size_t i = 0; i < e0.size(); ++i) {
        j.p0.push_back(std::exp(e0[i] - j.log_z));
        j.p1.push_back(std::exp(e1[i] - j.log_z));
    }
    return j;
}

/// Brute-force d and c: sum of dense phi vectors.
inline std::pair<std::vector<double>, std::vector<double>> aggregates(
    const Dataset& ds, const std::vector<std::vector<std::size_t>>& subsets) {
    std::vector<double> d, c;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto phi = dense_phi(ds.schema(), subsets, ds.x(i));
        if (d.empty()) {
            d.assign(phi.size(), 0.0);
            c.assign(phi.size(), 0.0);
        }
        for (std::size_t k = 0; k < phi.size(); ++k) {
            d[k] += phi[k];
            c[k] += phi[k] * ds.y(i);
        }
    }
    return {d, c};
}

inline Dataset random_dataset(const Schema& s, std::size_t n, std::mt19937_64& rng) {
    Dataset ds{s};
    std::vector<Modality> x(s.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 0; d < s.size(); ++d)
            x[d] = static_cast<Modality>(std::uniform_int_distribution<Modality>(0, s.cardinality(d) - 1)(rng));
        ds.add(x, static_cast<int>(rng() & 1));
    }
    return ds;
}

inline std::vector<double> random_vector(std::size_t K, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, scale);
    std::vector<double> v(K);
    for (auto& x : v) x = g(rng);
    return v;
}

/// Table 1 of the toy example, in first-seen index order:
/// F1 "1"->0 "2"->1, F2 B->0 A->1, F3 a->0 b->1.
inline Dataset toy_table() {
    Dataset ds{Schema({{"F1", 2}, {"F2", 2}, {"F3", 2}})};
    const Modality rows[5][3] = {{0, 0, 0}, {1, 1, 1}, {0, 0, 1}, {1, 0, 0}, {0, 1, 1}};
    const int labels[5] = {1, 1, 0, 1, 0};
    for (int i = 0; i < 5; ++i) ds.add(rows[i], labels[i]);
    return ds;
}

}  // namespace oracle
