#include "aggmrf/encodings.hpp"

#include <cmath>
#include <fstream>

#include "text_util.hpp"

namespace aggmrf {

TargetEncoding fit_target_encoding(const Dataset& heldout, std::size_t feature, int count_bins,
                                   int ctr_bins, double prior_strength) {
    if (heldout.empty()) throw Error("target encoding: empty heldout set");
    if (count_bins < 1 || ctr_bins < 1) throw Error("target encoding: bin counts must be >= 1");
    if (feature >= heldout.dims()) throw Error("target encoding: feature index out of range");
    if (prior_strength < 0) throw Error("target encoding: prior strength must be >= 0");

    TargetEncoding enc;
    enc.feature = feature;
    enc.name = heldout.schema()[feature].name;
    enc.count_bins = count_bins;
    enc.ctr_bins = ctr_bins;
    const Modality M = heldout.schema().cardinality(feature);
    enc.occurrences.assign(M, 0.0);
    enc.positives.assign(M, 0.0);
    for (std::size_t i = 0; i < heldout.size(); ++i) {
        const Modality v = heldout.x(i)[feature];
        enc.occurrences[v] += 1;
        enc.positives[v] += heldout.y(i);
    }

    const double ybar = heldout.positive_rate();
    enc.rate.assign(M, ybar);
    std::vector<double> log_counts, rates;
    for (Modality m = 0; m < M; ++m) {
        if (enc.occurrences[m] == 0) continue;
        enc.rate[m] = (enc.positives[m] + prior_strength * ybar) / (enc.occurrences[m] + prior_strength);
        log_counts.push_back(std::log1p(enc.occurrences[m]));
        rates.push_back(enc.rate[m]);
    }
    const auto count_plan = fit_discretization(log_counts, count_bins);
    const auto rate_plan = fit_discretization(rates, ctr_bins);

    enc.map.assign(M, enc.reserved());
    for (Modality m = 0; m < M; ++m) {
        if (enc.occurrences[m] == 0) continue;
        const Modality cb = count_plan.apply(std::log1p(enc.occurrences[m]));
        const Modality rb = rate_plan.apply(enc.rate[m]);
        enc.map[m] = static_cast<Modality>(cb * ctr_bins + rb);
    }
    return enc;
}

Dataset apply_encodings(const Dataset& ds, std::span<const TargetEncoding> encodings) {
    std::vector<const TargetEncoding*> by_feature(ds.dims(), nullptr);
    for (const auto& e : encodings) {
        if (e.feature >= ds.dims()) throw Error("encoding references feature " + std::to_string(e.feature) +
                                                " beyond the schema");
        if (by_feature[e.feature]) throw Error("feature '" + e.name + "' encoded twice");
        by_feature[e.feature] = &e;
    }
    std::vector<Feature> features(ds.schema().features().begin(), ds.schema().features().end());
    for (std::size_t d = 0; d < features.size(); ++d)
        if (by_feature[d]) features[d].cardinality = by_feature[d]->cardinality();

    Dataset out{Schema(std::move(features))};
    out.reserve(ds.size());
    std::vector<Modality> x(ds.dims());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto src = ds.x(i);
        for (std::size_t d = 0; d < x.size(); ++d) x[d] = by_feature[d] ? (*by_feature[d])(src[d]) : src[d];
        out.add(x, ds.y(i));
    }
    return out;
}

void save_encodings(std::span<const TargetEncoding> encodings, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    for (const auto& e : encodings) {
        out << "# feature=" << e.name << " count_bins=" << e.count_bins << " ctr_bins=" << e.ctr_bins
            << " raw_cardinality=" << e.map.size() << '\n';
        for (std::size_t m = 0; m < e.map.size(); ++m)
            out << "feature=" << e.name << " raw=" << m << " encoded=" << e.map[m]
                << " count=" << e.occurrences[m] << " rate=" << detail::format_real(e.rate[m]) << " positives=" << e.positives[m] << '\n';
    }
    if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::vector<TargetEncoding> load_encodings(const std::filesystem::path& path, const Schema& raw) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    std::vector<TargetEncoding> out;
    std::string line;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        if (line.starts_with("#")) {
            const auto f = detail::parse_fields(std::string_view(line).substr(1));
            TargetEncoding e;
            e.name = detail::field(f, "feature");
            const auto idx = raw.index_of(e.name);
            if (!idx) throw Error("encoding for unknown feature '" + e.name + "'");
            e.feature = *idx;
            e.count_bins = static_cast<int>(detail::field_int(f, "count_bins"));
            e.ctr_bins = static_cast<int>(detail::field_int(f, "ctr_bins"));
            if (e.count_bins < 1 || e.ctr_bins < 1) throw Error("bad bin counts in '" + path.string() + "'");
            const auto M = static_cast<std::size_t>(detail::field_int(f, "raw_cardinality"));
            e.map.assign(M, e.reserved());
            e.occurrences.assign(M, 0.0);
            e.positives.assign(M, 0.0);
            e.rate.assign(M, 0.0);
            out.push_back(std::move(e));
            continue;
        }
        if (out.empty()) throw Error("encoding row before any feature header");
        auto& e = out.back();
        const auto f = detail::parse_fields(line);
        if (detail::field(f, "feature") != e.name) throw Error("encoding row for '" + detail::field(f, "feature") +
                                                               "' inside block of '" + e.name + "'");
        const auto m = static_cast<std::size_t>(detail::field_int(f, "raw"));
        const auto enc = static_cast<Modality>(detail::field_int(f, "encoded"));
        if (m >= e.map.size() || enc >= e.cardinality()) throw Error("encoding index out of range");
        e.map[m] = enc;
        e.occurrences[m] = detail::parse_double(detail::field(f, "count"));
        e.rate[m] = detail::parse_double(detail::field(f, "rate"));
        e.positives[m] = f.contains("positives") ? detail::parse_double(detail::field(f, "positives")) : 0.0;
    }
    return out;
}

}  // namespace aggmrf
