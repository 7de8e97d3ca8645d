#include "aggmrf/projection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "aggmrf/rng.hpp"
#include "text_util.hpp"

namespace aggmrf {

namespace {

ContingencyTable make_table(const Schema& schema, std::vector<std::size_t> features,
                            std::size_t offset) {
    ContingencyTable t;
    t.features = std::move(features);
    t.strides.assign(t.features.size(), 1);
    std::size_t rows = 1;
    for (std::size_t j = t.features.size(); j-- > 0;) {
        t.strides[j] = rows;
        rows *= schema.cardinality(t.features[j]);
    }
    t.offset = offset;
    t.rows = rows;
    return t;
}

}  // namespace

void ProjectionSet::index_tables() {
    tables_of_.assign(schema_.size(), {});
    base_size_ = 0;
    for (std::size_t t = 0; t < tables_.size(); ++t) {
        for (std::size_t f : tables_[t].features) tables_of_[f].push_back(t);
        base_size_ = tables_[t].offset + tables_[t].rows;
    }
}

ProjectionSet ProjectionSet::build_single(const Schema& schema) {
    ProjectionSet ps;
    ps.kind_ = ps.base_kind_ = ProjectionKind::single;
    ps.schema_ = schema;
    std::size_t offset = 0;
    for (std::size_t d = 0; d < schema.size(); ++d) {
        ps.tables_.push_back(make_table(schema, {d}, offset));
        offset += ps.tables_.back().rows;
    }
    ps.index_tables();
    return ps;
}

ProjectionSet ProjectionSet::build_pairwise(const Schema& schema, bool include_singles) {
    const std::size_t D = schema.size();
    if (D < 2 && !include_singles) throw Error("pairwise projection needs at least 2 features");
    ProjectionSet ps;
    ps.kind_ = ps.base_kind_ = ProjectionKind::pairwise;
    ps.include_singles_ = include_singles;
    ps.schema_ = schema;
    std::size_t offset = 0;
    auto push = [&](std::vector<std::size_t> features) {
        ps.tables_.push_back(make_table(schema, std::move(features), offset));
        offset += ps.tables_.back().rows;
    };
    if (include_singles)
        for (std::size_t d = 0; d < D; ++d) push({d});
    for (std::size_t i = 0; i < D; ++i)
        for (std::size_t j = i + 1; j < D; ++j) push({i, j});
    ps.index_tables();
    return ps;
}

ProjectionSet ProjectionSet::build_hashed(const ProjectionSet& base, std::size_t buckets,
                                          std::uint64_t seed) {
    if (buckets < 1) throw Error("hash bucket count must be >= 1");
    if (base.hashed()) throw Error("cannot hash an already hashed projection");
    if (buckets > UINT32_MAX) throw Error("too many hash buckets");
    ProjectionSet ps = base;
    ps.kind_ = ProjectionKind::hashed;
    ps.buckets_ = buckets;
    ps.hash_seed_ = seed;
    ps.bucket_of_.resize(base.base_size_);
    for (std::size_t k = 0; k < base.base_size_; ++k)
        ps.bucket_of_[k] = static_cast<std::uint32_t>(stream_key(seed, k) % buckets);
    return ps;
}

SparseEncoding ProjectionSet::encode(std::span<const Modality> x) const {
    schema_.validate(x);
    SparseEncoding enc;
    enc.reserve(tables_.size());
    for (std::size_t t = 0; t < tables_.size(); ++t) enc.push_back({map_row(base_row(t, x)), 1});
    if (hashed()) {
        std::sort(enc.begin(), enc.end(),
                  [](const ActiveRow& a, const ActiveRow& b) { return a.row < b.row; });
        SparseEncoding merged;
        for (const auto& a : enc) {
            if (!merged.empty() && merged.back().row == a.row)
                merged.back().multiplicity += a.multiplicity;
            else
                merged.push_back(a);
        }
        return merged;
    }
    return enc;  // table offsets are increasing, so rows are already sorted
}

std::uint64_t ProjectionSet::fingerprint() const noexcept {
    std::uint64_t h = mix64(static_cast<std::uint64_t>(kind_) * 31 + static_cast<std::uint64_t>(base_kind_));
    auto feed = [&h](std::uint64_t v) { h = mix64(h ^ v); };
    for (const auto& f : schema_.features()) feed(f.cardinality);
    for (const auto& t : tables_) {
        feed(t.features.size());
        for (auto f : t.features) feed(f);
    }
    feed(buckets_);
    feed(hash_seed_);
    return h;
}

std::pair<std::size_t, std::vector<Modality>> ProjectionSet::describe_row(std::size_t row) const {
    const auto it = std::upper_bound(tables_.begin(), tables_.end(), row,
                                     [](std::size_t r, const ContingencyTable& t) { return r < t.offset; });
    const std::size_t t = static_cast<std::size_t>(it - tables_.begin()) - 1;
    const auto& tab = tables_[t];
    std::size_t rem = row - tab.offset;
    std::vector<Modality> mods(tab.features.size());
    for (std::size_t j = 0; j < tab.features.size(); ++j) {
        mods[j] = static_cast<Modality>(rem / tab.strides[j]);
        rem %= tab.strides[j];
    }
    return {t, mods};
}

AggregatedData aggregate(const ProjectionSet& ps, const Dataset& ds) {
    if (!(ds.schema() == ps.schema())) throw Error("dataset schema does not match projection schema");
    AggregatedData agg;
    agg.d.assign(ps.size(), 0.0);
    agg.c.assign(ps.size(), 0.0);
    agg.n = static_cast<double>(ds.size());
    std::vector<std::size_t> rows(ps.num_tables());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        ps.rows_of(ds.x(i), rows);
        const int y = ds.y(i);
        for (std::size_t r : rows) {
            agg.d[r] += 1.0;
            if (y) agg.c[r] += 1.0;
        }
    }
    return agg;
}

AggregatedData push_through_buckets(const ProjectionSet& hashed, const AggregatedData& base) {
    if (!hashed.hashed()) throw Error("projection is not hashed");
    if (base.d.size() != hashed.base_size()) throw Error("base aggregates have the wrong size");
    AggregatedData out;
    out.n = base.n;
    out.d.assign(hashed.size(), 0.0);
    out.c.assign(hashed.size(), 0.0);
    for (std::size_t k = 0; k < base.d.size(); ++k) {
        out.d[hashed.map_row(k)] += base.d[k];
        out.c[hashed.map_row(k)] += base.c[k];
    }
    return out;
}

void check_aggregates(const ProjectionSet& ps, const AggregatedData& agg) {
    if (agg.d.size() != ps.size() || agg.c.size() != ps.size())
        throw Error("aggregated data has " + std::to_string(agg.d.size()) + " rows, projection has " +
                    std::to_string(ps.size()));
    for (std::size_t k = 0; k < agg.d.size(); ++k) {
        if (!(agg.c[k] >= 0.0) || !(agg.d[k] >= agg.c[k]))
            throw Error("row " + std::to_string(k) + " violates 0 <= c <= d");
    }
    if (ps.hashed()) return;
    for (const auto& t : ps.tables()) {
        double sum = 0;
        for (std::size_t r = 0; r < t.rows; ++r) sum += agg.d[t.offset + r];
        if (std::abs(sum - agg.n) > 1e-6 * std::max(1.0, agg.n))
            throw Error("table counts sum to " + std::to_string(sum) + ", expected n=" +
                        std::to_string(agg.n));
    }
}

std::vector<double> feature_marginal(const ProjectionSet& ps, const AggregatedData& agg,
                                     std::size_t d) {
    if (ps.hashed()) throw Error("feature marginals are not recoverable from hashed tables");
    const auto holders = ps.tables_of(d);
    if (holders.empty())
        throw Error("feature '" + ps.schema()[d].name + "' appears in no table");
    const auto& t = ps.tables()[holders.front()];
    const auto pos = static_cast<std::size_t>(
        std::find(t.features.begin(), t.features.end(), d) - t.features.begin());
    std::vector<double> marginal(ps.schema().cardinality(d), 0.0);
    for (std::size_t r = 0; r < t.rows; ++r) {
        const auto m = (r / t.strides[pos]) % ps.schema().cardinality(d);
        marginal[m] += agg.d[t.offset + r];
    }
    return marginal;
}

// ---------------------------------------------------------------------------
// Tables file

namespace {

std::string table_name(const Schema& schema, const ContingencyTable& t) {
    std::string name;
    for (std::size_t j = 0; j < t.features.size(); ++j) {
        if (j) name += ',';
        name += schema[t.features[j]].name;
    }
    return name;
}

void write_row_values(std::ofstream& out, double d, double c) {
    out << ' ' << detail::format_real(d) << ' ' << detail::format_real(c) << '\n';
}

struct ParsedRow {
    std::vector<std::uint64_t> index;
    double d = 0, c = 0;
};

ParsedRow parse_row(const std::string& line) {
    const auto words = detail::split_words(line);
    if (words.size() != 3) throw Error("malformed table row '" + line + "'");
    ParsedRow row;
    std::size_t start = 0;
    const std::string& idx = words[0];
    while (true) {
        const auto comma = idx.find(',', start);
        row.index.push_back(detail::parse_uint(std::string_view(idx).substr(
            start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    row.d = detail::parse_double(words[1]);
    row.c = detail::parse_double(words[2]);
    if (!(row.c >= 0.0) || !(row.d >= row.c)) throw Error("table row with c > d: '" + line + "'");
    return row;
}

}  // namespace

void write_tables(const AggregatedData& agg, const ProjectionSet& ps,
                  const std::filesystem::path& path) {
    check_aggregates(ps, agg);
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    const auto& schema = ps.schema();
    if (ps.hashed()) {
        out << "aggdata v1 n=" << detail::format_real(agg.n) << " tables=1 hashed buckets="
            << ps.buckets() << " seed=" << ps.hash_seed()
            << " base=" << (ps.base_kind() == ProjectionKind::single ? "single" : "pairwise")
            << " singles=" << (ps.include_singles() ? 1 : 0) << '\n';
        out << "schema ";
        for (std::size_t d = 0; d < schema.size(); ++d)
            out << (d ? "," : "") << schema[d].name << ':' << schema[d].cardinality;
        out << '\n';
        out << "table #hashed rows=" << ps.size() << '\n';
        for (std::size_t k = 0; k < ps.size(); ++k) {
            out << k;
            write_row_values(out, agg.d[k], agg.c[k]);
        }
    } else {
        out << "aggdata v1 n=" << detail::format_real(agg.n) << " tables=" << ps.num_tables() << '\n';
        for (const auto& t : ps.tables()) {
            out << "table " << table_name(schema, t) << " rows=" << t.rows << '\n';
            for (std::size_t r = 0; r < t.rows; ++r) {
                std::size_t rem = r;
                for (std::size_t j = 0; j < t.features.size(); ++j) {
                    out << (j ? "," : "") << rem / t.strides[j];
                    rem %= t.strides[j];
                }
                write_row_values(out, agg.d[t.offset + r], agg.c[t.offset + r]);
            }
        }
    }
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::pair<AggregatedData, ProjectionSet> read_tables(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open tables file '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || !line.starts_with("aggdata v1 "))
        throw Error("not an aggdata v1 file: '" + path.string() + "'");
    const auto head = detail::parse_fields(line);
    AggregatedData agg;
    agg.n = detail::parse_double(detail::field(head, "n"));
    const auto n_tables = detail::field_int(head, "tables");
    const bool hashed = line.find(" hashed") != std::string::npos;

    if (hashed) {
        if (!std::getline(in, line) || !line.starts_with("schema "))
            throw Error("hashed tables file lacks a schema line");
        std::vector<Feature> features;
        for (const auto& item : detail::split_cells(line.substr(7), ',')) {
            const auto colon = item.rfind(':');
            if (colon == std::string::npos) throw Error("malformed schema entry '" + item + "'");
            features.push_back({item.substr(0, colon),
                                static_cast<Modality>(detail::parse_uint(item.substr(colon + 1)))});
        }
        const Schema schema(std::move(features));
        const bool single = detail::field(head, "base") == "single";
        const auto base = single ? ProjectionSet::build_single(schema)
                                 : ProjectionSet::build_pairwise(schema, detail::field_int(head, "singles") != 0);
        auto ps = ProjectionSet::build_hashed(base, static_cast<std::size_t>(detail::field_int(head, "buckets")),
                                              static_cast<std::uint64_t>(detail::parse_uint(detail::field(head, "seed"))));
        if (n_tables != 1) throw Error("table count mismatch");
        if (!std::getline(in, line) || !line.starts_with("table "))
            throw Error("table count mismatch");
        const auto rows = detail::field_int(detail::parse_fields(line), "rows");
        if (static_cast<std::size_t>(rows) != ps.size()) throw Error("row count does not match K");
        agg.d.assign(ps.size(), 0.0);
        agg.c.assign(ps.size(), 0.0);
        for (std::size_t k = 0; k < ps.size(); ++k) {
            if (!std::getline(in, line)) throw Error("tables file truncated");
            const auto row = parse_row(line);
            if (row.index.size() != 1 || row.index[0] != k) throw Error("hashed rows out of order");
            agg.d[k] = row.d;
            agg.c[k] = row.c;
        }
        check_aggregates(ps, agg);
        return {std::move(agg), std::move(ps)};
    }

    struct RawTable {
        std::vector<std::string> names;
        std::vector<ParsedRow> rows;
    };
    std::vector<RawTable> raw;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        if (line.starts_with("table ")) {
            const auto words = detail::split_words(line);
            if (words.size() != 3) throw Error("malformed table line '" + line + "'");
            RawTable t;
            t.names = detail::split_cells(words[1], ',');
            const auto rows = detail::field_int(detail::parse_fields(line), "rows");
            for (std::int64_t r = 0; r < rows; ++r) {
                if (!std::getline(in, line)) throw Error("tables file truncated");
                t.rows.push_back(parse_row(line));
                if (t.rows.back().index.size() != t.names.size())
                    throw Error("row arity does not match its table");
            }
            raw.push_back(std::move(t));
        } else {
            throw Error("unexpected line '" + line + "'");
        }
    }
    if (static_cast<std::int64_t>(raw.size()) != n_tables || raw.empty())
        throw Error("table count mismatch");

    // Features in order of first appearance; cardinality from the largest
    // index seen (zero-count rows are always written).
    std::vector<Feature> features;
    auto feature_index = [&](const std::string& name) -> std::size_t {
        for (std::size_t d = 0; d < features.size(); ++d)
            if (features[d].name == name) return d;
        features.push_back({name, 0});
        return features.size() - 1;
    };
    for (const auto& t : raw)
        for (std::size_t j = 0; j < t.names.size(); ++j) {
            const auto d = feature_index(t.names[j]);
            for (const auto& r : t.rows)
                features[d].cardinality =
                    std::max<Modality>(features[d].cardinality, static_cast<Modality>(r.index[j] + 1));
        }
    const Schema schema(std::move(features));

    const bool all_single = std::all_of(raw.begin(), raw.end(), [](const RawTable& t) { return t.names.size() == 1; });
    const bool singles_first = raw.front().names.size() == 1 && !all_single;
    ProjectionSet ps = all_single ? ProjectionSet::build_single(schema)
                                  : ProjectionSet::build_pairwise(schema, singles_first);
    if (ps.num_tables() != raw.size()) throw Error("table count mismatch");

    agg.d.assign(ps.size(), 0.0);
    agg.c.assign(ps.size(), 0.0);
    for (std::size_t t = 0; t < raw.size(); ++t) {
        const auto& tab = ps.tables()[t];
        if (raw[t].names.size() != tab.features.size()) throw Error("unsupported table layout");
        for (std::size_t j = 0; j < tab.features.size(); ++j)
            if (schema[tab.features[j]].name != raw[t].names[j]) throw Error("unsupported table layout");
        if (raw[t].rows.size() != tab.rows) throw Error("row count of a table does not match K");
        for (std::size_t r = 0; r < tab.rows; ++r) {
            std::size_t expect = 0;
            for (std::size_t j = 0; j < tab.features.size(); ++j)
                expect += raw[t].rows[r].index[j] * tab.strides[j];
            if (expect != r) throw Error("table rows out of order");
            agg.d[tab.offset + r] = raw[t].rows[r].d;
            agg.c[tab.offset + r] = raw[t].rows[r].c;
        }
    }
    check_aggregates(ps, agg);
    return {std::move(agg), std::move(ps)};
}

}  // namespace aggmrf
