#include "aggmrf/schema.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "aggmrf/rng.hpp"
#include "text_util.hpp"

namespace aggmrf {

Schema::Schema(std::vector<Feature> features) : features_(std::move(features)) {
    if (features_.empty()) throw Error("schema needs at least one feature");
    std::set<std::string_view> names;
    for (const auto& f : features_) {
        if (f.cardinality < 1) throw Error("feature '" + f.name + "' has cardinality 0");
        if (!names.insert(f.name).second) throw Error("duplicate feature name '" + f.name + "'");
    }
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const {
    for (std::size_t d = 0; d < features_.size(); ++d)
        if (features_[d].name == name) return d;
    return std::nullopt;
}

std::uint64_t Schema::state_space_size() const noexcept {
    std::uint64_t s = 1;
    for (const auto& f : features_) {
        if (s > UINT64_MAX / f.cardinality) return UINT64_MAX;
        s *= f.cardinality;
    }
    return s;
}

void Schema::validate(std::span<const Modality> x) const {
    if (x.size() != features_.size())
        throw Error("record has " + std::to_string(x.size()) + " features, schema has " +
                    std::to_string(features_.size()));
    for (std::size_t d = 0; d < x.size(); ++d)
        if (x[d] >= features_[d].cardinality)
            throw Error("modality " + std::to_string(x[d]) + " out of range for feature '" +
                        features_[d].name + "'");
}

void Dataset::add(std::span<const Modality> x, int y) {
    schema_.validate(x);
    if (y != 0 && y != 1) throw Error("label must be 0 or 1");
    cells_.insert(cells_.end(), x.begin(), x.end());
    labels_.push_back(static_cast<std::uint8_t>(y));
}

void Dataset::reserve(std::size_t n) {
    cells_.reserve(n * dims());
    labels_.reserve(n);
}

double Dataset::positive_rate() const {
    if (labels_.empty()) return 0.0;
    std::size_t pos = 0;
    for (auto l : labels_) pos += l;
    return static_cast<double>(pos) / static_cast<double>(labels_.size());
}

Modality DiscretizationPlan::apply(double v) const {
    return static_cast<Modality>(std::lower_bound(cuts.begin(), cuts.end(), v) - cuts.begin());
}

DiscretizationPlan fit_discretization(std::span<const double> values, int bins) {
    if (bins < 1) throw Error("bins must be >= 1");
    std::vector<double> sorted;
    sorted.reserve(values.size());
    for (double v : values)
        if (std::isfinite(v)) sorted.push_back(v);
    if (sorted.empty()) throw Error("discretization needs at least one finite value");
    std::sort(sorted.begin(), sorted.end());

    DiscretizationPlan plan;
    plan.bins = bins;
    const double last = static_cast<double>(sorted.size() - 1);
    for (int k = 1; k < bins; ++k) {
        const double h = last * k / bins;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double q = sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
        if (plan.cuts.empty() || q > plan.cuts.back()) plan.cuts.push_back(q);
    }
    // A cut at or above the maximum separates nothing.
    while (!plan.cuts.empty() && plan.cuts.back() >= sorted.back()) plan.cuts.pop_back();
    return plan;
}

CsvTable read_csv_table(const std::filesystem::path& path, char delimiter) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    CsvTable table;
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        auto cells = detail::split_cells(line, delimiter);
        if (!have_header) {
            table.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != table.header.size())
            throw Error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(table.header.size()) + " cells, got " +
                        std::to_string(cells.size()));
        table.rows.push_back(std::move(cells));
    }
    if (!have_header) throw Error("empty dataset: '" + path.string() + "' has no header");
    return table;
}

int parse_label(std::string_view raw) {
    const auto s = detail::trim(raw);
    if (s == "0") return 0;
    if (s == "1") return 1;
    throw Error("non-binary label value '" + std::string(s) + "'");
}

namespace {

std::size_t label_index(const CsvTable& table, const std::string& label) {
    const auto it = std::find(table.header.begin(), table.header.end(), label);
    if (it == table.header.end()) throw Error("missing label column '" + label + "'");
    return static_cast<std::size_t>(it - table.header.begin());
}

std::optional<double> parse_real(std::string_view s) {
    s = detail::trim(s);
    if (s.empty()) return std::nullopt;
    double v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

CsvCodec CsvCodec::fit(const CsvTable& table, const CsvOptions& options) {
    if (table.rows.empty()) throw Error("empty dataset");
    const std::size_t label_col = label_index(table, options.label_column);

    CsvCodec codec;
    codec.label_ = options.label_column;
    codec.delimiter_ = options.delimiter;
    codec.reserve_unseen_ = options.reserve_unseen;

    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c == label_col) continue;
        Column col;
        col.name = table.header[c];
        if (options.continuous_columns.count(col.name)) {
            col.kind = Kind::continuous;
            std::vector<double> values;
            values.reserve(table.rows.size());
            for (const auto& row : table.rows)
                if (auto v = parse_real(row[c])) values.push_back(*v);
            if (values.empty()) throw Error("continuous column '" + col.name + "' has no numbers");
            col.plan = fit_discretization(values, options.bins);
        } else {
            for (const auto& row : table.rows) {
                const std::string& raw = row[c];
                if (col.lookup.emplace(raw, static_cast<Modality>(col.vocabulary.size())).second)
                    col.vocabulary.push_back(raw);
            }
        }
        codec.columns_.push_back(std::move(col));
    }
    for (const auto& name : options.continuous_columns)
        if (std::none_of(codec.columns_.begin(), codec.columns_.end(),
                         [&](const Column& c) { return c.name == name; }))
            throw Error("unknown continuous column '" + name + "'");
    if (codec.columns_.empty()) throw Error("no feature columns besides the label");
    return codec;
}

Modality CsvCodec::seen_count(const Column& c) const {
    return c.kind == Kind::categorical ? static_cast<Modality>(c.vocabulary.size())
                                       : c.plan.num_bins();
}

Schema CsvCodec::schema() const {
    std::vector<Feature> features;
    for (const auto& c : columns_)
        features.push_back({c.name, seen_count(c) + (reserve_unseen_ ? 1u : 0u)});
    return Schema(std::move(features));
}

Modality CsvCodec::encode_cell(std::size_t column, std::string_view raw) const {
    const Column& c = columns_[column];
    const Modality reserved = seen_count(c);
    if (c.kind == Kind::continuous) {
        if (auto v = parse_real(raw)) return c.plan.apply(*v);
    } else {
        auto it = c.lookup.find(std::string(raw));
        if (it != c.lookup.end()) return it->second;
    }
    if (!reserve_unseen_)
        throw Error("value '" + std::string(raw) + "' unseen for column '" + c.name + "'");
    return reserved;
}

Dataset CsvCodec::encode(const CsvTable& table) const {
    if (table.rows.empty()) throw Error("empty dataset");
    const std::size_t label_col = label_index(table, label_);
    std::vector<std::size_t> source(columns_.size());
    for (std::size_t k = 0; k < columns_.size(); ++k) {
        const auto it = std::find(table.header.begin(), table.header.end(), columns_[k].name);
        if (it == table.header.end()) throw Error("missing column '" + columns_[k].name + "'");
        source[k] = static_cast<std::size_t>(it - table.header.begin());
    }
    Dataset ds(schema());
    ds.reserve(table.rows.size());
    std::vector<Modality> x(columns_.size());
    for (const auto& row : table.rows) {
        for (std::size_t k = 0; k < columns_.size(); ++k) x[k] = encode_cell(k, row[source[k]]);
        ds.add(x, parse_label(row[label_col]));
    }
    return ds;
}

std::vector<std::string> CsvCodec::decode(std::span<const Modality> x) const {
    std::vector<std::string> out;
    out.reserve(x.size());
    for (std::size_t k = 0; k < columns_.size(); ++k) {
        const Column& c = columns_[k];
        const Modality m = x[k];
        if (m >= seen_count(c)) {
            out.emplace_back("<unseen>");
        } else if (c.kind == Kind::categorical) {
            out.push_back(c.vocabulary[m]);
        } else {
            // Each cut point lies in its own bin; the top bin sits above the last cut.
            const double v = m < c.plan.cuts.size()
                                 ? c.plan.cuts[m]
                                 : (c.plan.cuts.empty() ? 0.0 : c.plan.cuts.back() + 1.0);
            out.push_back(detail::format_real(v));
        }
    }
    return out;
}

void CsvCodec::rebuild_lookup() {
    for (auto& c : columns_) {
        c.lookup.clear();
        for (std::size_t i = 0; i < c.vocabulary.size(); ++i)
            c.lookup.emplace(c.vocabulary[i], static_cast<Modality>(i));
    }
}

void CsvCodec::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << "csvcodec v1 delimiter=" << static_cast<int>(delimiter_)
        << " reserve_unseen=" << (reserve_unseen_ ? 1 : 0) << " columns=" << columns_.size()
        << " label=" << label_ << '\n';
    for (const auto& c : columns_) {
        if (c.kind == Kind::categorical) {
            out << "column categorical values=" << c.vocabulary.size() << " name=" << c.name << '\n';
            for (const auto& v : c.vocabulary) out << v << '\n';
        } else {
            out << "column continuous bins=" << c.plan.bins << " values=" << c.plan.cuts.size()
                << " name=" << c.name << '\n';
            for (double v : c.plan.cuts) out << detail::format_hex(v) << '\n';
        }
    }
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

CsvCodec CsvCodec::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open codec file '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line) || !line.starts_with("csvcodec v1 "))
        throw Error("not a csvcodec v1 file: '" + path.string() + "'");
    const auto head = detail::parse_fields(line);
    CsvCodec codec;
    codec.delimiter_ = static_cast<char>(detail::field_int(head, "delimiter"));
    codec.reserve_unseen_ = detail::field_int(head, "reserve_unseen") != 0;
    codec.label_ = detail::tail_after(line, "label=");
    const auto ncols = detail::field_int(head, "columns");
    for (std::int64_t k = 0; k < ncols; ++k) {
        if (!std::getline(in, line) || !line.starts_with("column "))
            throw Error("codec file truncated");
        const auto f = detail::parse_fields(line);
        Column c;
        c.name = detail::tail_after(line, "name=");
        const auto count = detail::field_int(f, "values");
        const bool categorical = line.starts_with("column categorical");
        c.kind = categorical ? Kind::categorical : Kind::continuous;
        if (!categorical) c.plan.bins = static_cast<int>(detail::field_int(f, "bins"));
        for (std::int64_t i = 0; i < count; ++i) {
            if (!std::getline(in, line)) throw Error("codec file truncated");
            if (categorical) {
                c.vocabulary.push_back(line);
            } else {
                c.plan.cuts.push_back(detail::parse_double(line));
            }
        }
        codec.columns_.push_back(std::move(c));
    }
    codec.rebuild_lookup();
    return codec;
}

LoadedCsv load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    const auto table = read_csv_table(path, options.delimiter);
    auto codec = CsvCodec::fit(table, options);
    auto ds = codec.encode(table);
    return {std::move(ds), std::move(codec)};
}

Dataset load_csv(const std::filesystem::path& path, const CsvCodec& codec) {
    return codec.encode(read_csv_table(path, codec.delimiter()));
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    for (const auto& f : ds.schema().features()) out << f.name << ',';
    out << "label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (Modality m : ds.x(i)) out << m << ',';
        out << ds.y(i) << '\n';
    }
}

Dataset read_dataset_csv(const std::filesystem::path& path, const Schema& schema) {
    const auto table = read_csv_table(path, ',');
    if (table.header.size() != schema.size() + 1) throw Error("dump does not match schema");
    Dataset ds(schema);
    ds.reserve(table.rows.size());
    std::vector<Modality> x(schema.size());
    for (const auto& row : table.rows) {
        for (std::size_t d = 0; d < schema.size(); ++d)
            x[d] = static_cast<Modality>(detail::parse_uint(row[d]));
        ds.add(x, parse_label(row.back()));
    }
    return ds;
}

std::array<Dataset, 3> split_dataset(const Dataset& ds, std::array<double, 3> fractions,
                                     std::uint64_t seed) {
    for (double f : fractions)
        if (!(f > 0.0)) throw Error("split fraction <= 0");
    const double total = fractions[0] + fractions[1] + fractions[2];
    if (std::abs(total - 1.0) > 1e-9) throw Error("split fractions must sum to 1");

    const std::size_t n = ds.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 rng(stream_key(seed, 0));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    const auto n_train = static_cast<std::size_t>(std::floor(n * fractions[0] + 1e-9));
    const auto n_held =
        std::min(n - n_train, static_cast<std::size_t>(std::floor(n * fractions[1] + 1e-9)));

    std::array<Dataset, 3> parts{Dataset(ds.schema()), Dataset(ds.schema()), Dataset(ds.schema())};
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t part = r < n_train ? 0 : (r < n_train + n_held ? 1 : 2);
        parts[part].add(ds.x(order[r]), ds.y(order[r]));
    }
    return parts;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (!(a.schema() == b.schema())) throw Error("concat: schema mismatch");
    Dataset out(a.schema());
    out.reserve(a.size() + b.size());
    for (std::size_t i = 0; i < a.size(); ++i) out.add(a.x(i), a.y(i));
    for (std::size_t i = 0; i < b.size(); ++i) out.add(b.x(i), b.y(i));
    return out;
}

}  // namespace aggmrf
