#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aggmrf/common.hpp"

namespace aggmrf {

struct Feature {
    std::string name;
    Modality cardinality = 1;

    bool operator==(const Feature&) const = default;
};

/// Ordered list of categorical features with per-feature cardinality.
class Schema {
public:
    Schema() = default;
    explicit Schema(std::vector<Feature> features);

    std::size_t size() const noexcept { return features_.size(); }
    const Feature& operator[](std::size_t d) const { return features_[d]; }
    std::span<const Feature> features() const noexcept { return features_; }
    Modality cardinality(std::size_t d) const { return features_[d].cardinality; }

    std::optional<std::size_t> index_of(std::string_view name) const;

    /// Number of feature vectors, saturated at UINT64_MAX.
    std::uint64_t state_space_size() const noexcept;

    /// Throws if x has the wrong length or an index out of range.
    void validate(std::span<const Modality> x) const;

    bool operator==(const Schema&) const = default;

private:
    std::vector<Feature> features_;
};

/// Labeled records over a schema, stored row-major in one flat buffer.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(Schema schema) : schema_(std::move(schema)) {}

    const Schema& schema() const noexcept { return schema_; }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    std::size_t dims() const noexcept { return schema_.size(); }

    std::span<const Modality> x(std::size_t i) const {
        return {cells_.data() + i * dims(), dims()};
    }
    int y(std::size_t i) const { return labels_[i]; }

    /// Validates and appends one record.
    void add(std::span<const Modality> x, int y);
    void reserve(std::size_t n);

    /// Mean label; 0 on an empty dataset.
    double positive_rate() const;

    bool operator==(const Dataset&) const = default;

private:
    Schema schema_;
    std::vector<Modality> cells_;
    std::vector<std::uint8_t> labels_;
};

/// Quantile cut points for one continuous column. apply(v) is the number of
/// cut points strictly below v, so bins are (-inf, c0], (c0, c1], ...
struct DiscretizationPlan {
    std::vector<double> cuts;
    int bins = 1;

    Modality apply(double v) const;
    Modality num_bins() const noexcept { return static_cast<Modality>(cuts.size() + 1); }
};

/// Empirical quantiles at k/bins (k = 1..bins-1) with linear interpolation
/// between order statistics, deduplicated. Non-finite values are ignored.
DiscretizationPlan fit_discretization(std::span<const double> values, int bins);

/// Raw string cells of a delimited text file with a header row.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv_table(const std::filesystem::path& path, char delimiter = ',');

struct CsvOptions {
    std::string label_column;
    std::set<std::string> continuous_columns;
    int bins = 10;
    char delimiter = ',';
    /// Append one "unseen" modality to every feature (index cardinality-1).
    bool reserve_unseen = true;
};

/// Frozen mapping from raw CSV cells to modality indices, fitted once on
/// training data and reused verbatim for held-out and test files.
class CsvCodec {
public:
    enum class Kind { categorical, continuous };

    struct Column {
        std::string name;
        Kind kind = Kind::categorical;
        std::vector<std::string> vocabulary;  // categorical: index -> raw value
        DiscretizationPlan plan;              // continuous
        std::unordered_map<std::string, Modality> lookup;
    };

    static CsvCodec fit(const CsvTable& table, const CsvOptions& options);

    Dataset encode(const CsvTable& table) const;
    Modality encode_cell(std::size_t column, std::string_view raw) const;

    /// Inverse of encode for one record: a raw row that re-encodes to x.
    std::vector<std::string> decode(std::span<const Modality> x) const;

    Schema schema() const;
    const std::string& label_column() const noexcept { return label_; }
    char delimiter() const noexcept { return delimiter_; }
    bool reserve_unseen() const noexcept { return reserve_unseen_; }
    std::span<const Column> columns() const noexcept { return columns_; }

    void save(const std::filesystem::path& path) const;
    static CsvCodec load(const std::filesystem::path& path);

private:
    Modality seen_count(const Column& c) const;
    void rebuild_lookup();

    std::string label_;
    char delimiter_ = ',';
    bool reserve_unseen_ = true;
    std::vector<Column> columns_;
};

struct LoadedCsv {
    Dataset dataset;
    CsvCodec codec;
};

/// Fits a codec on the file and encodes it.
LoadedCsv load_csv(const std::filesystem::path& path, const CsvOptions& options);

/// Encodes a file with an already-frozen codec; unknown values map to the
/// reserved modality.
Dataset load_csv(const std::filesystem::path& path, const CsvCodec& codec);

/// Parses a label cell; only "0" and "1" are accepted.
int parse_label(std::string_view raw);

/// Dump format: same CSV shape, cells are modality indices, label last.
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset_csv(const std::filesystem::path& path, const Schema& schema);

/// Seeded shuffle, then floor(n*train), floor(n*heldout), remainder.
std::array<Dataset, 3> split_dataset(const Dataset& ds, std::array<double, 3> fractions,
                                     std::uint64_t seed);

/// Concatenation of two datasets over the same schema.
Dataset concat(const Dataset& a, const Dataset& b);

}  // namespace aggmrf
