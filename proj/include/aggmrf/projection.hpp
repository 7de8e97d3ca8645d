#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aggmrf/schema.hpp"

namespace aggmrf {

/// One contingency table: the joint modalities of a sorted feature subset.
/// Row of x inside the flat row space is offset + sum_f x[f] * stride_f.
struct ContingencyTable {
    std::vector<std::size_t> features;
    std::vector<std::size_t> strides;
    std::size_t offset = 0;
    std::size_t rows = 0;

    bool operator==(const ContingencyTable&) const = default;
};

struct ActiveRow {
    std::size_t row;
    std::uint32_t multiplicity;

    bool operator==(const ActiveRow&) const = default;
};

/// Sparse phi(x): active rows sorted by index, collisions merged.
using SparseEncoding = std::vector<ActiveRow>;

enum class ProjectionKind { single, pairwise, hashed };

/// The family phi of K binary projections, organized as contingency tables.
/// Immutable once built; all queries are safe to call concurrently.
class ProjectionSet {
public:
    static ProjectionSet build_single(const Schema& schema);
    static ProjectionSet build_pairwise(const Schema& schema, bool include_singles = true);
    /// Pushes every base row through a seeded hash into [0, buckets).
    static ProjectionSet build_hashed(const ProjectionSet& base, std::size_t buckets,
                                      std::uint64_t seed);

    ProjectionKind kind() const noexcept { return kind_; }
    bool hashed() const noexcept { return kind_ == ProjectionKind::hashed; }
    /// Kind of the unhashed table family (equal to kind() unless hashed).
    ProjectionKind base_kind() const noexcept { return base_kind_; }
    bool include_singles() const noexcept { return include_singles_; }
    const Schema& schema() const noexcept { return schema_; }

    /// Dimension of the parameter vectors.
    std::size_t size() const noexcept { return hashed() ? buckets_ : base_size_; }
    /// Row count of the unhashed table family.
    std::size_t base_size() const noexcept { return base_size_; }
    std::size_t buckets() const noexcept { return buckets_; }
    std::uint64_t hash_seed() const noexcept { return hash_seed_; }

    /// Tables of the unhashed family; each record activates one row in each.
    std::span<const ContingencyTable> tables() const noexcept { return tables_; }
    std::size_t num_tables() const noexcept { return tables_.size(); }
    /// Indices of the tables that contain feature d.
    std::span<const std::size_t> tables_of(std::size_t d) const { return tables_of_[d]; }

    /// Row of x in table t of the unhashed family.
    std::size_t base_row(std::size_t t, std::span<const Modality> x) const noexcept {
        const auto& tab = tables_[t];
        std::size_t r = tab.offset;
        for (std::size_t j = 0; j < tab.features.size(); ++j) r += x[tab.features[j]] * tab.strides[j];
        return r;
    }
    /// Parameter index of an unhashed row (identity unless hashed).
    std::size_t map_row(std::size_t base_row) const noexcept {
        return hashed() ? bucket_of_[base_row] : base_row;
    }
    std::span<const std::uint32_t> bucket_map() const noexcept { return bucket_of_; }

    /// Parameter index of x's row in each table, one per table (not merged).
    void rows_of(std::span<const Modality> x, std::span<std::size_t> out) const noexcept {
        for (std::size_t t = 0; t < tables_.size(); ++t) out[t] = map_row(base_row(t, x));
    }

    /// Validates x, then returns the merged sparse encoding.
    SparseEncoding encode(std::span<const Modality> x) const;

    /// Structural hash: kind, schema cardinalities, tables, hash parameters.
    std::uint64_t fingerprint() const noexcept;

    /// Modality tuple of a base row within its table.
    std::pair<std::size_t, std::vector<Modality>> describe_row(std::size_t base_row) const;

    bool operator==(const ProjectionSet&) const = default;

private:
    void index_tables();

    ProjectionKind kind_ = ProjectionKind::single;
    ProjectionKind base_kind_ = ProjectionKind::single;
    bool include_singles_ = true;
    Schema schema_;
    std::vector<ContingencyTable> tables_;
    std::vector<std::vector<std::size_t>> tables_of_;
    std::size_t base_size_ = 0;
    std::size_t buckets_ = 0;
    std::uint64_t hash_seed_ = 0;
    std::vector<std::uint32_t> bucket_of_;
};

/// Observed aggregates: d (counts) and c (label sums) per row, and n.
struct AggregatedData {
    std::vector<double> d;
    std::vector<double> c;
    double n = 0;

    bool operator==(const AggregatedData&) const = default;
};

AggregatedData aggregate(const ProjectionSet& ps, const Dataset& ds);

/// Sums base-row aggregates within hash buckets.
AggregatedData push_through_buckets(const ProjectionSet& hashed, const AggregatedData& base);

/// Throws if agg violates 0 <= c <= d, has the wrong length, or (unhashed)
/// a table whose counts do not sum to n.
void check_aggregates(const ProjectionSet& ps, const AggregatedData& agg);

/// Per-feature marginal counts recovered from the first table holding the
/// feature; unavailable (throws) under a hashed projection.
std::vector<double> feature_marginal(const ProjectionSet& ps, const AggregatedData& agg,
                                     std::size_t d);

void write_tables(const AggregatedData& agg, const ProjectionSet& ps,
                  const std::filesystem::path& path);
std::pair<AggregatedData, ProjectionSet> read_tables(const std::filesystem::path& path);

}  // namespace aggmrf
