#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aggmrf/schema.hpp"

namespace aggmrf {

/// Maps the modalities of one high-cardinality feature onto a small grid of
/// (occurrence-count bin, positive-rate bin) cells fitted on held-out data.
/// Encoded index = count_bin * ctr_bins + ctr_bin; index count_bins * ctr_bins
/// is reserved for modalities the held-out split never showed.
struct TargetEncoding {
    std::size_t feature = 0;
    std::string name;
    int count_bins = 1;
    int ctr_bins = 1;
    std::vector<Modality> map;
    std::vector<double> occurrences;
    std::vector<double> positives;
    std::vector<double> rate;

    Modality cardinality() const noexcept { return static_cast<Modality>(count_bins * ctr_bins + 1); }
    Modality reserved() const noexcept { return static_cast<Modality>(count_bins * ctr_bins); }
    Modality operator()(Modality raw) const { return raw < map.size() ? map[raw] : reserved(); }
};

/// Smoothed rate r = (positives + prior * ybar) / (o + prior). Bins are
/// quantiles of log(1 + o) and of r over the modalities seen in heldout,
/// each modality weighted once.
TargetEncoding fit_target_encoding(const Dataset& heldout, std::size_t feature, int count_bins,
                                   int ctr_bins, double prior_strength = 10.0);

/// Replaces each encoded feature's column and cardinality; other columns
/// are copied as is.
Dataset apply_encodings(const Dataset& ds, std::span<const TargetEncoding> encodings);

void save_encodings(std::span<const TargetEncoding> encodings, const std::filesystem::path& path);

/// Feature names are resolved against the raw schema.
std::vector<TargetEncoding> load_encodings(const std::filesystem::path& path, const Schema& raw);

}  // namespace aggmrf
