#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xerm/common.hpp"

namespace xerm {

/// Classification dataset with per-class bookkeeping. Features are stored
/// row-major as f32; labels are contiguous class ids in [0, classes).
struct LongTailDataset {
    int64_t n = 0;
    int64_t dims = 0;
    int64_t classes = 0;
    std::vector<float> features;      // n * dims, row-major
    std::vector<int32_t> labels;      // n
    std::vector<int64_t> class_counts;  // classes
    std::string name;

    std::span<const float> row(int64_t i) const {
        return {features.data() + i * dims, static_cast<size_t>(dims)};
    }

    /// Recounts labels and checks the structural invariants: counts match,
    /// no class in [0, classes) is empty.
    void recount_and_validate();
};

/// Exponential class-count decay: class i of C gets n_head * mu^((i-1)/(C-1))
/// samples. mu is the reciprocal of the target imbalance ratio; mu = 1 is
/// balanced.
struct DecayProfile {
    int64_t n_head = 0;
    int64_t classes = 0;
    double mu = 1.0;
};

enum class Subset : uint8_t { many = 0, medium = 1, few = 2 };

/// Per-class many/medium/few tags from training counts.
struct SubsetPartition {
    int64_t many_threshold = 100;
    int64_t few_threshold = 20;
    std::vector<Subset> assignment;  // per class
};

const char* subset_name(Subset s);

/// Per-class sample counts for the profile: floor(n_head * mu^((i-1)/(C-1)))
/// clamped to a minimum of 1, i = 1..C. Non-increasing; first entry n_head.
std::vector<int64_t> decay_counts(const DecayProfile& profile);

/// Downsamples a balanced dataset to the profile's counts. Classes are ranked
/// by descending entry in `train_counts` (ties by ascending class id) and the
/// class of rank i keeps decay_counts(profile)[i] samples, drawn uniformly
/// without replacement. Empty `train_counts` means all ranks tie, i.e. rank
/// order is class-id order. Deterministic in `seed`; surviving rows keep
/// their original relative order.
LongTailDataset subsample_longtail(const LongTailDataset& balanced,
                                   const DecayProfile& profile,
                                   const std::vector<int64_t>& train_counts,
                                   uint64_t seed);

/// Synthetic Gaussian-mixture benchmark: class means drawn on a sphere of
/// radius class_sep, isotropic noise, train counts from the decay profile,
/// balanced test set with test_per_class samples per class. Bit-identical
/// for identical arguments.
struct SynthResult {
    LongTailDataset train;
    LongTailDataset balanced_test;
};
SynthResult synth_gaussian_longtail(int64_t classes, int64_t dims, const DecayProfile& profile,
                                    double class_sep, double noise_sd, int64_t test_per_class,
                                    uint64_t seed);

enum class TabularFormat { csv, raw_f32 };

/// Loads a dataset from disk. CSV: one sample per row, label in the last
/// column, optional header row. raw-f32: header of three little-endian u64
/// (n_samples, n_dims, n_classes), then the f32 feature block, then u32
/// labels. Labels must be contiguous integers starting at 0.
LongTailDataset load_tabular(const std::filesystem::path& path, TabularFormat format,
                             bool csv_has_header = false);

/// Writes the raw-f32 binary format described above.
void save_raw_f32(const LongTailDataset& data, const std::filesystem::path& path);

/// Writes CSV (no header; label last).
void save_csv(const LongTailDataset& data, const std::filesystem::path& path);

/// Tags every class: many iff train count > many_threshold, few iff count <
/// few_threshold, medium otherwise.
SubsetPartition partition_subsets(const std::vector<int64_t>& train_counts,
                                  int64_t many_threshold, int64_t few_threshold);

/// Per-dimension affine transform fitted on training data.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> inv_sd;

    void apply(LongTailDataset& data) const;
};

/// Zero-mean unit-variance statistics from `train` only. Constant dimensions
/// keep scale 1 so they map to exactly zero.
Standardizer fit_standardizer(const LongTailDataset& train);

}  // namespace xerm
