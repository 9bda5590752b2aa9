#pragma once

// Evaluation protocol: top-1 accuracy, per-subset macro recall/precision/F1
// over the many/medium/few class groups, per-class confusion counts, and how
// far the predicted class histogram drifts from the truth.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xerm/dataset.hpp"
#include "xerm/vendor_json.hpp"

namespace xerm {

struct ConfusionStats {
    int64_t classes = 0;
    int64_t n_samples = 0;
    std::vector<int64_t> tp;
    std::vector<int64_t> fp;
    std::vector<int64_t> fn;
};

ConfusionStats confusion(const std::vector<int32_t>& predictions,
                         const std::vector<int32_t>& labels, int64_t classes);

struct SubsetScore {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;  // harmonic mean of the two macro aggregates above
};

struct SubsetMacro {
    std::optional<SubsetScore> many;
    std::optional<SubsetScore> medium;
    std::optional<SubsetScore> few;
};

// Macro averages within each subset.  A class predicted zero times
// contributes precision 0 rather than being skipped; an empty subset yields
// an absent entry.
SubsetMacro subset_macro(const ConfusionStats& stats, const SubsetPartition& partition);

struct BiasStats {
    std::vector<int64_t> histogram;  // predicted-class counts
    double l1_to_truth = 0.0;        // sum_c |pred_freq_c - true_freq_c|, in [0, 2]
};

BiasStats prediction_bias(const std::vector<int32_t>& predictions,
                          const std::vector<int32_t>& labels, int64_t classes);

struct MetricsReport {
    double accuracy = 0.0;
    SubsetMacro subsets;
    ConfusionStats per_class;
    BiasStats bias;
};

MetricsReport evaluate(const std::vector<int32_t>& predictions,
                       const std::vector<int32_t>& labels, int64_t classes,
                       const SubsetPartition& partition);

// Stable key order for diffable manifests.
ordered_json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const ordered_json& j);

// class_id,tp,fp,fn,recall,precision rows.
std::string per_class_csv(const ConfusionStats& stats);

}  // namespace xerm
