#pragma once

// Orchestration: data preparation, the two-stage training pipeline
// (imbalanced base model, then the reweighted cross-domain model), test-suite
// sweeps, the head-retraining probe, manifests, and multi-seed aggregation.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "xerm/adjust.hpp"
#include "xerm/config.hpp"
#include "xerm/crossdomain.hpp"
#include "xerm/dataset.hpp"
#include "xerm/metrics.hpp"
#include "xerm/model.hpp"
#include "xerm/vendor_json.hpp"

namespace xerm {

struct TrainOptions {
    double learning_rate = 0.1;
    double momentum = 0.9;
    int64_t batch_size = 32;
    int64_t epochs = 0;
    std::vector<std::pair<int64_t, double>> schedule{{0, 1.0}};
    uint64_t shuffle_seed = 0;
    bool head_only = false;
};

TrainOptions train_options_from(const ExperimentConfig& config, uint64_t seed);

struct EpochLoss {
    int64_t epoch = 0;
    double mean_loss = 0.0;
};

// Maps (logits, sample index) to the per-sample loss and its logit gradient.
using SampleObjective = std::function<LossGrad(std::span<const double>, int64_t)>;

// Mini-batch SGD over shuffled epochs; gradients averaged per batch, loss
// recorded pre-update. Throws divergence when a loss stops being finite.
std::vector<EpochLoss> train_model(Params& params, const LongTailDataset& data,
                                   const TrainOptions& opts, const SampleObjective& objective);

std::string loss_curve_csv(const std::vector<EpochLoss>& curve);

// Long-tailed train split plus the balanced evaluation pool, standardized
// with train statistics when the config says so.
struct PreparedData {
    LongTailDataset train;
    LongTailDataset balanced_test;
    std::optional<Standardizer> standardizer;
    SubsetPartition partition;  // by train counts
};

PreparedData prepare_data(const ExperimentConfig& config, uint64_t seed);

ordered_json standardizer_to_json(const Standardizer& st);
Standardizer standardizer_from_json(const ordered_json& j);

// Companion balanced training split drawn from the same generative process
// (synthetic sources only), for the head-retraining probe.
LongTailDataset balanced_train_for_probe(const ExperimentConfig& config, uint64_t seed,
                                         const PreparedData& data);

struct TrainedModel {
    Params params;
    std::vector<EpochLoss> curve;
};

// Plain cross-entropy run from a fresh initialization.
TrainedModel train_xe(const PreparedData& data, const ExperimentConfig& config, uint64_t seed);

// Cross-domain weighted run against the frozen base model's two readouts.
// `weights` comes from precompute_sample_weights on the same train split.
TrainedModel train_xerm_model(const PreparedData& data, const ExperimentConfig& config,
                              uint64_t seed, const Params& warm_from,
                              const PrecomputeResult& weights);

// Constant-weight ablation; w is the soft-target share.
TrainedModel train_constant_w(const PreparedData& data, const ExperimentConfig& config,
                              uint64_t seed, const SoftTargets& targets, double w);

// Argmax predictions; with a prior the logits are adjusted first (the
// balanced readout), otherwise raw.
std::vector<int32_t> predict_dataset(const Params& params, const LongTailDataset& data,
                                     const ClassPrior* prior = nullptr, double tau = 0.0);

// A long-tailed slice of the balanced pool at decay mu, head sized to the
// pool's smallest class so every request is satisfiable. Classes keep their
// train-frequency rank order.
LongTailDataset imbalanced_suite(const LongTailDataset& pool,
                                 const std::vector<int64_t>& train_counts, double mu,
                                 uint64_t seed);

struct RunManifest {
    ordered_json json;
    std::filesystem::path path;
};

// Full single-seed pipeline: base model, priors, per-sample weights, the
// reweighted model, every evaluation, optional probe, manifest on disk.
RunManifest run_xerm_pipeline(const ExperimentConfig& config, uint64_t seed);

struct SweepRow {
    double knob = 0.0;  // gamma or constant w
    uint64_t seed = 0;
    double balanced_accuracy = 0.0;
    std::vector<double> imbalanced_accuracy;  // aligned with config.test_mus
    uint64_t xe_checkpoint_hash = 0;          // equal across rows sharing a seed
};

// One reweighted run per (seed, gamma); the base model is trained once per
// seed and shared across rows.
std::vector<SweepRow> sweep_gamma(const ExperimentConfig& config,
                                  const std::vector<double>& gammas);

std::vector<SweepRow> ablate_constant_w(const ExperimentConfig& config,
                                        const std::vector<double>& ws);

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& knob_name,
                      const std::vector<double>& mus);

// Freezes the first layer, redraws the head, trains head-only on the
// balanced train split, reports on the balanced test. Throws
// no-feature-layer for linear backbones.
MetricsReport feature_probe(const Params& backbone, const LongTailDataset& balanced_train,
                            const LongTailDataset& balanced_test,
                            const SubsetPartition& partition, const ExperimentConfig& config,
                            uint64_t seed);

// Mean and population standard deviation across seed manifests sharing one
// config hash. Throws missing-manifest / config-mismatch.
struct AggregateReport {
    ordered_json summary;        // suite -> model -> metric -> {mean, std, n}
    std::string summary_csv;     // long format
    std::string histogram_csv;   // per-class predicted vs true frequencies
    std::string probe_csv;
};

AggregateReport aggregate_manifests(const std::vector<std::filesystem::path>& paths);

ordered_json load_manifest(const std::filesystem::path& path);

}  // namespace xerm
