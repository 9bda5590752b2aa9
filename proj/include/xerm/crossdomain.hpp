#pragma once

// Cross-domain weighted risk: each training sample carries a pair of weights
// derived from how well the imbalanced (factual) and balanced (counterfactual)
// heads already explain it.  The weighted loss blends the hard label with the
// balanced head's soft prediction.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xerm/adjust.hpp"
#include "xerm/dataset.hpp"
#include "xerm/model.hpp"

namespace xerm {

// Guard against log(0); also the tie-breaking floor inside the weight ratio.
inline constexpr double kCrossEntropyEps = 1e-12;

struct WeightRow {
    int64_t sample_id = 0;
    double ce_f = 0.0;   // cross entropy of the frozen imbalanced head
    double ce_cf = 0.0;  // cross entropy of the frozen balanced head
    double w_f = 0.0;
    double w_cf = 0.0;
};

struct SampleWeights {
    double gamma = 0.0;
    std::vector<WeightRow> rows;
};

// Soft targets produced by the balanced head, one distribution per sample.
struct SoftTargets {
    int64_t classes = 0;
    std::vector<double> probs;  // n * classes, row-major

    std::span<const double> row(int64_t i) const {
        return {probs.data() + i * classes, static_cast<size_t>(classes)};
    }
};

// -ln p[label], with p clamped at kCrossEntropyEps.  Throws
// "invalid-distribution" if p does not sum to 1 within 1e-6 or has a
// negative entry, and "id-out-of-range" for a bad label.
double cross_entropy(std::span<const double> probs, int64_t label);

// w_f = (ce_f+eps)^gamma / ((ce_f+eps)^gamma + (ce_cf+eps)^gamma), w_cf = 1-w_f.
// Evaluated in log space so large |gamma| cannot underflow the powers.
// gamma = 0 and exact ties both give (0.5, 0.5).
std::pair<double, double> compute_weights(double ce_f, double ce_cf, double gamma);

// Runs both frozen heads over the training set and fills per-sample weights
// plus the balanced head's soft targets.  The two heads share parameters;
// the balanced one is the tau-adjusted readout.
struct PrecomputeResult {
    SampleWeights weights;
    SoftTargets targets;
};
PrecomputeResult precompute_sample_weights(const LongTailDataset& train, const Params& base,
                                           const ClassPrior& prior, double tau, double gamma);

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad_logits;
};

// loss = -w_f * ln f[label] - w_cf * sum_c yhat[c] * ln f[c], where f is the
// softmax of `logits`.  Gradient is with respect to the logits.
LossGrad xerm_loss(std::span<const double> logits, int64_t label,
                   std::span<const double> soft_target, double w_f, double w_cf);

// Ablation: fixed (w_f, w_cf) = (1-w, w) for every sample.  w = 0 reduces to
// plain cross entropy, w = 1 to pure distillation from the balanced head.
LossGrad kd_constant_loss(std::span<const double> logits, int64_t label,
                          std::span<const double> soft_target, double w);

std::string sample_weights_to_csv(const SampleWeights& weights);
SampleWeights sample_weights_from_csv(const std::string& text);

}  // namespace xerm
