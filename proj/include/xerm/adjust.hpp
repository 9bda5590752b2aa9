#pragma once

#include <span>
#include <vector>

#include "xerm/dataset.hpp"
#include "xerm/model.hpp"

namespace xerm {

/// Empirical class prior pi_c = count_c / sum(counts).
struct ClassPrior {
    std::vector<double> pi;
    std::vector<int64_t> source_counts;
};

ClassPrior estimate_prior(const LongTailDataset& train);
ClassPrior prior_from_counts(const std::vector<int64_t>& counts);

/// Post-hoc logit adjustment: z'_c = z_c - tau * ln(pi_c). With tau = 1 this
/// subtracts the training prior, turning the head-biased classifier into the
/// balanced one.
std::vector<double> adjust_logits(std::span<const double> logits, const ClassPrior& prior,
                                  double tau);

/// softmax(adjust_logits(forward_logits(params, x))) - the balanced model's
/// predictive distribution.
template <typename T>
std::vector<double> balanced_predict(const ParamsT<T>& params, std::span<const T> x,
                                     const ClassPrior& prior, double tau);

}  // namespace xerm
