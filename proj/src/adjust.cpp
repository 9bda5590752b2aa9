#include "xerm/adjust.hpp"

#include <cmath>
#include <numeric>

namespace xerm {

ClassPrior prior_from_counts(const std::vector<int64_t>& counts) {
    if (counts.empty()) {
        throw Error("empty-class", "no classes");
    }
    for (size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] < 1) {
            throw Error("empty-class", "class " + std::to_string(c) + " has count 0");
        }
    }
    const double total =
        static_cast<double>(std::accumulate(counts.begin(), counts.end(), int64_t{0}));
    ClassPrior prior;
    prior.source_counts = counts;
    prior.pi.reserve(counts.size());
    for (int64_t c : counts) {
        prior.pi.push_back(static_cast<double>(c) / total);
    }
    return prior;
}

ClassPrior estimate_prior(const LongTailDataset& train) {
    return prior_from_counts(train.class_counts);
}

std::vector<double> adjust_logits(std::span<const double> logits, const ClassPrior& prior,
                                  double tau) {
    if (logits.size() != prior.pi.size()) {
        throw Error("shape-mismatch", "logit count does not match prior");
    }
    if (tau < 0.0) {
        throw Error("invalid-argument", "tau must be >= 0");
    }
    std::vector<double> out(logits.size());
    for (size_t c = 0; c < logits.size(); ++c) {
        out[c] = logits[c] - tau * std::log(prior.pi[c]);
    }
    return out;
}

template <typename T>
std::vector<double> balanced_predict(const ParamsT<T>& params, std::span<const T> x,
                                     const ClassPrior& prior, double tau) {
    const std::vector<double> logits = forward_logits(params, x);
    const std::vector<double> adjusted = adjust_logits(logits, prior, tau);
    return softmax(adjusted);
}

template std::vector<double> balanced_predict<float>(const ParamsT<float>&, std::span<const float>,
                                                     const ClassPrior&, double);
template std::vector<double> balanced_predict<double>(const ParamsT<double>&,
                                                      std::span<const double>, const ClassPrior&,
                                                      double);

}  // namespace xerm
