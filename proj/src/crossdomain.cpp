#include "xerm/crossdomain.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace xerm {

double cross_entropy(std::span<const double> probs, int64_t label) {
    if (label < 0 || static_cast<size_t>(label) >= probs.size()) {
        throw Error("id-out-of-range",
                    "label " + std::to_string(label) + " outside " + std::to_string(probs.size()) +
                        " classes");
    }
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) {
            throw Error("invalid-distribution", "negative or NaN probability");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
        throw Error("invalid-distribution",
                    "probabilities sum to " + format_double(sum));
    }
    const double p = std::max(probs[static_cast<size_t>(label)], kCrossEntropyEps);
    return -std::log(p);
}

std::pair<double, double> compute_weights(double ce_f, double ce_cf, double gamma) {
    if (!(ce_f >= 0.0) || !(ce_cf >= 0.0)) {
        throw Error("invalid-argument", "cross entropies must be >= 0");
    }
    // sigmoid(gamma * (ln(ce_f+eps) - ln(ce_cf+eps))) equals the ratio of
    // powers exactly, without evaluating either power.
    const double d = std::log(ce_f + kCrossEntropyEps) - std::log(ce_cf + kCrossEntropyEps);
    const double t = gamma * d;
    double w_f;
    if (t >= 0.0) {
        w_f = 1.0 / (1.0 + std::exp(-t));
    } else {
        const double e = std::exp(t);
        w_f = e / (1.0 + e);
    }
    return {w_f, 1.0 - w_f};
}

PrecomputeResult precompute_sample_weights(const LongTailDataset& train, const Params& base,
                                           const ClassPrior& prior, double tau, double gamma) {
    PrecomputeResult out;
    out.weights.gamma = gamma;
    out.weights.rows.resize(static_cast<size_t>(train.n));
    out.targets.classes = train.classes;
    out.targets.probs.resize(static_cast<size_t>(train.n * train.classes));

    for (int64_t i = 0; i < train.n; ++i) {
        const auto x = train.row(i);
        const int64_t y = train.labels[static_cast<size_t>(i)];
        const std::vector<double> logits = forward_logits(base, x);
        const std::vector<double> probs_f = softmax(logits);
        const std::vector<double> probs_cf = softmax(adjust_logits(logits, prior, tau));

        WeightRow& row = out.weights.rows[static_cast<size_t>(i)];
        row.sample_id = i;
        row.ce_f = cross_entropy(probs_f, y);
        row.ce_cf = cross_entropy(probs_cf, y);
        std::tie(row.w_f, row.w_cf) = compute_weights(row.ce_f, row.ce_cf, gamma);

        double* dst = out.targets.probs.data() + i * train.classes;
        for (int64_t c = 0; c < train.classes; ++c) {
            dst[c] = probs_cf[static_cast<size_t>(c)];
        }
    }
    return out;
}

LossGrad xerm_loss(std::span<const double> logits, int64_t label,
                   std::span<const double> soft_target, double w_f, double w_cf) {
    if (logits.size() != soft_target.size()) {
        throw Error("shape-mismatch", "logits vs soft target length");
    }
    if (label < 0 || static_cast<size_t>(label) >= logits.size()) {
        throw Error("id-out-of-range", "label " + std::to_string(label));
    }
    const std::vector<double> f = softmax(logits);

    LossGrad out;
    out.loss = w_f * cross_entropy(f, label);
    double cf_term = 0.0;
    for (size_t c = 0; c < f.size(); ++c) {
        cf_term -= soft_target[c] * std::log(std::max(f[c], kCrossEntropyEps));
    }
    out.loss += w_cf * cf_term;

    // d loss / d logit_c = f_c - (w_f * y_c + w_cf * yhat_c); the blended
    // target stays a distribution because w_f + w_cf = 1.
    out.grad_logits.resize(f.size());
    for (size_t c = 0; c < f.size(); ++c) {
        double target = w_cf * soft_target[c];
        if (c == static_cast<size_t>(label)) {
            target += w_f;
        }
        out.grad_logits[c] = f[c] - target;
    }
    return out;
}

LossGrad kd_constant_loss(std::span<const double> logits, int64_t label,
                          std::span<const double> soft_target, double w) {
    if (w < 0.0 || w > 1.0) {
        throw Error("invalid-argument", "constant weight must lie in [0, 1]");
    }
    return xerm_loss(logits, label, soft_target, 1.0 - w, w);
}

std::string sample_weights_to_csv(const SampleWeights& weights) {
    std::string out = "sample_id,ce_f,ce_cf,w_f,w_cf\n";
    for (const WeightRow& r : weights.rows) {
        out += std::to_string(r.sample_id);
        out += ',';
        out += format_double(r.ce_f);
        out += ',';
        out += format_double(r.ce_cf);
        out += ',';
        out += format_double(r.w_f);
        out += ',';
        out += format_double(r.w_cf);
        out += '\n';
    }
    return out;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_field_double(const std::string& s, int line_no) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
        throw Error("parse-error", "line " + std::to_string(line_no) + ": bad number '" + s + "'");
    }
    return v;
}

}  // namespace

SampleWeights sample_weights_from_csv(const std::string& text) {
    SampleWeights out;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line_no == 1 && line.rfind("sample_id,", 0) == 0) {
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != 5) {
            throw Error("parse-error",
                        "line " + std::to_string(line_no) + ": expected 5 fields, got " +
                            std::to_string(fields.size()));
        }
        WeightRow row;
        row.sample_id = static_cast<int64_t>(parse_field_double(fields[0], line_no));
        row.ce_f = parse_field_double(fields[1], line_no);
        row.ce_cf = parse_field_double(fields[2], line_no);
        row.w_f = parse_field_double(fields[3], line_no);
        row.w_cf = parse_field_double(fields[4], line_no);
        out.rows.push_back(row);
    }
    return out;
}

}  // namespace xerm
