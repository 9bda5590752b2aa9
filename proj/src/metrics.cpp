#include "xerm/metrics.hpp"

#include <cmath>

namespace xerm {

namespace {

void check_ids(const std::vector<int32_t>& predictions, const std::vector<int32_t>& labels,
               int64_t classes) {
    if (predictions.size() != labels.size()) {
        throw Error("length-mismatch", std::to_string(predictions.size()) + " predictions vs " +
                                           std::to_string(labels.size()) + " labels");
    }
    for (size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] < 0 || predictions[i] >= classes) {
            throw Error("id-out-of-range", "prediction " + std::to_string(predictions[i]) +
                                               " at index " + std::to_string(i));
        }
        if (labels[i] < 0 || labels[i] >= classes) {
            throw Error("id-out-of-range",
                        "label " + std::to_string(labels[i]) + " at index " + std::to_string(i));
        }
    }
}

}  // namespace

ConfusionStats confusion(const std::vector<int32_t>& predictions,
                         const std::vector<int32_t>& labels, int64_t classes) {
    check_ids(predictions, labels, classes);
    ConfusionStats stats;
    stats.classes = classes;
    stats.n_samples = static_cast<int64_t>(labels.size());
    stats.tp.assign(static_cast<size_t>(classes), 0);
    stats.fp.assign(static_cast<size_t>(classes), 0);
    stats.fn.assign(static_cast<size_t>(classes), 0);
    for (size_t i = 0; i < labels.size(); ++i) {
        const auto pred = static_cast<size_t>(predictions[i]);
        const auto truth = static_cast<size_t>(labels[i]);
        if (pred == truth) {
            ++stats.tp[truth];
        } else {
            ++stats.fp[pred];
            ++stats.fn[truth];
        }
    }
    return stats;
}

SubsetMacro subset_macro(const ConfusionStats& stats, const SubsetPartition& partition) {
    if (partition.assignment.size() != static_cast<size_t>(stats.classes)) {
        throw Error("length-mismatch", "partition does not cover the class set");
    }
    SubsetMacro out;
    for (Subset subset : {Subset::many, Subset::medium, Subset::few}) {
        double recall_sum = 0.0;
        double precision_sum = 0.0;
        int64_t members = 0;
        for (int64_t c = 0; c < stats.classes; ++c) {
            if (partition.assignment[static_cast<size_t>(c)] != subset) {
                continue;
            }
            ++members;
            const auto tp = static_cast<double>(stats.tp[static_cast<size_t>(c)]);
            const auto fp = static_cast<double>(stats.fp[static_cast<size_t>(c)]);
            const auto fn = static_cast<double>(stats.fn[static_cast<size_t>(c)]);
            // Zero denominators contribute 0, keeping the averages defined.
            recall_sum += (tp + fn > 0.0) ? tp / (tp + fn) : 0.0;
            precision_sum += (tp + fp > 0.0) ? tp / (tp + fp) : 0.0;
        }
        if (members == 0) {
            continue;
        }
        SubsetScore score;
        score.recall = recall_sum / static_cast<double>(members);
        score.precision = precision_sum / static_cast<double>(members);
        const double rp = score.recall + score.precision;
        score.f1 = (rp > 0.0) ? 2.0 * score.recall * score.precision / rp : 0.0;
        switch (subset) {
            case Subset::many: out.many = score; break;
            case Subset::medium: out.medium = score; break;
            case Subset::few: out.few = score; break;
        }
    }
    return out;
}

BiasStats prediction_bias(const std::vector<int32_t>& predictions,
                          const std::vector<int32_t>& labels, int64_t classes) {
    check_ids(predictions, labels, classes);
    BiasStats out;
    out.histogram.assign(static_cast<size_t>(classes), 0);
    std::vector<int64_t> truth_hist(static_cast<size_t>(classes), 0);
    for (size_t i = 0; i < predictions.size(); ++i) {
        ++out.histogram[static_cast<size_t>(predictions[i])];
        ++truth_hist[static_cast<size_t>(labels[i])];
    }
    const auto n = static_cast<double>(predictions.size());
    if (n > 0) {
        for (int64_t c = 0; c < classes; ++c) {
            const double pred_freq = static_cast<double>(out.histogram[static_cast<size_t>(c)]) / n;
            const double true_freq = static_cast<double>(truth_hist[static_cast<size_t>(c)]) / n;
            out.l1_to_truth += std::abs(pred_freq - true_freq);
        }
    }
    return out;
}

MetricsReport evaluate(const std::vector<int32_t>& predictions,
                       const std::vector<int32_t>& labels, int64_t classes,
                       const SubsetPartition& partition) {
    MetricsReport report;
    report.per_class = confusion(predictions, labels, classes);
    int64_t correct = 0;
    for (int64_t c = 0; c < classes; ++c) {
        correct += report.per_class.tp[static_cast<size_t>(c)];
    }
    report.accuracy = report.per_class.n_samples > 0
                          ? static_cast<double>(correct) /
                                static_cast<double>(report.per_class.n_samples)
                          : 0.0;
    report.subsets = subset_macro(report.per_class, partition);
    report.bias = prediction_bias(predictions, labels, classes);
    return report;
}

namespace {

ordered_json score_to_json(const std::optional<SubsetScore>& score) {
    if (!score) {
        return nullptr;
    }
    ordered_json j;
    j["recall"] = score->recall;
    j["precision"] = score->precision;
    j["f1"] = score->f1;
    return j;
}

std::optional<SubsetScore> score_from_json(const ordered_json& j) {
    if (j.is_null()) {
        return std::nullopt;
    }
    SubsetScore s;
    s.recall = j.at("recall").get<double>();
    s.precision = j.at("precision").get<double>();
    s.f1 = j.at("f1").get<double>();
    return s;
}

}  // namespace

ordered_json report_to_json(const MetricsReport& report) {
    ordered_json j;
    j["accuracy"] = report.accuracy;
    j["many"] = score_to_json(report.subsets.many);
    j["medium"] = score_to_json(report.subsets.medium);
    j["few"] = score_to_json(report.subsets.few);
    j["n_samples"] = report.per_class.n_samples;
    j["tp"] = report.per_class.tp;
    j["fp"] = report.per_class.fp;
    j["fn"] = report.per_class.fn;
    j["prediction_histogram"] = report.bias.histogram;
    j["l1_to_truth"] = report.bias.l1_to_truth;
    return j;
}

MetricsReport report_from_json(const ordered_json& j) {
    MetricsReport report;
    report.accuracy = j.at("accuracy").get<double>();
    report.subsets.many = score_from_json(j.at("many"));
    report.subsets.medium = score_from_json(j.at("medium"));
    report.subsets.few = score_from_json(j.at("few"));
    report.per_class.n_samples = j.at("n_samples").get<int64_t>();
    report.per_class.tp = j.at("tp").get<std::vector<int64_t>>();
    report.per_class.fp = j.at("fp").get<std::vector<int64_t>>();
    report.per_class.fn = j.at("fn").get<std::vector<int64_t>>();
    report.per_class.classes = static_cast<int64_t>(report.per_class.tp.size());
    report.bias.histogram = j.at("prediction_histogram").get<std::vector<int64_t>>();
    report.bias.l1_to_truth = j.at("l1_to_truth").get<double>();
    return report;
}

std::string per_class_csv(const ConfusionStats& stats) {
    std::string out = "class_id,tp,fp,fn,recall,precision\n";
    for (int64_t c = 0; c < stats.classes; ++c) {
        const auto tp = static_cast<double>(stats.tp[static_cast<size_t>(c)]);
        const auto fp = static_cast<double>(stats.fp[static_cast<size_t>(c)]);
        const auto fn = static_cast<double>(stats.fn[static_cast<size_t>(c)]);
        const double recall = (tp + fn > 0.0) ? tp / (tp + fn) : 0.0;
        const double precision = (tp + fp > 0.0) ? tp / (tp + fp) : 0.0;
        out += std::to_string(c);
        out += ',';
        out += std::to_string(stats.tp[static_cast<size_t>(c)]);
        out += ',';
        out += std::to_string(stats.fp[static_cast<size_t>(c)]);
        out += ',';
        out += std::to_string(stats.fn[static_cast<size_t>(c)]);
        out += ',';
        out += format_double(recall);
        out += ',';
        out += format_double(precision);
        out += '\n';
    }
    return out;
}

}  // namespace xerm
