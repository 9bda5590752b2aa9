#include "xerm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace xerm {

namespace {

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void add_into(Grads& acc, const Grads& g) {
    for (size_t i = 0; i < g.w1.size(); ++i) acc.w1[i] += g.w1[i];
    for (size_t i = 0; i < g.b1.size(); ++i) acc.b1[i] += g.b1[i];
    for (size_t i = 0; i < g.w2.size(); ++i) acc.w2[i] += g.w2[i];
    for (size_t i = 0; i < g.b2.size(); ++i) acc.b2[i] += g.b2[i];
}

LossGrad xe_objective(std::span<const double> logits, int64_t label) {
    const std::vector<double> probs = softmax(logits);
    LossGrad out;
    out.loss = cross_entropy(probs, label);
    out.grad_logits.assign(probs.begin(), probs.end());
    out.grad_logits[static_cast<size_t>(label)] -= 1.0;
    return out;
}

}  // namespace

TrainOptions train_options_from(const ExperimentConfig& config, uint64_t seed) {
    TrainOptions opts;
    opts.learning_rate = config.learning_rate;
    opts.momentum = config.momentum;
    opts.batch_size = config.batch_size;
    opts.epochs = config.epochs;
    opts.schedule = parse_lr_schedule(config.lr_schedule);
    opts.shuffle_seed = seed;
    return opts;
}

std::vector<EpochLoss> train_model(Params& params, const LongTailDataset& data,
                                   const TrainOptions& opts, const SampleObjective& objective) {
    if (data.n < 1) {
        throw Error("invalid-argument", "empty training set");
    }
    auto state = OptimizerState::make(params, opts.learning_rate, opts.momentum, opts.schedule);
    Rng shuffle_rng(derive_seed(opts.shuffle_seed, "shuffle"));
    std::vector<int64_t> order(static_cast<size_t>(data.n));
    std::iota(order.begin(), order.end(), 0);

    std::vector<EpochLoss> curve;
    curve.reserve(static_cast<size_t>(opts.epochs));
    Grads acc;
    for (int64_t epoch = 0; epoch < opts.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (int64_t start = 0; start < data.n; start += opts.batch_size) {
            const int64_t stop = std::min(data.n, start + opts.batch_size);
            acc.resize_like_zero(static_cast<int64_t>(params.w1.size()),
                                 static_cast<int64_t>(params.b1.size()),
                                 static_cast<int64_t>(params.w2.size()),
                                 static_cast<int64_t>(params.b2.size()));
            for (int64_t k = start; k < stop; ++k) {
                const int64_t idx = order[static_cast<size_t>(k)];
                const auto x = data.row(idx);
                const std::vector<double> logits = forward_logits(params, x);
                LossGrad lg = objective(logits, idx);
                if (!std::isfinite(lg.loss)) {
                    throw Error("divergence", "non-finite loss at epoch " + std::to_string(epoch) +
                                                  ", sample " + std::to_string(idx));
                }
                loss_sum += lg.loss;
                add_into(acc, backward(params, x, lg.grad_logits));
            }
            acc.scale(1.0 / static_cast<double>(stop - start));
            sgd_step(params, acc, state, epoch, opts.head_only);
        }
        curve.push_back({epoch, loss_sum / static_cast<double>(data.n)});
    }
    return curve;
}

std::string loss_curve_csv(const std::vector<EpochLoss>& curve) {
    std::string out = "epoch,mean_loss\n";
    for (const EpochLoss& e : curve) {
        out += std::to_string(e.epoch);
        out += ',';
        out += format_double(e.mean_loss);
        out += '\n';
    }
    return out;
}

PreparedData prepare_data(const ExperimentConfig& config, uint64_t seed) {
    validate_config(config);
    PreparedData out;
    if (config.dataset == DataSource::synthetic) {
        DecayProfile profile{config.n_head, config.classes, config.mu};
        SynthResult synth =
            synth_gaussian_longtail(config.classes, config.dims, profile, config.class_sep,
                                    config.noise_sd, config.test_per_class,
                                    derive_seed(seed, "data"));
        out.train = std::move(synth.train);
        out.balanced_test = std::move(synth.balanced_test);
    } else {
        const TabularFormat fmt =
            config.dataset == DataSource::csv_file ? TabularFormat::csv : TabularFormat::raw_f32;
        if (config.test_path.empty()) {
            throw Error("invalid-config", "file-backed pipeline needs test_path");
        }
        out.train = load_tabular(config.data_path, fmt, config.csv_has_header);
        out.balanced_test = load_tabular(config.test_path, fmt, config.csv_has_header);
        if (out.train.classes != out.balanced_test.classes ||
            out.train.dims != out.balanced_test.dims) {
            throw Error("shape-mismatch", "train and test files disagree on dims or classes");
        }
    }
    if (config.standardize) {
        Standardizer st = fit_standardizer(out.train);
        st.apply(out.train);
        st.apply(out.balanced_test);
        out.standardizer = st;
    }
    out.partition = partition_subsets(out.train.class_counts, config.many_threshold,
                                      config.few_threshold);
    return out;
}

ordered_json standardizer_to_json(const Standardizer& st) {
    ordered_json j;
    j["mean"] = st.mean;
    j["inv_sd"] = st.inv_sd;
    return j;
}

Standardizer standardizer_from_json(const ordered_json& j) {
    Standardizer st;
    st.mean = j.at("mean").get<std::vector<double>>();
    st.inv_sd = j.at("inv_sd").get<std::vector<double>>();
    if (st.mean.size() != st.inv_sd.size()) {
        throw Error("shape-mismatch", "standardizer mean and inv_sd lengths differ");
    }
    return st;
}

LongTailDataset balanced_train_for_probe(const ExperimentConfig& config, uint64_t seed,
                                         const PreparedData& data) {
    if (config.dataset != DataSource::synthetic) {
        throw Error("invalid-config", "the probe needs a synthetic source");
    }
    DecayProfile profile{config.n_head, config.classes, 1.0};
    SynthResult synth = synth_gaussian_longtail(config.classes, config.dims, profile,
                                                config.class_sep, config.noise_sd, 1,
                                                derive_seed(seed, "data"));
    LongTailDataset balanced = std::move(synth.train);
    if (data.standardizer) {
        data.standardizer->apply(balanced);
    }
    return balanced;
}

TrainedModel train_xe(const PreparedData& data, const ExperimentConfig& config, uint64_t seed) {
    TrainedModel out;
    out.params = init_params<float>(config.arch_kind, data.train.dims,
                                    config.arch_kind == Arch::mlp1 ? config.hidden : 0,
                                    data.train.classes, derive_seed(seed, "xe-init"));
    const TrainOptions opts = train_options_from(config, derive_seed(seed, "xe"));
    const auto& labels = data.train.labels;
    out.curve = train_model(out.params, data.train, opts,
                            [&labels](std::span<const double> logits, int64_t i) {
                                return xe_objective(logits, labels[static_cast<size_t>(i)]);
                            });
    return out;
}

TrainedModel train_xerm_model(const PreparedData& data, const ExperimentConfig& config,
                              uint64_t seed, const Params& warm_from,
                              const PrecomputeResult& weights) {
    if (static_cast<int64_t>(weights.weights.rows.size()) != data.train.n) {
        throw Error("length-mismatch", "weights do not cover the training set");
    }
    TrainedModel out;
    if (config.warm_start) {
        out.params = warm_from;
    } else {
        out.params = init_params<float>(config.arch_kind, data.train.dims,
                                        config.arch_kind == Arch::mlp1 ? config.hidden : 0,
                                        data.train.classes, derive_seed(seed, "xerm-init"));
    }
    const TrainOptions opts = train_options_from(config, derive_seed(seed, "xerm"));
    const auto& labels = data.train.labels;
    out.curve = train_model(
        out.params, data.train, opts,
        [&labels, &weights](std::span<const double> logits, int64_t i) {
            const WeightRow& row = weights.weights.rows[static_cast<size_t>(i)];
            return xerm_loss(logits, labels[static_cast<size_t>(i)], weights.targets.row(i),
                             row.w_f, row.w_cf);
        });
    return out;
}

TrainedModel train_constant_w(const PreparedData& data, const ExperimentConfig& config,
                              uint64_t seed, const SoftTargets& targets, double w) {
    if (targets.classes != data.train.classes ||
        static_cast<int64_t>(targets.probs.size()) != data.train.n * data.train.classes) {
        throw Error("length-mismatch", "soft targets do not cover the training set");
    }
    TrainedModel out;
    out.params = init_params<float>(config.arch_kind, data.train.dims,
                                    config.arch_kind == Arch::mlp1 ? config.hidden : 0,
                                    data.train.classes, derive_seed(seed, "xerm-init"));
    const TrainOptions opts = train_options_from(config, derive_seed(seed, "xerm"));
    const auto& labels = data.train.labels;
    out.curve = train_model(out.params, data.train, opts,
                            [&labels, &targets, w](std::span<const double> logits, int64_t i) {
                                return kd_constant_loss(logits, labels[static_cast<size_t>(i)],
                                                        targets.row(i), w);
                            });
    return out;
}

std::vector<int32_t> predict_dataset(const Params& params, const LongTailDataset& data,
                                     const ClassPrior* prior, double tau) {
    std::vector<int32_t> preds(static_cast<size_t>(data.n));
    for (int64_t i = 0; i < data.n; ++i) {
        std::vector<double> logits = forward_logits(params, data.row(i));
        if (prior != nullptr) {
            logits = adjust_logits(logits, *prior, tau);
        }
        const auto best = std::max_element(logits.begin(), logits.end());
        preds[static_cast<size_t>(i)] = static_cast<int32_t>(best - logits.begin());
    }
    return preds;
}

LongTailDataset imbalanced_suite(const LongTailDataset& pool,
                                 const std::vector<int64_t>& train_counts, double mu,
                                 uint64_t seed) {
    const int64_t head =
        *std::min_element(pool.class_counts.begin(), pool.class_counts.end());
    DecayProfile profile{head, pool.classes, mu};
    return subsample_longtail(pool, profile, train_counts, seed);
}

namespace {

ordered_json suite_eval_json(const LongTailDataset& suite, double mu,
                             const std::vector<std::pair<std::string, MetricsReport>>& reports) {
    ordered_json j;
    j["mu"] = mu;
    j["n_samples"] = suite.n;
    j["class_counts"] = suite.class_counts;
    ordered_json models;
    for (const auto& [name, report] : reports) {
        models[name] = report_to_json(report);
    }
    j["models"] = models;
    return j;
}

std::vector<std::string> partition_names(const SubsetPartition& partition) {
    std::vector<std::string> names;
    names.reserve(partition.assignment.size());
    for (Subset s : partition.assignment) {
        switch (s) {
            case Subset::many: names.emplace_back("many"); break;
            case Subset::medium: names.emplace_back("medium"); break;
            case Subset::few: names.emplace_back("few"); break;
        }
    }
    return names;
}

}  // namespace

RunManifest run_xerm_pipeline(const ExperimentConfig& config, uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    namespace fs = std::filesystem;
    const fs::path dir = fs::path(config.out_dir) / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);

    PreparedData data = prepare_data(config, seed);
    if (data.standardizer) {
        write_file_atomic(dir / "standardizer.json",
                          standardizer_to_json(*data.standardizer).dump(2) + "\n");
    }

    TrainedModel xe = train_xe(data, config, seed);
    save_checkpoint_file(xe.params, dir / "xe.ckpt");
    write_file_atomic(dir / "xe_loss.csv", loss_curve_csv(xe.curve));

    const ClassPrior prior = estimate_prior(data.train);
    PrecomputeResult pre =
        precompute_sample_weights(data.train, xe.params, prior, config.tau, config.gamma);
    write_file_atomic(dir / "weights.csv", sample_weights_to_csv(pre.weights));

    TrainedModel xerm = train_xerm_model(data, config, seed, xe.params, pre);
    save_checkpoint_file(xerm.params, dir / "xerm.ckpt");
    write_file_atomic(dir / "xerm_loss.csv", loss_curve_csv(xerm.curve));

    ordered_json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["config_hash"] = hex64(config_hash(config));
    manifest["config"] = canonical_config(config);
    manifest["seed"] = seed;
    manifest["timestamp"] = iso8601_utc_now();
    manifest["wall_clock_sec"] = 0.0;  // patched below

    ordered_json data_j;
    data_j["train_counts"] = data.train.class_counts;
    data_j["test_pool_counts"] = data.balanced_test.class_counts;
    data_j["standardized"] = config.standardize;
    data_j["partition"] = partition_names(data.partition);
    manifest["data"] = data_j;

    double mean_w_f = 0.0;
    for (const WeightRow& row : pre.weights.rows) {
        mean_w_f += row.w_f;
    }
    mean_w_f /= static_cast<double>(pre.weights.rows.empty() ? 1 : pre.weights.rows.size());

    ordered_json stages;
    stages["xe"] = {{"checkpoint", "xe.ckpt"},
                    {"loss_curve", "xe_loss.csv"},
                    {"final_mean_loss", xe.curve.empty() ? 0.0 : xe.curve.back().mean_loss}};
    stages["weights"] = {{"csv", "weights.csv"},
                         {"gamma", config.gamma},
                         {"tau", config.tau},
                         {"mean_w_f", mean_w_f}};
    stages["xerm"] = {{"checkpoint", "xerm.ckpt"},
                      {"loss_curve", "xerm_loss.csv"},
                      {"warm_start", config.warm_start},
                      {"final_mean_loss", xerm.curve.empty() ? 0.0 : xerm.curve.back().mean_loss}};
    manifest["stages"] = stages;

    const auto eval_suite = [&](const LongTailDataset& suite) {
        std::vector<std::pair<std::string, MetricsReport>> reports;
        const auto xe_preds = predict_dataset(xe.params, suite);
        reports.emplace_back("xe", evaluate(xe_preds, suite.labels, suite.classes, data.partition));
        const auto pc_preds = predict_dataset(xe.params, suite, &prior, config.tau);
        reports.emplace_back("pc", evaluate(pc_preds, suite.labels, suite.classes, data.partition));
        const auto xerm_preds = predict_dataset(xerm.params, suite);
        reports.emplace_back("xerm",
                             evaluate(xerm_preds, suite.labels, suite.classes, data.partition));
        return reports;
    };

    ordered_json evals;
    {
        const auto reports = eval_suite(data.balanced_test);
        evals["balanced"] = suite_eval_json(data.balanced_test, 1.0, reports);
        for (const auto& [name, report] : reports) {
            write_file_atomic(dir / ("eval_balanced_" + name + ".csv"),
                              per_class_csv(report.per_class));
        }
    }
    for (double mu : config.test_mus) {
        const std::string mu_str = format_double(mu);
        LongTailDataset suite = imbalanced_suite(data.balanced_test, data.train.class_counts, mu,
                                                 derive_seed(seed, "suite-" + mu_str));
        const auto reports = eval_suite(suite);
        const std::string key = "imbalanced_mu_" + mu_str;
        evals[key] = suite_eval_json(suite, mu, reports);
        for (const auto& [name, report] : reports) {
            write_file_atomic(dir / ("eval_" + key + "_" + name + ".csv"),
                              per_class_csv(report.per_class));
        }
    }
    manifest["evaluations"] = evals;

    if (config.probe) {
        const LongTailDataset balanced_train = balanced_train_for_probe(config, seed, data);
        const uint64_t probe_seed = derive_seed(seed, "probe");
        ordered_json probe_j;
        probe_j["xe"] = report_to_json(feature_probe(xe.params, balanced_train,
                                                     data.balanced_test, data.partition, config,
                                                     probe_seed));
        probe_j["xerm"] = report_to_json(feature_probe(xerm.params, balanced_train,
                                                       data.balanced_test, data.partition, config,
                                                       probe_seed));
        manifest["probe"] = probe_j;
    } else {
        manifest["probe"] = nullptr;
    }

    const auto t1 = std::chrono::steady_clock::now();
    manifest["wall_clock_sec"] = std::chrono::duration<double>(t1 - t0).count();

    RunManifest out;
    out.json = manifest;
    out.path = dir / "manifest.json";
    write_file_atomic(out.path, manifest.dump(2) + "\n");
    return out;
}

namespace {

double suite_accuracy(const Params& params, const LongTailDataset& suite,
                      const SubsetPartition& partition) {
    const auto preds = predict_dataset(params, suite);
    return evaluate(preds, suite.labels, suite.classes, partition).accuracy;
}

std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::vector<double>& knobs,
                                bool knob_is_gamma) {
    validate_config(config);
    std::vector<SweepRow> rows;
    for (uint64_t seed : config.seeds) {
        PreparedData data = prepare_data(config, seed);
        const TrainedModel xe = train_xe(data, config, seed);
        const std::vector<uint8_t> xe_bytes = save_checkpoint(xe.params);
        const uint64_t xe_hash = fnv1a64(std::string_view(
            reinterpret_cast<const char*>(xe_bytes.data()), xe_bytes.size()));
        const ClassPrior prior = estimate_prior(data.train);

        std::vector<LongTailDataset> suites;
        for (double mu : config.test_mus) {
            suites.push_back(imbalanced_suite(data.balanced_test, data.train.class_counts, mu,
                                              derive_seed(seed, "suite-" + format_double(mu))));
        }

        // Targets do not depend on the knob; weights do only for gamma.
        PrecomputeResult pre = precompute_sample_weights(data.train, xe.params, prior, config.tau,
                                                         config.gamma);
        for (double knob : knobs) {
            TrainedModel model;
            if (knob_is_gamma) {
                ExperimentConfig row_config = config;
                row_config.gamma = knob;
                PrecomputeResult row_pre = precompute_sample_weights(
                    data.train, xe.params, prior, config.tau, knob);
                model = train_xerm_model(data, row_config, seed, xe.params, row_pre);
            } else {
                model = train_constant_w(data, config, seed, pre.targets, knob);
            }
            SweepRow row;
            row.knob = knob;
            row.seed = seed;
            row.xe_checkpoint_hash = xe_hash;
            row.balanced_accuracy = suite_accuracy(model.params, data.balanced_test,
                                                   data.partition);
            for (const LongTailDataset& suite : suites) {
                row.imbalanced_accuracy.push_back(
                    suite_accuracy(model.params, suite, data.partition));
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace

std::vector<SweepRow> sweep_gamma(const ExperimentConfig& config,
                                  const std::vector<double>& gammas) {
    if (gammas.empty()) {
        throw Error("invalid-argument", "no gamma values given");
    }
    return run_sweep(config, gammas, true);
}

std::vector<SweepRow> ablate_constant_w(const ExperimentConfig& config,
                                        const std::vector<double>& ws) {
    if (ws.empty()) {
        throw Error("invalid-argument", "no weight values given");
    }
    for (double w : ws) {
        if (w < 0.0 || w > 1.0) {
            throw Error("invalid-argument", "constant weights must lie in [0, 1]");
        }
    }
    return run_sweep(config, ws, false);
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& knob_name,
                      const std::vector<double>& mus) {
    std::string out = knob_name + ",seed,acc_balanced";
    for (double mu : mus) {
        out += ",acc_mu_" + format_double(mu);
    }
    out += ",xe_checkpoint_hash\n";
    for (const SweepRow& row : rows) {
        out += format_double(row.knob);
        out += ',';
        out += std::to_string(row.seed);
        out += ',';
        out += format_double(row.balanced_accuracy);
        for (double acc : row.imbalanced_accuracy) {
            out += ',';
            out += format_double(acc);
        }
        out += ',';
        out += hex64(row.xe_checkpoint_hash);
        out += '\n';
    }
    return out;
}

MetricsReport feature_probe(const Params& backbone, const LongTailDataset& balanced_train,
                            const LongTailDataset& balanced_test,
                            const SubsetPartition& partition, const ExperimentConfig& config,
                            uint64_t seed) {
    if (backbone.arch != Arch::mlp1) {
        throw Error("no-feature-layer", "probe needs a hidden layer to freeze");
    }
    Params probe_params = backbone;
    reinit_head(probe_params, seed);

    TrainOptions opts = train_options_from(config, derive_seed(seed, "probe-train"));
    opts.epochs = config.probe_epochs;
    opts.head_only = true;

    const auto& labels = balanced_train.labels;
    train_model(probe_params, balanced_train, opts,
                [&labels](std::span<const double> logits, int64_t i) {
                    return xe_objective(logits, labels[static_cast<size_t>(i)]);
                });
    const auto preds = predict_dataset(probe_params, balanced_test);
    return evaluate(preds, balanced_test.labels, balanced_test.classes, partition);
}

// ---- aggregation ----

ordered_json load_manifest(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) {
        throw Error("missing-manifest", path.string());
    }
    const std::string text = read_text_file(path);
    ordered_json j = ordered_json::parse(text, nullptr, false);
    if (j.is_discarded()) {
        throw Error("parse-error", "manifest " + path.string() + " is not valid JSON");
    }
    return j;
}

namespace {

struct Moments {
    std::vector<double> values;

    double mean() const {
        double sum = 0.0;
        for (double v : values) sum += v;
        return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
    }
    double std_dev() const {
        if (values.size() < 2) {
            return 0.0;
        }
        const double m = mean();
        double acc = 0.0;
        for (double v : values) acc += (v - m) * (v - m);
        return std::sqrt(acc / static_cast<double>(values.size()));
    }
};

// metric name -> value, skipping absent subsets.
std::vector<std::pair<std::string, double>> flatten_report(const ordered_json& report) {
    std::vector<std::pair<std::string, double>> out;
    out.emplace_back("accuracy", report.at("accuracy").get<double>());
    for (const char* subset : {"many", "medium", "few"}) {
        const ordered_json& s = report.at(subset);
        if (s.is_null()) {
            continue;
        }
        out.emplace_back(std::string(subset) + "_recall", s.at("recall").get<double>());
        out.emplace_back(std::string(subset) + "_precision", s.at("precision").get<double>());
        out.emplace_back(std::string(subset) + "_f1", s.at("f1").get<double>());
    }
    out.emplace_back("l1_to_truth", report.at("l1_to_truth").get<double>());
    return out;
}

}  // namespace

AggregateReport aggregate_manifests(const std::vector<std::filesystem::path>& paths) {
    if (paths.empty()) {
        throw Error("missing-manifest", "no manifest paths given");
    }
    std::vector<ordered_json> manifests;
    manifests.reserve(paths.size());
    for (const auto& path : paths) {
        manifests.push_back(load_manifest(path));
    }
    const std::string hash = manifests.front().at("config_hash").get<std::string>();
    for (size_t i = 1; i < manifests.size(); ++i) {
        if (manifests[i].at("config_hash").get<std::string>() != hash) {
            throw Error("config-mismatch", paths[i].string() + " was run under a different config");
        }
    }

    AggregateReport out;
    out.summary["config_hash"] = hash;
    out.summary["n_runs"] = manifests.size();
    {
        std::vector<uint64_t> seeds;
        for (const auto& m : manifests) {
            seeds.push_back(m.at("seed").get<uint64_t>());
        }
        out.summary["seeds"] = seeds;
    }

    out.summary_csv = "suite,model,metric,mean,std,n\n";
    out.histogram_csv = "suite,model,class_id,mean_pred_freq,true_freq\n";
    ordered_json suites_j;
    const ordered_json& first_evals = manifests.front().at("evaluations");
    for (auto it = first_evals.begin(); it != first_evals.end(); ++it) {
        const std::string& suite_name = it.key();
        ordered_json suite_j;
        const ordered_json& first_models = it.value().at("models");
        for (auto mit = first_models.begin(); mit != first_models.end(); ++mit) {
            const std::string& model_name = mit.key();
            // metric order comes from the first manifest's report
            std::vector<std::pair<std::string, Moments>> metrics;
            for (const auto& [metric, value] : flatten_report(mit.value())) {
                metrics.push_back({metric, Moments{{value}}});
            }
            for (size_t i = 1; i < manifests.size(); ++i) {
                const ordered_json& report =
                    manifests[i].at("evaluations").at(suite_name).at("models").at(model_name);
                const auto flat = flatten_report(report);
                if (flat.size() != metrics.size()) {
                    throw Error("config-mismatch",
                                "manifests disagree on which subsets are populated");
                }
                for (size_t k = 0; k < flat.size(); ++k) {
                    metrics[k].second.values.push_back(flat[k].second);
                }
            }
            ordered_json model_j;
            for (const auto& [metric, moments] : metrics) {
                model_j[metric] = {{"mean", moments.mean()}, {"std", moments.std_dev()}};
                out.summary_csv += suite_name + "," + model_name + "," + metric + "," +
                                   format_double(moments.mean()) + "," +
                                   format_double(moments.std_dev()) + "," +
                                   std::to_string(moments.values.size()) + "\n";
            }
            suite_j[model_name] = model_j;

            // class histograms, normalized per run then averaged
            const auto counts =
                it.value().at("class_counts").get<std::vector<int64_t>>();
            const auto n_samples = static_cast<double>(it.value().at("n_samples").get<int64_t>());
            std::vector<double> mean_pred(counts.size(), 0.0);
            for (const auto& m : manifests) {
                const auto hist = m.at("evaluations")
                                      .at(suite_name)
                                      .at("models")
                                      .at(model_name)
                                      .at("prediction_histogram")
                                      .get<std::vector<int64_t>>();
                for (size_t c = 0; c < hist.size(); ++c) {
                    mean_pred[c] += static_cast<double>(hist[c]) / n_samples;
                }
            }
            for (size_t c = 0; c < counts.size(); ++c) {
                mean_pred[c] /= static_cast<double>(manifests.size());
                out.histogram_csv += suite_name + "," + model_name + "," + std::to_string(c) +
                                     "," + format_double(mean_pred[c]) + "," +
                                     format_double(static_cast<double>(counts[c]) / n_samples) +
                                     "\n";
            }
        }
        suites_j[suite_name] = suite_j;
    }
    out.summary["suites"] = suites_j;

    out.probe_csv = "model,metric,mean,std,n\n";
    if (!manifests.front().at("probe").is_null()) {
        ordered_json probe_j;
        for (const char* model_name : {"xe", "xerm"}) {
            Moments acc;
            for (const auto& m : manifests) {
                acc.values.push_back(
                    m.at("probe").at(model_name).at("accuracy").get<double>());
            }
            probe_j[model_name] = {{"mean", acc.mean()}, {"std", acc.std_dev()}};
            out.probe_csv += std::string(model_name) + ",accuracy," + format_double(acc.mean()) +
                             "," + format_double(acc.std_dev()) + "," +
                             std::to_string(acc.values.size()) + "\n";
        }
        out.summary["probe"] = probe_j;
    } else {
        out.summary["probe"] = nullptr;
    }
    return out;
}

}  // namespace xerm
