// Command-line front end for the long-tail lab: data generation, the
// two-stage training pipeline, sweeps, the feature probe, the causal-identity
// verifier, and multi-seed report aggregation.
//
// Exit codes: 0 ok, 1 configuration/input error, 2 runtime or numerical
// failure, 3 verify-causal found an identity violation.

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "xerm/adjust.hpp"
#include "xerm/config.hpp"
#include "xerm/dataset.hpp"
#include "xerm/metrics.hpp"
#include "xerm/model.hpp"
#include "xerm/pipeline.hpp"
#include "xerm/scm.hpp"

namespace {

using namespace xerm;
namespace fs = std::filesystem;

struct CommonArgs {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::string out;
    std::map<std::string, std::string> overrides;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "config file (flat key = value)");
    cmd->add_option("--seed", args.seed, "run only this seed");
    cmd->add_option("--out", args.out, "output directory (overrides out_dir)");
}

// One flag per config key, so `--gamma 4` works like `gamma = 4` in the file.
void add_config_flags(CLI::App* cmd, CommonArgs& args) {
    for (const std::string& key : config_keys()) {
        if (key == "out_dir") {
            continue;  // --out covers it
        }
        cmd->add_option_function<std::string>(
            "--" + key,
            [key, &args](const std::string& value) { args.overrides[key] = value; },
            "override config key '" + key + "'");
    }
}

ExperimentConfig effective_config(const CommonArgs& args) {
    ExperimentConfig config =
        args.config_path.empty() ? ExperimentConfig{} : load_config_file(args.config_path);
    for (const auto& [key, value] : args.overrides) {
        set_config_key(config, key, value);
    }
    if (args.seed) {
        config.seeds = {*args.seed};
    }
    if (!args.out.empty()) {
        config.out_dir = args.out;
    }
    validate_config(config);
    return config;
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::string cur;
    const auto flush = [&] {
        if (cur.empty()) {
            throw Error("parse-error", std::string(what) + ": empty entry");
        }
        char* end = nullptr;
        const double v = std::strtod(cur.c_str(), &end);
        if (end == cur.c_str() || *end != '\0') {
            throw Error("parse-error", std::string(what) + ": bad number '" + cur + "'");
        }
        out.push_back(v);
        cur.clear();
    };
    for (char ch : text) {
        if (ch == ',') {
            flush();
        } else if (ch != ' ') {
            cur += ch;
        }
    }
    flush();
    return out;
}

int cmd_gen_data(const CommonArgs& args, const std::string& format) {
    ExperimentConfig config = effective_config(args);
    if (config.dataset != DataSource::synthetic) {
        throw Error("invalid-config", "gen-data needs a synthetic source");
    }
    const uint64_t seed = config.seeds.front();
    DecayProfile profile{config.n_head, config.classes, config.mu};
    SynthResult synth =
        synth_gaussian_longtail(config.classes, config.dims, profile, config.class_sep,
                                config.noise_sd, config.test_per_class, derive_seed(seed, "data"));

    const fs::path dir(config.out_dir);
    fs::create_directories(dir);
    const bool csv = format == "csv";
    const char* ext = csv ? ".csv" : ".raw";
    if (csv) {
        save_csv(synth.train, dir / "train.csv");
        save_csv(synth.balanced_test, dir / "test.csv");
    } else {
        save_raw_f32(synth.train, dir / "train.raw");
        save_raw_f32(synth.balanced_test, dir / "test.raw");
    }

    char hash_hex[17];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(config_hash(config)));
    ordered_json j;
    j["config_hash"] = hash_hex;
    j["seed"] = seed;
    j["train_counts"] = synth.train.class_counts;
    j["test_counts"] = synth.balanced_test.class_counts;
    j["files"] = {std::string("train") + ext, std::string("test") + ext};
    write_file_atomic(dir / "gen_manifest.json", j.dump(2) + "\n");
    std::cout << "wrote " << (dir / ("train" + std::string(ext))).string() << " ("
              << synth.train.n << " samples), " << (dir / ("test" + std::string(ext))).string()
              << " (" << synth.balanced_test.n << " samples)\n";
    return 0;
}

int cmd_train_xe(const CommonArgs& args) {
    const ExperimentConfig config = effective_config(args);
    for (uint64_t seed : config.seeds) {
        const PreparedData data = prepare_data(config, seed);
        const TrainedModel xe = train_xe(data, config, seed);
        const fs::path dir = fs::path(config.out_dir) / ("seed_" + std::to_string(seed));
        fs::create_directories(dir);
        save_checkpoint_file(xe.params, dir / "xe.ckpt");
        write_file_atomic(dir / "xe_loss.csv", loss_curve_csv(xe.curve));
        ordered_json counts_j = data.train.class_counts;
        write_file_atomic(dir / "train_counts.json", counts_j.dump() + "\n");
        if (data.standardizer) {
            write_file_atomic(dir / "standardizer.json",
                              standardizer_to_json(*data.standardizer).dump(2) + "\n");
        }
        std::cout << "seed " << seed << ": " << (dir / "xe.ckpt").string() << " final loss "
                  << format_double(xe.curve.empty() ? 0.0 : xe.curve.back().mean_loss) << "\n";
    }
    return 0;
}

int cmd_train_xerm(const CommonArgs& args) {
    const ExperimentConfig config = effective_config(args);
    for (uint64_t seed : config.seeds) {
        const RunManifest manifest = run_xerm_pipeline(config, seed);
        std::cout << manifest.path.string() << "\n";
    }
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string data_path;
    std::string format = "raw";
    bool csv_header = false;
    std::string counts_path;
    std::string standardizer_path;
    bool adjusted = false;
    double tau = 1.0;
    int64_t many_threshold = 100;
    int64_t few_threshold = 20;
};

int cmd_eval(const CommonArgs& args, const EvalArgs& eval_args) {
    const Params params = load_checkpoint_file(eval_args.checkpoint);
    const TabularFormat fmt =
        eval_args.format == "csv" ? TabularFormat::csv : TabularFormat::raw_f32;
    LongTailDataset data = load_tabular(eval_args.data_path, fmt, eval_args.csv_header);
    if (!eval_args.standardizer_path.empty()) {
        const ordered_json j = load_manifest(eval_args.standardizer_path);
        standardizer_from_json(j).apply(data);
    }

    std::vector<int64_t> partition_counts = data.class_counts;
    std::optional<ClassPrior> prior;
    if (!eval_args.counts_path.empty()) {
        const ordered_json j = load_manifest(eval_args.counts_path);
        partition_counts = j.get<std::vector<int64_t>>();
        prior = prior_from_counts(partition_counts);
    }
    if (eval_args.adjusted && !prior) {
        throw Error("invalid-config", "--adjusted needs --counts (the training class counts)");
    }
    const SubsetPartition partition =
        partition_subsets(partition_counts, eval_args.many_threshold, eval_args.few_threshold);

    const auto preds = predict_dataset(params, data, eval_args.adjusted ? &*prior : nullptr,
                                       eval_args.tau);
    const MetricsReport report = evaluate(preds, data.labels, data.classes, partition);
    const ordered_json j = report_to_json(report);
    std::cout << j.dump(2) << "\n";
    if (!args.out.empty()) {
        fs::create_directories(args.out);
        write_file_atomic(fs::path(args.out) / "report.json", j.dump(2) + "\n");
        write_file_atomic(fs::path(args.out) / "per_class.csv", per_class_csv(report.per_class));
    }
    return 0;
}

int cmd_sweep_gamma(const CommonArgs& args, const std::string& gammas_text) {
    const ExperimentConfig config = effective_config(args);
    const std::vector<double> gammas = parse_double_list(gammas_text, "--gammas");
    const auto rows = sweep_gamma(config, gammas);
    const std::string csv = sweep_csv(rows, "gamma", config.test_mus);
    fs::create_directories(config.out_dir);
    write_file_atomic(fs::path(config.out_dir) / "sweep_gamma.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_ablate_w(const CommonArgs& args, const std::string& ws_text) {
    const ExperimentConfig config = effective_config(args);
    const std::vector<double> ws = parse_double_list(ws_text, "--ws");
    const auto rows = ablate_constant_w(config, ws);
    const std::string csv = sweep_csv(rows, "w", config.test_mus);
    fs::create_directories(config.out_dir);
    write_file_atomic(fs::path(config.out_dir) / "ablate_w.csv", csv);
    std::cout << csv;
    return 0;
}

int cmd_probe(const CommonArgs& args, const std::string& checkpoint) {
    const ExperimentConfig config = effective_config(args);
    const uint64_t seed = config.seeds.front();
    const PreparedData data = prepare_data(config, seed);
    const Params backbone = load_checkpoint_file(checkpoint);
    const LongTailDataset balanced_train = balanced_train_for_probe(config, seed, data);
    const MetricsReport report =
        feature_probe(backbone, balanced_train, data.balanced_test, data.partition, config,
                      derive_seed(seed, "probe"));
    const ordered_json j = report_to_json(report);
    std::cout << j.dump(2) << "\n";
    fs::create_directories(config.out_dir);
    write_file_atomic(fs::path(config.out_dir) / "probe_report.json", j.dump(2) + "\n");
    return 0;
}

struct VerifyArgs {
    int trials = 1000;
    int max_x = 5;
    int max_y = 5;
    uint64_t seed = 20260821;
    double s1 = -1.0;
    bool uniform_s = false;
};

int cmd_verify_causal(const CommonArgs& args, const VerifyArgs& vargs) {
    ScmGenOptions opts;
    opts.uniform_s = vargs.uniform_s;
    opts.fixed_p_s1 = vargs.s1;
    const CausalCheckSummary main = run_causal_checks(vargs.seed, vargs.trials, vargs.max_x,
                                                      vargs.max_y, opts);
    ScmGenOptions uniform_opts;
    uniform_opts.uniform_s = true;
    const CausalCheckSummary uniform = run_causal_checks(vargs.seed + 1, vargs.trials,
                                                         vargs.max_x, vargs.max_y, uniform_opts);

    bool ok = true;
    const auto row = [&](const char* name, int trials, double worst, bool pass) {
        ok = ok && pass;
        std::printf("%-28s %6d trials   worst dev %.3e   %s\n", name, trials, worst,
                    pass ? "pass" : "FAIL");
    };
    row("backdoor-vs-interventional", main.trials, main.worst_backdoor_dev,
        main.worst_backdoor_dev <= kScmTolerance);
    row("a1-chain-final", main.trials, main.worst_a1_final_dev,
        main.worst_a1_final_dev <= kScmTolerance);
    row("risk-decomposition", main.trials, main.worst_risk_dev,
        main.worst_risk_dev <= kScmTolerance);
    row("propensity-bayes", main.trials, main.worst_propensity_dev,
        main.worst_propensity_dev <= kScmTolerance);
    row("uniform-prior-constant", uniform.trials, uniform.worst_uniform_const_dev,
        uniform.worst_uniform_const_dev <= kScmTolerance);

    const auto control = [&](const char* name, int broken, int confounded) {
        const bool pass = confounded > 0 && broken * 100 >= confounded * 95;
        ok = ok && pass;
        std::printf("%-28s %6d/%d confounded models caught   %s\n", name, broken, confounded,
                    pass ? "pass" : "FAIL");
    };
    control("negative-control-risk", main.risk_control_broken, main.confounded);
    control("negative-control-a1", main.a1_control_broken, main.confounded);

    if (!args.out.empty()) {
        ordered_json j;
        j["trials"] = main.trials;
        j["worst_backdoor_dev"] = main.worst_backdoor_dev;
        j["worst_a1_final_dev"] = main.worst_a1_final_dev;
        j["worst_risk_dev"] = main.worst_risk_dev;
        j["worst_propensity_dev"] = main.worst_propensity_dev;
        j["worst_uniform_const_dev"] = uniform.worst_uniform_const_dev;
        j["confounded"] = main.confounded;
        j["risk_control_broken"] = main.risk_control_broken;
        j["a1_control_broken"] = main.a1_control_broken;
        j["ok"] = ok;
        fs::create_directories(args.out);
        write_file_atomic(fs::path(args.out) / "verify_causal.json", j.dump(2) + "\n");
    }
    return ok ? 0 : 3;
}

int cmd_report(const CommonArgs& args, const std::vector<std::string>& manifest_paths) {
    std::vector<fs::path> paths(manifest_paths.begin(), manifest_paths.end());
    const AggregateReport agg = aggregate_manifests(paths);
    const fs::path dir = args.out.empty() ? fs::path(".") : fs::path(args.out);
    fs::create_directories(dir);
    write_file_atomic(dir / "summary.json", agg.summary.dump(2) + "\n");
    write_file_atomic(dir / "summary.csv", agg.summary_csv);
    write_file_atomic(dir / "histograms.csv", agg.histogram_csv);
    write_file_atomic(dir / "probe.csv", agg.probe_csv);
    std::cout << agg.summary.dump(2) << "\n";
    return 0;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"long-tail lab: reweighted cross-domain training and causal checks"};
    app.require_subcommand(1);

    CommonArgs common;
    std::string gen_format = "raw";
    EvalArgs eval_args;
    std::string gammas_text = "-2,-1,0,1,2,4";
    std::string ws_text = "0,0.25,0.5,0.75,1";
    std::string probe_checkpoint;
    VerifyArgs vargs;
    std::vector<std::string> manifest_paths;

    CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic long-tailed dataset");
    add_common_flags(gen, common);
    add_config_flags(gen, common);
    gen->add_option("--format", gen_format, "file format: raw or csv")
        ->check(CLI::IsMember({"raw", "csv"}));

    CLI::App* txe = app.add_subcommand("train-xe", "train the plain cross-entropy base model");
    add_common_flags(txe, common);
    add_config_flags(txe, common);

    CLI::App* txerm = app.add_subcommand(
        "train-xerm", "run the full pipeline: base model, weights, reweighted model, evals");
    add_common_flags(txerm, common);
    add_config_flags(txerm, common);

    CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset file");
    add_common_flags(ev, common);
    ev->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint")->required();
    ev->add_option("--data", eval_args.data_path, "dataset file")->required();
    ev->add_option("--format", eval_args.format, "dataset format: raw or csv")
        ->check(CLI::IsMember({"raw", "csv"}));
    ev->add_flag("--csv-header", eval_args.csv_header, "CSV file has a header row");
    ev->add_option("--counts", eval_args.counts_path,
                   "training class counts JSON (enables --adjusted, sets the subset partition)");
    ev->add_option("--standardizer", eval_args.standardizer_path,
                   "standardizer.json saved by training");
    ev->add_flag("--adjusted", eval_args.adjusted, "subtract tau * log prior from logits");
    ev->add_option("--tau", eval_args.tau, "adjustment strength");
    ev->add_option("--many-threshold", eval_args.many_threshold, "min count above which a class is 'many'");
    ev->add_option("--few-threshold", eval_args.few_threshold, "count below which a class is 'few'");

    CLI::App* sweep = app.add_subcommand("sweep-gamma", "reweighted runs across gamma values");
    add_common_flags(sweep, common);
    add_config_flags(sweep, common);
    sweep->add_option("--gammas", gammas_text, "comma-separated gamma values");

    CLI::App* ablate = app.add_subcommand("ablate-w", "constant-weight ablation runs");
    add_common_flags(ablate, common);
    add_config_flags(ablate, common);
    ablate->add_option("--ws", ws_text, "comma-separated soft-target weights in [0,1]");

    CLI::App* probe = app.add_subcommand("probe",
                                         "freeze a backbone, retrain the head on balanced data");
    add_common_flags(probe, common);
    add_config_flags(probe, common);
    probe->add_option("--checkpoint", probe_checkpoint, "backbone checkpoint")->required();

    CLI::App* verify = app.add_subcommand("verify-causal",
                                          "check the causal identities on random discrete models");
    add_common_flags(verify, common);
    verify->add_option("--trials", vargs.trials, "number of random models");
    verify->add_option("--max-x", vargs.max_x, "largest |X|");
    verify->add_option("--max-y", vargs.max_y, "largest |Y|");
    verify->add_option("--s1", vargs.s1, "pin P(S=1) to this value in (0,1)");
    verify->add_flag("--uniform-s", vargs.uniform_s, "pin P(S) to (0.5, 0.5)");

    CLI::App* rep = app.add_subcommand("report", "aggregate seed manifests into summary tables");
    add_common_flags(rep, common);
    rep->add_option("manifests", manifest_paths, "manifest.json paths")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    // verify-causal reuses --seed as the trial seed
    if (verify->parsed() && common.seed) {
        vargs.seed = *common.seed;
    }

    if (gen->parsed()) return cmd_gen_data(common, gen_format);
    if (txe->parsed()) return cmd_train_xe(common);
    if (txerm->parsed()) return cmd_train_xerm(common);
    if (ev->parsed()) return cmd_eval(common, eval_args);
    if (sweep->parsed()) return cmd_sweep_gamma(common, gammas_text);
    if (ablate->parsed()) return cmd_ablate_w(common, ws_text);
    if (probe->parsed()) return cmd_probe(common, probe_checkpoint);
    if (verify->parsed()) return cmd_verify_causal(common, vargs);
    if (rep->parsed()) return cmd_report(common, manifest_paths);
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        static const std::set<std::string> config_kinds = {
            "invalid-config", "unknown-key",     "duplicate-key", "parse-error",
            "invalid-argument", "config-mismatch", "missing-manifest", "invalid-profile",
            "invalid-thresholds"};
        return config_kinds.count(e.kind()) != 0 ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
