#pragma once

// Flat key = value experiment configuration.  Unknown and duplicate keys are
// errors so a typo cannot silently run the default.  The canonical dump
// (sorted keys, normalised values) feeds the config hash that ties run
// artifacts together.

#include <cstdint>
#include <string>
#include <vector>

#include "xerm/common.hpp"
#include "xerm/model.hpp"

namespace xerm {

enum class DataSource { synthetic, csv_file, raw_file };

struct ExperimentConfig {
    // data
    DataSource dataset = DataSource::synthetic;
    std::string data_path;       // csv/raw sources only
    std::string test_path;       // balanced evaluation pool for file sources
    bool csv_has_header = false;
    int64_t classes = 10;
    int64_t dims = 8;
    int64_t n_head = 500;
    double mu = 0.01;
    double class_sep = 3.0;
    double noise_sd = 1.0;
    int64_t test_per_class = 100;
    bool standardize = true;

    // model
    Arch arch_kind = Arch::mlp1;
    int64_t hidden = 32;

    // optimizer
    double learning_rate = 0.1;
    double momentum = 0.9;
    int64_t batch_size = 32;
    int64_t epochs = 64;
    std::string lr_schedule = "0:1.0,40:0.1,55:0.01";

    // cross-domain objective
    double tau = 1.0;
    double gamma = 2.0;
    bool warm_start = false;  // start the reweighted run from the frozen base instead of fresh

    // evaluation
    std::vector<double> test_mus{0.01};
    int64_t many_threshold = 100;
    int64_t few_threshold = 20;
    bool probe = true;
    int64_t probe_epochs = 32;

    // run
    std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
    std::string out_dir = "runs";
};

// Parses the flat format: '#' comments, blank lines, `key = value`.
// Errors: parse-error, unknown-key, duplicate-key, invalid-config.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Sorted `key=value` lines covering every field.  Parsing the dump yields an
// equal config; the hash is FNV-1a over these bytes.
std::string canonical_config(const ExperimentConfig& config);
uint64_t config_hash(const ExperimentConfig& config);

// Applies one assignment using the same keys and value syntax as the file
// format; unknown keys are errors.  Used by CLI flag overrides.
void set_config_key(ExperimentConfig& config, const std::string& key, const std::string& value);

// Every config key, in declaration order.
std::vector<std::string> config_keys();

// Throws invalid-config on out-of-range fields (empty seeds, classes < 2...).
void validate_config(const ExperimentConfig& config);

// "epoch:multiplier,..." pairs, ascending epochs; used by the optimizer.
std::vector<std::pair<int64_t, double>> parse_lr_schedule(const std::string& text);

}  // namespace xerm
