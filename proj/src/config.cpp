#include "xerm/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

namespace xerm {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) {
        return "";
    }
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const long long v = std::strtoll(value.c_str(), &end, 10);
    if (end == value.c_str() || *end != '\0') {
        throw Error("parse-error", key + ": expected integer, got '" + value + "'");
    }
    return v;
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
    const int64_t v = parse_int(key, value);
    if (v < 0) {
        throw Error("parse-error", key + ": must be non-negative");
    }
    return static_cast<uint64_t>(v);
}

double parse_real(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0') {
        throw Error("parse-error", key + ": expected number, got '" + value + "'");
    }
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") {
        return true;
    }
    if (value == "false" || value == "0") {
        return false;
    }
    throw Error("parse-error", key + ": expected true/false, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : value) {
        if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

// One row per config key: how to read it from text and how to print it
// canonically.  The same table drives parsing, dumping, and hashing.
struct KeySpec {
    const char* name;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<KeySpec>& key_table() {
    static const std::vector<KeySpec> table = {
        {"dataset",
         [](ExperimentConfig& c, const std::string& v) {
             if (v == "synthetic") {
                 c.dataset = DataSource::synthetic;
             } else if (v == "csv") {
                 c.dataset = DataSource::csv_file;
             } else if (v == "raw") {
                 c.dataset = DataSource::raw_file;
             } else {
                 throw Error("parse-error", "dataset: expected synthetic/csv/raw, got '" + v + "'");
             }
         },
         [](const ExperimentConfig& c) -> std::string {
             switch (c.dataset) {
                 case DataSource::synthetic: return "synthetic";
                 case DataSource::csv_file: return "csv";
                 case DataSource::raw_file: return "raw";
             }
             return "synthetic";
         }},
        {"data_path", [](ExperimentConfig& c, const std::string& v) { c.data_path = v; },
         [](const ExperimentConfig& c) { return c.data_path; }},
        {"test_path", [](ExperimentConfig& c, const std::string& v) { c.test_path = v; },
         [](const ExperimentConfig& c) { return c.test_path; }},
        {"csv_has_header",
         [](ExperimentConfig& c, const std::string& v) { c.csv_has_header = parse_bool("csv_has_header", v); },
         [](const ExperimentConfig& c) { return bool_str(c.csv_has_header); }},
        {"classes",
         [](ExperimentConfig& c, const std::string& v) { c.classes = parse_int("classes", v); },
         [](const ExperimentConfig& c) { return std::to_string(c.classes); }},
        {"dims", [](ExperimentConfig& c, const std::string& v) { c.dims = parse_int("dims", v); },
         [](const ExperimentConfig& c) { return std::to_string(c.dims); }},
        {"n_head",
         [](ExperimentConfig& c, const std::string& v) { c.n_head = parse_int("n_head", v); },
         [](const ExperimentConfig& c) { return std::to_string(c.n_head); }},
        {"mu", [](ExperimentConfig& c, const std::string& v) { c.mu = parse_real("mu", v); },
         [](const ExperimentConfig& c) { return format_double(c.mu); }},
        {"class_sep",
         [](ExperimentConfig& c, const std::string& v) { c.class_sep = parse_real("class_sep", v); },
         [](const ExperimentConfig& c) { return format_double(c.class_sep); }},
        {"noise_sd",
         [](ExperimentConfig& c, const std::string& v) { c.noise_sd = parse_real("noise_sd", v); },
         [](const ExperimentConfig& c) { return format_double(c.noise_sd); }},
        {"test_per_class",
         [](ExperimentConfig& c, const std::string& v) { c.test_per_class = parse_int("test_per_class", v); },
         [](const ExperimentConfig& c) { return std::to_string(c.test_per_class); }},
        {"standardize",
         [](ExperimentConfig& c, const std::string& v) { c.standardize = parse_bool("standardize", v); },
         [](const ExperimentConfig& c) { return bool_str(c.standardize); }},
        {"arch",
         [](ExperimentConfig& c, const std::string& v) { c.arch_kind = arch_from_name(v); },
         [](const ExperimentConfig& c) { return std::string(arch_name(c.arch_kind)); }},
        {"hidden",
         [](ExperimentConfig& c, const std::string& v) { c.hidden = parse_int("hidden", v); },
         [](const ExperimentConfig& c) { return std::to_string(c.hidden); }},
        {"learning_rate",
         [](ExperimentConfig& c, const std::string& v) { c.learning_rate = parse_real("learning_rate", v); },
         [](const ExperimentConfig& c) { return format_double(c.learning_rate); }},
        {"momentum",
         [](ExperimentConfig& c, const std::string& v) { c.momentum = parse_real("momentum", v); },
         [](const ExperimentConfig& c) { return format_double(c.momentum); }},
        {"batch_size",
         [](ExperimentConfig& c, const std::string& v) { c.batch_size = parse_int("batch_size", v); },
         [](const ExperimentConfig& c) { return std::to_string(c.batch_size); }},
        {"epochs",
         [](ExperimentConfig& c, const std::string& v) { c.epochs = parse_int("epochs", v); },
         [](const ExperimentConfig& c) { return std::to_string(c.epochs); }},
        {"lr_schedule",
         [](ExperimentConfig& c, const std::string& v) { c.lr_schedule = v; },
         [](const ExperimentConfig& c) { return c.lr_schedule; }},
        {"tau", [](ExperimentConfig& c, const std::string& v) { c.tau = parse_real("tau", v); },
         [](const ExperimentConfig& c) { return format_double(c.tau); }},
        {"gamma", [](ExperimentConfig& c, const std::string& v) { c.gamma = parse_real("gamma", v); },
         [](const ExperimentConfig& c) { return format_double(c.gamma); }},
        {"warm_start",
         [](ExperimentConfig& c, const std::string& v) { c.warm_start = parse_bool("warm_start", v); },
         [](const ExperimentConfig& c) { return bool_str(c.warm_start); }},
        {"test_mus",
         [](ExperimentConfig& c, const std::string& v) {
             c.test_mus.clear();
             for (const std::string& item : split_list(v)) {
                 c.test_mus.push_back(parse_real("test_mus", item));
             }
         },
         [](const ExperimentConfig& c) {
             std::string out;
             for (size_t i = 0; i < c.test_mus.size(); ++i) {
                 if (i) {
                     out += ',';
                 }
                 out += format_double(c.test_mus[i]);
             }
             return out;
         }},
        {"many_threshold",
         [](ExperimentConfig& c, const std::string& v) { c.many_threshold = parse_int("many_threshold", v); },
         [](const ExperimentConfig& c) { return std::to_string(c.many_threshold); }},
        {"few_threshold",
         [](ExperimentConfig& c, const std::string& v) { c.few_threshold = parse_int("few_threshold", v); },
         [](const ExperimentConfig& c) { return std::to_string(c.few_threshold); }},
        {"probe",
         [](ExperimentConfig& c, const std::string& v) { c.probe = parse_bool("probe", v); },
         [](const ExperimentConfig& c) { return bool_str(c.probe); }},
        {"probe_epochs",
         [](ExperimentConfig& c, const std::string& v) { c.probe_epochs = parse_int("probe_epochs", v); },
         [](const ExperimentConfig& c) { return std::to_string(c.probe_epochs); }},
        {"seeds",
         [](ExperimentConfig& c, const std::string& v) {
             c.seeds.clear();
             for (const std::string& item : split_list(v)) {
                 c.seeds.push_back(parse_u64("seeds", item));
             }
         },
         [](const ExperimentConfig& c) {
             std::string out;
             for (size_t i = 0; i < c.seeds.size(); ++i) {
                 if (i) {
                     out += ',';
                 }
                 out += std::to_string(c.seeds[i]);
             }
             return out;
         }},
        {"out_dir", [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; },
         [](const ExperimentConfig& c) { return c.out_dir; }},
    };
    return table;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig config;
    std::map<std::string, bool> seen;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error("parse-error", "line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw Error("parse-error", "line " + std::to_string(line_no) + ": empty key");
        }
        const auto& table = key_table();
        const auto it = std::find_if(table.begin(), table.end(),
                                     [&](const KeySpec& spec) { return key == spec.name; });
        if (it == table.end()) {
            throw Error("unknown-key", "line " + std::to_string(line_no) + ": '" + key + "'");
        }
        if (seen[key]) {
            throw Error("duplicate-key", "line " + std::to_string(line_no) + ": '" + key + "'");
        }
        seen[key] = true;
        it->set(config, value);
    }
    validate_config(config);
    return config;
}

ExperimentConfig load_config_file(const std::string& path) {
    return parse_config(read_text_file(path));
}

void set_config_key(ExperimentConfig& config, const std::string& key, const std::string& value) {
    const auto& table = key_table();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const KeySpec& spec) { return key == spec.name; });
    if (it == table.end()) {
        throw Error("unknown-key", "'" + key + "'");
    }
    it->set(config, value);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const KeySpec& spec : key_table()) {
        keys.emplace_back(spec.name);
    }
    return keys;
}

std::string canonical_config(const ExperimentConfig& config) {
    std::vector<std::string> lines;
    for (const KeySpec& spec : key_table()) {
        lines.push_back(std::string(spec.name) + "=" + spec.get(config));
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const std::string& line : lines) {
        out += line;
        out += '\n';
    }
    return out;
}

uint64_t config_hash(const ExperimentConfig& config) {
    return fnv1a64(canonical_config(config));
}

void validate_config(const ExperimentConfig& config) {
    if (config.seeds.empty()) {
        throw Error("invalid-config", "seeds must be non-empty");
    }
    if (config.classes < 2) {
        throw Error("invalid-config", "classes must be >= 2");
    }
    if (config.dims < 1) {
        throw Error("invalid-config", "dims must be >= 1");
    }
    if (config.dataset == DataSource::synthetic) {
        if (config.n_head < 1 || !(config.mu > 0.0) || config.mu > 1.0) {
            throw Error("invalid-config", "synthetic data needs n_head >= 1 and mu in (0, 1]");
        }
        if (config.test_per_class < 1) {
            throw Error("invalid-config", "test_per_class must be >= 1");
        }
    } else if (config.data_path.empty()) {
        throw Error("invalid-config", "file-backed dataset needs data_path");
    }
    if (config.arch_kind == Arch::mlp1 && config.hidden < 1) {
        throw Error("invalid-config", "hidden must be >= 1 for mlp1");
    }
    if (!(config.learning_rate > 0.0)) {
        throw Error("invalid-config", "learning_rate must be > 0");
    }
    if (config.momentum < 0.0 || config.momentum >= 1.0) {
        throw Error("invalid-config", "momentum must lie in [0, 1)");
    }
    if (config.batch_size < 1 || config.epochs < 0) {
        throw Error("invalid-config", "batch_size >= 1 and epochs >= 0 required");
    }
    if (config.tau < 0.0) {
        throw Error("invalid-config", "tau must be >= 0");
    }
    for (double mu : config.test_mus) {
        if (!(mu > 0.0) || mu > 1.0) {
            throw Error("invalid-config", "test_mus entries must lie in (0, 1]");
        }
    }
    if (config.many_threshold < config.few_threshold || config.few_threshold < 1) {
        throw Error("invalid-config", "need many_threshold >= few_threshold >= 1");
    }
    if (config.probe && config.probe_epochs < 1) {
        throw Error("invalid-config", "probe_epochs must be >= 1 when probing");
    }
    parse_lr_schedule(config.lr_schedule);
}

std::vector<std::pair<int64_t, double>> parse_lr_schedule(const std::string& text) {
    std::vector<std::pair<int64_t, double>> out;
    for (const std::string& item : split_list(text)) {
        if (item.empty()) {
            throw Error("parse-error", "lr_schedule: empty entry");
        }
        const size_t colon = item.find(':');
        if (colon == std::string::npos) {
            throw Error("parse-error", "lr_schedule: expected epoch:multiplier in '" + item + "'");
        }
        const int64_t epoch = parse_int("lr_schedule", trim(item.substr(0, colon)));
        const double mult = parse_real("lr_schedule", trim(item.substr(colon + 1)));
        if (epoch < 0 || !(mult > 0.0)) {
            throw Error("parse-error", "lr_schedule: epoch >= 0 and multiplier > 0 required");
        }
        if (!out.empty() && epoch <= out.back().first) {
            throw Error("parse-error", "lr_schedule: epochs must strictly increase");
        }
        out.emplace_back(epoch, mult);
    }
    if (out.empty() || out.front().first != 0) {
        throw Error("parse-error", "lr_schedule: must start at epoch 0");
    }
    return out;
}

}  // namespace xerm
