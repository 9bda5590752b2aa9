#include "xerm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace xerm {

void LongTailDataset::recount_and_validate() {
    if (classes < 1) {
        throw Error("invalid-dataset", "classes must be >= 1");
    }
    if (static_cast<int64_t>(labels.size()) != n ||
        static_cast<int64_t>(features.size()) != n * dims) {
        throw Error("invalid-dataset", "feature/label sizes inconsistent with n, dims");
    }
    class_counts.assign(classes, 0);
    for (int64_t i = 0; i < n; ++i) {
        const int32_t y = labels[i];
        if (y < 0 || y >= classes) {
            throw Error("invalid-dataset",
                        "label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
        }
        ++class_counts[y];
    }
    for (int64_t c = 0; c < classes; ++c) {
        if (class_counts[c] == 0) {
            throw Error("empty-class", "class " + std::to_string(c) + " has no samples");
        }
    }
}

const char* subset_name(Subset s) {
    switch (s) {
        case Subset::many: return "many";
        case Subset::medium: return "medium";
        case Subset::few: return "few";
    }
    return "?";
}

std::vector<int64_t> decay_counts(const DecayProfile& profile) {
    if (profile.classes < 2) {
        throw Error("invalid-profile", "need at least 2 classes");
    }
    if (profile.n_head < 1) {
        throw Error("invalid-profile", "n_head must be >= 1");
    }
    if (!(profile.mu > 0.0) || profile.mu > 1.0) {
        throw Error("invalid-profile", "mu must be in (0, 1]");
    }
    std::vector<int64_t> counts(profile.classes);
    const double c1 = static_cast<double>(profile.classes - 1);
    for (int64_t i = 0; i < profile.classes; ++i) {
        const double raw = static_cast<double>(profile.n_head) *
                           std::pow(profile.mu, static_cast<double>(i) / c1);
        counts[i] = std::max<int64_t>(1, static_cast<int64_t>(std::floor(raw)));
    }
    return counts;
}

namespace {

// Rank classes by descending train count, ties by ascending class id.
// Empty counts (all-equal) degrade to identity order.
std::vector<int64_t> rank_classes(int64_t classes, const std::vector<int64_t>& train_counts) {
    std::vector<int64_t> order(classes);
    std::iota(order.begin(), order.end(), 0);
    if (!train_counts.empty()) {
        if (static_cast<int64_t>(train_counts.size()) != classes) {
            throw Error("invalid-argument", "train_counts length does not match class count");
        }
        std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
            if (train_counts[a] != train_counts[b]) return train_counts[a] > train_counts[b];
            return a < b;
        });
    }
    return order;
}

}  // namespace

LongTailDataset subsample_longtail(const LongTailDataset& balanced, const DecayProfile& profile,
                                   const std::vector<int64_t>& train_counts, uint64_t seed) {
    if (profile.classes != balanced.classes) {
        throw Error("invalid-profile", "profile class count does not match dataset");
    }
    const std::vector<int64_t> target = decay_counts(profile);
    const std::vector<int64_t> order = rank_classes(balanced.classes, train_counts);

    std::vector<std::vector<int64_t>> per_class(balanced.classes);
    for (int64_t i = 0; i < balanced.n; ++i) {
        per_class[balanced.labels[i]].push_back(i);
    }

    Rng rng(seed);
    std::vector<int64_t> keep;
    for (int64_t rank = 0; rank < balanced.classes; ++rank) {
        const int64_t cls = order[rank];
        const int64_t want = target[rank];
        auto& pool = per_class[cls];
        if (static_cast<int64_t>(pool.size()) < want) {
            throw Error("insufficient-samples",
                        "class " + std::to_string(cls) + " has " + std::to_string(pool.size()) +
                            " samples, profile requires " + std::to_string(want));
        }
        // Partial Fisher-Yates: the first `want` slots are a uniform draw
        // without replacement.
        for (int64_t k = 0; k < want; ++k) {
            const uint64_t j = k + rng.below(pool.size() - k);
            std::swap(pool[k], pool[j]);
        }
        keep.insert(keep.end(), pool.begin(), pool.begin() + want);
    }
    std::sort(keep.begin(), keep.end());

    LongTailDataset out;
    out.n = static_cast<int64_t>(keep.size());
    out.dims = balanced.dims;
    out.classes = balanced.classes;
    out.name = balanced.name + "-mu" + format_double(profile.mu);
    out.features.reserve(out.n * out.dims);
    out.labels.reserve(out.n);
    for (int64_t idx : keep) {
        const auto r = balanced.row(idx);
        out.features.insert(out.features.end(), r.begin(), r.end());
        out.labels.push_back(balanced.labels[idx]);
    }
    out.recount_and_validate();
    return out;
}

SynthResult synth_gaussian_longtail(int64_t classes, int64_t dims, const DecayProfile& profile,
                                    double class_sep, double noise_sd, int64_t test_per_class,
                                    uint64_t seed) {
    if (classes < 2 || dims < 2) {
        throw Error("invalid-argument", "need classes >= 2 and dims >= 2");
    }
    if (!(class_sep > 0.0) || !(noise_sd > 0.0)) {
        throw Error("invalid-argument", "class_sep and noise_sd must be > 0");
    }
    if (profile.classes != classes) {
        throw Error("invalid-profile", "profile class count does not match");
    }
    if (test_per_class < 1) {
        throw Error("invalid-argument", "test_per_class must be >= 1");
    }

    // Class means: random directions scaled to the class_sep sphere.
    Rng rng(derive_seed(seed, "synth-means"));
    std::vector<double> means(classes * dims);
    for (int64_t c = 0; c < classes; ++c) {
        double norm2 = 0.0;
        for (int64_t d = 0; d < dims; ++d) {
            const double v = rng.normal();
            means[c * dims + d] = v;
            norm2 += v * v;
        }
        const double scale = class_sep / std::sqrt(norm2);
        for (int64_t d = 0; d < dims; ++d) {
            means[c * dims + d] *= scale;
        }
    }

    auto fill = [&](LongTailDataset& data, const std::vector<int64_t>& counts, Rng& noise) {
        data.dims = dims;
        data.classes = classes;
        data.n = std::accumulate(counts.begin(), counts.end(), int64_t{0});
        data.features.reserve(data.n * dims);
        data.labels.reserve(data.n);
        for (int64_t c = 0; c < classes; ++c) {
            for (int64_t k = 0; k < counts[c]; ++k) {
                data.labels.push_back(static_cast<int32_t>(c));
                for (int64_t d = 0; d < dims; ++d) {
                    data.features.push_back(
                        static_cast<float>(means[c * dims + d] + noise_sd * noise.normal()));
                }
            }
        }
        data.recount_and_validate();
    };

    SynthResult out;
    const std::vector<int64_t> train_counts = decay_counts(profile);
    Rng train_rng(derive_seed(seed, "synth-train"));
    fill(out.train, train_counts, train_rng);
    out.train.name = "synth-train";

    const std::vector<int64_t> test_counts(classes, test_per_class);
    Rng test_rng(derive_seed(seed, "synth-test"));
    fill(out.balanced_test, test_counts, test_rng);
    out.balanced_test.name = "synth-test";
    return out;
}

namespace {

LongTailDataset finalize_loaded(std::vector<float> features, std::vector<int64_t> raw_labels,
                                int64_t dims, const std::string& name) {
    const int64_t n = static_cast<int64_t>(raw_labels.size());
    int64_t max_label = -1;
    for (int64_t y : raw_labels) {
        if (y < 0) {
            throw Error("non-contiguous-labels", "negative label " + std::to_string(y));
        }
        max_label = std::max(max_label, y);
    }
    LongTailDataset out;
    out.n = n;
    out.dims = dims;
    out.classes = max_label + 1;
    out.features = std::move(features);
    out.labels.reserve(n);
    for (int64_t y : raw_labels) {
        out.labels.push_back(static_cast<int32_t>(y));
    }
    out.name = name;
    try {
        out.recount_and_validate();
    } catch (const Error& e) {
        if (e.kind() == "empty-class") {
            throw Error("non-contiguous-labels",
                        "labels are not contiguous from 0 (" + std::string(e.what()) + ")");
        }
        throw;
    }
    return out;
}

LongTailDataset load_csv(const std::filesystem::path& path, bool has_header) {
    const std::string text = read_text_file(path);
    if (text.empty()) {
        throw Error("parse-error", path.string() + ": empty file");
    }
    std::vector<float> features;
    std::vector<int64_t> labels;
    int64_t dims = -1;
    int64_t line_no = 0;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line_no == 1 && has_header) {
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        size_t start = 0;
        while (true) {
            const size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (cells.size() < 2) {
            throw Error("parse-error", path.string() + ":" + std::to_string(line_no) +
                                           ": need at least one feature and a label");
        }
        if (dims < 0) {
            dims = static_cast<int64_t>(cells.size()) - 1;
        } else if (static_cast<int64_t>(cells.size()) - 1 != dims) {
            throw Error("parse-error", path.string() + ":" + std::to_string(line_no) +
                                           ": expected " + std::to_string(dims + 1) + " columns, got " +
                                           std::to_string(cells.size()));
        }
        for (int64_t d = 0; d < dims; ++d) {
            const std::string& cell = cells[d];
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v)) {
                throw Error("parse-error", path.string() + ":" + std::to_string(line_no) +
                                               ": column " + std::to_string(d + 1) +
                                               ": bad number '" + cell + "'");
            }
            features.push_back(static_cast<float>(v));
        }
        const std::string& cell = cells.back();
        char* end = nullptr;
        const long long y = std::strtoll(cell.c_str(), &end, 10);
        if (cell.empty() || end != cell.c_str() + cell.size()) {
            throw Error("parse-error", path.string() + ":" + std::to_string(line_no) +
                                           ": bad label '" + cell + "'");
        }
        labels.push_back(y);
    }
    if (labels.empty()) {
        throw Error("parse-error", path.string() + ": no data rows");
    }
    return finalize_loaded(std::move(features), std::move(labels), dims, path.stem().string());
}

uint64_t read_u64le(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = (v << 8) | p[i];
    }
    return v;
}

LongTailDataset load_raw(const std::filesystem::path& path) {
    const std::vector<uint8_t> bytes = read_binary_file(path);
    if (bytes.size() < 24) {
        throw Error("parse-error",
                    path.string() + ": truncated header at offset " + std::to_string(bytes.size()));
    }
    const uint64_t n = read_u64le(bytes.data());
    const uint64_t dims = read_u64le(bytes.data() + 8);
    const uint64_t classes = read_u64le(bytes.data() + 16);
    if (n == 0 || dims == 0 || classes == 0 || n > (1ull << 32) || dims > (1ull << 20)) {
        throw Error("parse-error", path.string() + ": implausible header");
    }
    const size_t expect = 24 + n * dims * 4 + n * 4;
    if (bytes.size() != expect) {
        throw Error("parse-error", path.string() + ": size " + std::to_string(bytes.size()) +
                                       " does not match header (expected " + std::to_string(expect) +
                                       "), first bad offset " +
                                       std::to_string(std::min(bytes.size(), expect)));
    }
    std::vector<float> features(n * dims);
    std::memcpy(features.data(), bytes.data() + 24, n * dims * 4);
    std::vector<int64_t> labels(n);
    const uint8_t* lp = bytes.data() + 24 + n * dims * 4;
    for (uint64_t i = 0; i < n; ++i) {
        uint32_t y = 0;
        for (int b = 3; b >= 0; --b) {
            y = (y << 8) | lp[i * 4 + b];
        }
        labels[i] = y;
    }
    LongTailDataset out =
        finalize_loaded(std::move(features), std::move(labels), static_cast<int64_t>(dims),
                        path.stem().string());
    if (out.classes != static_cast<int64_t>(classes)) {
        throw Error("non-contiguous-labels",
                    path.string() + ": header declares " + std::to_string(classes) +
                        " classes but labels span " + std::to_string(out.classes));
    }
    return out;
}

}  // namespace

LongTailDataset load_tabular(const std::filesystem::path& path, TabularFormat format,
                             bool csv_has_header) {
    return format == TabularFormat::csv ? load_csv(path, csv_has_header) : load_raw(path);
}

void save_raw_f32(const LongTailDataset& data, const std::filesystem::path& path) {
    std::vector<uint8_t> bytes;
    bytes.reserve(24 + data.features.size() * 4 + data.labels.size() * 4);
    auto push_u64 = [&](uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            bytes.push_back(static_cast<uint8_t>(v >> (8 * i)));
        }
    };
    push_u64(static_cast<uint64_t>(data.n));
    push_u64(static_cast<uint64_t>(data.dims));
    push_u64(static_cast<uint64_t>(data.classes));
    for (float f : data.features) {
        uint32_t v;
        std::memcpy(&v, &f, 4);
        for (int i = 0; i < 4; ++i) {
            bytes.push_back(static_cast<uint8_t>(v >> (8 * i)));
        }
    }
    for (int32_t y : data.labels) {
        const uint32_t v = static_cast<uint32_t>(y);
        for (int i = 0; i < 4; ++i) {
            bytes.push_back(static_cast<uint8_t>(v >> (8 * i)));
        }
    }
    write_file_atomic(path, bytes);
}

void save_csv(const LongTailDataset& data, const std::filesystem::path& path) {
    std::string out;
    for (int64_t i = 0; i < data.n; ++i) {
        for (int64_t d = 0; d < data.dims; ++d) {
            out += format_double(data.features[i * data.dims + d]);
            out += ',';
        }
        out += std::to_string(data.labels[i]);
        out += '\n';
    }
    write_file_atomic(path, out);
}

SubsetPartition partition_subsets(const std::vector<int64_t>& train_counts,
                                  int64_t many_threshold, int64_t few_threshold) {
    if (few_threshold < 1 || many_threshold < few_threshold) {
        throw Error("invalid-thresholds", "need many_threshold >= few_threshold >= 1");
    }
    SubsetPartition out;
    out.many_threshold = many_threshold;
    out.few_threshold = few_threshold;
    out.assignment.reserve(train_counts.size());
    for (int64_t count : train_counts) {
        if (count > many_threshold) {
            out.assignment.push_back(Subset::many);
        } else if (count < few_threshold) {
            out.assignment.push_back(Subset::few);
        } else {
            out.assignment.push_back(Subset::medium);
        }
    }
    return out;
}

Standardizer fit_standardizer(const LongTailDataset& train) {
    Standardizer s;
    s.mean.assign(train.dims, 0.0);
    s.inv_sd.assign(train.dims, 1.0);
    if (train.n == 0) {
        return s;
    }
    for (int64_t i = 0; i < train.n; ++i) {
        for (int64_t d = 0; d < train.dims; ++d) {
            s.mean[d] += train.features[i * train.dims + d];
        }
    }
    for (int64_t d = 0; d < train.dims; ++d) {
        s.mean[d] /= static_cast<double>(train.n);
    }
    std::vector<double> var(train.dims, 0.0);
    for (int64_t i = 0; i < train.n; ++i) {
        for (int64_t d = 0; d < train.dims; ++d) {
            const double delta = train.features[i * train.dims + d] - s.mean[d];
            var[d] += delta * delta;
        }
    }
    for (int64_t d = 0; d < train.dims; ++d) {
        const double sd = std::sqrt(var[d] / static_cast<double>(train.n));
        s.inv_sd[d] = sd > 0.0 ? 1.0 / sd : 1.0;
    }
    return s;
}

void Standardizer::apply(LongTailDataset& data) const {
    if (static_cast<int64_t>(mean.size()) != data.dims) {
        throw Error("shape-mismatch", "standardizer fitted on different dimensionality");
    }
    for (int64_t i = 0; i < data.n; ++i) {
        for (int64_t d = 0; d < data.dims; ++d) {
            float& f = data.features[i * data.dims + d];
            f = static_cast<float>((f - mean[d]) * inv_sd[d]);
        }
    }
}

}  // namespace xerm
