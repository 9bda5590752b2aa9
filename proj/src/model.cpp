#include "xerm/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace xerm {

const char* arch_name(Arch a) {
    return a == Arch::linear ? "linear" : "mlp1";
}

Arch arch_from_name(const std::string& name) {
    if (name == "linear") return Arch::linear;
    if (name == "mlp1") return Arch::mlp1;
    throw Error("invalid-argument", "unknown architecture '" + name + "'");
}

void Grads::resize_like_zero(int64_t w1n, int64_t b1n, int64_t w2n, int64_t b2n) {
    w1.assign(w1n, 0.0);
    b1.assign(b1n, 0.0);
    w2.assign(w2n, 0.0);
    b2.assign(b2n, 0.0);
}

void Grads::scale(double s) {
    for (auto* block : {&w1, &b1, &w2, &b2}) {
        for (double& g : *block) {
            g *= s;
        }
    }
}

namespace {

template <typename T>
void check_shapes(const ParamsT<T>& p) {
    const size_t head_in = static_cast<size_t>(p.head_in());
    bool ok = p.dims >= 1 && p.classes >= 1 &&
              p.w2.size() == head_in * static_cast<size_t>(p.classes) &&
              p.b2.size() == static_cast<size_t>(p.classes);
    if (p.arch == Arch::mlp1) {
        ok = ok && p.hidden >= 1 && p.w1.size() == static_cast<size_t>(p.dims * p.hidden) &&
             p.b1.size() == static_cast<size_t>(p.hidden);
    } else {
        ok = ok && p.hidden == 0 && p.w1.empty() && p.b1.empty();
    }
    if (!ok) {
        throw Error("shape-mismatch", "parameter blocks inconsistent with (dims, hidden, classes)");
    }
}

template <typename T>
void fill_glorot(std::vector<T>& block, int64_t fan_in, int64_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& w : block) {
        w = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
    }
}

}  // namespace

template <typename T>
ParamsT<T> init_params(Arch arch, int64_t dims, int64_t hidden, int64_t classes, uint64_t seed) {
    if (dims < 1 || classes < 1 || (arch == Arch::mlp1 && hidden < 1)) {
        throw Error("invalid-argument", "bad model dimensions");
    }
    ParamsT<T> p;
    p.arch = arch;
    p.dims = dims;
    p.hidden = arch == Arch::mlp1 ? hidden : 0;
    p.classes = classes;
    Rng rng(derive_seed(seed, "init"));
    if (arch == Arch::mlp1) {
        p.w1.resize(dims * hidden);
        p.b1.assign(hidden, T{0});
        fill_glorot(p.w1, dims, hidden, rng);
    }
    p.w2.resize(p.head_in() * classes);
    p.b2.assign(classes, T{0});
    fill_glorot(p.w2, p.head_in(), classes, rng);
    return p;
}

template <typename T>
void reinit_head(ParamsT<T>& params, uint64_t seed) {
    check_shapes(params);
    Rng rng(derive_seed(seed, "head-init"));
    fill_glorot(params.w2, params.head_in(), params.classes, rng);
    std::fill(params.b2.begin(), params.b2.end(), T{0});
}

template <typename T>
std::vector<double> forward_logits(const ParamsT<T>& params, std::span<const T> x) {
    check_shapes(params);
    if (static_cast<int64_t>(x.size()) != params.dims) {
        throw Error("shape-mismatch", "input has " + std::to_string(x.size()) +
                                          " entries, model expects " + std::to_string(params.dims));
    }
    const int64_t C = params.classes;
    std::vector<double> logits(C);
    if (params.arch == Arch::linear) {
        for (int64_t c = 0; c < C; ++c) {
            double acc = params.b2[c];
            for (int64_t d = 0; d < params.dims; ++d) {
                acc += static_cast<double>(x[d]) * static_cast<double>(params.w2[d * C + c]);
            }
            logits[c] = acc;
        }
        return logits;
    }
    const int64_t H = params.hidden;
    std::vector<double> h(H);
    for (int64_t j = 0; j < H; ++j) {
        double acc = params.b1[j];
        for (int64_t d = 0; d < params.dims; ++d) {
            acc += static_cast<double>(x[d]) * static_cast<double>(params.w1[d * H + j]);
        }
        h[j] = acc > 0.0 ? acc : 0.0;
    }
    for (int64_t c = 0; c < C; ++c) {
        double acc = params.b2[c];
        for (int64_t j = 0; j < H; ++j) {
            acc += h[j] * static_cast<double>(params.w2[j * C + c]);
        }
        logits[c] = acc;
    }
    return logits;
}

std::vector<double> softmax(std::span<const double> logits) {
    double max = -std::numeric_limits<double>::infinity();
    for (double z : logits) {
        if (!std::isfinite(z)) {
            throw Error("invalid-argument", "non-finite logit");
        }
        max = std::max(max, z);
    }
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - max);
        sum += p[i];
    }
    for (double& v : p) {
        v /= sum;
    }
    return p;
}

template <typename T>
Grads backward(const ParamsT<T>& params, std::span<const T> x, std::span<const double> grad_logits) {
    check_shapes(params);
    if (static_cast<int64_t>(x.size()) != params.dims ||
        static_cast<int64_t>(grad_logits.size()) != params.classes) {
        throw Error("shape-mismatch", "backward input shapes do not match model");
    }
    const int64_t C = params.classes;
    Grads g;
    g.resize_like_zero(static_cast<int64_t>(params.w1.size()), static_cast<int64_t>(params.b1.size()),
                       static_cast<int64_t>(params.w2.size()), static_cast<int64_t>(params.b2.size()));

    if (params.arch == Arch::linear) {
        for (int64_t c = 0; c < C; ++c) {
            g.b2[c] = grad_logits[c];
            for (int64_t d = 0; d < params.dims; ++d) {
                g.w2[d * C + c] = static_cast<double>(x[d]) * grad_logits[c];
            }
        }
        return g;
    }

    const int64_t H = params.hidden;
    std::vector<double> pre(H), h(H);
    for (int64_t j = 0; j < H; ++j) {
        double acc = params.b1[j];
        for (int64_t d = 0; d < params.dims; ++d) {
            acc += static_cast<double>(x[d]) * static_cast<double>(params.w1[d * H + j]);
        }
        pre[j] = acc;
        h[j] = acc > 0.0 ? acc : 0.0;
    }
    std::vector<double> dh(H, 0.0);
    for (int64_t c = 0; c < C; ++c) {
        g.b2[c] = grad_logits[c];
        for (int64_t j = 0; j < H; ++j) {
            g.w2[j * C + c] = h[j] * grad_logits[c];
            dh[j] += static_cast<double>(params.w2[j * C + c]) * grad_logits[c];
        }
    }
    for (int64_t j = 0; j < H; ++j) {
        const double dj = pre[j] > 0.0 ? dh[j] : 0.0;  // relu'(0) taken as 0
        g.b1[j] = dj;
        for (int64_t d = 0; d < params.dims; ++d) {
            g.w1[d * H + j] = static_cast<double>(x[d]) * dj;
        }
    }
    return g;
}

template <typename T>
OptimizerStateT<T> OptimizerStateT<T>::make(const ParamsT<T>& params, double lr, double momentum,
                                            std::vector<std::pair<int64_t, double>> schedule) {
    if (!(lr > 0.0)) {
        throw Error("invalid-argument", "learning rate must be > 0");
    }
    if (momentum < 0.0 || momentum >= 1.0) {
        throw Error("invalid-argument", "momentum must be in [0, 1)");
    }
    if (schedule.empty()) {
        schedule = {{0, 1.0}};
    }
    std::sort(schedule.begin(), schedule.end());
    OptimizerStateT<T> s;
    s.learning_rate = lr;
    s.momentum = momentum;
    s.schedule = std::move(schedule);
    s.v_w1.assign(params.w1.size(), T{0});
    s.v_b1.assign(params.b1.size(), T{0});
    s.v_w2.assign(params.w2.size(), T{0});
    s.v_b2.assign(params.b2.size(), T{0});
    return s;
}

template <typename T>
double OptimizerStateT<T>::lr_at(int64_t epoch) const {
    double mult = schedule.front().second;
    for (const auto& [e, m] : schedule) {
        if (e <= epoch) {
            mult = m;
        }
    }
    return learning_rate * mult;
}

namespace {

template <typename T>
void step_block(std::vector<T>& p, std::vector<T>& v, const std::vector<double>& g, double momentum,
                double lr) {
    for (size_t i = 0; i < p.size(); ++i) {
        const double vn = momentum * static_cast<double>(v[i]) - lr * g[i];
        v[i] = static_cast<T>(vn);
        p[i] = static_cast<T>(static_cast<double>(p[i]) + static_cast<double>(v[i]));
    }
}

}  // namespace

template <typename T>
void sgd_step(ParamsT<T>& params, const Grads& grads, OptimizerStateT<T>& state, int64_t epoch,
              bool head_only) {
    if (grads.w1.size() != params.w1.size() || grads.b1.size() != params.b1.size() ||
        grads.w2.size() != params.w2.size() || grads.b2.size() != params.b2.size() ||
        state.v_w2.size() != params.w2.size()) {
        throw Error("shape-mismatch", "gradient/velocity shapes do not match parameters");
    }
    const double lr = state.lr_at(epoch);
    if (!head_only) {
        step_block(params.w1, state.v_w1, grads.w1, state.momentum, lr);
        step_block(params.b1, state.v_b1, grads.b1, state.momentum, lr);
    }
    step_block(params.w2, state.v_w2, grads.w2, state.momentum, lr);
    step_block(params.b2, state.v_b2, grads.b2, state.momentum, lr);
}

namespace {

constexpr char kMagic[4] = {'X', 'E', 'R', 'M'};
constexpr uint32_t kFormatVersion = 1;

void push_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
}

void push_u64(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
}

void push_f32_block(std::vector<uint8_t>& out, const std::vector<float>& block) {
    for (float f : block) {
        uint32_t v;
        std::memcpy(&v, &f, 4);
        push_u32(out, v);
    }
}

class Reader {
public:
    explicit Reader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 3; i >= 0; --i) {
            v = (v << 8) | bytes_[pos_ + i];
        }
        pos_ += 4;
        return v;
    }

    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 7; i >= 0; --i) {
            v = (v << 8) | bytes_[pos_ + i];
        }
        pos_ += 8;
        return v;
    }

    uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }

    void f32_block(std::vector<float>& block, size_t count) {
        block.resize(count);
        for (size_t i = 0; i < count; ++i) {
            const uint32_t v = u32();
            std::memcpy(&block[i], &v, 4);
        }
    }

    bool exhausted() const { return pos_ == bytes_.size(); }

private:
    void need(size_t k) {
        if (pos_ + k > bytes_.size()) {
            throw Error("corrupt-checkpoint", "truncated at byte " + std::to_string(pos_));
        }
    }

    const std::vector<uint8_t>& bytes_;
    size_t pos_ = 0;
};

}  // namespace

std::vector<uint8_t> save_checkpoint(const Params& params) {
    check_shapes(params);
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    push_u32(out, kFormatVersion);
    out.push_back(static_cast<uint8_t>(params.arch));
    push_u64(out, static_cast<uint64_t>(params.dims));
    push_u64(out, static_cast<uint64_t>(params.hidden));
    push_u64(out, static_cast<uint64_t>(params.classes));
    push_f32_block(out, params.w1);
    push_f32_block(out, params.b1);
    push_f32_block(out, params.w2);
    push_f32_block(out, params.b2);
    return out;
}

Params load_checkpoint(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw Error("corrupt-checkpoint", "bad magic");
    }
    Reader r(bytes);
    (void)r.u32();  // magic, already checked
    const uint32_t version = r.u32();
    if (version != kFormatVersion) {
        throw Error("corrupt-checkpoint", "unsupported format version " + std::to_string(version));
    }
    const uint8_t arch_tag = r.u8();
    if (arch_tag > 1) {
        throw Error("corrupt-checkpoint", "unknown architecture tag " + std::to_string(arch_tag));
    }
    Params p;
    p.arch = static_cast<Arch>(arch_tag);
    p.dims = static_cast<int64_t>(r.u64());
    p.hidden = static_cast<int64_t>(r.u64());
    p.classes = static_cast<int64_t>(r.u64());
    if (p.dims < 1 || p.classes < 1 || p.hidden < 0 ||
        (p.arch == Arch::linear && p.hidden != 0) || (p.arch == Arch::mlp1 && p.hidden < 1) ||
        p.dims > (1 << 24) || p.hidden > (1 << 24) || p.classes > (1 << 24)) {
        throw Error("corrupt-checkpoint", "implausible shape header");
    }
    if (p.arch == Arch::mlp1) {
        r.f32_block(p.w1, static_cast<size_t>(p.dims * p.hidden));
        r.f32_block(p.b1, static_cast<size_t>(p.hidden));
    }
    r.f32_block(p.w2, static_cast<size_t>(p.head_in() * p.classes));
    r.f32_block(p.b2, static_cast<size_t>(p.classes));
    if (!r.exhausted()) {
        throw Error("corrupt-checkpoint", "trailing bytes after parameter blocks");
    }
    for (const auto* block : {&p.w1, &p.b1, &p.w2, &p.b2}) {
        for (float f : *block) {
            if (!std::isfinite(f)) {
                throw Error("corrupt-checkpoint", "non-finite parameter");
            }
        }
    }
    return p;
}

void save_checkpoint_file(const Params& params, const std::filesystem::path& path) {
    write_file_atomic(path, save_checkpoint(params));
}

Params load_checkpoint_file(const std::filesystem::path& path) {
    return load_checkpoint(read_binary_file(path));
}

template struct OptimizerStateT<float>;
template struct OptimizerStateT<double>;

template ParamsT<float> init_params<float>(Arch, int64_t, int64_t, int64_t, uint64_t);
template ParamsT<double> init_params<double>(Arch, int64_t, int64_t, int64_t, uint64_t);
template void reinit_head<float>(ParamsT<float>&, uint64_t);
template void reinit_head<double>(ParamsT<double>&, uint64_t);
template std::vector<double> forward_logits<float>(const ParamsT<float>&, std::span<const float>);
template std::vector<double> forward_logits<double>(const ParamsT<double>&, std::span<const double>);
template Grads backward<float>(const ParamsT<float>&, std::span<const float>, std::span<const double>);
template Grads backward<double>(const ParamsT<double>&, std::span<const double>, std::span<const double>);
template void sgd_step<float>(ParamsT<float>&, const Grads&, OptimizerStateT<float>&, int64_t, bool);
template void sgd_step<double>(ParamsT<double>&, const Grads&, OptimizerStateT<double>&, int64_t, bool);

}  // namespace xerm
