#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "xerm/common.hpp"

namespace xerm {

enum class Arch : uint8_t { linear = 0, mlp1 = 1 };

const char* arch_name(Arch a);
Arch arch_from_name(const std::string& name);

/// Classifier parameters. Storage type T is float in the training path and
/// double in the numeric test path; all accumulation happens in double either
/// way. For linear, w1/b1 are empty and hidden == 0.
///   w1: dims x hidden (row-major), b1: hidden
///   w2: in_dim x classes (in_dim = hidden for mlp1, dims for linear), b2: classes
template <typename T>
struct ParamsT {
    Arch arch = Arch::linear;
    int64_t dims = 0;
    int64_t hidden = 0;
    int64_t classes = 0;
    std::vector<T> w1, b1, w2, b2;

    int64_t head_in() const { return arch == Arch::mlp1 ? hidden : dims; }
    int64_t count() const { return static_cast<int64_t>(w1.size() + b1.size() + w2.size() + b2.size()); }
};

using Params = ParamsT<float>;
using Params64 = ParamsT<double>;

/// Parameter-shaped gradient accumulator, always double.
struct Grads {
    std::vector<double> w1, b1, w2, b2;

    void resize_like_zero(int64_t w1n, int64_t b1n, int64_t w2n, int64_t b2n);
    void scale(double s);
};

/// Glorot-uniform initialization in +-sqrt(6 / (fan_in + fan_out)).
template <typename T>
ParamsT<T> init_params(Arch arch, int64_t dims, int64_t hidden, int64_t classes, uint64_t seed);

/// Fresh Glorot draw for w2/b2 only; w1/b1 untouched. Used by the head-only
/// retraining probe.
template <typename T>
void reinit_head(ParamsT<T>& params, uint64_t seed);

template <typename T>
std::vector<double> forward_logits(const ParamsT<T>& params, std::span<const T> x);

/// Numerically stable softmax (max subtraction, double accumulation).
std::vector<double> softmax(std::span<const double> logits);

/// Gradient of dot(logits, grad_logits) with respect to every parameter.
template <typename T>
Grads backward(const ParamsT<T>& params, std::span<const T> x, std::span<const double> grad_logits);

template <typename T>
struct OptimizerStateT {
    double learning_rate = 0.1;
    double momentum = 0.9;
    std::vector<std::pair<int64_t, double>> schedule{{0, 1.0}};  // (epoch, multiplier)
    std::vector<T> v_w1, v_b1, v_w2, v_b2;

    static OptimizerStateT make(const ParamsT<T>& params, double lr, double momentum,
                                std::vector<std::pair<int64_t, double>> schedule);
    /// base lr times the multiplier of the last schedule entry with epoch <= current.
    double lr_at(int64_t epoch) const;
};

using OptimizerState = OptimizerStateT<float>;

/// One heavy-ball step: v <- momentum*v - lr(epoch)*g; p <- p + v.
/// head_only freezes w1/b1 (and their velocities).
template <typename T>
void sgd_step(ParamsT<T>& params, const Grads& grads, OptimizerStateT<T>& state, int64_t epoch,
              bool head_only = false);

/// Binary checkpoint: "XERM" magic, u32 version, u8 arch tag, u64 dims/hidden/
/// classes, then little-endian f32 blocks w1, b1, w2, b2.
std::vector<uint8_t> save_checkpoint(const Params& params);
Params load_checkpoint(const std::vector<uint8_t>& bytes);

void save_checkpoint_file(const Params& params, const std::filesystem::path& path);
Params load_checkpoint_file(const std::filesystem::path& path);

}  // namespace xerm
