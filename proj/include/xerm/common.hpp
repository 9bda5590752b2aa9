#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace xerm {

inline constexpr const char* kToolVersion = "0.1.0";

/// Error with a stable machine-checkable kind tag ("invalid-profile",
/// "corrupt-checkpoint", ...) in addition to the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

uint64_t fnv1a64(std::string_view text);
uint64_t splitmix64(uint64_t x);

/// Derives an independent stream seed from a base seed and a role tag, so
/// that e.g. data generation and weight init never share a stream.
uint64_t derive_seed(uint64_t base, std::string_view role);

/// Deterministic RNG used everywhere. Wraps mt19937_64 but keeps all
/// distribution transforms in our own code: std::*_distribution output is
/// implementation-defined, and reproducibility across toolchains matters
/// more than sampling speed here.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(splitmix64(seed)) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1), 53 random bits.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Unbiased uniform integer in [0, n).
    uint64_t below(uint64_t n);

    /// Standard normal via Box-Muller.
    double normal();

    /// In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

std::string read_text_file(const std::filesystem::path& path);
std::vector<uint8_t> read_binary_file(const std::filesystem::path& path);

/// Write-temp-then-rename so concurrent readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
void write_file_atomic(const std::filesystem::path& path, const std::vector<uint8_t>& content);

std::string iso8601_utc_now();

/// Formats a double with enough digits to round-trip (used in config hashing
/// and CSV output so identical values always print identically).
std::string format_double(double v);

}  // namespace xerm
