#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chartlab {

inline constexpr std::string_view kVersion = "0.1.0";

// Invalid configuration supplied by the caller (bad bounds, bad flags).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A perturbation that cannot be applied to the given task.
struct UnsupportedPerturbation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Non-recoverable numerical problem during training (non-finite grads/ratios).
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// FNV-1a, used for corpus checksums and golden-fixture digests.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(std::string_view s) { return fnv1a(s.data(), s.size()); }

std::string to_hex(std::uint64_t v);

// Shortest decimal string that round-trips the value exactly; used wherever
// numbers land in files that must be byte-reproducible across runs.
std::string format_double(double v);

}  // namespace chartlab
