#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mwpr {

// FNV-1a, the project's fixed 64-bit hash. Stable across platforms and releases;
// used for feature hashing, caches, and provenance fingerprints.
constexpr std::uint64_t kFnvOffsetBasis = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = kFnvOffsetBasis) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::string& path);

std::string hex64(std::uint64_t value);

// Shortest human-friendly decimal for an evaluated answer: integral values print
// without a fractional part, everything else with up to 12 significant digits.
std::string format_decimal(double value);

std::string trim(std::string_view text);

std::vector<std::string> split_whitespace(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);

bool parse_plain_decimal(const std::string& text, double& out);

}  // namespace mwpr
