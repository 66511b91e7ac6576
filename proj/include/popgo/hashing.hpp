#pragma once

#include <cstdint>
#include <string>

namespace popgo {

constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001B3ULL;

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = kFnvOffset) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < len; ++k) {
        h ^= p[k];
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t h = kFnvOffset) {
    return fnv1a64(s.data(), s.size(), h);
}

std::uint64_t fnv1a64_file(const std::string& path);

std::string hex_string(std::uint64_t h);

}  // namespace popgo
