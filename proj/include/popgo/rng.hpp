#pragma once

#include <cstdint>
#include <vector>

namespace popgo {

// Deterministic 64-bit generator (SplitMix64 core). Every random decision in
// the project flows through this type, so runs are byte-identical across
// platforms and standard-library versions for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // [0, 1) with 53-bit resolution
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // [0, n), unbiased (Lemire reduction)
    int uniform_int(int n) {
        return static_cast<int>(
            (static_cast<unsigned __int128>(next_u64()) *
             static_cast<unsigned __int128>(n)) >> 64);
    }

    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) *
             static_cast<unsigned __int128>(n)) >> 64);
    }

    // standard normal via Box-Muller, one spare cached
    double normal();

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // independent generator for a named substream
    Rng fork(std::uint64_t stream) {
        Rng r(state_ ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
        r.next_u64();
        return r;
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace popgo
