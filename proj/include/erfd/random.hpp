#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace erfd {

std::uint64_t splitmix64(std::uint64_t x);

/// FNV-1a, stable across platforms (std::hash is not).
std::uint64_t fnv1a64(std::string_view text);

/// Folds the values into a single seed with splitmix64.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

/// Seeded generator whose draws depend only on the seed. The standard
/// distributions are implementation-defined, so the mappings live here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);
    /// Uniform real in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace erfd
