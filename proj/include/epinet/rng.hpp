#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace epinet {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic child seed for (master, path...). Used for replicate and
/// per-individual substreams so results do not depend on execution order.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(master);
    for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path = {}) {
    return Rng(derive_seed(master, path));
}

/// Uniform draw on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
    for (;;) {
        const double u = std::generate_canonical<double, 53>(rng);
        if (u > 0.0 && u < 1.0) return u;
    }
}

}  // namespace epinet
