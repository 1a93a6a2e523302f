#pragma once

#include <cstdint>
#include <random>
#include <string_view>

// Deterministic seed derivation. Every randomized stage of a run owns an
// independent stream derived from the master seed, a purpose tag, and
// optional ids. This keeps unrelated stages decoupled: changing the noise
// rate never perturbs the draws used for data generation or for another
// client's training.

namespace fedsir {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
    std::uint64_t h = splitmix64(master ^ hash_tag(tag));
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    return h;
}

inline std::mt19937_64 make_rng(std::uint64_t master, std::string_view tag,
                                std::uint64_t a = 0, std::uint64_t b = 0) {
    return std::mt19937_64(derive_seed(master, tag, a, b));
}

}  // namespace fedsir
