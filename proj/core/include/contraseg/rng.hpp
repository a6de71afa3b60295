// Deterministic random streams.
//
// All randomness in the pipeline flows through Rng. Distribution transforms
// are hand-rolled (not std::*_distribution) so draws are identical across
// standard library implementations. Substreams are derived from the root
// seed and a salt, never from engine call history, which makes per-phase /
// per-step streams independent of execution order and trivially resumable.

#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "contraseg/common.hpp"

namespace contraseg {

namespace detail {
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}
}  // namespace detail

class Rng {
public:
    explicit Rng(uint64_t seed) : root_(seed), eng_(detail::splitmix64(seed)) {}

    uint64_t root_seed() const { return root_; }

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (first component only, no cached state).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Uniform integer in [lo, hi], inclusive. Rejection sampling, no modulo bias.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
        if (range == 0) return static_cast<int64_t>(eng_());  // full 64-bit range
        const uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return lo + static_cast<int64_t>(x % range);
    }

    template <class T>
    void shuffle(std::vector<T>& xs) {
        for (size_t i = xs.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(xs[i - 1], xs[j]);
        }
    }

    // k distinct indices from [0, n), in draw order.
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        std::vector<int> out;
        out.reserve(k);
        for (int i = 0; i < k; ++i) {
            const int j = static_cast<int>(uniform_int(i, n - 1));
            std::swap(pool[i], pool[j]);
            out.push_back(pool[i]);
        }
        return out;
    }

    // Independent substream keyed by (root seed, salt). Call-order independent.
    Rng derive(uint64_t salt) const {
        return Rng(detail::splitmix64(root_ ^ detail::splitmix64(salt)));
    }

    Rng derive(std::string_view tag) const { return derive(detail::fnv1a(tag)); }

    Rng derive(std::string_view tag, uint64_t a, uint64_t b = 0, uint64_t c = 0) const {
        uint64_t salt = detail::fnv1a(tag);
        salt = detail::splitmix64(salt ^ detail::splitmix64(a ^ 0x9e37ULL));
        salt = detail::splitmix64(salt ^ detail::splitmix64(b ^ 0x79b9ULL));
        salt = detail::splitmix64(salt ^ detail::splitmix64(c ^ 0xf4a7ULL));
        return derive(salt);
    }

    // Engine state round-trip (text form is specified by the standard).
    std::string state_string() const {
        std::ostringstream os;
        os << root_ << ' ' << eng_;
        return os.str();
    }

    static Rng from_state_string(const std::string& s) {
        std::istringstream is(s);
        uint64_t root = 0;
        is >> root;
        Rng r(root);
        is >> r.eng_;
        if (!is) throw DataError("rng state string is malformed");
        return r;
    }

private:
    uint64_t root_;
    std::mt19937_64 eng_;
};

}  // namespace contraseg
