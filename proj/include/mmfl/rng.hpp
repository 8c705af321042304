#pragma once
#include <cstdint>
#include <cmath>
#include <string_view>
#include <vector>

namespace mmfl {

// All randomness in the project roots in a single config seed.  Sub-seeds are
// derived with a counter-based scheme: hash the purpose tag (FNV-1a), fold in
// integer counters (client index, round index, ...), then mix with splitmix64.
// Identical (seed, tag, counters) always yields the identical stream.

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base, std::string_view tag,
                            uint64_t c0 = 0, uint64_t c1 = 0) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) { h ^= static_cast<unsigned char>(c); h *= 0x100000001b3ULL; }
    h = splitmix64(h ^ splitmix64(base));
    h = splitmix64(h ^ splitmix64(c0 + 0x51ed2701));
    h = splitmix64(h ^ splitmix64(c1 + 0xa3c59ac2));
    return h;
}

// Deterministic generator with self-contained distributions so streams do not
// depend on the standard library's implementation-defined samplers.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x6a09e667f3bcc908ULL)) {
        // warm up so small seeds diverge quickly
        next(); next();
    }

    uint64_t next() {
        state_ = splitmix64(state_);
        return state_;
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) {
        if (n <= 1) return 0;
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do { v = next(); } while (v >= limit);
        return v % n;
    }

    // standard normal via Box-Muller
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double gamma(double shape) {
        // Marsaglia-Tsang for shape >= 1; boost trick below 1
        if (shape < 1.0) {
            double u = uniform();
            while (u <= 0.0) u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = normal();
            double v = 1.0 + c * x;
            if (v <= 0.0) continue;
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    std::vector<double> dirichlet(double alpha, size_t k) {
        std::vector<double> out(k);
        double s = 0.0;
        for (auto& v : out) { v = gamma(alpha); s += v; }
        for (auto& v : out) v /= (s > 0.0 ? s : 1.0);
        return out;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices from [0, n), order randomized
    std::vector<size_t> sample_without_replacement(size_t n, size_t k) {
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        // partial Fisher-Yates
        for (size_t i = 0; i < k && i < n; ++i) {
            size_t j = i + static_cast<size_t>(uniform_int(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k < n ? k : n);
        return idx;
    }

private:
    uint64_t state_;
};

} // namespace mmfl
