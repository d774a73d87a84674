#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace nsotree {

/// Overflow-safe softplus log(1 + exp(z)).
inline double softplus(double z) {
    if (z > 30.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

/// Logistic sigmoid, the derivative of softplus.
inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline double relu(double z) { return z >= 0.0 ? z : 0.0; }

/// sign(w) * max(|w| - lambda, 0).
inline double soft_threshold(double w, double lambda) {
    if (w > lambda) return w - lambda;
    if (w < -lambda) return w + lambda;
    return 0.0;
}

/// Uniform double in [0, 1) with 53 random bits. Used instead of
/// std::uniform_real_distribution so draws are identical across standard
/// library implementations.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double uniform_in(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n). Rejection-sampled so the result does not
/// depend on the library's uniform_int_distribution internals.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do { v = rng(); } while (v >= limit);
    return v % n;
}

/// In-place Fisher-Yates shuffle driven by uniform_index.
template <typename T>
void shuffle_deterministic(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

/// Derives an independent seed for a named sub-stream of a master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over (seed, stream)
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Regularized lower incomplete gamma function P(a, x), with
/// Q(a, x) = 1 - P(a, x). Series expansion for x < a + 1, continued
/// fraction otherwise.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

/// Survival function of the chi-square distribution with one degree of
/// freedom, Q(1/2, x/2).
inline double chisq1_sf(double x) {
    if (x <= 0.0) return 1.0;
    return gamma_q(0.5, 0.5 * x);
}

/// Percentile with linear interpolation between closest ranks:
/// h = (n - 1) * p over the sorted values.
double percentile(std::vector<double> values, double p);

}  // namespace nsotree
