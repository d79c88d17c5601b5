// Shared numeric utilities: seeding, scalar samplers, compensated sums,
// and the vectorizable exp used by the kernel code.
#pragma once

#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace driftmon {

/// Malformed or unusable input data (files, logs, degenerate sequences).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failure (non-convergence, unusable estimates).
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

namespace detail {

/// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic sub-seed for (master seed, stream id [, cell id]).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t cell = 0) {
    return detail::mix64(detail::mix64(master ^ 0x517cc1b727220a95ULL) + stream * 0x2545f4914f6cdd1dULL + cell);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller. Draws exactly two 64-bit words per call,
/// so sampler state never leaks between calls.
inline double sample_standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    // guard log(0)
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Laplace(0, 1) by inverse CDF.
inline double sample_standard_laplace(Rng& rng) {
    const double u = uniform01(rng) - 0.5;
    const double a = std::abs(u);
    const double mag = -std::log(1.0 - 2.0 * a);
    return u < 0.0 ? -mag : mag;
}

/// Student-t with dof degrees of freedom, Bailey's polar method.
inline double sample_standard_student_t(Rng& rng, double dof) {
    for (;;) {
        const double u = 2.0 * uniform01(rng) - 1.0;
        const double v = 2.0 * uniform01(rng) - 1.0;
        const double w = u * u + v * v;
        if (w > 0.0 && w <= 1.0) {
            return u * std::sqrt(dof * (std::pow(w, -2.0 / dof) - 1.0) / w);
        }
    }
}

/// Neumaier (improved Kahan) accumulator. Keeps long reductions
/// order-insensitive to ~1 ulp.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_total(const std::vector<double>& xs) {
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

inline double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean_of: empty input");
    return compensated_total(xs) / static_cast<double>(xs.size());
}

/// Population variance (divides by n).
inline double population_variance(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("population_variance: empty input");
    const double mu = mean_of(xs);
    CompensatedSum acc;
    for (double x : xs) acc.add((x - mu) * (x - mu));
    return acc.value() / static_cast<double>(xs.size());
}

namespace detail {

/// exp(x) for x in [-708, 0]. Round-to-nearest-even FP environment assumed.
/// Agrees with std::exp to ~2 ulp; branch-free so loops over buffers
/// auto-vectorize. Callers clamp the argument.
inline double exp_neg_unchecked(double x) {
    const double inv_ln2 = 1.4426950408889634074;
    const double ln2_hi = 6.93147180369123816490e-01;
    const double ln2_lo = 1.90821492927058770002e-10;
    const double round_magic = 6755399441055744.0;  // 1.5 * 2^52
    const double t = x * inv_ln2 + round_magic;     // k lands in the low mantissa bits
    const double kd = t - round_magic;
    const double r = (x - kd * ln2_hi) - kd * ln2_lo;
    double p = 1.0 / 479001600.0;
    p = p * r + 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    const std::uint64_t ki = std::bit_cast<std::uint64_t>(t);
    return p * std::bit_cast<double>((ki << 52) + 0x3FF0000000000000ULL);
}

constexpr double kExpNegFloor = -708.0;

}  // namespace detail

/// Deterministic parallel map over [0, n): results land in a caller-indexed
/// slot, so aggregation order never depends on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned max_threads = 0) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (max_threads != 0 && max_threads < hw) hw = max_threads;
    if (hw <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(hw);
    std::atomic<std::size_t> next{0};
    for (unsigned w = 0; w < hw; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : workers) t.join();
}

}  // namespace driftmon
