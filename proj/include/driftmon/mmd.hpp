// Blockwise MMD statistic against a finite reference sample of the
// in-distribution second-order error law.
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "driftmon/common.hpp"
#include "driftmon/kernel.hpp"

namespace driftmon {

namespace detail {

/// Count of D^2 clamps larger than 1e-8 (should stay at zero; anything else
/// points at a numerical problem upstream).
inline std::atomic<std::uint64_t>& mmd_clamp_counter() {
    static std::atomic<std::uint64_t> counter{0};
    return counter;
}

/// Mean of k over all ordered pairs (a_i, b_j) — a V-statistic term.
/// Two passes per row: clamped exponents into a scratch buffer, then the
/// polynomial exp; both loops auto-vectorize. Rows combine through a
/// compensated sum so the result is summation-order stable to ~1 ulp.
inline double kernel_mean(std::span<const double> a1, std::span<const double> a2,
                          std::span<const double> b1, std::span<const double> b2,
                          double inv_two_sigma_sq) {
    static thread_local std::vector<double> scratch;
    const std::size_t nb = b1.size();
    scratch.resize(nb);
    double* buf = scratch.data();
    CompensatedSum total;
    for (std::size_t i = 0; i < a1.size(); ++i) {
        const double x1 = a1[i];
        const double x2 = a2[i];
        const double* pb1 = b1.data();
        const double* pb2 = b2.data();
        for (std::size_t j = 0; j < nb; ++j) {
            const double d1 = x1 - pb1[j];
            const double d2 = x2 - pb2[j];
            buf[j] = rbf_exponent(d1 * d1 + d2 * d2, inv_two_sigma_sq);
        }
        double row = 0.0;
        for (std::size_t j = 0; j < nb; ++j) row += exp_neg_unchecked(buf[j]);
        total.add(row);
    }
    return total.value() / (static_cast<double>(a1.size()) * static_cast<double>(nb));
}

inline void split_coords(std::span<const SecondOrderSample> samples, std::vector<double>& c1,
                         std::vector<double>& c2) {
    c1.resize(samples.size());
    c2.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!std::isfinite(samples[i].prev) || !std::isfinite(samples[i].cur))
            throw std::invalid_argument("second-order samples must be finite");
        c1[i] = samples[i].prev;
        c2[i] = samples[i].cur;
    }
}

inline double clamped_sqrt(double d_squared) {
    if (d_squared < 0.0) {
        if (d_squared < -1e-8) mmd_clamp_counter().fetch_add(1, std::memory_order_relaxed);
        d_squared = 0.0;
    }
    return std::sqrt(d_squared);
}

}  // namespace detail

/// Finite-sample stand-in for the reference second-order distribution.
/// Coordinates are stored column-wise for the batched kernel sums; the
/// kernel self term over all ordered reference pairs is precomputed.
class ReferenceSet {
public:
    ReferenceSet(std::span<const SecondOrderSample> samples, RbfKernel kernel) : kernel_(kernel) {
        validate(kernel_);
        if (samples.size() < 2) throw std::invalid_argument("ReferenceSet: need at least 2 samples");
        detail::split_coords(samples, prev_, cur_);
        self_term_ = detail::kernel_mean(prev_, cur_, prev_, cur_, inv_two_sigma_sq());
        check_self_term();
    }

    /// Rebuilds from serialized state; recomputes and cross-checks the
    /// stored self term.
    ReferenceSet(std::span<const SecondOrderSample> samples, RbfKernel kernel, double stored_self_term)
        : ReferenceSet(samples, kernel) {
        if (std::abs(stored_self_term - self_term_) > 1e-12)
            throw std::invalid_argument("ReferenceSet: stored self_term does not match samples");
    }

    [[nodiscard]] std::size_t size() const { return prev_.size(); }
    [[nodiscard]] const RbfKernel& kernel() const { return kernel_; }
    [[nodiscard]] double self_term() const { return self_term_; }
    [[nodiscard]] std::span<const double> prev_coords() const { return prev_; }
    [[nodiscard]] std::span<const double> cur_coords() const { return cur_; }
    [[nodiscard]] double inv_two_sigma_sq() const {
        return 1.0 / (2.0 * kernel_.bandwidth * kernel_.bandwidth);
    }

    [[nodiscard]] std::vector<SecondOrderSample> samples() const {
        std::vector<SecondOrderSample> out(size());
        for (std::size_t i = 0; i < size(); ++i) out[i] = {prev_[i], cur_[i]};
        return out;
    }

private:
    void check_self_term() const {
        if (!(self_term_ > 0.0) || self_term_ > 1.0 + 1e-12)
            throw std::runtime_error("ReferenceSet: self term outside (0, 1]");
    }

    RbfKernel kernel_;
    std::vector<double> prev_;
    std::vector<double> cur_;
    double self_term_ = 0.0;
};

/// The m-1 consecutive second-order samples of one length-m error block.
struct Block {
    std::vector<SecondOrderSample> samples;
};

/// All consecutive pairs of an error sequence.
inline std::vector<SecondOrderSample> consecutive_pairs(std::span<const double> errors) {
    if (errors.size() < 2) throw std::invalid_argument("consecutive_pairs: need at least 2 errors");
    std::vector<SecondOrderSample> pairs(errors.size() - 1);
    for (std::size_t t = 1; t < errors.size(); ++t) pairs[t - 1] = {errors[t - 1], errors[t]};
    return pairs;
}

inline constexpr std::uint64_t kReferenceSubsampleSeed = 0x9d2c5680aull;

/// Builds the reference from an in-distribution error sequence: forms all
/// consecutive pairs and, above max_samples, subsamples uniformly without
/// replacement under a fixed seed (temporal order kept).
inline ReferenceSet build_reference(std::span<const double> errors, RbfKernel kernel,
                                    std::size_t max_samples,
                                    std::uint64_t subsample_seed = kReferenceSubsampleSeed) {
    if (errors.size() < 3) throw std::invalid_argument("build_reference: need at least 3 errors");
    if (max_samples < 2) throw std::invalid_argument("build_reference: max_samples must be >= 2");
    auto pairs = consecutive_pairs(errors);
    if (pairs.size() > max_samples) {
        std::vector<std::size_t> idx(pairs.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng(derive_seed(subsample_seed, pairs.size(), max_samples));
        for (std::size_t i = 0; i < max_samples; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(idx.size() - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(max_samples);
        std::sort(idx.begin(), idx.end());
        std::vector<SecondOrderSample> kept(max_samples);
        for (std::size_t i = 0; i < max_samples; ++i) kept[i] = pairs[idx[i]];
        pairs = std::move(kept);
    }
    return ReferenceSet(pairs, kernel);
}

/// Blockwise MMD D(mu_hat, lambda0) via the V-statistic form (ordered pairs,
/// diagonal included), clamped at 0 before the square root. Cost is
/// O((m-1)^2 + (m-1) * n_ref) per call, independent of stream length.
inline double mmd(std::span<const SecondOrderSample> block, const ReferenceSet& ref) {
    if (block.empty()) throw std::invalid_argument("mmd: block must be non-empty");
    static thread_local std::vector<double> b1, b2;
    detail::split_coords(block, b1, b2);
    const double inv2s2 = ref.inv_two_sigma_sq();
    const double within = detail::kernel_mean(b1, b2, b1, b2, inv2s2);
    const double cross = detail::kernel_mean(b1, b2, ref.prev_coords(), ref.cur_coords(), inv2s2);
    return detail::clamped_sqrt(within + ref.self_term() - 2.0 * cross);
}

inline double mmd(const Block& block, const ReferenceSet& ref) {
    return mmd(std::span<const SecondOrderSample>(block.samples), ref);
}

/// Two-sample MMD with `b` in the reference role; used to gauge the
/// separation D(lambda1, lambda0) between regimes.
inline double mmd_between_samples(std::span<const SecondOrderSample> a,
                                  std::span<const SecondOrderSample> b, RbfKernel kernel) {
    validate(kernel);
    if (a.empty() || b.empty())
        throw std::invalid_argument("mmd_between_samples: inputs must be non-empty");
    static thread_local std::vector<double> a1, a2, c1, c2;
    detail::split_coords(a, a1, a2);
    detail::split_coords(b, c1, c2);
    const double inv2s2 = 1.0 / (2.0 * kernel.bandwidth * kernel.bandwidth);
    const double within_a = detail::kernel_mean(a1, a2, a1, a2, inv2s2);
    const double within_b = detail::kernel_mean(c1, c2, c1, c2, inv2s2);
    const double cross = detail::kernel_mean(a1, a2, c1, c2, inv2s2);
    return detail::clamped_sqrt(within_a + within_b - 2.0 * cross);
}

}  // namespace driftmon
