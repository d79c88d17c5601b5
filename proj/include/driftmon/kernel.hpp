// Bounded RBF kernel on second-order error samples.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "driftmon/common.hpp"

namespace driftmon {

/// Consecutive error pair x_t = (e_{t-1}, e_t).
struct SecondOrderSample {
    double prev = 0.0;
    double cur = 0.0;
};

struct RbfKernel {
    double bandwidth = 0.8;
};

inline void validate(const RbfKernel& kernel) {
    if (!(kernel.bandwidth > 0.0) || !std::isfinite(kernel.bandwidth))
        throw std::invalid_argument("RbfKernel: bandwidth must be finite and > 0");
}

namespace detail {

inline double rbf_exponent(double sq_dist, double inv_two_sigma_sq) {
    const double e = -sq_dist * inv_two_sigma_sq;
    return e < kExpNegFloor ? kExpNegFloor : e;
}

}  // namespace detail

/// k(x,y) = exp(-||x-y||^2 / (2 sigma^2)); 0 < k <= 1 and k(x,x) = 1.
inline double rbf_eval(const SecondOrderSample& x, const SecondOrderSample& y, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("rbf_eval: sigma must be > 0");
    if (!std::isfinite(x.prev) || !std::isfinite(x.cur) || !std::isfinite(y.prev) || !std::isfinite(y.cur))
        throw std::invalid_argument("rbf_eval: coordinates must be finite");
    const double d1 = x.prev - y.prev;
    const double d2 = x.cur - y.cur;
    const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    return detail::exp_neg_unchecked(detail::rbf_exponent(d1 * d1 + d2 * d2, inv_two_sigma_sq));
}

/// Median of pairwise Euclidean distances over distinct index pairs
/// (midpoint convention for even counts). Rejects all-identical inputs.
inline double median_heuristic(std::span<const SecondOrderSample> samples) {
    if (samples.size() < 2)
        throw std::invalid_argument("median_heuristic: need at least 2 samples");
    std::vector<double> dists;
    dists.reserve(samples.size() * (samples.size() - 1) / 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::size_t j = i + 1; j < samples.size(); ++j) {
            const double d1 = samples[i].prev - samples[j].prev;
            const double d2 = samples[i].cur - samples[j].cur;
            dists.push_back(std::sqrt(d1 * d1 + d2 * d2));
        }
    }
    std::sort(dists.begin(), dists.end());
    const std::size_t n = dists.size();
    const double med = n % 2 == 1 ? dists[n / 2] : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
    if (!(med > 0.0))
        throw std::invalid_argument("median_heuristic: samples are all identical");
    return med;
}

}  // namespace driftmon
