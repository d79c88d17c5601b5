// Analytic guarantee evaluation: the detection-delay upper bound, its
// mixing/kernel ingredients, and the exponential false-alarm fit.
#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "driftmon/common.hpp"
#include "driftmon/mmd.hpp"

namespace driftmon {

/// a = sqrt((2 - 2*delta + 4R) / ((m-1)(1 - delta))).
/// delta is the mixing constant of the pair chain, R the kernel
/// second-moment envelope.
inline double bound_a(int m, double delta, double R) {
    if (m < 2) throw std::invalid_argument("bound_a: m must be >= 2");
    if (!(delta >= 0.0) || !(delta < 1.0)) throw std::invalid_argument("bound_a: delta must lie in [0,1)");
    if (!(R > 0.0) || !(R <= 1.0)) throw std::invalid_argument("bound_a: R must lie in (0,1]");
    return std::sqrt((2.0 - 2.0 * delta + 4.0 * R) / (static_cast<double>(m - 1) * (1.0 - delta)));
}

struct BoundInputs {
    int m = 50;
    double b = 1.0;
    double zeta = 0.05;
    double delta = 0.0;   // mixing constant used in a
    double R = 1.0;
    double d_hat = 0.0;   // estimate of D(lambda1, lambda0) - zeta
};

inline void validate(const BoundInputs& in) {
    if (in.m < 2) throw std::invalid_argument("BoundInputs: m must be >= 2");
    if (!(in.b > 0.0)) throw std::invalid_argument("BoundInputs: b must be > 0");
    if (in.zeta < 0.0) throw std::invalid_argument("BoundInputs: zeta must be >= 0");
    if (!(in.delta >= 0.0) || !(in.delta < 1.0))
        throw std::invalid_argument("BoundInputs: delta must lie in [0,1)");
    if (!(in.R > 0.0) || !(in.R <= 1.0)) throw std::invalid_argument("BoundInputs: R must lie in (0,1]");
    if (!(in.d_hat > 0.0)) throw std::invalid_argument("BoundInputs: d_hat must be > 0");
}

/// Delay bound in raw time steps:
///   m*b / (sqrt(d) - sqrt(a))^2 + m*sqrt(d) / (sqrt(d) - sqrt(a)).
/// Empty when d_hat <= a (the bound is vacuous there).
inline std::optional<double> wadd_upper_bound(const BoundInputs& in) {
    validate(in);
    const double a = bound_a(in.m, in.delta, in.R);
    if (in.d_hat <= a) return std::nullopt;
    const double gap = std::sqrt(in.d_hat) - std::sqrt(a);
    const double md = static_cast<double>(in.m);
    return md * in.b / (gap * gap) + md * std::sqrt(in.d_hat) / gap;
}

/// Restricted-threshold form m*b / (sqrt(d) - sqrt(a))^2.
inline std::optional<double> wadd_upper_bound_tight(const BoundInputs& in) {
    validate(in);
    const double a = bound_a(in.m, in.delta, in.R);
    if (in.d_hat <= a) return std::nullopt;
    const double gap = std::sqrt(in.d_hat) - std::sqrt(a);
    return static_cast<double>(in.m) * in.b / (gap * gap);
}

/// Empirical sup_x E[k(x, X')^2] over the reference points plus a
/// bounding-box grid (>= 100 candidates). Always <= 1 for the RBF kernel.
inline double estimate_R(const ReferenceSet& ref) {
    const auto p = ref.prev_coords();
    const auto c = ref.cur_coords();
    // k^2 is an RBF with half the squared bandwidth
    const double inv2s2_sq = 2.0 * ref.inv_two_sigma_sq();

    double best = 0.0;
    auto consider = [&](double x1, double x2) {
        const double v = detail::kernel_mean(std::span(&x1, 1), std::span(&x2, 1), p, c, inv2s2_sq);
        if (v > best) best = v;
    };
    for (std::size_t i = 0; i < ref.size(); ++i) consider(p[i], c[i]);

    double lo1 = p[0], hi1 = p[0], lo2 = c[0], hi2 = c[0];
    for (std::size_t i = 0; i < ref.size(); ++i) {
        lo1 = std::min(lo1, p[i]);
        hi1 = std::max(hi1, p[i]);
        lo2 = std::min(lo2, c[i]);
        hi2 = std::max(hi2, c[i]);
    }
    const int grid = 12;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            const double fx = grid == 1 ? 0.5 : static_cast<double>(i) / (grid - 1);
            const double fy = grid == 1 ? 0.5 : static_cast<double>(j) / (grid - 1);
            consider(lo1 + fx * (hi1 - lo1), lo2 + fy * (hi2 - lo2));
        }
    }
    return std::min(best, 1.0);
}

struct MtfaPoint {
    double b = 0.0;
    double mtfa = 0.0;
};

struct ExponentFit {
    double q_hat = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// OLS of log(MTFA) on b. Censored estimates must be excluded upstream.
inline ExponentFit fit_mtfa_exponent(std::span<const MtfaPoint> points) {
    if (points.size() < 4) throw std::invalid_argument("fit_mtfa_exponent: need at least 4 points");
    for (const auto& pt : points)
        if (!(pt.mtfa > 0.0)) throw std::invalid_argument("fit_mtfa_exponent: MTFA values must be > 0");
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t j = i + 1; j < points.size(); ++j)
            if (points[i].b == points[j].b)
                throw std::invalid_argument("fit_mtfa_exponent: b values must be distinct");

    const double n = static_cast<double>(points.size());
    double sx = 0, sy = 0;
    for (const auto& pt : points) {
        sx += pt.b;
        sy += std::log(pt.mtfa);
    }
    const double mx = sx / n;
    const double my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& pt : points) {
        const double dx = pt.b - mx;
        const double dy = std::log(pt.mtfa) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    ExponentFit fit;
    fit.q_hat = sxy / sxx;
    fit.intercept = my - fit.q_hat * mx;
    fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

}  // namespace driftmon
