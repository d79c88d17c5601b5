// Baum-Welch fitting of the two-state Gaussian-emission model and MAP
// mode assignment from forward-backward posteriors.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "driftmon/hmm.hpp"

namespace driftmon {

struct FitResult {
    HmmSpec spec;
    std::vector<double> log_likelihoods;  // one entry per iteration
    bool converged = false;
    int iterations = 0;
};

namespace detail {

inline double gaussian_pdf(double e, double mean, double std) {
    const double z = (e - mean) / std;
    return std::exp(-0.5 * z * z) / (std * 2.5066282746310005024);
}

struct ForwardBackward {
    std::vector<std::array<double, 2>> gamma;              // state posteriors
    std::vector<std::array<std::array<double, 2>, 2>> xi;  // pair posteriors
    double log_likelihood = 0.0;
};

/// Scaled forward-backward pass with free initial distribution `init`.
inline ForwardBackward forward_backward(std::span<const double> obs, const Matrix2& P,
                                        const std::array<double, 2>& init,
                                        const std::array<double, 2>& means,
                                        const std::array<double, 2>& stds) {
    const std::size_t n = obs.size();
    std::vector<std::array<double, 2>> alpha(n), beta(n), emis(n);
    std::vector<double> scale(n);

    for (std::size_t t = 0; t < n; ++t)
        for (int k = 0; k < 2; ++k) emis[t][k] = gaussian_pdf(obs[t], means[k], stds[k]);

    ForwardBackward out;
    for (int k = 0; k < 2; ++k) alpha[0][k] = init[k] * emis[0][k];
    scale[0] = alpha[0][0] + alpha[0][1];
    if (!(scale[0] > 0.0)) throw std::runtime_error("forward_backward: zero likelihood at t=0");
    for (int k = 0; k < 2; ++k) alpha[0][k] /= scale[0];
    for (std::size_t t = 1; t < n; ++t) {
        for (int j = 0; j < 2; ++j) {
            alpha[t][j] = (alpha[t - 1][0] * P[0][j] + alpha[t - 1][1] * P[1][j]) * emis[t][j];
        }
        scale[t] = alpha[t][0] + alpha[t][1];
        if (!(scale[t] > 0.0)) throw std::runtime_error("forward_backward: vanishing likelihood");
        for (int k = 0; k < 2; ++k) alpha[t][k] /= scale[t];
    }

    beta[n - 1] = {1.0, 1.0};
    for (std::size_t t = n - 1; t-- > 0;) {
        for (int i = 0; i < 2; ++i) {
            beta[t][i] = (P[i][0] * emis[t + 1][0] * beta[t + 1][0] +
                          P[i][1] * emis[t + 1][1] * beta[t + 1][1]) /
                         scale[t + 1];
        }
    }

    out.gamma.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double g0 = alpha[t][0] * beta[t][0];
        const double g1 = alpha[t][1] * beta[t][1];
        const double z = g0 + g1;
        out.gamma[t] = {g0 / z, g1 / z};
    }

    out.xi.resize(n > 0 ? n - 1 : 0);
    for (std::size_t t = 0; t + 1 < n; ++t) {
        double z = 0.0;
        std::array<std::array<double, 2>, 2> x{};
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                x[i][j] = alpha[t][i] * P[i][j] * emis[t + 1][j] * beta[t + 1][j] / scale[t + 1];
                z += x[i][j];
            }
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) out.xi[t][i][j] = x[i][j] / z;
    }

    out.log_likelihood = 0.0;
    for (double s : scale) out.log_likelihood += std::log(s);
    return out;
}

}  // namespace detail

constexpr double kFitStdFloor = 1e-6;

/// Maximum-likelihood two-state Gaussian fit via Baum-Welch. Emissions are
/// ordered so the low-error mode comes first. Initialization is a median
/// split for the means, pooled std for both modes, and a sticky transition
/// matrix, so fits are deterministic. The `converged` flag is false when
/// max_iters runs out before the tolerance is met; the best-so-far estimate
/// is still returned.
inline FitResult fit_two_state_hmm(std::span<const double> errors, int max_iters = 200,
                                   double tol = 1e-6) {
    if (errors.size() < 100)
        throw std::invalid_argument("fit_two_state_hmm: need at least 100 observations");
    for (double e : errors)
        if (!std::isfinite(e)) throw std::invalid_argument("fit_two_state_hmm: observations must be finite");
    if (max_iters < 1) throw std::invalid_argument("fit_two_state_hmm: max_iters must be >= 1");

    std::vector<double> sorted(errors.begin(), errors.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t half = sorted.size() / 2;
    std::array<double, 2> means{0.0, 0.0};
    for (std::size_t i = 0; i < half; ++i) means[0] += sorted[i];
    for (std::size_t i = half; i < sorted.size(); ++i) means[1] += sorted[i];
    means[0] /= static_cast<double>(half);
    means[1] /= static_cast<double>(sorted.size() - half);

    const double grand_mean = mean_of(sorted);
    double pooled_var = 0.0;
    for (double e : sorted) pooled_var += (e - grand_mean) * (e - grand_mean);
    pooled_var /= static_cast<double>(sorted.size());
    const double pooled_std = std::sqrt(pooled_var);
    if (pooled_std < kFitStdFloor)
        throw std::invalid_argument("fit_two_state_hmm: degenerate input (constant sequence)");
    std::array<double, 2> stds{pooled_std, pooled_std};

    Matrix2 P{{{0.9, 0.1}, {0.1, 0.9}}};
    std::array<double, 2> init{0.5, 0.5};

    FitResult result;
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iters; ++iter) {
        const auto fb = detail::forward_backward(errors, P, init, means, stds);
        result.log_likelihoods.push_back(fb.log_likelihood);
        result.iterations = iter + 1;

        // M step
        std::array<double, 2> gsum{0.0, 0.0};
        std::array<double, 2> new_means{0.0, 0.0};
        for (std::size_t t = 0; t < errors.size(); ++t)
            for (int k = 0; k < 2; ++k) {
                gsum[k] += fb.gamma[t][k];
                new_means[k] += fb.gamma[t][k] * errors[t];
            }
        for (int k = 0; k < 2; ++k) new_means[k] /= gsum[k];
        std::array<double, 2> new_vars{0.0, 0.0};
        for (std::size_t t = 0; t < errors.size(); ++t)
            for (int k = 0; k < 2; ++k) {
                const double d = errors[t] - new_means[k];
                new_vars[k] += fb.gamma[t][k] * d * d;
            }
        for (int k = 0; k < 2; ++k) new_vars[k] /= gsum[k];

        Matrix2 new_P{};
        for (int i = 0; i < 2; ++i) {
            double denom = 0.0;
            for (std::size_t t = 0; t + 1 < errors.size(); ++t) denom += fb.gamma[t][i];
            for (int j = 0; j < 2; ++j) {
                double num = 0.0;
                for (std::size_t t = 0; t + 1 < errors.size(); ++t) num += fb.xi[t][i][j];
                new_P[i][j] = num / denom;
            }
            // keep the chain strictly positive
            for (int j = 0; j < 2; ++j) new_P[i][j] = std::clamp(new_P[i][j], 1e-9, 1.0 - 1e-9);
            const double row = new_P[i][0] + new_P[i][1];
            for (int j = 0; j < 2; ++j) new_P[i][j] /= row;
        }

        means = new_means;
        for (int k = 0; k < 2; ++k) {
            stds[k] = std::sqrt(new_vars[k]);
            if (stds[k] < kFitStdFloor)
                throw std::runtime_error("fit_two_state_hmm: degenerate fit (mode std collapsed)");
        }
        P = new_P;
        init = fb.gamma[0];

        if (iter > 0 && std::abs(fb.log_likelihood - prev_ll) < tol * (1.0 + std::abs(prev_ll))) {
            result.converged = true;
            break;
        }
        prev_ll = fb.log_likelihood;
    }

    int low = means[0] <= means[1] ? 0 : 1;
    const int high = 1 - low;
    HmmSpec spec;
    spec.transition = {{{P[low][low], P[low][high]}, {P[high][low], P[high][high]}}};
    spec.emission_L = Gaussian{means[low], stds[low]};
    spec.emission_H = Gaussian{means[high], stds[high]};
    validate(spec);
    result.spec = spec;
    return result;
}

/// Per-step MAP latent-mode assignment under forward-backward posteriors,
/// starting from the stationary distribution. Gaussian emissions required.
inline std::vector<LatentMode> map_mode_assignment(std::span<const double> errors,
                                                   const HmmSpec& spec) {
    validate(spec);
    if (errors.empty()) throw std::invalid_argument("map_mode_assignment: empty input");
    if (!std::holds_alternative<Gaussian>(spec.emission_L) ||
        !std::holds_alternative<Gaussian>(spec.emission_H))
        throw std::invalid_argument("map_mode_assignment: Gaussian emissions required");
    const auto& low = std::get<Gaussian>(spec.emission_L);
    const auto& high = std::get<Gaussian>(spec.emission_H);
    const auto pi = stationary_distribution(spec.transition);
    const auto fb = detail::forward_backward(errors, spec.transition, {pi[0], pi[1]},
                                             {low.mean, high.mean}, {low.std, high.std});
    std::vector<LatentMode> modes(errors.size());
    for (std::size_t t = 0; t < errors.size(); ++t)
        modes[t] = fb.gamma[t][0] >= fb.gamma[t][1] ? LatentMode::L : LatentMode::H;
    return modes;
}

}  // namespace driftmon
