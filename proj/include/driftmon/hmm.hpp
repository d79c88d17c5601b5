// Two-state hidden-Markov error process: sampling, stationary analysis,
// second-order lift, and spectral gap.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "driftmon/common.hpp"
#include "driftmon/distributions.hpp"

namespace driftmon {

enum class LatentMode : std::uint8_t { L = 0, H = 1 };

using Matrix2 = std::array<std::array<double, 2>, 2>;
using Matrix4 = std::array<std::array<double, 4>, 4>;

inline void validate_transition(const Matrix2& P) {
    for (int i = 0; i < 2; ++i) {
        double row = 0.0;
        for (int j = 0; j < 2; ++j) {
            if (!(P[i][j] > 0.0)) throw std::invalid_argument("transition matrix: entries must be > 0");
            row += P[i][j];
        }
        if (std::abs(row - 1.0) > 1e-12)
            throw std::invalid_argument("transition matrix: rows must sum to 1");
    }
}

/// Pre- or post-change parameter set (transition matrix + per-mode emissions).
/// Mode L is the low-error mode by labeling convention.
struct HmmSpec {
    Matrix2 transition{};
    EmissionDist emission_L = Gaussian{};
    EmissionDist emission_H = Gaussian{};
};

inline void validate(const HmmSpec& spec) {
    validate_transition(spec.transition);
    validate(spec.emission_L);
    validate(spec.emission_H);
    if (mean_of(spec.emission_L) > mean_of(spec.emission_H))
        throw std::invalid_argument("HmmSpec: emission_L mean must not exceed emission_H mean");
}

/// Symmetric-switching convenience constructor: P_LH = P_HL = p.
inline HmmSpec make_symmetric_spec(double p, EmissionDist low, EmissionDist high) {
    if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("switching probability must lie in (0,1)");
    HmmSpec spec;
    spec.transition = {{{1.0 - p, p}, {p, 1.0 - p}}};
    spec.emission_L = std::move(low);
    spec.emission_H = std::move(high);
    validate(spec);
    return spec;
}

/// Stationary distribution of a strictly positive 2x2 row-stochastic matrix,
/// in closed form: pi_L = P_HL / (P_LH + P_HL).
inline std::array<double, 2> stationary_distribution(const Matrix2& P) {
    validate_transition(P);
    const double p_lh = P[0][1];
    const double p_hl = P[1][0];
    const double pi_l = p_hl / (p_lh + p_hl);
    return {pi_l, 1.0 - pi_l};
}

/// Lift to the chain on ordered mode pairs (i,j), row/column order
/// LL, LH, HL, HH. Transition ((i,j) -> (j,k)) = P_jk; all other entries 0.
inline Matrix4 second_order_chain(const Matrix2& P) {
    validate_transition(P);
    Matrix4 lifted{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) lifted[i * 2 + j][j * 2 + k] = P[j][k];
    return lifted;
}

/// 1 - |lambda_2| for a row-stochastic matrix (second-largest eigenvalue
/// modulus). The lifted pair chain shares the gap of its base chain.
inline double spectral_gap(const Eigen::MatrixXd& M) {
    if (M.rows() != M.cols() || M.rows() < 2)
        throw std::invalid_argument("spectral_gap: need a square matrix of order >= 2");
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        if (std::abs(M.row(i).sum() - 1.0) > 1e-9)
            throw std::invalid_argument("spectral_gap: rows must sum to 1");
        if (M.row(i).minCoeff() < -1e-12)
            throw std::invalid_argument("spectral_gap: entries must be non-negative");
    }
    Eigen::EigenSolver<Eigen::MatrixXd> solver(M, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("spectral_gap: eigenvalue iteration failed to converge");
    std::vector<double> moduli(static_cast<std::size_t>(M.rows()));
    for (Eigen::Index i = 0; i < M.rows(); ++i) moduli[static_cast<std::size_t>(i)] = std::abs(solver.eigenvalues()[i]);
    std::sort(moduli.begin(), moduli.end(), std::greater<>());
    return 1.0 - moduli[1];
}

inline double spectral_gap(const Matrix2& P) {
    Eigen::MatrixXd M(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) M(i, j) = P[i][j];
    return spectral_gap(M);
}

inline double spectral_gap(const Matrix4& P) {
    Eigen::MatrixXd M(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) M(i, j) = P[i][j];
    return spectral_gap(M);
}

/// Second-largest eigenvalue modulus of the pair chain under the spec;
/// the alternative reading of the mixing constant next to spectral_gap.
inline double second_eigenvalue_modulus(const Matrix2& P) {
    return 1.0 - spectral_gap(P);
}

/// One simulated error path with its latent mode sequence.
struct ErrorPath {
    std::vector<LatentMode> modes;
    std::vector<double> errors;
    std::uint64_t seed = 0;
};

namespace detail {

inline LatentMode draw_mode(double prob_L, Rng& rng) {
    return uniform01(rng) < prob_L ? LatentMode::L : LatentMode::H;
}

inline LatentMode step_mode(const Matrix2& P, LatentMode cur, Rng& rng) {
    return draw_mode(P[static_cast<int>(cur)][0], rng);
}

}  // namespace detail

/// Simulate `length` steps. The initial mode comes from the stationary
/// distribution unless `init` pins it. Same (spec, length, seed, init)
/// reproduces the path bit-exactly.
inline ErrorPath sample_path(const HmmSpec& spec, std::size_t length, std::uint64_t seed,
                             std::optional<LatentMode> init = std::nullopt) {
    validate(spec);
    if (length < 1) throw std::invalid_argument("sample_path: length must be >= 1");
    Rng rng(seed);
    ErrorPath path;
    path.seed = seed;
    path.modes.reserve(length);
    path.errors.reserve(length);
    const auto pi = stationary_distribution(spec.transition);
    LatentMode mode = init ? *init : detail::draw_mode(pi[0], rng);
    for (std::size_t t = 0; t < length; ++t) {
        if (t > 0) mode = detail::step_mode(spec.transition, mode, rng);
        path.modes.push_back(mode);
        const EmissionDist& em = mode == LatentMode::L ? spec.emission_L : spec.emission_H;
        path.errors.push_back(sample(em, rng));
    }
    return path;
}

/// Lazy change-free error stream; cheap enough that detectors dominate cost.
class HmmStream {
public:
    HmmStream(HmmSpec spec, std::uint64_t seed, std::optional<LatentMode> init = std::nullopt)
        : spec_(std::move(spec)), rng_(seed) {
        validate(spec_);
        const auto pi = stationary_distribution(spec_.transition);
        mode_ = init ? *init : detail::draw_mode(pi[0], rng_);
        first_ = true;
    }

    double next() {
        if (!first_) mode_ = detail::step_mode(spec_.transition, mode_, rng_);
        first_ = false;
        const EmissionDist& em = mode_ == LatentMode::L ? spec_.emission_L : spec_.emission_H;
        return sample(em, rng_);
    }

    [[nodiscard]] LatentMode mode() const { return mode_; }

private:
    HmmSpec spec_;
    Rng rng_;
    LatentMode mode_ = LatentMode::L;
    bool first_ = true;
};

/// Error stream whose law switches from `pre` to `post` at step `changepoint`
/// (1-based; steps >= changepoint are post-change). The latent mode at step
/// changepoint-1 is pinned to `mode_before_change`, and the pre-change
/// segment is drawn backward from it; two-state chains are reversible at
/// stationarity, so the backward transitions reuse the forward matrix.
class ChangeStream {
public:
    ChangeStream(HmmSpec pre, HmmSpec post, std::size_t changepoint,
                 LatentMode mode_before_change, std::uint64_t seed)
        : pre_(std::move(pre)), post_(std::move(post)), changepoint_(changepoint), rng_(seed) {
        validate(pre_);
        validate(post_);
        if (changepoint_ < 1) throw std::invalid_argument("ChangeStream: changepoint must be >= 1");
        mode_ = mode_before_change;
        if (changepoint_ > 1) {
            pre_modes_.resize(changepoint_ - 1);
            pre_modes_[changepoint_ - 2] = mode_before_change;
            for (std::size_t back = changepoint_ - 2; back-- > 0;) {
                pre_modes_[back] = detail::step_mode(pre_.transition, pre_modes_[back + 1], rng_);
            }
        }
    }

    double next() {
        ++t_;
        if (t_ < changepoint_) {
            mode_ = pre_modes_[t_ - 1];
            const EmissionDist& em = mode_ == LatentMode::L ? pre_.emission_L : pre_.emission_H;
            return sample(em, rng_);
        }
        mode_ = detail::step_mode(post_.transition, mode_, rng_);
        const EmissionDist& em = mode_ == LatentMode::L ? post_.emission_L : post_.emission_H;
        return sample(em, rng_);
    }

    [[nodiscard]] std::size_t step() const { return t_; }
    [[nodiscard]] LatentMode mode() const { return mode_; }

private:
    HmmSpec pre_;
    HmmSpec post_;
    std::size_t changepoint_;
    Rng rng_;
    std::vector<LatentMode> pre_modes_;
    LatentMode mode_ = LatentMode::L;
    std::size_t t_ = 0;
};

}  // namespace driftmon
