// Monte-Carlo estimation of detection delay and false-alarm time, threshold
// calibration, trade-off frontiers, and threshold-free scoring.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "driftmon/common.hpp"
#include "driftmon/detectors.hpp"
#include "driftmon/hmm.hpp"
#include "driftmon/mmd.hpp"

namespace driftmon {

/// Second-order samples drawn from a long simulated path under `spec`;
/// finite-sample stand-in for the limiting pair distribution.
inline std::vector<SecondOrderSample> second_order_samples(const HmmSpec& spec, std::size_t count,
                                                           std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("second_order_samples: count must be >= 1");
    const ErrorPath path = sample_path(spec, count + 1, seed);
    return consecutive_pairs(path.errors);
}

/// Estimated separation D(lambda1, lambda0) between the pair distributions
/// of two regimes.
inline double estimate_lambda_shift(const HmmSpec& pre, const HmmSpec& post, RbfKernel kernel,
                                    std::size_t n_samples, std::uint64_t seed) {
    const auto a = second_order_samples(post, n_samples, derive_seed(seed, 1));
    const auto b = second_order_samples(pre, n_samples, derive_seed(seed, 2));
    return mmd_between_samples(a, b, kernel);
}

/// Pre/post regime pair with the changepoint placements swept by the
/// delay estimator.
struct ScenarioSpec {
    HmmSpec pre;
    HmmSpec post;
    std::vector<std::int64_t> changepoint_grid;
    std::string label;
};

inline std::vector<std::int64_t> default_changepoint_grid(int m) {
    return {1, static_cast<std::int64_t>(m) + 1, 5 * static_cast<std::int64_t>(m) + 1,
            10 * static_cast<std::int64_t>(m) + 1};
}

/// Builds a scenario and rejects indistinguishable pre/post pairs: the
/// estimated shift must clear twice the same-distribution split estimate
/// (the finite-sample noise floor).
inline ScenarioSpec make_scenario(HmmSpec pre, HmmSpec post, std::vector<std::int64_t> grid,
                                  std::string label, RbfKernel kernel = RbfKernel{0.8},
                                  std::size_t guard_samples = 4000,
                                  std::uint64_t guard_seed = 0xd15741a6u) {
    validate(pre);
    validate(post);
    if (grid.empty()) throw std::invalid_argument("ScenarioSpec: changepoint grid must be non-empty");
    for (auto tau : grid)
        if (tau < 1) throw std::invalid_argument("ScenarioSpec: changepoints must be >= 1");

    const double shift = estimate_lambda_shift(pre, post, kernel, guard_samples, guard_seed);
    const auto id_a = second_order_samples(pre, guard_samples, derive_seed(guard_seed, 3));
    const auto id_b = second_order_samples(pre, guard_samples, derive_seed(guard_seed, 4));
    const double floor = mmd_between_samples(id_a, id_b, kernel);
    if (shift <= 2.0 * floor)
        throw std::invalid_argument("ScenarioSpec '" + label +
                                    "': pre and post regimes are not distinguishable");
    return ScenarioSpec{std::move(pre), std::move(post), std::move(grid), std::move(label)};
}

struct MtfaEstimate {
    double mtfa = 0.0;
    double stderr_ = 0.0;
    double censor_rate = 0.0;
    std::int64_t n_runs = 0;
};

/// Mean stopping time over change-free streams. Censored runs contribute
/// max_len, so the estimate is a lower bound under heavy censoring.
inline MtfaEstimate estimate_mtfa(const DetectorConfig& config, const HmmSpec& pre,
                                  std::int64_t n_runs, std::int64_t max_len, std::uint64_t seed,
                                  unsigned max_threads = 0) {
    if (n_runs < 1) throw std::invalid_argument("estimate_mtfa: n_runs must be >= 1");
    validate(pre);
    std::vector<double> stops(static_cast<std::size_t>(n_runs), 0.0);
    std::vector<std::uint8_t> censored(static_cast<std::size_t>(n_runs), 0);
    parallel_for(
        static_cast<std::size_t>(n_runs),
        [&](std::size_t run) {
            AnyDetector detector = make_detector(config);
            HmmStream stream(pre, derive_seed(seed, run));
            const RunResult res = run_to_alarm(detector, stream, max_len);
            stops[run] = static_cast<double>(res.steps);
            censored[run] = res.alarm ? 0 : 1;
        },
        max_threads);

    MtfaEstimate out;
    out.n_runs = n_runs;
    out.mtfa = mean_of(stops);
    out.stderr_ = std::sqrt(population_variance(stops) / static_cast<double>(n_runs));
    std::int64_t n_censored = 0;
    for (auto c : censored) n_censored += c;
    out.censor_rate = static_cast<double>(n_censored) / static_cast<double>(n_runs);
    return out;
}

struct WaddEstimate {
    double wadd = 0.0;
    double stderr_ = 0.0;
    std::int64_t n_runs = 0;          // runs contributing to the argmax cell
    double prechange_alarm_rate = 0.0;  // discarded false-alarm fraction, worst cell
    double censor_rate = 0.0;           // post-change censored fraction, worst cell
    std::int64_t argmax_changepoint = 0;
    LatentMode argmax_mode = LatentMode::L;
};

/// Worst-case mean detection delay: max over (changepoint, latent mode just
/// before the change) cells of the mean of (tau - tau*)^+. Runs that alarm
/// before the changepoint are discarded and reported; censored runs
/// contribute the horizon (a delay lower bound).
inline WaddEstimate estimate_wadd(const DetectorConfig& config, const ScenarioSpec& scenario,
                                  std::int64_t n_runs_per_cell, std::uint64_t seed,
                                  std::int64_t post_horizon = 20000, unsigned max_threads = 0) {
    if (n_runs_per_cell < 1) throw std::invalid_argument("estimate_wadd: n_runs_per_cell must be >= 1");
    if (scenario.changepoint_grid.empty())
        throw std::invalid_argument("estimate_wadd: changepoint grid must be non-empty");

    struct Cell {
        std::int64_t changepoint;
        LatentMode mode;
        std::vector<double> delays;
        std::int64_t discarded = 0;
        std::int64_t censored = 0;
    };
    std::vector<Cell> cells;
    for (auto tau : scenario.changepoint_grid)
        for (LatentMode z : {LatentMode::L, LatentMode::H}) cells.push_back({tau, z, {}, 0, 0});

    struct RunOutcome {
        double delay = 0.0;
        std::uint8_t discarded = 0;
        std::uint8_t censored = 0;
    };

    for (std::size_t c = 0; c < cells.size(); ++c) {
        Cell& cell = cells[c];
        const std::int64_t max_steps = cell.changepoint - 1 + post_horizon;
        std::vector<RunOutcome> outcomes(static_cast<std::size_t>(n_runs_per_cell));
        parallel_for(
            static_cast<std::size_t>(n_runs_per_cell),
            [&](std::size_t run) {
                AnyDetector detector = make_detector(config);
                ChangeStream stream(scenario.pre, scenario.post,
                                    static_cast<std::size_t>(cell.changepoint), cell.mode,
                                    derive_seed(seed, run, c));
                const RunResult res = run_to_alarm(detector, stream, max_steps);
                RunOutcome& out = outcomes[run];
                if (res.alarm && res.alarm->stopping_time < cell.changepoint) {
                    out.discarded = 1;
                } else if (!res.alarm) {
                    out.censored = 1;
                    out.delay = static_cast<double>(max_steps - cell.changepoint + 1);
                } else {
                    out.delay = static_cast<double>(res.alarm->stopping_time - cell.changepoint);
                    if (out.delay < 0.0) out.delay = 0.0;
                }
            },
            max_threads);
        for (const auto& out : outcomes) {
            if (out.discarded) {
                ++cell.discarded;
            } else {
                cell.delays.push_back(out.delay);
                if (out.censored) ++cell.censored;
            }
        }
        if (cell.discarded * 2 > n_runs_per_cell)
            throw std::runtime_error("estimate_wadd: more than half the runs in a cell alarmed "
                                     "before the changepoint; lower the false-alarm rate");
        if (cell.delays.empty())
            throw std::runtime_error("estimate_wadd: no usable runs in a cell");
    }

    WaddEstimate out;
    double best = -1.0;
    for (const auto& cell : cells) {
        const double mean = mean_of(cell.delays);
        if (mean > best) {
            best = mean;
            out.wadd = mean;
            out.stderr_ = std::sqrt(population_variance(cell.delays) /
                                    static_cast<double>(cell.delays.size()));
            out.n_runs = static_cast<std::int64_t>(cell.delays.size());
            out.prechange_alarm_rate =
                static_cast<double>(cell.discarded) / static_cast<double>(n_runs_per_cell);
            out.censor_rate =
                static_cast<double>(cell.censored) / static_cast<double>(cell.delays.size());
            out.argmax_changepoint = cell.changepoint;
            out.argmax_mode = cell.mode;
        }
    }
    return out;
}

using ConfigTemplate = std::function<DetectorConfig(double b)>;

struct CalibrationResult {
    double b = 0.0;
    double mtfa = 0.0;
    double censor_rate = 0.0;
    int iterations = 0;
};

/// Bisection on b until the Monte-Carlo MTFA lands within tol_rel of the
/// target. Matched seeds across evaluations keep MTFA(b) monotone.
inline CalibrationResult calibrate_threshold(const ConfigTemplate& make_config, const HmmSpec& pre,
                                             double gamma, double tol_rel, double b_lo, double b_hi,
                                             std::int64_t n_runs, std::int64_t max_len,
                                             std::uint64_t seed, unsigned max_threads = 0) {
    if (!(gamma > 0.0)) throw std::invalid_argument("calibrate_threshold: gamma must be > 0");
    if (!(tol_rel > 0.0)) throw std::invalid_argument("calibrate_threshold: tol_rel must be > 0");
    if (!(b_lo > 0.0) || !(b_hi > b_lo))
        throw std::invalid_argument("calibrate_threshold: need 0 < b_lo < b_hi");

    auto eval = [&](double b) {
        return estimate_mtfa(make_config(b), pre, n_runs, max_len, seed, max_threads);
    };
    auto within = [&](const MtfaEstimate& est) { return std::abs(est.mtfa - gamma) / gamma <= tol_rel; };

    MtfaEstimate lo = eval(b_lo);
    if (within(lo)) return {b_lo, lo.mtfa, lo.censor_rate, 0};
    MtfaEstimate hi = eval(b_hi);
    if (within(hi)) return {b_hi, hi.mtfa, hi.censor_rate, 0};
    if (!(lo.mtfa < gamma) || !(hi.mtfa > gamma))
        throw std::runtime_error("calibrate_threshold: [b_lo, b_hi] does not bracket the target MTFA");

    double a = b_lo, c = b_hi;
    for (int iter = 1; iter <= 40; ++iter) {
        const double mid = 0.5 * (a + c);
        const MtfaEstimate est = eval(mid);
        if (within(est)) return {mid, est.mtfa, est.censor_rate, iter};
        if (est.mtfa < gamma) {
            a = mid;
        } else {
            c = mid;
        }
    }
    throw std::runtime_error("calibrate_threshold: bisection failed to converge; "
                             "raise n_runs or loosen tol_rel");
}

struct FrontierPoint {
    double b = 0.0;
    double mtfa = 0.0;
    double wadd = 0.0;
    double mtfa_stderr = 0.0;
    double wadd_stderr = 0.0;
    double mtfa_censor_rate = 0.0;
};

/// Per-threshold (MTFA, WADD) estimates along an ascending b grid.
inline std::vector<FrontierPoint> frontier(const ConfigTemplate& make_config, const HmmSpec& pre,
                                           const ScenarioSpec& scenario, std::span<const double> b_grid,
                                           std::int64_t n_runs, std::int64_t max_len,
                                           std::uint64_t seed, std::int64_t post_horizon = 20000,
                                           unsigned max_threads = 0) {
    if (b_grid.size() < 3) throw std::invalid_argument("frontier: need at least 3 grid points");
    for (std::size_t i = 1; i < b_grid.size(); ++i)
        if (!(b_grid[i] > b_grid[i - 1]))
            throw std::invalid_argument("frontier: b grid must be strictly ascending");

    std::vector<FrontierPoint> points;
    points.reserve(b_grid.size());
    for (double b : b_grid) {
        const DetectorConfig config = make_config(b);
        const MtfaEstimate mtfa = estimate_mtfa(config, pre, n_runs, max_len, seed, max_threads);
        const WaddEstimate wadd = estimate_wadd(config, scenario, n_runs, seed, post_horizon, max_threads);
        points.push_back({b, mtfa.mtfa, wadd.wadd, mtfa.stderr_, wadd.stderr_, mtfa.censor_rate});
    }
    return points;
}

/// WADD at a target MTFA by linear interpolation in log-MTFA between
/// bracketing frontier points (false-alarm time is exponential in b).
inline std::optional<double> wadd_at_mtfa(std::span<const FrontierPoint> points, double target_mtfa) {
    if (!(target_mtfa > 0.0)) throw std::invalid_argument("wadd_at_mtfa: target must be > 0");
    for (std::size_t i = 1; i < points.size(); ++i) {
        const auto& p0 = points[i - 1];
        const auto& p1 = points[i];
        const double lo = std::min(p0.mtfa, p1.mtfa);
        const double hi = std::max(p0.mtfa, p1.mtfa);
        if (target_mtfa >= lo && target_mtfa <= hi && hi > lo) {
            const double f = (std::log(target_mtfa) - std::log(p0.mtfa)) /
                             (std::log(p1.mtfa) - std::log(p0.mtfa));
            return p0.wadd + f * (p1.wadd - p0.wadd);
        }
    }
    return std::nullopt;
}

namespace detail {

inline void check_scores(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("score arrays must be non-empty");
    for (double s : a)
        if (!std::isfinite(s)) throw std::invalid_argument("scores must be finite");
    for (double s : b)
        if (!std::isfinite(s)) throw std::invalid_argument("scores must be finite");
}

}  // namespace detail

/// Exact rank statistic Pr(s_ood > s_id) + Pr(tie)/2.
inline double auroc(std::span<const double> scores_id, std::span<const double> scores_ood) {
    detail::check_scores(scores_id, scores_ood);
    std::vector<double> id(scores_id.begin(), scores_id.end());
    std::sort(id.begin(), id.end());
    double favorable = 0.0;
    for (double s : scores_ood) {
        const auto lower = std::lower_bound(id.begin(), id.end(), s);
        const auto upper = std::upper_bound(id.begin(), id.end(), s);
        favorable += static_cast<double>(lower - id.begin());        // id strictly below
        favorable += 0.5 * static_cast<double>(upper - lower);       // ties
    }
    return favorable / (static_cast<double>(id.size()) * static_cast<double>(scores_ood.size()));
}

/// False-positive rate at the largest threshold keeping TPR >= tpr_target.
inline double fpr_at_tpr(std::span<const double> scores_id, std::span<const double> scores_ood,
                         double tpr_target = 0.95) {
    detail::check_scores(scores_id, scores_ood);
    if (!(tpr_target > 0.0) || !(tpr_target <= 1.0))
        throw std::invalid_argument("fpr_at_tpr: target must lie in (0,1]");
    std::vector<double> ood(scores_ood.begin(), scores_ood.end());
    std::sort(ood.begin(), ood.end(), std::greater<>());
    const auto need = static_cast<std::size_t>(
        std::ceil(tpr_target * static_cast<double>(ood.size()) - 1e-12));
    const double threshold = ood[std::max<std::size_t>(need, 1) - 1];
    std::size_t false_pos = 0;
    for (double s : scores_id)
        if (s >= threshold) ++false_pos;
    return static_cast<double>(false_pos) / static_cast<double>(scores_id.size());
}

struct ScoreProtocolResult {
    std::vector<double> id_scores;
    std::vector<double> ood_scores;
    double auroc = 0.0;
    double fpr95 = 0.0;
};

/// Threshold-free scoring: each run's score is the maximum detector
/// statistic over a fixed window (window_blocks blocks of m steps).
/// ID scores come from change-free runs, OOD scores from runs with the
/// change at step 1; both consume matched stream seeds.
inline ScoreProtocolResult score_protocol(const DetectorConfig& config, const ScenarioSpec& scenario,
                                          std::int64_t n_runs, int m, std::uint64_t seed,
                                          int window_blocks = 20, unsigned max_threads = 0) {
    if (n_runs < 2) throw std::invalid_argument("score_protocol: need at least 2 runs");
    const std::int64_t window = static_cast<std::int64_t>(window_blocks) * m;
    ScoreProtocolResult out;
    out.id_scores.resize(static_cast<std::size_t>(n_runs));
    out.ood_scores.resize(static_cast<std::size_t>(n_runs));

    // raise the threshold out of reach; scoring wants the trace maximum
    DetectorConfig unbounded = config;
    std::visit([](auto& c) { c.b = 1e300; }, unbounded);

    const auto pi = stationary_distribution(scenario.pre.transition);
    parallel_for(
        static_cast<std::size_t>(n_runs),
        [&](std::size_t run) {
            {
                AnyDetector detector = make_detector(unbounded);
                HmmStream stream(scenario.pre, derive_seed(seed, run, 0));
                out.id_scores[run] = run_to_alarm(detector, stream, window).max_statistic;
            }
            {
                AnyDetector detector = make_detector(unbounded);
                Rng init_rng(derive_seed(seed, run, 1));
                const LatentMode z0 = uniform01(init_rng) < pi[0] ? LatentMode::L : LatentMode::H;
                ChangeStream stream(scenario.pre, scenario.post, 1, z0, derive_seed(seed, run, 2));
                out.ood_scores[run] = run_to_alarm(detector, stream, window).max_statistic;
            }
        },
        max_threads);

    out.auroc = auroc(out.id_scores, out.ood_scores);
    out.fpr95 = fpr_at_tpr(out.id_scores, out.ood_scores, 0.95);
    return out;
}

/// Offset for the MMD recursion: sample mean of blockwise MMD values on
/// change-free blocks, plus a margin.
inline double estimate_zeta(const HmmSpec& pre, const ReferenceSet& ref, int m,
                            std::int64_t n_blocks, std::uint64_t seed, double margin = 0.0) {
    if (m < 2) throw std::invalid_argument("estimate_zeta: m must be >= 2");
    if (n_blocks < 1) throw std::invalid_argument("estimate_zeta: n_blocks must be >= 1");
    HmmStream stream(pre, derive_seed(seed, 0x2e7a));
    std::vector<double> block(static_cast<std::size_t>(m));
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(n_blocks));
    for (std::int64_t i = 0; i < n_blocks; ++i) {
        for (auto& e : block) e = stream.next();
        values.push_back(mmd(consecutive_pairs(block), ref));
    }
    return mean_of(values) + margin;
}

}  // namespace driftmon
