// Streaming change detectors over scalar error sequences: the blockwise
// MMD-CUSUM detector and the Page-recursion / pointwise baselines.
#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "driftmon/common.hpp"
#include "driftmon/distributions.hpp"
#include "driftmon/mmd.hpp"

namespace driftmon {

/// Two-component Gaussian mixture over scalar errors.
struct Gmm2 {
    double weight_L = 0.5;
    Gaussian comp_L;
    Gaussian comp_H;
};

using Density = std::variant<Gaussian, Gmm2>;

inline double log_pdf(const Gaussian& g, double e) {
    const double z = (e - g.mean) / g.std;
    return -0.5 * z * z - std::log(g.std) - 0.91893853320467274178;  // log sqrt(2 pi)
}

inline double log_pdf(const Gmm2& mix, double e) {
    const double la = std::log(mix.weight_L) + log_pdf(mix.comp_L, e);
    const double lb = std::log(1.0 - mix.weight_L) + log_pdf(mix.comp_H, e);
    const double hi = la > lb ? la : lb;
    const double lo = la > lb ? lb : la;
    return hi + std::log1p(std::exp(lo - hi));
}

inline double log_pdf(const Density& d, double e) {
    return std::visit([e](const auto& f) { return log_pdf(f, e); }, d);
}

inline void validate(const Gmm2& mix) {
    if (!(mix.weight_L > 0.0) || !(mix.weight_L < 1.0))
        throw std::invalid_argument("Gmm2: weight must lie in (0,1)");
    validate(EmissionDist{mix.comp_L});
    validate(EmissionDist{mix.comp_H});
}

struct Alarm {
    std::int64_t stopping_time = 0;   // raw time-step units
    double statistic_at_alarm = 0.0;
    std::int64_t block_index = 0;     // block detectors only; 0 otherwise
};

namespace detail {

inline void check_step_input(double e, bool alarmed) {
    if (alarmed) throw std::logic_error("detector already alarmed; reset before stepping");
    if (!std::isfinite(e)) throw std::invalid_argument("detector step: error value must be finite");
}

inline void check_threshold(double b) {
    if (!(b > 0.0) || !std::isfinite(b))
        throw std::invalid_argument("detector threshold b must be finite and > 0");
}

}  // namespace detail

struct DcMmdConfig {
    int m = 50;
    double zeta = 0.05;
    double b = 1.0;
    std::shared_ptr<const ReferenceSet> reference;
    bool normalize = false;
    int var_window = 20;
    double epsilon = 1e-6;
};

/// Blockwise MMD detector. Every m-th error closes a block; its m-1
/// within-block pairs are scored against the reference and the CUSUM
/// statistic W <- max(0, W + D - zeta) advances. W moves only at block
/// boundaries, so stopping times are multiples of m.
///
/// With normalize=true the increment is (D - zeta) / sqrt(var_hat + eps),
/// var_hat being the population variance of up to var_window previous raw
/// increments; the first two blocks pass through unnormalized.
class DcMmdDetector {
public:
    explicit DcMmdDetector(DcMmdConfig config) : config_(std::move(config)) {
        if (config_.m < 2) throw std::invalid_argument("DcMmdDetector: m must be >= 2");
        if (config_.zeta < 0.0) throw std::invalid_argument("DcMmdDetector: zeta must be >= 0");
        detail::check_threshold(config_.b);
        if (!config_.reference) throw std::invalid_argument("DcMmdDetector: reference required");
        if (config_.var_window < 1) throw std::invalid_argument("DcMmdDetector: var_window must be >= 1");
        if (!(config_.epsilon > 0.0)) throw std::invalid_argument("DcMmdDetector: epsilon must be > 0");
        buffer_.reserve(static_cast<std::size_t>(config_.m));
        pairs_.reserve(static_cast<std::size_t>(config_.m - 1));
    }

    std::optional<Alarm> step(double e) {
        detail::check_step_input(e, alarmed_);
        ++t_;
        updated_ = false;
        buffer_.push_back(e);
        if (buffer_.size() < static_cast<std::size_t>(config_.m)) return std::nullopt;

        pairs_.clear();
        for (std::size_t i = 1; i < buffer_.size(); ++i) pairs_.push_back({buffer_[i - 1], buffer_[i]});
        buffer_.clear();
        ++block_index_;

        const double d = mmd(pairs_, *config_.reference);
        const double raw = d - config_.zeta;
        double increment = raw;
        if (config_.normalize && block_index_ >= 3) {
            increment = raw / std::sqrt(window_variance() + config_.epsilon);
        }
        push_increment(raw);
        w_ = std::max(0.0, w_ + increment);
        updated_ = true;
        if (w_ > config_.b) {
            alarmed_ = true;
            return Alarm{stopping_time(), w_, block_index_};
        }
        return std::nullopt;
    }

    [[nodiscard]] double statistic() const { return w_; }
    [[nodiscard]] bool alarmed() const { return alarmed_; }
    [[nodiscard]] bool updated_this_step() const { return updated_; }
    [[nodiscard]] std::int64_t time() const { return t_; }
    [[nodiscard]] std::int64_t block_index() const { return block_index_; }
    [[nodiscard]] std::int64_t stopping_time() const {
        return static_cast<std::int64_t>(config_.m) * block_index_;
    }
    [[nodiscard]] const DcMmdConfig& config() const { return config_; }

    void reset() {
        buffer_.clear();
        recent_raw_.clear();
        w_ = 0.0;
        t_ = 0;
        block_index_ = 0;
        alarmed_ = false;
        updated_ = false;
    }

private:
    [[nodiscard]] double window_variance() const {
        std::vector<double> xs(recent_raw_.begin(), recent_raw_.end());
        return population_variance(xs);
    }

    void push_increment(double raw) {
        recent_raw_.push_back(raw);
        while (recent_raw_.size() > static_cast<std::size_t>(config_.var_window)) recent_raw_.pop_front();
    }

    DcMmdConfig config_;
    std::vector<double> buffer_;
    std::vector<SecondOrderSample> pairs_;
    std::deque<double> recent_raw_;
    double w_ = 0.0;
    std::int64_t t_ = 0;
    std::int64_t block_index_ = 0;
    bool alarmed_ = false;
    bool updated_ = false;
};

/// Page recursion W <- max(0, W + log g(e) - log f(e)) with threshold b.
class PageCusum {
public:
    PageCusum(Density pre, Density post, double b)
        : pre_(std::move(pre)), post_(std::move(post)), b_(b) {
        detail::check_threshold(b_);
    }

    std::optional<Alarm> step(double e) {
        detail::check_step_input(e, alarmed_);
        ++t_;
        const double llr = log_pdf(post_, e) - log_pdf(pre_, e);
        if (!std::isfinite(llr))
            throw std::runtime_error("PageCusum: non-finite log-likelihood ratio");
        w_ = std::max(0.0, w_ + llr);
        if (w_ > b_) {
            alarmed_ = true;
            return Alarm{t_, w_, 0};
        }
        return std::nullopt;
    }

    [[nodiscard]] double statistic() const { return w_; }
    [[nodiscard]] bool alarmed() const { return alarmed_; }
    [[nodiscard]] bool updated_this_step() const { return true; }
    [[nodiscard]] std::int64_t time() const { return t_; }
    [[nodiscard]] std::int64_t block_index() const { return 0; }

    void reset() {
        w_ = 0.0;
        t_ = 0;
        alarmed_ = false;
    }

private:
    Density pre_;
    Density post_;
    double b_;
    double w_ = 0.0;
    std::int64_t t_ = 0;
    bool alarmed_ = false;
};

/// Pointwise negative-log-likelihood score with single-exceedance stopping;
/// deliberately carries no temporal state.
class NllDetector {
public:
    NllDetector(Density pre, double b) : pre_(std::move(pre)), b_(b) { detail::check_threshold(b_); }

    std::optional<Alarm> step(double e) {
        detail::check_step_input(e, alarmed_);
        ++t_;
        score_ = -log_pdf(pre_, e);
        if (score_ > b_) {
            alarmed_ = true;
            return Alarm{t_, score_, 0};
        }
        return std::nullopt;
    }

    [[nodiscard]] double statistic() const { return score_; }
    [[nodiscard]] bool alarmed() const { return alarmed_; }
    [[nodiscard]] bool updated_this_step() const { return true; }
    [[nodiscard]] std::int64_t time() const { return t_; }
    [[nodiscard]] std::int64_t block_index() const { return 0; }

    void reset() {
        score_ = 0.0;
        t_ = 0;
        alarmed_ = false;
    }

private:
    Density pre_;
    double b_;
    double score_ = 0.0;
    std::int64_t t_ = 0;
    bool alarmed_ = false;
};

struct GaussCusumConfig {
    Gaussian pre;
    Gaussian post;
    double b = 1.0;
};

struct GmmCusumConfig {
    Gmm2 pre;
    Gmm2 post;
    double b = 1.0;
};

/// Post-change surrogate N(mu0 + kappa * sigma0, sigma0).
struct RobustCusumConfig {
    Gaussian pre;
    double kappa = 2.0;
    double b = 1.0;
};

struct NllConfig {
    Density pre;
    double b = 1.0;
};

using DetectorConfig = std::variant<DcMmdConfig, GaussCusumConfig, GmmCusumConfig, RobustCusumConfig, NllConfig>;
using AnyDetector = std::variant<DcMmdDetector, PageCusum, NllDetector>;

inline AnyDetector make_detector(const DetectorConfig& config) {
    return std::visit(
        [](const auto& c) -> AnyDetector {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, DcMmdConfig>) {
                return DcMmdDetector(c);
            } else if constexpr (std::is_same_v<T, GaussCusumConfig>) {
                validate(EmissionDist{c.pre});
                validate(EmissionDist{c.post});
                return PageCusum(c.pre, c.post, c.b);
            } else if constexpr (std::is_same_v<T, GmmCusumConfig>) {
                validate(c.pre);
                validate(c.post);
                return PageCusum(c.pre, c.post, c.b);
            } else if constexpr (std::is_same_v<T, RobustCusumConfig>) {
                validate(EmissionDist{c.pre});
                if (!(c.kappa > 0.0)) throw std::invalid_argument("RobustCusum: kappa must be > 0");
                const Gaussian surrogate{c.pre.mean + c.kappa * c.pre.std, c.pre.std};
                return PageCusum(c.pre, surrogate, c.b);
            } else {
                return NllDetector(c.pre, c.b);
            }
        },
        config);
}

struct TracePoint {
    std::int64_t step = 0;
    std::int64_t block = 0;
    double value = 0.0;
};

struct RunResult {
    std::optional<Alarm> alarm;
    std::int64_t steps = 0;         // max_steps when censored
    double max_statistic = 0.0;     // over all statistic updates
    std::vector<TracePoint> trace;  // only when requested
};

/// Feeds `stream.next()` into the detector until alarm or max_steps.
/// The trace records one point per statistic update (per block for the
/// MMD detector, per step otherwise).
template <typename Detector, typename Stream>
RunResult run_to_alarm(Detector& detector, Stream&& stream, std::int64_t max_steps,
                       bool record_trace = false) {
    if (max_steps < 1) throw std::invalid_argument("run_to_alarm: max_steps must be >= 1");
    RunResult result;
    for (std::int64_t t = 1; t <= max_steps; ++t) {
        auto alarm = detector.step(stream.next());
        if (detector.updated_this_step()) {
            const double w = detector.statistic();
            if (w > result.max_statistic) result.max_statistic = w;
            if (record_trace) result.trace.push_back({t, detector.block_index(), w});
        }
        if (alarm) {
            result.alarm = alarm;
            result.steps = alarm->stopping_time;
            return result;
        }
    }
    result.steps = max_steps;
    return result;
}

template <typename Stream>
RunResult run_to_alarm(AnyDetector& detector, Stream&& stream, std::int64_t max_steps,
                       bool record_trace = false) {
    return std::visit(
        [&](auto& d) { return run_to_alarm(d, std::forward<Stream>(stream), max_steps, record_trace); },
        detector);
}

}  // namespace driftmon
