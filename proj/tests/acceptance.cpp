// Acceptance suite: one test per criterion, each printing its own pass/fail
// line through the harness. Monte-Carlo sizes are chosen to finish the whole
// suite in minutes on a laptop while keeping the comparisons statistically
// meaningful.
#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "driftmon/detectors.hpp"
#include "driftmon/evaluation.hpp"
#include "driftmon/hmm.hpp"
#include "driftmon/io.hpp"
#include "driftmon/scenarios.hpp"
#include "driftmon/theory.hpp"
#include "oracles.hpp"

using namespace driftmon;

namespace {

constexpr double kZ99OneSided = 2.3263478740408408;
constexpr double kZ95TwoSided = 1.959963984540054;

HmmSpec two_mode(double p, double mu_l, double mu_h, double sigma) {
    return make_symmetric_spec(p, Gaussian{mu_l, sigma}, Gaussian{mu_h, sigma});
}

struct MatchedWadd {
    double b = 0.0;
    double mtfa = 0.0;
    WaddEstimate wadd;
};

/// Calibrate a detector to the target MTFA (within 10%), then estimate its
/// delay on matched streams.
MatchedWadd matched_wadd(const NamedDetectorFactory& factory, const ScenarioSpec& scenario,
                         double gamma, double b_lo, double b_hi, std::int64_t runs,
                         std::int64_t max_len, std::int64_t post_horizon, std::uint64_t seed,
                         std::int64_t wadd_runs = 0) {
    const CalibrationResult cal = calibrate_threshold(factory.make, scenario.pre, gamma, 0.1, b_lo,
                                                      b_hi, runs, max_len, seed);
    MatchedWadd out;
    out.b = cal.b;
    out.mtfa = cal.mtfa;
    out.wadd = estimate_wadd(factory.make(cal.b), scenario,
                             wadd_runs > 0 ? wadd_runs : runs, derive_seed(seed, 0xadd),
                             post_horizon);
    return out;
}

bool ci_below(const WaddEstimate& a, const WaddEstimate& b) {
    return a.wadd + kZ95TwoSided * a.stderr_ < b.wadd - kZ95TwoSided * b.stderr_;
}

}  // namespace

// ---------------------------------------------------------------------------
// Criterion 1: blockwise MMD matches an independent brute-force double sum
// within 1e-12 on 200 random instances of up to 400 samples.
// ---------------------------------------------------------------------------

TEST(Criterion01, MmdOracleEquivalence) {
    Rng rng(2001);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n_block = 1 + static_cast<std::size_t>(uniform01(rng) * 199);
        const std::size_t n_ref = 2 + static_cast<std::size_t>(uniform01(rng) * 198);
        std::vector<SecondOrderSample> block(n_block), ref_samples(n_ref);
        const double spread = 0.5 + 4.0 * uniform01(rng);
        for (auto& s : block) s = {spread * (uniform01(rng) - 0.5), spread * (uniform01(rng) - 0.5)};
        for (auto& s : ref_samples)
            s = {spread * (uniform01(rng) - 0.5), spread * (uniform01(rng) - 0.5)};
        const double sigma = 0.2 + 2.0 * uniform01(rng);
        const ReferenceSet ref(ref_samples, RbfKernel{sigma});

        const double fast = mmd(block, ref);
        const double slow = oracle::mmd_brute_force(block, ref_samples, sigma);
        worst = std::max(worst, std::abs(fast - slow));
    }
    ASSERT_LT(worst, 1e-12);
}

// ---------------------------------------------------------------------------
// Criterion 2: stationary frequencies within 0.005 of the analytic
// eigenvector over 1e6 steps; the lifted pair chain's spectral gap equals
// the closed form 1 - |1 - P_LH - P_HL| within 1e-10.
// ---------------------------------------------------------------------------

TEST(Criterion02, HmmStationaryAndSpectralGap) {
    const HmmSpec spec = [] {
        HmmSpec s;
        s.transition = {{{0.9, 0.1}, {0.3, 0.7}}};  // pi = (0.75, 0.25)
        s.emission_L = Gaussian{0.0, 0.3};
        s.emission_H = Gaussian{1.0, 0.3};
        return s;
    }();
    const ErrorPath path = sample_path(spec, 1000000, 4242);
    double freq_l = 0.0;
    for (auto m : path.modes) freq_l += m == LatentMode::L ? 1.0 : 0.0;
    freq_l /= static_cast<double>(path.modes.size());
    EXPECT_NEAR(freq_l, 0.75, 0.005);

    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const double p_lh = 0.02 + 0.96 * uniform01(rng);
        const double p_hl = 0.02 + 0.96 * uniform01(rng);
        const Matrix2 P{{{1.0 - p_lh, p_lh}, {p_hl, 1.0 - p_hl}}};
        const double lifted_gap = spectral_gap(second_order_chain(P));
        const double closed_form = 1.0 - std::abs(1.0 - p_lh - p_hl);
        EXPECT_NEAR(lifted_gap, closed_form, 1e-10);
    }
}

// ---------------------------------------------------------------------------
// Criterion 3: on three strong-emission-shift scenarios with d_hat > a, the
// Monte-Carlo delay estimate stays below the analytic bound at one-sided
// 99% confidence.
// ---------------------------------------------------------------------------

TEST(Criterion03, DetectionDelayBoundHolds) {
    struct Case {
        double p;
        const char* label;
    };
    const Case cases[] = {{0.5, "strong_shift_p50"}, {0.15, "strong_shift_p15"},
                          {0.87, "strong_shift_p87"}};
    const int m = 50;
    const double b = 1.0;

    for (const auto& c : cases) {
        const HmmSpec pre = two_mode(c.p, 0.0, 1.0, std::sqrt(0.1));
        const HmmSpec post = apply_shift(pre, EmissionShift{2.5, 1.5});
        const ScenarioSpec scenario =
            make_scenario(pre, post, default_changepoint_grid(m), c.label);

        const auto ref = build_id_reference(pre, 30000, 2000, 33);
        const double zeta = estimate_zeta(pre, *ref, m, 400, 34);
        const double shift =
            estimate_lambda_shift(pre, post, ref->kernel(), 10000, 35);

        BoundInputs inputs;
        inputs.m = m;
        inputs.b = b;
        inputs.zeta = zeta;
        inputs.delta = second_eigenvalue_modulus(pre.transition);
        inputs.R = estimate_R(*ref);
        inputs.d_hat = shift - zeta;
        ASSERT_GT(inputs.d_hat, bound_a(m, inputs.delta, inputs.R)) << c.label;

        const auto bound = wadd_upper_bound(inputs);
        ASSERT_TRUE(bound.has_value()) << c.label;

        const DcMmdConfig config{m, zeta, b, ref, false, 20, 1e-6};
        const WaddEstimate est = estimate_wadd(config, scenario, 500, 36, 20000);
        EXPECT_LE(est.wadd + kZ99OneSided * est.stderr_, *bound)
            << c.label << ": wadd=" << est.wadd << " +- " << est.stderr_
            << " bound=" << *bound;
    }
}

// ---------------------------------------------------------------------------
// Criterion 4: log-MTFA grows linearly in b (positive slope, R^2 >= 0.9)
// over a five-point threshold grid on the highway car-following preset.
// ---------------------------------------------------------------------------

TEST(Criterion04, FalseAlarmTimeGrowsExponentially) {
    const ScenarioSpec scenario = preset("highway_car_following");
    SuiteOptions opt;
    opt.m = 50;
    opt.n_id = 30000;
    opt.max_ref = 1000;
    opt.zeta_blocks = 300;
    opt.seed = 404;
    const auto factory = scenario_detector_factory("dcmmd", scenario, opt);

    const double b_grid[] = {0.15, 0.3, 0.45, 0.6, 0.75};
    std::vector<MtfaPoint> points;
    for (double b : b_grid) {
        const auto est = estimate_mtfa(factory.make(b), scenario.pre, 200, 400000, 405);
        ASSERT_LT(est.censor_rate, 0.05) << "b=" << b;
        points.push_back({b, est.mtfa});
    }
    const ExponentFit fit = fit_mtfa_exponent(points);
    EXPECT_GT(fit.q_hat, 0.0);
    EXPECT_GE(fit.r_squared, 0.9);
}

// ---------------------------------------------------------------------------
// Criterion 9: per-step cost does not grow with stream length (O(1)
// contract) and the amortized block cost stays under 10 microseconds at
// n_ref = 2000, m = 50.
// ---------------------------------------------------------------------------

TEST(Criterion09, StreamingCostIsConstantPerStep) {
    const HmmSpec pre = preset_hmm(default_registry().find("highway_car_following"));
    const auto ref = build_id_reference(pre, 4000, 2000, 99);
    const double zeta = estimate_zeta(pre, *ref, 50, 100, 100);

    struct Obs {
        double length;
        double us_per_step;
    };
    std::vector<Obs> obs;
    const std::int64_t lengths[] = {10000, 100000, 1000000};
    // warmup pass stabilizes caches and clocks
    {
        DcMmdDetector warm(DcMmdConfig{50, zeta, 1e300, ref, false, 20, 1e-6});
        HmmStream stream(pre, 1);
        run_to_alarm(warm, stream, 20000);
    }
    for (int rep = 0; rep < 3; ++rep) {
        for (const std::int64_t len : lengths) {
            DcMmdDetector detector(DcMmdConfig{50, zeta, 1e300, ref, false, 20, 1e-6});
            HmmStream stream(pre, derive_seed(101, rep, static_cast<std::uint64_t>(len)));
            const auto t0 = std::chrono::steady_clock::now();
            run_to_alarm(detector, stream, len);
            const auto t1 = std::chrono::steady_clock::now();
            obs.push_back({static_cast<double>(len),
                           std::chrono::duration<double, std::micro>(t1 - t0).count() /
                               static_cast<double>(len)});
        }
    }

    const double n = static_cast<double>(obs.size());
    double mx = 0, my = 0;
    for (const auto& o : obs) {
        mx += o.length;
        my += o.us_per_step;
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, sse = 0;
    for (const auto& o : obs) {
        sxx += (o.length - mx) * (o.length - mx);
        sxy += (o.length - mx) * (o.us_per_step - my);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    for (const auto& o : obs) {
        const double r = o.us_per_step - (intercept + slope * o.length);
        sse += r * r;
    }
    const double stderr_slope = std::sqrt(sse / (n - 2.0) / sxx);
    const double t975_7dof = 2.365;  // 9 points, 7 dof

    EXPECT_LE(std::abs(slope), t975_7dof * stderr_slope)
        << "slope=" << slope << " stderr=" << stderr_slope;

    double amortized = 0.0;
    int count = 0;
    for (const auto& o : obs)
        if (o.length == 1000000) {
            amortized += o.us_per_step;
            ++count;
        }
    amortized /= count;
    EXPECT_LT(amortized, 10.0) << "amortized us/step=" << amortized;
}

// ---------------------------------------------------------------------------
// Criterion 10: identical config + seed reproduces every reported aggregate
// bit-exactly.
// ---------------------------------------------------------------------------

TEST(Criterion10, BitExactReproducibility) {
    const ScenarioSpec scenario = preset("highway_stop_and_go");
    SuiteOptions opt;
    opt.m = 25;
    opt.n_id = 5000;
    opt.max_ref = 400;
    opt.zeta_blocks = 80;
    opt.seed = 777;
    const auto factory = scenario_detector_factory("dcmmd", scenario, opt);

    auto run_once = [&] {
        struct Out {
            MtfaEstimate mtfa;
            WaddEstimate wadd;
            double auroc;
            double fpr95;
        } out;
        out.mtfa = estimate_mtfa(factory.make(1.0), scenario.pre, 60, 20000, 11);
        out.wadd = estimate_wadd(factory.make(1.0), scenario, 60, 12, 6000);
        const auto scores = score_protocol(factory.make(1.0), scenario, 40, opt.m, 13);
        out.auroc = scores.auroc;
        out.fpr95 = scores.fpr95;
        return out;
    };

    const auto a = run_once();
    const auto b = run_once();
    EXPECT_EQ(a.mtfa.mtfa, b.mtfa.mtfa);
    EXPECT_EQ(a.mtfa.stderr_, b.mtfa.stderr_);
    EXPECT_EQ(a.wadd.wadd, b.wadd.wadd);
    EXPECT_EQ(a.wadd.stderr_, b.wadd.stderr_);
    EXPECT_EQ(a.auroc, b.auroc);
    EXPECT_EQ(a.fpr95, b.fpr95);
}
