#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "driftmon/hmm.hpp"
#include "driftmon/mmd.hpp"
#include "oracles.hpp"

using namespace driftmon;

namespace {

std::vector<SecondOrderSample> random_samples(Rng& rng, std::size_t n, double spread = 2.0) {
    std::vector<SecondOrderSample> out(n);
    for (auto& s : out) s = {spread * (uniform01(rng) - 0.5), spread * (uniform01(rng) - 0.5)};
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// exp kernel primitive
// ---------------------------------------------------------------------------

TEST(ExpNeg, TracksLibmAcrossTheFullRange) {
    Rng rng(1);
    double max_rel = 0.0;
    for (int i = 0; i < 500000; ++i) {
        const double x = -708.0 * uniform01(rng);
        const double mine = detail::exp_neg_unchecked(x);
        const double libm = std::exp(x);
        max_rel = std::max(max_rel, std::abs(mine - libm) / libm);
    }
    EXPECT_LT(max_rel, 1e-15);
    EXPECT_DOUBLE_EQ(detail::exp_neg_unchecked(0.0), 1.0);
}

// ---------------------------------------------------------------------------
// rbf_eval
// ---------------------------------------------------------------------------

TEST(RbfEval, IdentityAndFrozenValue) {
    EXPECT_DOUBLE_EQ(rbf_eval({1.5, -2.0}, {1.5, -2.0}, 0.8), 1.0);
    // exp(-1 / (2 * 0.64)) = exp(-0.78125)
    EXPECT_NEAR(rbf_eval({0, 0}, {1, 0}, 0.8), 0.45783336177161426, 1e-12);
    EXPECT_NEAR(rbf_eval({0, 0}, {1, 0}, 0.8), std::exp(-1.0 / 1.28), 1e-12);
}

TEST(RbfEval, SymmetryAndBounds) {
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const SecondOrderSample x{10 * (uniform01(rng) - 0.5), 10 * (uniform01(rng) - 0.5)};
        const SecondOrderSample y{10 * (uniform01(rng) - 0.5), 10 * (uniform01(rng) - 0.5)};
        const double sigma = 0.1 + 2.0 * uniform01(rng);
        const double kxy = rbf_eval(x, y, sigma);
        EXPECT_DOUBLE_EQ(kxy, rbf_eval(y, x, sigma));
        EXPECT_GT(kxy, 0.0);
        EXPECT_LE(kxy, 1.0);
    }
}

TEST(RbfEval, MonotoneInBandwidthForDistinctPoints) {
    const SecondOrderSample x{0, 0}, y{1.3, -0.4};
    double prev = rbf_eval(x, y, 0.2);
    for (double sigma : {0.4, 0.8, 1.6, 3.2}) {
        const double cur = rbf_eval(x, y, sigma);
        EXPECT_GT(cur, prev);
        prev = cur;
    }
}

TEST(RbfEval, RejectsBadInputs) {
    EXPECT_THROW(rbf_eval({0, 0}, {1, 0}, 0.0), std::invalid_argument);
    EXPECT_THROW(rbf_eval({0, 0}, {1, 0}, -1.0), std::invalid_argument);
    EXPECT_THROW(rbf_eval({std::nan(""), 0}, {1, 0}, 1.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// median_heuristic
// ---------------------------------------------------------------------------

TEST(MedianHeuristic, KnownSmallCases) {
    const std::vector<SecondOrderSample> pair{{0, 0}, {1, 0}};
    EXPECT_DOUBLE_EQ(median_heuristic(pair), 1.0);

    const std::vector<SecondOrderSample> three{{0, 0}, {1, 0}, {2, 0}};
    EXPECT_DOUBLE_EQ(median_heuristic(three), 1.0);  // median of {1, 1, 2}
}

TEST(MedianHeuristic, EvenCountUsesMidpoint) {
    // distances: {1, 2, 3, 1, 2, 1} sorted -> {1,1,1,2,2,3}; median = 1.5
    const std::vector<SecondOrderSample> four{{0, 0}, {1, 0}, {2, 0}, {3, 0}};
    EXPECT_DOUBLE_EQ(median_heuristic(four), 1.5);
}

TEST(MedianHeuristic, RejectsDegenerateInputs) {
    const std::vector<SecondOrderSample> all_same{{1, 1}, {1, 1}, {1, 1}};
    EXPECT_THROW(median_heuristic(all_same), std::invalid_argument);
    const std::vector<SecondOrderSample> one{{0, 0}};
    EXPECT_THROW(median_heuristic(one), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// build_reference / ReferenceSet
// ---------------------------------------------------------------------------

TEST(BuildReference, FormsConsecutivePairs) {
    const std::vector<double> errors{1, 2, 3};
    const ReferenceSet ref = build_reference(errors, RbfKernel{0.8}, 100);
    const auto samples = ref.samples();
    ASSERT_EQ(samples.size(), 2u);
    EXPECT_DOUBLE_EQ(samples[0].prev, 1.0);
    EXPECT_DOUBLE_EQ(samples[0].cur, 2.0);
    EXPECT_DOUBLE_EQ(samples[1].prev, 2.0);
    EXPECT_DOUBLE_EQ(samples[1].cur, 3.0);
}

TEST(BuildReference, SelfTermMatchesBruteForce) {
    const std::vector<double> errors{1, 2, 3};
    const ReferenceSet ref = build_reference(errors, RbfKernel{0.8}, 100);
    const double k12 = rbf_eval({1, 2}, {2, 3}, 0.8);
    EXPECT_NEAR(ref.self_term(), (1.0 + 1.0 + 2.0 * k12) / 4.0, 1e-15);
    // and the frozen arithmetic: k = exp(-2/1.28), self = (2 + 2k)/4
    EXPECT_NEAR(ref.self_term(), (2.0 + 2.0 * std::exp(-2.0 / 1.28)) / 4.0, 1e-15);
}

TEST(BuildReference, SubsamplingIsDeterministic) {
    Rng rng(3);
    std::vector<double> errors(5000);
    for (auto& e : errors) e = uniform01(rng);
    const ReferenceSet a = build_reference(errors, RbfKernel{0.5}, 200);
    const ReferenceSet b = build_reference(errors, RbfKernel{0.5}, 200);
    ASSERT_EQ(a.size(), 200u);
    EXPECT_EQ(a.samples().size(), b.samples().size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_DOUBLE_EQ(a.samples()[i].prev, b.samples()[i].prev);
        EXPECT_DOUBLE_EQ(a.samples()[i].cur, b.samples()[i].cur);
    }
    EXPECT_DOUBLE_EQ(a.self_term(), b.self_term());
}

TEST(BuildReference, RejectsShortInputs) {
    const std::vector<double> two{1, 2};
    EXPECT_THROW(build_reference(two, RbfKernel{0.8}, 10), std::invalid_argument);
}

TEST(ReferenceSet, ValidatesStoredSelfTerm) {
    const std::vector<SecondOrderSample> samples{{0, 0}, {1, 0}, {0.5, 0.25}};
    const ReferenceSet good(samples, RbfKernel{0.8});
    EXPECT_NO_THROW(ReferenceSet(samples, RbfKernel{0.8}, good.self_term()));
    EXPECT_THROW(ReferenceSet(samples, RbfKernel{0.8}, good.self_term() + 1e-6),
                 std::invalid_argument);
}

// ---------------------------------------------------------------------------
// mmd
// ---------------------------------------------------------------------------

TEST(Mmd, IdenticalMultisetsGiveZero) {
    Rng rng(4);
    const auto samples = random_samples(rng, 30);
    const ReferenceSet ref(samples, RbfKernel{0.8});
    EXPECT_NEAR(mmd(samples, ref), 0.0, 1e-9);
}

TEST(Mmd, FrozenSingletonValue) {
    const std::vector<SecondOrderSample> block{{0, 0}};
    const std::vector<SecondOrderSample> ref_pts{{1, 0}, {1, 0}};  // duplicate to satisfy n >= 2
    const ReferenceSet ref(ref_pts, RbfKernel{0.8});
    // D^2 = 1 + 1 - 2 * exp(-0.78125) = 1.0843334
    EXPECT_NEAR(mmd(block, ref), 1.0413132460776495, 1e-9);
    EXPECT_NEAR(mmd_between_samples(block, {ref_pts.data(), 1}, RbfKernel{0.8}), 1.0413132460776495, 1e-9);
}

TEST(Mmd, MatchesBruteForceOracle) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n_block = 1 + static_cast<std::size_t>(uniform01(rng) * 19);
        const std::size_t n_ref = 2 + static_cast<std::size_t>(uniform01(rng) * 18);
        const auto block = random_samples(rng, n_block);
        const auto ref_samples = random_samples(rng, n_ref);
        const double sigma = 0.3 + 1.5 * uniform01(rng);
        const ReferenceSet ref(ref_samples, RbfKernel{sigma});
        const double fast = mmd(block, ref);
        const double slow = oracle::mmd_brute_force(block, ref_samples, sigma);
        EXPECT_NEAR(fast, slow, 1e-12);
    }
}

TEST(Mmd, BoundedByTwo) {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto block = random_samples(rng, 15, 50.0);
        const auto ref_samples = random_samples(rng, 15, 50.0);
        const ReferenceSet ref(ref_samples, RbfKernel{0.2});
        const double d = mmd(block, ref);
        EXPECT_GE(d, 0.0);
        EXPECT_LE(d, 2.0);
    }
}

TEST(Mmd, PermutationInvariance) {
    Rng rng(7);
    const auto block = random_samples(rng, 25);
    const auto ref_samples = random_samples(rng, 40);
    const ReferenceSet ref(ref_samples, RbfKernel{0.7});
    const double base = mmd(block, ref);
    ASSERT_GT(base, 0.01);  // tolerance below presumes a well-separated D

    std::mt19937 shuffler(99);
    for (int trial = 0; trial < 10; ++trial) {
        auto blk = block;
        auto rs = ref_samples;
        std::shuffle(blk.begin(), blk.end(), shuffler);
        std::shuffle(rs.begin(), rs.end(), shuffler);
        const ReferenceSet shuffled_ref(rs, RbfKernel{0.7});
        EXPECT_NEAR(mmd(blk, shuffled_ref), base, 1e-12);
    }
}

TEST(Mmd, RejectsBadInputs) {
    Rng rng(8);
    const auto ref_samples = random_samples(rng, 10);
    const ReferenceSet ref(ref_samples, RbfKernel{0.8});
    EXPECT_THROW(mmd(std::span<const SecondOrderSample>{}, ref), std::invalid_argument);
    const std::vector<SecondOrderSample> bad{{std::nan(""), 0.0}};
    EXPECT_THROW(mmd(bad, ref), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// mmd_between_samples
// ---------------------------------------------------------------------------

TEST(MmdBetweenSamples, IdenticalSetsGiveZero) {
    Rng rng(9);
    const auto a = random_samples(rng, 35);
    EXPECT_NEAR(mmd_between_samples(a, a, RbfKernel{0.8}), 0.0, 1e-9);
}

TEST(MmdBetweenSamples, MatchesOracleOnRandomInstances) {
    Rng rng(10);
    for (int trial = 0; trial < 30; ++trial) {
        const auto a = random_samples(rng, 3 + static_cast<std::size_t>(uniform01(rng) * 17));
        const auto b = random_samples(rng, 3 + static_cast<std::size_t>(uniform01(rng) * 17));
        const double sigma = 0.3 + uniform01(rng);
        EXPECT_NEAR(mmd_between_samples(a, b, RbfKernel{sigma}),
                    oracle::mmd_brute_force(a, b, sigma), 1e-12);
    }
}

TEST(MmdBetweenSamples, SeparatedRegimesGiveStablePositiveValues) {
    HmmSpec low;
    low.transition = {{{0.9, 0.1}, {0.1, 0.9}}};
    low.emission_L = Gaussian{0.0, 0.3};
    low.emission_H = Gaussian{1.0, 0.3};
    HmmSpec high = low;
    high.emission_L = Gaussian{2.0, 0.45};
    high.emission_H = Gaussian{3.0, 0.45};

    std::vector<double> estimates;
    for (std::uint64_t seed : {11u, 22u, 33u, 44u}) {
        const auto pa = sample_path(low, 4001, seed);
        const auto pb = sample_path(high, 4001, seed + 1000);
        estimates.push_back(
            mmd_between_samples(consecutive_pairs(pa.errors), consecutive_pairs(pb.errors), RbfKernel{0.8}));
    }
    const double mean = mean_of(estimates);
    EXPECT_GT(mean, 0.3);
    for (double e : estimates) EXPECT_NEAR(e, mean, 0.05 * mean);
}
