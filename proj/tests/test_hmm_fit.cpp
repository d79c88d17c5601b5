#include <gtest/gtest.h>

#include <cmath>

#include "driftmon/hmm_fit.hpp"

using namespace driftmon;

namespace {

HmmSpec ground_truth() {
    HmmSpec spec;
    spec.transition = {{{0.9, 0.1}, {0.1, 0.9}}};
    spec.emission_L = Gaussian{0.0, 0.3};
    spec.emission_H = Gaussian{2.0, 0.3};
    return spec;
}

}  // namespace

TEST(FitTwoStateHmm, RecoversKnownParameters) {
    const ErrorPath path = sample_path(ground_truth(), 10000, 123);
    const FitResult fit = fit_two_state_hmm(path.errors);
    ASSERT_TRUE(fit.converged);

    const auto& low = std::get<Gaussian>(fit.spec.emission_L);
    const auto& high = std::get<Gaussian>(fit.spec.emission_H);
    EXPECT_NEAR(high.mean - low.mean, 2.0, 0.2);
    EXPECT_NEAR(fit.spec.transition[0][0], 0.9, 0.05);
    EXPECT_NEAR(fit.spec.transition[1][1], 0.9, 0.05);
    EXPECT_NEAR(low.std, 0.3, 0.05);
    EXPECT_NEAR(high.std, 0.3, 0.05);
}

TEST(FitTwoStateHmm, LogLikelihoodIsMonotone) {
    const ErrorPath path = sample_path(ground_truth(), 3000, 7);
    const FitResult fit = fit_two_state_hmm(path.errors);
    ASSERT_GE(fit.log_likelihoods.size(), 2u);
    for (std::size_t i = 1; i < fit.log_likelihoods.size(); ++i)
        EXPECT_GE(fit.log_likelihoods[i], fit.log_likelihoods[i - 1] - 1e-9);
}

TEST(FitTwoStateHmm, EmissionOrderingConvention) {
    // feed data whose natural split is inverted and check the labels
    HmmSpec inverted = ground_truth();
    const ErrorPath path = sample_path(inverted, 5000, 99);
    std::vector<double> negated(path.errors.size());
    for (std::size_t i = 0; i < negated.size(); ++i) negated[i] = -path.errors[i];
    const FitResult fit = fit_two_state_hmm(negated);
    EXPECT_LE(mean_of(fit.spec.emission_L), mean_of(fit.spec.emission_H));
}

TEST(FitTwoStateHmm, RejectsConstantSequence) {
    const std::vector<double> constant(500, 1.25);
    EXPECT_THROW(fit_two_state_hmm(constant), std::invalid_argument);
}

TEST(FitTwoStateHmm, RejectsShortOrNonFiniteInput) {
    const std::vector<double> short_seq(50, 0.0);
    EXPECT_THROW(fit_two_state_hmm(short_seq), std::invalid_argument);
    std::vector<double> with_nan(200, 0.5);
    with_nan[10] = std::nan("");
    EXPECT_THROW(fit_two_state_hmm(with_nan), std::invalid_argument);
}

TEST(FitTwoStateHmm, NonConvergenceReturnsBestSoFarWithFlag) {
    const ErrorPath path = sample_path(ground_truth(), 2000, 5);
    const FitResult fit = fit_two_state_hmm(path.errors, 2, 1e-15);
    EXPECT_FALSE(fit.converged);
    EXPECT_EQ(fit.iterations, 2);
    EXPECT_NO_THROW(validate(fit.spec));
}

TEST(MapModeAssignment, ExtremeObservationsGoToTheObviousMode) {
    const HmmSpec spec = ground_truth();
    const std::vector<double> errors{-3.0, -3.0, 5.0, 5.0};
    const auto modes = map_mode_assignment(errors, spec);
    ASSERT_EQ(modes.size(), errors.size());
    EXPECT_EQ(modes[0], LatentMode::L);
    EXPECT_EQ(modes[1], LatentMode::L);
    EXPECT_EQ(modes[2], LatentMode::H);
    EXPECT_EQ(modes[3], LatentMode::H);
}

TEST(MapModeAssignment, HighAccuracyOnWellSeparatedModes) {
    // separation dmu/sigma >= 4
    HmmSpec spec;
    spec.transition = {{{0.9, 0.1}, {0.2, 0.8}}};
    spec.emission_L = Gaussian{0.0, 0.4};
    spec.emission_H = Gaussian{2.0, 0.4};
    const ErrorPath path = sample_path(spec, 20000, 31);
    const auto assigned = map_mode_assignment(path.errors, spec);
    double correct = 0;
    for (std::size_t t = 0; t < assigned.size(); ++t)
        correct += assigned[t] == path.modes[t] ? 1.0 : 0.0;
    EXPECT_GE(correct / static_cast<double>(assigned.size()), 0.95);
}

TEST(MapModeAssignment, IdenticalEmissionsFallBackToPriorDominantMode) {
    HmmSpec spec;
    spec.transition = {{{0.95, 0.05}, {0.15, 0.85}}};  // pi_L = 0.75
    spec.emission_L = Gaussian{1.0, 0.5};
    spec.emission_H = Gaussian{1.0, 0.5};
    const std::vector<double> errors{0.2, 1.0, 1.8, 0.9, 1.1};
    const auto modes = map_mode_assignment(errors, spec);
    for (auto m : modes) EXPECT_EQ(m, LatentMode::L);
}

TEST(MapModeAssignment, OutputLengthMatchesInput) {
    const HmmSpec spec = ground_truth();
    const ErrorPath path = sample_path(spec, 137, 11);
    EXPECT_EQ(map_mode_assignment(path.errors, spec).size(), 137u);
}
