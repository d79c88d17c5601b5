// Scene preset registry and the canonical experiment suites built on it.
#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "driftmon/evaluation.hpp"
#include "driftmon/hmm.hpp"
#include "driftmon/preset_registry_data.hpp"

namespace driftmon {

enum class Difficulty { Easy, Moderate, Hard };

inline Difficulty parse_difficulty(const std::string& s) {
    if (s == "easy") return Difficulty::Easy;
    if (s == "moderate") return Difficulty::Moderate;
    if (s == "hard") return Difficulty::Hard;
    throw std::invalid_argument("unknown difficulty '" + s + "'");
}

struct ScenePreset {
    std::string name;
    std::string source;
    double p = 0.5;                     // mode-switching probability (adopted reading)
    double p_if_self_transition = 0.5;  // alternative reading, kept for sensitivity checks
    Difficulty dmu = Difficulty::Moderate;
    Difficulty variance = Difficulty::Moderate;
    double shift_dmu_add = 0.0;
};

struct PresetRegistry {
    double mu_low = 0.0;
    std::map<Difficulty, double> dmu_map;
    std::map<Difficulty, double> variance_map;
    double sigma_scale = 1.5;
    double target_mean_ratio = 2.48;
    std::vector<ScenePreset> scenes;

    [[nodiscard]] const ScenePreset& find(const std::string& name) const {
        for (const auto& s : scenes)
            if (s.name == name) return s;
        throw std::invalid_argument("unknown scene preset '" + name + "'");
    }
};

inline PresetRegistry parse_preset_registry(const std::string& json_text) {
    const auto doc = nlohmann::json::parse(json_text);
    PresetRegistry reg;
    reg.mu_low = doc.at("mu_low").get<double>();
    for (const auto& [key, value] : doc.at("difficulty_map").at("dmu").items())
        reg.dmu_map[parse_difficulty(key)] = value.get<double>();
    for (const auto& [key, value] : doc.at("difficulty_map").at("variance").items())
        reg.variance_map[parse_difficulty(key)] = value.get<double>();
    reg.sigma_scale = doc.at("default_shift").at("sigma_scale").get<double>();
    reg.target_mean_ratio = doc.at("default_shift").at("target_mean_ratio").get<double>();
    for (const auto& item : doc.at("scenes")) {
        ScenePreset scene;
        scene.name = item.at("name").get<std::string>();
        scene.source = item.at("source").get<std::string>();
        scene.p = item.at("p").get<double>();
        scene.p_if_self_transition = item.at("p_if_self_transition").get<double>();
        scene.dmu = parse_difficulty(item.at("dmu").get<std::string>());
        scene.variance = parse_difficulty(item.at("variance").get<std::string>());
        scene.shift_dmu_add = item.at("shift_dmu_add").get<double>();
        reg.scenes.push_back(std::move(scene));
    }
    if (reg.scenes.empty()) throw std::invalid_argument("preset registry has no scenes");
    return reg;
}

inline const PresetRegistry& default_registry() {
    static const PresetRegistry reg = parse_preset_registry(std::string(detail::kPresetRegistryJson));
    return reg;
}

/// Pre-change spec for a scene: symmetric switching at p, Gaussian modes at
/// mu_low and mu_low + dmu with shared per-mode variance.
inline HmmSpec preset_hmm(const ScenePreset& scene, const PresetRegistry& reg = default_registry()) {
    const double dmu = reg.dmu_map.at(scene.dmu);
    const double sigma = std::sqrt(reg.variance_map.at(scene.variance));
    return make_symmetric_spec(scene.p, Gaussian{reg.mu_low, sigma}, Gaussian{reg.mu_low + dmu, sigma});
}

// ---------------------------------------------------------------------------
// Post-change shift kinds
// ---------------------------------------------------------------------------

/// Additive mean shift on both modes plus a std multiplier.
struct EmissionShift {
    double dmu_add = 1.0;
    double sigma_scale = 1.5;
};

/// Replace the switching probability (symmetric chain).
struct TransitionShift {
    double new_p = 0.5;
};

enum class EmissionKind { Gaussian, Laplace, StudentT };

/// Swap the emission family per mode, keeping mean and variance.
struct TailSwap {
    EmissionKind target = EmissionKind::StudentT;
    double student_dof = 3.0;
};

/// Emission/transition/tail shifts applied in order.
struct Combined {
    std::vector<std::variant<EmissionShift, TransitionShift, TailSwap>> shifts;
};

using ShiftKind = std::variant<EmissionShift, TransitionShift, TailSwap, Combined>;

inline EmissionDist swap_tail(const EmissionDist& dist, EmissionKind target, double dof) {
    const double mean = mean_of(dist);
    const double var = variance_of(dist);
    switch (target) {
        case EmissionKind::Gaussian: return with_moments(EmissionDist{Gaussian{}}, mean, var);
        case EmissionKind::Laplace: return with_moments(EmissionDist{Laplace{}}, mean, var);
        case EmissionKind::StudentT:
            return with_moments(EmissionDist{StudentT{0.0, 1.0, dof}}, mean, var);
    }
    throw std::logic_error("swap_tail: unreachable");
}

inline HmmSpec apply_shift(const HmmSpec& spec, const ShiftKind& shift) {
    return std::visit(
        [&](const auto& s) -> HmmSpec {
            using T = std::decay_t<decltype(s)>;
            HmmSpec out = spec;
            if constexpr (std::is_same_v<T, EmissionShift>) {
                if (!(s.sigma_scale >= 1.0))
                    throw std::invalid_argument("EmissionShift: sigma_scale must be >= 1");
                const double scale_sq = s.sigma_scale * s.sigma_scale;
                out.emission_L = with_moments(spec.emission_L, mean_of(spec.emission_L) + s.dmu_add,
                                              variance_of(spec.emission_L) * scale_sq);
                out.emission_H = with_moments(spec.emission_H, mean_of(spec.emission_H) + s.dmu_add,
                                              variance_of(spec.emission_H) * scale_sq);
            } else if constexpr (std::is_same_v<T, TransitionShift>) {
                if (!(s.new_p > 0.0) || !(s.new_p < 1.0))
                    throw std::invalid_argument("TransitionShift: new_p must lie in (0,1)");
                out.transition = {{{1.0 - s.new_p, s.new_p}, {s.new_p, 1.0 - s.new_p}}};
            } else if constexpr (std::is_same_v<T, TailSwap>) {
                out.emission_L = swap_tail(spec.emission_L, s.target, s.student_dof);
                out.emission_H = swap_tail(spec.emission_H, s.target, s.student_dof);
            } else {
                for (const auto& inner : s.shifts)
                    out = std::visit([&](const auto& one) { return apply_shift(out, ShiftKind{one}); }, inner);
            }
            validate(out);
            return out;
        },
        shift);
}

/// Calibrated additive shift so the post/pre mean error-scale ratio (means
/// of exp(e) under the stationary mixture) hits `target_ratio` at the given
/// std multiplier. Gaussian emissions; closed form via lognormal means.
inline double calibrate_emission_shift(const HmmSpec& pre, double sigma_scale, double target_ratio) {
    const auto pi = stationary_distribution(pre.transition);
    const double scale_sq = sigma_scale * sigma_scale;
    double e_pre = 0.0, e_post_base = 0.0;
    int k = 0;
    for (const EmissionDist* em : {&pre.emission_L, &pre.emission_H}) {
        if (!std::holds_alternative<Gaussian>(*em))
            throw std::invalid_argument("calibrate_emission_shift: Gaussian emissions required");
        const auto& g = std::get<Gaussian>(*em);
        e_pre += pi[k] * std::exp(g.mean + 0.5 * g.std * g.std);
        e_post_base += pi[k] * std::exp(g.mean + 0.5 * scale_sq * g.std * g.std);
        ++k;
    }
    return std::log(target_ratio * e_pre / e_post_base);
}

/// Scenario for a named scene: registry pre-change dynamics plus the
/// scene's calibrated default emission shift.
inline ScenarioSpec preset(const std::string& name, const PresetRegistry& reg = default_registry(),
                           int m = 50) {
    const ScenePreset& scene = reg.find(name);
    const HmmSpec pre = preset_hmm(scene, reg);
    const HmmSpec post = apply_shift(pre, EmissionShift{scene.shift_dmu_add, reg.sigma_scale});
    return make_scenario(pre, post, default_changepoint_grid(m), name);
}

/// Gaussian / Laplace / Student-t(3) variants of a scenario with matched
/// per-mode means and variances on both regimes. The Gaussian member is the
/// base scenario itself.
inline std::array<ScenarioSpec, 3> heavy_tail_suite(const ScenarioSpec& base) {
    std::array<ScenarioSpec, 3> out{base, base, base};
    const TailSwap laplace{EmissionKind::Laplace, 3.0};
    const TailSwap student{EmissionKind::StudentT, 3.0};
    out[1] = make_scenario(apply_shift(base.pre, ShiftKind{laplace}), apply_shift(base.post, ShiftKind{laplace}),
                           base.changepoint_grid, base.label + "+laplace");
    out[2] = make_scenario(apply_shift(base.pre, ShiftKind{student}), apply_shift(base.post, ShiftKind{student}),
                           base.changepoint_grid, base.label + "+student_t3");
    return out;
}

/// Marginal moment-matched Gaussian of the stationary error law.
inline Gaussian marginal_gaussian(const HmmSpec& spec) {
    const auto pi = stationary_distribution(spec.transition);
    const double m_l = mean_of(spec.emission_L);
    const double m_h = mean_of(spec.emission_H);
    const double mean = pi[0] * m_l + pi[1] * m_h;
    const double second = pi[0] * (variance_of(spec.emission_L) + m_l * m_l) +
                          pi[1] * (variance_of(spec.emission_H) + m_h * m_h);
    return Gaussian{mean, std::sqrt(second - mean * mean)};
}

/// Stationary-weighted two-component Gaussian view of the error law
/// (exact for Gaussian emissions, moment-matched otherwise).
inline Gmm2 marginal_gmm(const HmmSpec& spec) {
    const auto pi = stationary_distribution(spec.transition);
    const Gaussian low{mean_of(spec.emission_L), std::sqrt(variance_of(spec.emission_L))};
    const Gaussian high{mean_of(spec.emission_H), std::sqrt(variance_of(spec.emission_H))};
    return Gmm2{pi[0], low, high};
}

struct NamedDetectorFactory {
    std::string name;
    ConfigTemplate make;
};

/// Reference built from a simulated in-distribution stream. Bandwidth
/// defaults to the median heuristic over the kept samples.
inline std::shared_ptr<const ReferenceSet> build_id_reference(const HmmSpec& pre, std::size_t n_id,
                                                              std::size_t max_ref, std::uint64_t seed,
                                                              std::optional<double> sigma = std::nullopt) {
    const ErrorPath path = sample_path(pre, n_id, derive_seed(seed, 0x4ef5));
    if (sigma) {
        return std::make_shared<const ReferenceSet>(
            build_reference(path.errors, RbfKernel{*sigma}, max_ref));
    }
    const ReferenceSet tmp = build_reference(path.errors, RbfKernel{1.0}, max_ref);
    const auto kept = tmp.samples();
    const double med = median_heuristic(kept);
    return std::make_shared<const ReferenceSet>(ReferenceSet(kept, RbfKernel{med}));
}

struct UnknownPostChangeSuite {
    ScenarioSpec scenario;
    std::shared_ptr<const ReferenceSet> reference;
    double zeta = 0.0;
    std::vector<NamedDetectorFactory> detectors;
};

struct SuiteOptions {
    int m = 50;
    std::size_t n_id = 20000;
    std::size_t max_ref = 2000;
    std::int64_t zeta_blocks = 200;
    double zeta_margin = 0.0;     // added to the mean ID-block MMD
    double kappa = 2.0;
    double misspec_factor = 2.0;  // assumed post-change mean shift vs truth
    std::uint64_t seed = 2024;
    std::optional<double> sigma;  // kernel bandwidth; median heuristic if absent
};

/// Factory for one named detector wired to a scenario. Recognized kinds:
///   dcmmd, dcmmd_norm          — MMD detector (reference from ID data only)
///   gauss_cusum                — Gaussian likelihood ratio, true post marginal
///   gauss_cusum_misspec        — assumed post mean off by misspec_factor
///   gmm_cusum                  — mixture likelihood ratio, true post
///   gmm_cusum_misspec          — post replaced by the kappa-shift surrogate
///   robust_cusum               — kappa-shift surrogate from the pre marginal
///   nll, nll_gmm               — pointwise scores under the pre density
inline NamedDetectorFactory scenario_detector_factory(const std::string& kind,
                                                      const ScenarioSpec& scenario,
                                                      const SuiteOptions& opt = {}) {
    const Gaussian pre_marginal = marginal_gaussian(scenario.pre);
    if (kind == "dcmmd" || kind == "dcmmd_norm") {
        auto ref = build_id_reference(scenario.pre, opt.n_id, opt.max_ref, opt.seed, opt.sigma);
        const double zeta = estimate_zeta(scenario.pre, *ref, opt.m, opt.zeta_blocks,
                                          derive_seed(opt.seed, 0x5e7a), opt.zeta_margin);
        const bool normalize = kind == "dcmmd_norm";
        const int m = opt.m;
        return {kind, [ref, zeta, m, normalize](double b) -> DetectorConfig {
                    return DcMmdConfig{m, zeta, b, ref, normalize, 20, 1e-6};
                }};
    }
    if (kind == "gauss_cusum") {
        const Gaussian post_marginal = marginal_gaussian(scenario.post);
        return {kind, [pre_marginal, post_marginal](double b) -> DetectorConfig {
                    return GaussCusumConfig{pre_marginal, post_marginal, b};
                }};
    }
    if (kind == "gauss_cusum_misspec") {
        const Gaussian post_marginal = marginal_gaussian(scenario.post);
        const double shift = post_marginal.mean - pre_marginal.mean;
        const Gaussian assumed{pre_marginal.mean + opt.misspec_factor * shift, pre_marginal.std};
        return {kind, [pre_marginal, assumed](double b) -> DetectorConfig {
                    return GaussCusumConfig{pre_marginal, assumed, b};
                }};
    }
    if (kind == "gmm_cusum") {
        const Gmm2 pre = marginal_gmm(scenario.pre);
        const Gmm2 post = marginal_gmm(scenario.post);
        return {kind, [pre, post](double b) -> DetectorConfig { return GmmCusumConfig{pre, post, b}; }};
    }
    if (kind == "gmm_cusum_misspec") {
        const Gmm2 pre = marginal_gmm(scenario.pre);
        Gmm2 post = pre;
        post.comp_L.mean += opt.kappa * post.comp_L.std;
        post.comp_H.mean += opt.kappa * post.comp_H.std;
        return {kind, [pre, post](double b) -> DetectorConfig { return GmmCusumConfig{pre, post, b}; }};
    }
    if (kind == "robust_cusum") {
        const double kappa = opt.kappa;
        return {kind, [pre_marginal, kappa](double b) -> DetectorConfig {
                    return RobustCusumConfig{pre_marginal, kappa, b};
                }};
    }
    if (kind == "nll") {
        return {kind, [pre_marginal](double b) -> DetectorConfig {
                    return NllConfig{Density{pre_marginal}, b};
                }};
    }
    if (kind == "nll_gmm") {
        const Gmm2 pre = marginal_gmm(scenario.pre);
        return {kind, [pre](double b) -> DetectorConfig { return NllConfig{Density{pre}, b}; }};
    }
    throw std::invalid_argument("unknown detector kind '" + kind + "'");
}

/// Detector lineup for the unknown-post-change comparison. Only the
/// misspecified likelihood baselines peek at the true post regime, and they
/// get it wrong by construction; the MMD detector sees ID data alone.
inline UnknownPostChangeSuite unknown_postchange_suite(const ScenarioSpec& base,
                                                       const SuiteOptions& opt = {}) {
    UnknownPostChangeSuite suite;
    suite.scenario = base;
    suite.reference = build_id_reference(base.pre, opt.n_id, opt.max_ref, opt.seed, opt.sigma);
    suite.zeta = estimate_zeta(base.pre, *suite.reference, opt.m, opt.zeta_blocks,
                               derive_seed(opt.seed, 0x5e7a), opt.zeta_margin);
    for (const char* kind : {"dcmmd", "robust_cusum", "gauss_cusum_misspec", "nll"})
        suite.detectors.push_back(scenario_detector_factory(kind, base, opt));
    return suite;
}

}  // namespace driftmon
