// driftmon: simulate two-mode error streams, fit the error model, run
// streaming change detectors, and reproduce the evaluation suites.
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "driftmon/detectors.hpp"
#include "driftmon/evaluation.hpp"
#include "driftmon/hmm.hpp"
#include "driftmon/hmm_fit.hpp"
#include "driftmon/io.hpp"
#include "driftmon/metrics.hpp"
#include "driftmon/scenarios.hpp"
#include "driftmon/theory.hpp"

namespace fs = std::filesystem;
using namespace driftmon;
using nlohmann::json;

namespace {

HmmSpec load_pre_spec(const std::string& preset_name, const std::string& spec_path) {
    if (!preset_name.empty() && !spec_path.empty())
        throw std::invalid_argument("give either --preset or --spec, not both");
    if (!preset_name.empty()) return preset_hmm(default_registry().find(preset_name));
    if (!spec_path.empty()) {
        try {
            return hmm_spec_from_json(read_json(spec_path));
        } catch (const json::exception& e) {
            throw DataError(std::string("spec JSON: ") + e.what());
        }
    }
    throw std::invalid_argument("one of --preset or --spec is required");
}

std::vector<std::int64_t> parse_changepoints(const std::string& csv) {
    std::vector<std::int64_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoll(tok));
    if (out.empty()) throw std::invalid_argument("empty changepoint list");
    return out;
}

ScenarioSpec load_scenario(const std::string& preset_name, const std::string& scenario_path, int m,
                           const std::string& changepoints_csv = "") {
    ScenarioSpec scenario;
    if (!preset_name.empty() && !scenario_path.empty())
        throw std::invalid_argument("give either --preset or --scenario, not both");
    if (!preset_name.empty()) {
        scenario = preset(preset_name, default_registry(), m);
    } else if (!scenario_path.empty()) {
        try {
            const json j = read_json(scenario_path);
            std::vector<std::int64_t> grid = default_changepoint_grid(m);
            if (j.contains("changepoint_grid"))
                grid = j.at("changepoint_grid").get<std::vector<std::int64_t>>();
            scenario = make_scenario(hmm_spec_from_json(j.at("pre")), hmm_spec_from_json(j.at("post")),
                                     grid, j.value("label", std::string("inline")));
        } catch (const json::exception& e) {
            throw DataError(std::string("scenario JSON: ") + e.what());
        }
    } else {
        throw std::invalid_argument("one of --preset or --scenario is required");
    }
    if (!changepoints_csv.empty()) scenario.changepoint_grid = parse_changepoints(changepoints_csv);
    return scenario;
}

std::vector<double> parse_grid(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    if (out.empty()) throw std::invalid_argument("empty grid");
    return out;
}

void write_text(const std::string& path, const json& j) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_json(path, j);
}

json detector_config_echo(const std::string& kind, double b, int m, double zeta, double sigma) {
    return {{"kind", kind}, {"b", b}, {"m", m}, {"zeta", zeta}, {"sigma", sigma}};
}

json suite_options_echo(const SuiteOptions& opt) {
    return {{"m", opt.m},
            {"n_id", opt.n_id},
            {"max_ref", opt.max_ref},
            {"zeta_blocks", opt.zeta_blocks},
            {"kappa", opt.kappa},
            {"misspec_factor", opt.misspec_factor},
            {"seed", opt.seed},
            {"sigma", opt.sigma ? json(*opt.sigma) : json("median")}};
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const std::string& preset_name, const std::string& spec_path, std::size_t length,
                 std::uint64_t seed, const std::string& out, const std::string& modes_out) {
    const HmmSpec spec = load_pre_spec(preset_name, spec_path);
    const ErrorPath path = sample_path(spec, length, seed);
    write_error_csv(out, path.errors);
    if (!modes_out.empty()) {
        std::ofstream mo(modes_out);
        if (!mo) throw DataError("cannot open '" + modes_out + "' for writing");
        mo << "t,mode\n";
        for (std::size_t t = 0; t < path.modes.size(); ++t)
            mo << t + 1 << ',' << (path.modes[t] == LatentMode::L ? 'L' : 'H') << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

int cmd_fit(const std::string& in, const std::string& out, const std::string& modes_out,
            int max_iters, double tol) {
    const std::vector<double> errors = read_error_csv(in);
    FitResult fit;
    try {
        fit = fit_two_state_hmm(errors, max_iters, tol);
    } catch (const std::exception& e) {
        throw DataError(std::string("fit failed: ") + e.what());
    }
    json report = to_json(fit.spec);
    report["fit"] = {{"converged", fit.converged},
                     {"iterations", fit.iterations},
                     {"log_likelihood", fit.log_likelihoods.back()}};
    write_text(out, report);
    if (!fit.converged) std::cerr << "warning: EM did not converge; best-so-far estimate written\n";
    if (!modes_out.empty()) {
        const auto modes = map_mode_assignment(errors, fit.spec);
        std::ofstream mo(modes_out);
        if (!mo) throw DataError("cannot open '" + modes_out + "' for writing");
        mo << "t,mode\n";
        for (std::size_t t = 0; t < modes.size(); ++t)
            mo << t + 1 << ',' << (modes[t] == LatentMode::L ? 'L' : 'H') << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// metrics (trajectory CSV -> ADE/FDE/RMSE)
// ---------------------------------------------------------------------------

int cmd_metrics(const std::string& in, const std::string& out) {
    const TrajectoryPair traj = read_trajectory_csv(in);
    const json j = {{"ade", compute_ade(traj.pred, traj.truth)},
                    {"fde", compute_fde(traj.pred, traj.truth)},
                    {"rmse", compute_rmse(traj.pred, traj.truth)}};
    if (out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_text(out, j);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

struct DetectArgs {
    std::string in;
    std::string detector = "dcmmd";
    std::string train;     // ID log for reference/zeta (dcmmd)
    std::string ref_path;  // serialized reference (dcmmd)
    std::string save_ref;
    std::string spec_path;  // fitted HmmSpec (parametric baselines)
    std::string post_spec_path;
    int m = 50;
    std::string sigma = "median";
    std::string zeta = "auto";
    double zeta_margin = 0.0;
    double b = 1.0;
    bool normalize = false;
    double kappa = 2.0;
    std::size_t max_ref = 2000;
    std::string out = "alarm.json";
    std::string trace_out;
};

DetectorConfig build_detect_config(const DetectArgs& args, json& echo) {
    if (args.detector == "dcmmd") {
        std::shared_ptr<const ReferenceSet> ref;
        std::vector<double> train_errors;
        if (!args.ref_path.empty()) {
            try {
                ref = std::make_shared<const ReferenceSet>(reference_from_json(read_json(args.ref_path)));
            } catch (const json::exception& e) {
                throw DataError(std::string("reference JSON: ") + e.what());
            }
        } else if (!args.train.empty()) {
            train_errors = read_error_csv(args.train);
            const auto pairs = consecutive_pairs(train_errors);
            const double sigma = args.sigma == "median" ? median_heuristic(pairs) : std::stod(args.sigma);
            ref = std::make_shared<const ReferenceSet>(build_reference(train_errors, RbfKernel{sigma}, args.max_ref));
        } else {
            throw std::invalid_argument("dcmmd needs --train or --ref");
        }
        if (!args.save_ref.empty()) write_text(args.save_ref, to_json(*ref));

        double zeta;
        if (args.zeta == "auto") {
            if (train_errors.empty())
                throw std::invalid_argument("--zeta auto needs --train to supply ID blocks");
            std::vector<double> block_mmds;
            for (std::size_t start = 0; start + args.m <= train_errors.size();
                 start += static_cast<std::size_t>(args.m)) {
                const std::span<const double> block(train_errors.data() + start,
                                                    static_cast<std::size_t>(args.m));
                block_mmds.push_back(mmd(consecutive_pairs(block), *ref));
            }
            if (block_mmds.empty()) throw DataError("--train log shorter than one block");
            zeta = mean_of(block_mmds) + args.zeta_margin;
        } else {
            zeta = std::stod(args.zeta);
            if (zeta < 0.0) throw std::invalid_argument("--zeta must be >= 0");
        }
        echo = detector_config_echo("dcmmd", args.b, args.m, zeta, ref->kernel().bandwidth);
        echo["normalize"] = args.normalize;
        return DcMmdConfig{args.m, zeta, args.b, ref, args.normalize, 20, 1e-6};
    }

    const HmmSpec pre = load_pre_spec("", args.spec_path);
    const Gaussian pre_marginal = marginal_gaussian(pre);
    echo = {{"kind", args.detector}, {"b", args.b}};
    if (args.detector == "gauss") {
        const HmmSpec post = load_pre_spec("", args.post_spec_path);
        return GaussCusumConfig{pre_marginal, marginal_gaussian(post), args.b};
    }
    if (args.detector == "gmm") {
        if (!args.post_spec_path.empty()) {
            const HmmSpec post = load_pre_spec("", args.post_spec_path);
            return GmmCusumConfig{marginal_gmm(pre), marginal_gmm(post), args.b};
        }
        Gmm2 surrogate = marginal_gmm(pre);
        surrogate.comp_L.mean += args.kappa * surrogate.comp_L.std;
        surrogate.comp_H.mean += args.kappa * surrogate.comp_H.std;
        echo["post"] = "kappa_surrogate";
        return GmmCusumConfig{marginal_gmm(pre), surrogate, args.b};
    }
    if (args.detector == "robust") {
        echo["kappa"] = args.kappa;
        return RobustCusumConfig{pre_marginal, args.kappa, args.b};
    }
    if (args.detector == "nll") return NllConfig{Density{pre_marginal}, args.b};
    throw std::invalid_argument("unknown --detector '" + args.detector + "'");
}

/// Replays a recorded log through a detector.
struct VectorStream {
    std::span<const double> data;
    std::size_t i = 0;
    double next() {
        if (i >= data.size()) throw DataError("stream exhausted before max_steps");
        return data[i++];
    }
};

int cmd_detect(const DetectArgs& args) {
    static const std::vector<std::string> kinds{"dcmmd", "gauss", "gmm", "robust", "nll"};
    if (std::find(kinds.begin(), kinds.end(), args.detector) == kinds.end())
        throw std::invalid_argument("unknown --detector '" + args.detector + "'");
    const std::vector<double> errors = read_error_csv(args.in);
    json echo;
    const DetectorConfig config = build_detect_config(args, echo);
    AnyDetector detector = make_detector(config);
    VectorStream stream{errors};
    const auto max_steps = static_cast<std::int64_t>(errors.size());
    const RunResult result = run_to_alarm(detector, stream, max_steps, !args.trace_out.empty());
    json out = alarm_to_json(result, max_steps);
    out["config"] = echo;
    write_text(args.out, out);
    if (!args.trace_out.empty()) write_trace_csv(args.trace_out, result.trace);
    return 0;
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

int cmd_calibrate(const std::string& preset_name, const std::string& scenario_path,
                  const std::string& changepoints, const std::string& detector,
                  const SuiteOptions& opt, double gamma, double tol_rel, double b_lo, double b_hi,
                  std::int64_t runs, std::int64_t max_len, const std::string& out) {
    const ScenarioSpec scenario = load_scenario(preset_name, scenario_path, opt.m, changepoints);
    const NamedDetectorFactory factory = scenario_detector_factory(detector, scenario, opt);
    const CalibrationResult result = calibrate_threshold(factory.make, scenario.pre, gamma, tol_rel,
                                                         b_lo, b_hi, runs, max_len, opt.seed);
    const json j = {{"scenario", scenario.label}, {"detector", factory.name},
                    {"gamma", gamma},             {"b", result.b},
                    {"mtfa", result.mtfa},        {"censor_rate", result.censor_rate},
                    {"iterations", result.iterations}, {"config", suite_options_echo(opt)}};
    if (out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_text(out, j);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// frontier
// ---------------------------------------------------------------------------

int cmd_frontier(const std::string& preset_name, const std::string& scenario_path,
                 const std::string& changepoints, const std::string& detector,
                 const SuiteOptions& opt, const std::string& b_grid_csv, std::int64_t runs,
                 std::int64_t max_len, std::int64_t post_horizon, const std::string& out,
                 const std::string& json_out) {
    const ScenarioSpec scenario = load_scenario(preset_name, scenario_path, opt.m, changepoints);
    const NamedDetectorFactory factory = scenario_detector_factory(detector, scenario, opt);
    const std::vector<double> grid = parse_grid(b_grid_csv);
    const auto points =
        frontier(factory.make, scenario.pre, scenario, grid, runs, max_len, opt.seed, post_horizon);
    write_frontier_csv(out, points);
    if (!json_out.empty()) {
        json arr = json::array();
        for (const auto& p : points)
            arr.push_back({{"b", p.b},
                           {"mtfa", p.mtfa},
                           {"wadd", p.wadd},
                           {"mtfa_stderr", p.mtfa_stderr},
                           {"wadd_stderr", p.wadd_stderr},
                           {"mtfa_censor_rate", p.mtfa_censor_rate}});
        write_text(json_out, {{"scenario", scenario.label},
                              {"detector", factory.name},
                              {"points", arr},
                              {"config", suite_options_echo(opt)}});
    }
    return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

json wadd_to_json(const WaddEstimate& w) {
    return {{"wadd", w.wadd},
            {"stderr", w.stderr_},
            {"n_runs", w.n_runs},
            {"prechange_alarm_rate", w.prechange_alarm_rate},
            {"censor_rate", w.censor_rate},
            {"argmax_changepoint", w.argmax_changepoint},
            {"argmax_mode", w.argmax_mode == LatentMode::L ? "L" : "H"}};
}

/// Matched-MTFA comparison: calibrate each detector to the target MTFA,
/// then estimate WADD at the calibrated threshold.
json matched_mtfa_row(const NamedDetectorFactory& factory, const ScenarioSpec& scenario,
                      double gamma, double tol_rel, double b_lo, double b_hi, std::int64_t runs,
                      std::int64_t max_len, std::int64_t post_horizon, std::uint64_t seed) {
    const CalibrationResult cal =
        calibrate_threshold(factory.make, scenario.pre, gamma, tol_rel, b_lo, b_hi, runs, max_len, seed);
    const WaddEstimate wadd =
        estimate_wadd(factory.make(cal.b), scenario, runs, derive_seed(seed, 0xadd), post_horizon);
    json row = {{"detector", factory.name}, {"b", cal.b}, {"mtfa", cal.mtfa}};
    row["wadd"] = wadd_to_json(wadd);
    return row;
}

int cmd_bench_unknown_post(const std::string& preset_name, const std::string& scenario_path,
                           const std::string& changepoints, const SuiteOptions& opt, double gamma,
                           std::int64_t runs, std::int64_t max_len, std::int64_t post_horizon,
                           double b_hi, const std::string& out) {
    const ScenarioSpec scenario = load_scenario(preset_name, scenario_path, opt.m, changepoints);
    const UnknownPostChangeSuite suite = unknown_postchange_suite(scenario, opt);
    json rows = json::array();
    for (const auto& factory : suite.detectors)
        rows.push_back(matched_mtfa_row(factory, suite.scenario, gamma, 0.1, 1e-4, b_hi, runs,
                                        max_len, post_horizon, opt.seed));
    const json j = {{"suite", "unknown_post"},
                    {"scenario", scenario.label},
                    {"gamma", gamma},
                    {"zeta", suite.zeta},
                    {"rows", rows},
                    {"config", suite_options_echo(opt)}};
    write_text(out, j);
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_bench_heavy_tail(const std::string& preset_name, const std::string& scenario_path,
                         const std::string& changepoints, const SuiteOptions& opt, double gamma,
                         std::int64_t runs, std::int64_t max_len, std::int64_t post_horizon,
                         double b_hi, const std::string& out) {
    const ScenarioSpec base = load_scenario(preset_name, scenario_path, opt.m, changepoints);
    const auto variants = heavy_tail_suite(base);
    json rows = json::array();
    for (const auto& variant : variants) {
        SuiteOptions vopt = opt;  // reference must come from the variant's own ID law
        for (const char* kind : {"dcmmd", "gauss_cusum"}) {
            const NamedDetectorFactory factory = scenario_detector_factory(kind, variant, vopt);
            json row = matched_mtfa_row(factory, variant, gamma, 0.1, 1e-4, b_hi, runs, max_len,
                                        post_horizon, opt.seed);
            row["variant"] = variant.label;
            rows.push_back(row);
        }
    }
    const json j = {{"suite", "heavy_tail"},
                    {"scenario", base.label},
                    {"gamma", gamma},
                    {"rows", rows},
                    {"config", suite_options_echo(opt)}};
    write_text(out, j);
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_bench_bounds(const std::string& preset_name, const std::string& scenario_path,
                     const SuiteOptions& opt, double b, const std::string& out) {
    const ScenarioSpec scenario = load_scenario(preset_name, scenario_path, opt.m, "");
    const auto ref = build_id_reference(scenario.pre, opt.n_id, opt.max_ref, opt.seed, opt.sigma);
    const double zeta =
        estimate_zeta(scenario.pre, *ref, opt.m, opt.zeta_blocks, derive_seed(opt.seed, 0x5e7a));
    const double shift = estimate_lambda_shift(scenario.pre, scenario.post, ref->kernel(), 10000,
                                               derive_seed(opt.seed, 0xd));
    BoundReport report;
    report.delta_gap = spectral_gap(second_order_chain(scenario.pre.transition));
    report.delta_lambda2 = 1.0 - report.delta_gap;
    report.R = estimate_R(*ref);
    report.d_hat = shift - zeta;
    BoundInputs inputs{opt.m, b, zeta, report.delta_lambda2, report.R, report.d_hat};
    report.a = bound_a(opt.m, report.delta_lambda2, report.R);
    if (report.d_hat > 0.0) {
        report.bound = wadd_upper_bound(inputs);
        report.bound_tight = wadd_upper_bound_tight(inputs);
    }
    json j = to_json(report);
    j["scenario"] = scenario.label;
    j["b"] = b;
    j["zeta"] = zeta;
    j["config"] = suite_options_echo(opt);
    write_text(out, j);
    std::cout << j.dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// run: full experiment from a single JSON config document
// ---------------------------------------------------------------------------

int cmd_run(const std::string& config_path) {
    json cfg;
    try {
        cfg = read_json(config_path);
    } catch (const json::exception& e) {
        throw DataError(std::string("experiment config: ") + e.what());
    }

    SuiteOptions opt;
    opt.m = cfg.value("m", 50);
    opt.n_id = cfg.value("n_id", std::size_t{20000});
    opt.max_ref = cfg.value("max_ref", std::size_t{2000});
    opt.zeta_blocks = cfg.value("zeta_blocks", std::int64_t{200});
    opt.zeta_margin = cfg.value("zeta_margin", 0.0);
    opt.kappa = cfg.value("kappa", 2.0);
    opt.misspec_factor = cfg.value("misspec_factor", 2.0);
    opt.seed = cfg.value("seed", std::uint64_t{2024});
    if (cfg.contains("sigma") && cfg.at("sigma").is_number())
        opt.sigma = cfg.at("sigma").get<double>();

    const std::int64_t n_runs = cfg.value("n_runs", std::int64_t{200});
    const std::int64_t max_len = cfg.value("max_len", std::int64_t{100000});
    const std::int64_t post_horizon = cfg.value("post_horizon", std::int64_t{20000});
    const std::string out_dir = cfg.value("out_dir", std::string("results"));

    ScenarioSpec scenario;
    json scenario_echo;
    if (cfg.at("scenario").is_string()) {
        scenario = preset(cfg.at("scenario").get<std::string>(), default_registry(), opt.m);
        scenario_echo = cfg.at("scenario");
    } else {
        const json& j = cfg.at("scenario");
        std::vector<std::int64_t> grid = default_changepoint_grid(opt.m);
        if (j.contains("changepoint_grid"))
            grid = j.at("changepoint_grid").get<std::vector<std::int64_t>>();
        scenario = make_scenario(hmm_spec_from_json(j.at("pre")), hmm_spec_from_json(j.at("post")),
                                 grid, j.value("label", std::string("inline")));
        scenario_echo = j;
    }
    if (cfg.contains("changepoint_grid"))
        scenario.changepoint_grid = cfg.at("changepoint_grid").get<std::vector<std::int64_t>>();

    fs::create_directories(out_dir);

    // resolved-config echo accompanies every run directory
    json echo = cfg;
    echo["resolved"] = {{"m", opt.m},
                        {"n_id", opt.n_id},
                        {"max_ref", opt.max_ref},
                        {"seed", opt.seed},
                        {"n_runs", n_runs},
                        {"max_len", max_len},
                        {"post_horizon", post_horizon},
                        {"scenario_label", scenario.label},
                        {"changepoint_grid", scenario.changepoint_grid}};
    write_text((fs::path(out_dir) / "config_echo.json").string(), echo);

    json results = json::array();
    for (const auto& det : cfg.at("detectors")) {
        const std::string kind = det.at("kind").get<std::string>();
        const NamedDetectorFactory factory = scenario_detector_factory(kind, scenario, opt);

        double b;
        double mtfa, mtfa_censor;
        const json bspec = det.contains("b") ? det.at("b") : cfg.value("b", json(1.0));
        if (bspec.is_string()) {
            const std::string s = bspec.get<std::string>();
            if (s.rfind("calibrate:", 0) != 0)
                throw std::invalid_argument("detector b must be a number or 'calibrate:<gamma>'");
            const double gamma = std::stod(s.substr(10));
            const double b_hi = det.value("b_hi", cfg.value("b_hi", 60.0));
            const CalibrationResult cal = calibrate_threshold(
                factory.make, scenario.pre, gamma, cfg.value("tol_rel", 0.1), 1e-4, b_hi, n_runs,
                max_len, opt.seed);
            b = cal.b;
            mtfa = cal.mtfa;
            mtfa_censor = cal.censor_rate;
        } else {
            b = bspec.get<double>();
            const MtfaEstimate est = estimate_mtfa(factory.make(b), scenario.pre, n_runs, max_len, opt.seed);
            mtfa = est.mtfa;
            mtfa_censor = est.censor_rate;
        }

        const WaddEstimate wadd =
            estimate_wadd(factory.make(b), scenario, n_runs, derive_seed(opt.seed, 0xadd), post_horizon);
        const ScoreProtocolResult scores =
            score_protocol(factory.make(b), scenario, n_runs, opt.m, derive_seed(opt.seed, 0xacc));

        const json row = {{"scenario", scenario.label},
                          {"detector", factory.name},
                          {"b", b},
                          {"mtfa", mtfa},
                          {"wadd", wadd.wadd},
                          {"stderr", wadd.stderr_},
                          {"censor_rate", mtfa_censor},
                          {"auroc", scores.auroc},
                          {"fpr95", scores.fpr95}};
        results.push_back(row);
        write_text((fs::path(out_dir) / (factory.name + ".json")).string(), row);
    }
    const json report = {{"scenario", scenario_echo}, {"results", results}};
    write_text((fs::path(out_dir) / "report.json").string(), report);
    std::cout << report.dump(2) << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// perf
// ---------------------------------------------------------------------------

int cmd_perf(const std::string& lengths_csv, int m, std::size_t n_ref, int reps,
             std::uint64_t seed, const std::string& out) {
    const std::vector<double> lengths_d = parse_grid(lengths_csv);
    const HmmSpec spec = preset_hmm(default_registry().find("highway_car_following"));
    const auto ref = build_id_reference(spec, std::max<std::size_t>(n_ref + 1000, 4000), n_ref, seed);
    const double zeta = estimate_zeta(spec, *ref, m, 100, derive_seed(seed, 0x5e7a));

    struct Obs {
        double length;
        double us_per_step;
    };
    std::vector<Obs> obs;
    json samples = json::array();
    for (int rep = 0; rep < reps; ++rep) {
        for (double len_d : lengths_d) {
            const auto len = static_cast<std::int64_t>(len_d);
            DcMmdDetector detector(DcMmdConfig{m, zeta, 1e300, ref, false, 20, 1e-6});
            HmmStream stream(spec, derive_seed(seed, static_cast<std::uint64_t>(rep),
                                               static_cast<std::uint64_t>(len)));
            const auto t0 = std::chrono::steady_clock::now();
            const RunResult res = run_to_alarm(detector, stream, len);
            const auto t1 = std::chrono::steady_clock::now();
            const double us =
                std::chrono::duration<double, std::micro>(t1 - t0).count() / static_cast<double>(len);
            obs.push_back({static_cast<double>(len), us});
            samples.push_back({{"length", len}, {"us_per_step", us}, {"steps", res.steps}});
        }
    }

    // OLS slope of per-step time on length, with a t-based 95% interval
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
    const double slope_stderr = std::sqrt(sse / (n - 2.0) / sxx);
    const double t95 = 2.447;  // approx for small dof; callers use >= 8 points
    double mean_us_longest = 0;
    int count_longest = 0;
    const double longest = *std::max_element(lengths_d.begin(), lengths_d.end());
    for (const auto& o : obs)
        if (o.length == longest) {
            mean_us_longest += o.us_per_step;
            ++count_longest;
        }
    mean_us_longest /= count_longest;

    const json j = {{"detector", "dcmmd"},
                    {"m", m},
                    {"n_ref", n_ref},
                    {"samples", samples},
                    {"slope_us_per_step_per_length", slope},
                    {"slope_stderr", slope_stderr},
                    {"slope_ci95", {slope - t95 * slope_stderr, slope + t95 * slope_stderr}},
                    {"amortized_us_per_step", mean_us_longest}};
    if (out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_text(out, j);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latent-dynamics-aware quickest change detection for error streams"};
    app.require_subcommand(1);

    // --- simulate ---
    std::string sim_preset, sim_spec, sim_out = "errors.csv", sim_modes_out;
    std::size_t sim_length = 10000;
    std::uint64_t sim_seed = 1;
    auto* sim = app.add_subcommand("simulate", "emit an error-stream CSV from a preset or spec");
    sim->add_option("--preset", sim_preset, "scene preset name");
    sim->add_option("--spec", sim_spec, "HmmSpec JSON path");
    sim->add_option("--length", sim_length, "number of steps")->check(CLI::PositiveNumber);
    sim->add_option("--seed", sim_seed, "random seed");
    sim->add_option("--out", sim_out, "output CSV path");
    sim->add_option("--modes-out", sim_modes_out, "optional latent-mode CSV path");

    // --- fit ---
    std::string fit_in, fit_out = "spec.json", fit_modes_out;
    int fit_max_iters = 200;
    double fit_tol = 1e-6;
    auto* fit = app.add_subcommand("fit", "fit the two-state error model to an error log");
    fit->add_option("--in", fit_in, "error CSV path")->required();
    fit->add_option("--out", fit_out, "output spec JSON path");
    fit->add_option("--modes-out", fit_modes_out, "MAP mode assignment CSV path");
    fit->add_option("--max-iters", fit_max_iters)->check(CLI::PositiveNumber);
    fit->add_option("--tol", fit_tol)->check(CLI::PositiveNumber);

    // --- metrics ---
    std::string met_in, met_out;
    auto* met = app.add_subcommand("metrics", "ADE/FDE/RMSE from a trajectory CSV");
    met->add_option("--in", met_in, "trajectory CSV path")->required();
    met->add_option("--out", met_out, "output JSON path (stdout when omitted)");

    // --- detect ---
    DetectArgs det;
    auto* detect = app.add_subcommand("detect", "stream an error log through a detector");
    detect->add_option("--in", det.in, "error CSV path")->required();
    detect->add_option("--detector", det.detector, "dcmmd|gauss|gmm|robust|nll");
    detect->add_option("--train", det.train, "ID error CSV for reference building (dcmmd)");
    detect->add_option("--ref", det.ref_path, "reference JSON (dcmmd)");
    detect->add_option("--save-ref", det.save_ref, "write the built reference JSON here");
    detect->add_option("--spec", det.spec_path, "fitted HmmSpec JSON (parametric baselines)");
    detect->add_option("--post-spec", det.post_spec_path, "post-change HmmSpec JSON");
    detect->add_option("--m", det.m, "block length")->check(CLI::Range(2, 1 << 20));
    detect->add_option("--sigma", det.sigma, "kernel bandwidth or 'median'");
    detect->add_option("--zeta", det.zeta, "offset value or 'auto'");
    detect->add_option("--zeta-margin", det.zeta_margin, "margin added in auto mode");
    detect->add_option("--b", det.b, "threshold")->check(CLI::PositiveNumber);
    detect->add_flag("--normalize", det.normalize, "variance-normalized increments");
    detect->add_option("--kappa", det.kappa, "surrogate shift (robust/gmm)");
    detect->add_option("--max-ref", det.max_ref, "reference size cap");
    detect->add_option("--out", det.out, "alarm JSON path");
    detect->add_option("--trace-out", det.trace_out, "statistic trace CSV path");

    // --- shared evaluation options ---
    auto add_suite_options = [](CLI::App* cmd, SuiteOptions& opt, std::string& preset_name,
                                std::string& scenario_path, std::string* changepoints = nullptr) {
        cmd->add_option("--preset", preset_name, "scene preset name");
        cmd->add_option("--scenario", scenario_path, "scenario JSON path");
        if (changepoints)
            cmd->add_option("--changepoints", *changepoints, "override changepoint grid (csv)");
        cmd->add_option("--m", opt.m, "block length")->check(CLI::Range(2, 1 << 20));
        cmd->add_option("--n-id", opt.n_id, "ID stream length for reference building");
        cmd->add_option("--max-ref", opt.max_ref, "reference size cap");
        cmd->add_option("--zeta-margin", opt.zeta_margin, "margin over the mean ID-block MMD");
        cmd->add_option("--kappa", opt.kappa, "surrogate shift");
        cmd->add_option("--misspec-factor", opt.misspec_factor, "assumed/true post shift ratio");
        cmd->add_option("--seed", opt.seed, "master seed");
        cmd->add_option_function<std::string>(
            "--sigma",
            [&opt](const std::string& s) {
                if (s == "median") {
                    opt.sigma = std::nullopt;
                } else {
                    opt.sigma = std::stod(s);
                }
            },
            "kernel bandwidth or 'median'");
    };

    // --- calibrate ---
    SuiteOptions cal_opt;
    std::string cal_preset, cal_scenario, cal_changepoints, cal_detector = "dcmmd", cal_out;
    double cal_gamma = 5000, cal_tol = 0.1, cal_blo = 1e-4, cal_bhi = 50;
    std::int64_t cal_runs = 200, cal_maxlen = 200000;
    auto* cal = app.add_subcommand("calibrate", "bisection threshold calibration to a target MTFA");
    add_suite_options(cal, cal_opt, cal_preset, cal_scenario, &cal_changepoints);
    cal->add_option("--detector", cal_detector, "detector kind");
    cal->add_option("--gamma", cal_gamma, "target MTFA in steps")->check(CLI::PositiveNumber);
    cal->add_option("--tol-rel", cal_tol)->check(CLI::PositiveNumber);
    cal->add_option("--b-lo", cal_blo)->check(CLI::PositiveNumber);
    cal->add_option("--b-hi", cal_bhi)->check(CLI::PositiveNumber);
    cal->add_option("--runs", cal_runs)->check(CLI::PositiveNumber);
    cal->add_option("--max-len", cal_maxlen)->check(CLI::PositiveNumber);
    cal->add_option("--out", cal_out, "output JSON path (stdout when omitted)");

    // --- frontier ---
    SuiteOptions fr_opt;
    std::string fr_preset, fr_scenario, fr_changepoints, fr_detector = "dcmmd";
    std::string fr_grid = "0.25,0.5,1,2,4", fr_out = "frontier.csv", fr_json;
    std::int64_t fr_runs = 200, fr_maxlen = 100000, fr_horizon = 20000;
    auto* fr = app.add_subcommand("frontier", "delay / false-alarm trade-off sweep");
    add_suite_options(fr, fr_opt, fr_preset, fr_scenario, &fr_changepoints);
    fr->add_option("--detector", fr_detector, "detector kind");
    fr->add_option("--b-grid", fr_grid, "comma-separated ascending thresholds");
    fr->add_option("--runs", fr_runs)->check(CLI::PositiveNumber);
    fr->add_option("--max-len", fr_maxlen)->check(CLI::PositiveNumber);
    fr->add_option("--post-horizon", fr_horizon)->check(CLI::PositiveNumber);
    fr->add_option("--out", fr_out, "frontier CSV path");
    fr->add_option("--json-out", fr_json, "detailed JSON path");

    // --- bench ---
    SuiteOptions be_opt;
    std::string be_suite = "unknown-post", be_preset, be_scenario, be_changepoints;
    std::string be_out = "bench.json";
    double be_gamma = 2000, be_b = 1.0, be_bhi = 60;
    std::int64_t be_runs = 300, be_maxlen = 60000, be_horizon = 20000;
    auto* be = app.add_subcommand("bench", "canonical suites: unknown-post, heavy-tail, bounds");
    add_suite_options(be, be_opt, be_preset, be_scenario, &be_changepoints);
    be->add_option("--suite", be_suite, "unknown-post|heavy-tail|bounds");
    be->add_option("--gamma", be_gamma, "matched MTFA target")->check(CLI::PositiveNumber);
    be->add_option("--b", be_b, "threshold for the bound report")->check(CLI::PositiveNumber);
    be->add_option("--b-hi", be_bhi, "calibration upper bracket")->check(CLI::PositiveNumber);
    be->add_option("--runs", be_runs)->check(CLI::PositiveNumber);
    be->add_option("--max-len", be_maxlen)->check(CLI::PositiveNumber);
    be->add_option("--post-horizon", be_horizon)->check(CLI::PositiveNumber);
    be->add_option("--out", be_out, "output JSON path");

    // --- run ---
    std::string run_config;
    auto* runc = app.add_subcommand("run", "full experiment from a JSON config document");
    runc->add_option("--config", run_config, "experiment config JSON")->required();

    // --- perf ---
    std::string pf_lengths = "10000,100000,1000000", pf_out;
    int pf_m = 50, pf_reps = 3;
    std::size_t pf_nref = 2000;
    std::uint64_t pf_seed = 1;
    auto* pf = app.add_subcommand("perf", "per-step latency vs stream length");
    pf->add_option("--lengths", pf_lengths, "comma-separated stream lengths");
    pf->add_option("--m", pf_m)->check(CLI::Range(2, 1 << 20));
    pf->add_option("--n-ref", pf_nref);
    pf->add_option("--reps", pf_reps)->check(CLI::PositiveNumber);
    pf->add_option("--seed", pf_seed);
    pf->add_option("--out", pf_out, "output JSON path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (sim->parsed())
            return cmd_simulate(sim_preset, sim_spec, sim_length, sim_seed, sim_out, sim_modes_out);
        if (fit->parsed()) return cmd_fit(fit_in, fit_out, fit_modes_out, fit_max_iters, fit_tol);
        if (met->parsed()) return cmd_metrics(met_in, met_out);
        if (detect->parsed()) return cmd_detect(det);
        if (cal->parsed())
            return cmd_calibrate(cal_preset, cal_scenario, cal_changepoints, cal_detector, cal_opt,
                                 cal_gamma, cal_tol, cal_blo, cal_bhi, cal_runs, cal_maxlen, cal_out);
        if (fr->parsed())
            return cmd_frontier(fr_preset, fr_scenario, fr_changepoints, fr_detector, fr_opt,
                                fr_grid, fr_runs, fr_maxlen, fr_horizon, fr_out, fr_json);
        if (be->parsed()) {
            if (be_suite == "unknown-post")
                return cmd_bench_unknown_post(be_preset, be_scenario, be_changepoints, be_opt,
                                              be_gamma, be_runs, be_maxlen, be_horizon, be_bhi, be_out);
            if (be_suite == "heavy-tail")
                return cmd_bench_heavy_tail(be_preset, be_scenario, be_changepoints, be_opt,
                                            be_gamma, be_runs, be_maxlen, be_horizon, be_bhi, be_out);
            if (be_suite == "bounds") return cmd_bench_bounds(be_preset, be_scenario, be_opt, be_b, be_out);
            throw std::invalid_argument("unknown --suite '" + be_suite + "'");
        }
        if (runc->parsed()) return cmd_run(run_config);
        if (pf->parsed()) return cmd_perf(pf_lengths, pf_m, pf_nref, pf_reps, pf_seed, pf_out);
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 4;
    }
}
