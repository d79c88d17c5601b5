// File formats: spec/reference JSON, error-log and trajectory CSV,
// statistic traces, alarms, and experiment reports.
#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftmon/detectors.hpp"
#include "driftmon/evaluation.hpp"
#include "driftmon/hmm.hpp"
#include "driftmon/metrics.hpp"
#include "driftmon/mmd.hpp"
#include "driftmon/theory.hpp"

namespace driftmon {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Emission / HmmSpec JSON
// ---------------------------------------------------------------------------

inline json to_json(const EmissionDist& dist) {
    return std::visit(
        [](const auto& d) -> json {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Gaussian>) {
                return {{"kind", "gaussian"}, {"mean", d.mean}, {"std", d.std}};
            } else if constexpr (std::is_same_v<T, Laplace>) {
                return {{"kind", "laplace"}, {"location", d.location}, {"scale", d.scale}};
            } else {
                return {{"kind", "student_t"}, {"location", d.location}, {"scale", d.scale}, {"dof", d.dof}};
            }
        },
        dist);
}

inline EmissionDist emission_from_json(const json& j) {
    const auto kind = j.at("kind").get<std::string>();
    EmissionDist dist;
    if (kind == "gaussian") {
        dist = Gaussian{j.at("mean").get<double>(), j.at("std").get<double>()};
    } else if (kind == "laplace") {
        dist = Laplace{j.at("location").get<double>(), j.at("scale").get<double>()};
    } else if (kind == "student_t") {
        dist = StudentT{j.at("location").get<double>(), j.at("scale").get<double>(),
                        j.at("dof").get<double>()};
    } else {
        throw std::invalid_argument("unknown emission kind '" + kind + "'");
    }
    validate(dist);
    return dist;
}

inline json to_json(const HmmSpec& spec) {
    return {{"transition",
             {{spec.transition[0][0], spec.transition[0][1]},
              {spec.transition[1][0], spec.transition[1][1]}}},
            {"emission_L", to_json(spec.emission_L)},
            {"emission_H", to_json(spec.emission_H)}};
}

inline HmmSpec hmm_spec_from_json(const json& j) {
    HmmSpec spec;
    const auto& t = j.at("transition");
    if (t.size() != 2 || t[0].size() != 2 || t[1].size() != 2)
        throw std::invalid_argument("HmmSpec JSON: transition must be 2x2");
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k) spec.transition[i][k] = t[i][k].get<double>();
    spec.emission_L = emission_from_json(j.at("emission_L"));
    spec.emission_H = emission_from_json(j.at("emission_H"));
    validate(spec);
    return spec;
}

// ---------------------------------------------------------------------------
// ReferenceSet JSON
// ---------------------------------------------------------------------------

inline json to_json(const ReferenceSet& ref) {
    json samples = json::array();
    for (const auto& s : ref.samples()) samples.push_back({s.prev, s.cur});
    return {{"sigma", ref.kernel().bandwidth}, {"samples", samples}, {"self_term", ref.self_term()}};
}

/// Validates the stored self term against the samples on load.
inline ReferenceSet reference_from_json(const json& j) {
    std::vector<SecondOrderSample> samples;
    for (const auto& item : j.at("samples"))
        samples.push_back({item.at(0).get<double>(), item.at(1).get<double>()});
    return ReferenceSet(samples, RbfKernel{j.at("sigma").get<double>()},
                        j.at("self_term").get<double>());
}

// ---------------------------------------------------------------------------
// CSV formats
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    return fields;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    return out;
}

}  // namespace detail

/// Error log `t,e` with monotone integer t.
inline void write_error_csv(const std::string& path, std::span<const double> errors) {
    auto out = detail::open_output(path);
    out << "t,e\n";
    out.precision(17);
    for (std::size_t t = 0; t < errors.size(); ++t) out << t + 1 << ',' << errors[t] << '\n';
}

inline std::vector<double> read_error_csv(const std::string& path) {
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line) || detail::split_csv_line(line) != std::vector<std::string>{"t", "e"})
        throw DataError("error CSV: expected header 't,e'");
    std::vector<double> errors;
    std::int64_t prev_t = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 2) throw DataError("error CSV: expected 2 fields per row");
        const std::int64_t t = std::stoll(fields[0]);
        if (t <= prev_t) throw DataError("error CSV: t must be strictly increasing");
        prev_t = t;
        errors.push_back(std::stod(fields[1]));
    }
    if (errors.empty()) throw DataError("error CSV: no data rows");
    return errors;
}

/// Trajectory pairs `t,px,py,tx,ty` (predicted and true positions).
struct TrajectoryPair {
    std::vector<Point2> pred;
    std::vector<Point2> truth;
};

inline TrajectoryPair read_trajectory_csv(const std::string& path) {
    auto in = detail::open_input(path);
    std::string line;
    if (!std::getline(in, line) ||
        detail::split_csv_line(line) != std::vector<std::string>{"t", "px", "py", "tx", "ty"})
        throw DataError("trajectory CSV: expected header 't,px,py,tx,ty'");
    TrajectoryPair out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 5) throw DataError("trajectory CSV: expected 5 fields per row");
        out.pred.push_back({std::stod(fields[1]), std::stod(fields[2])});
        out.truth.push_back({std::stod(fields[3]), std::stod(fields[4])});
    }
    if (out.pred.empty()) throw DataError("trajectory CSV: no data rows");
    return out;
}

/// Statistic trace `step,block,W`.
inline void write_trace_csv(const std::string& path, std::span<const TracePoint> trace) {
    auto out = detail::open_output(path);
    out << "step,block,W\n";
    out.precision(17);
    for (const auto& p : trace) out << p.step << ',' << p.block << ',' << p.value << '\n';
}

/// Frontier sweep `b,mtfa,wadd`.
inline void write_frontier_csv(const std::string& path, std::span<const FrontierPoint> points) {
    auto out = detail::open_output(path);
    out << "b,mtfa,wadd\n";
    out.precision(17);
    for (const auto& p : points) out << p.b << ',' << p.mtfa << ',' << p.wadd << '\n';
}

// ---------------------------------------------------------------------------
// Alarm / report JSON
// ---------------------------------------------------------------------------

inline json alarm_to_json(const RunResult& result, std::int64_t max_steps) {
    if (!result.alarm) return {{"censored", max_steps}};
    return {{"stopping_time", result.alarm->stopping_time},
            {"block", result.alarm->block_index},
            {"W", result.alarm->statistic_at_alarm}};
}

struct BoundReport {
    double a = 0.0;
    double d_hat = 0.0;
    double delta_gap = 0.0;      // 1 - |lambda_2| of the pair chain
    double delta_lambda2 = 0.0;  // |lambda_2| reading, used in the bound
    double R = 0.0;
    std::optional<double> bound;
    std::optional<double> bound_tight;
};

inline json to_json(const BoundReport& r) {
    json j{{"a", r.a},
           {"d_hat", r.d_hat},
           {"delta_gap", r.delta_gap},
           {"delta_lambda2", r.delta_lambda2},
           {"R", r.R}};
    j["bound"] = r.bound ? json(*r.bound) : json("vacuous");
    j["bound_tight"] = r.bound_tight ? json(*r.bound_tight) : json("vacuous");
    return j;
}

inline void write_json(const std::string& path, const json& j) {
    auto out = detail::open_output(path);
    out << j.dump(2) << '\n';
}

inline json read_json(const std::string& path) {
    auto in = detail::open_input(path);
    return json::parse(in);
}

}  // namespace driftmon
