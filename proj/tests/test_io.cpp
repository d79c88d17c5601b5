#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "driftmon/io.hpp"
#include "driftmon/scenarios.hpp"

using namespace driftmon;
namespace fs = std::filesystem;

namespace {

class IoTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("driftmon_io_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST_F(IoTest, ErrorCsvRoundTrip) {
    const std::vector<double> errors{0.5, -1.25, 3.75, 0.0001220703125};
    write_error_csv(path("e.csv"), errors);
    const auto back = read_error_csv(path("e.csv"));
    ASSERT_EQ(back.size(), errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i) EXPECT_EQ(back[i], errors[i]);  // bit-exact
}

TEST_F(IoTest, ErrorCsvSchemaValidation) {
    {
        std::ofstream out(path("bad_header.csv"));
        out << "time,err\n1,0.5\n";
    }
    EXPECT_THROW(read_error_csv(path("bad_header.csv")), DataError);
    {
        std::ofstream out(path("bad_t.csv"));
        out << "t,e\n1,0.5\n1,0.7\n";
    }
    EXPECT_THROW(read_error_csv(path("bad_t.csv")), DataError);
    {
        std::ofstream out(path("empty.csv"));
        out << "t,e\n";
    }
    EXPECT_THROW(read_error_csv(path("empty.csv")), DataError);
    EXPECT_THROW(read_error_csv(path("missing.csv")), DataError);
}

TEST_F(IoTest, TrajectoryCsvReadsBothTracks) {
    {
        std::ofstream out(path("traj.csv"));
        out << "t,px,py,tx,ty\n1,0,0,0,0\n2,1,0,0,0\n";
    }
    const TrajectoryPair traj = read_trajectory_csv(path("traj.csv"));
    ASSERT_EQ(traj.pred.size(), 2u);
    EXPECT_DOUBLE_EQ(compute_ade(traj.pred, traj.truth), 0.5);
    EXPECT_DOUBLE_EQ(compute_fde(traj.pred, traj.truth), 1.0);
}

TEST_F(IoTest, HmmSpecJsonRoundTripAllKinds) {
    HmmSpec spec;
    spec.transition = {{{0.85, 0.15}, {0.25, 0.75}}};
    spec.emission_L = Laplace{-0.5, 0.7};
    spec.emission_H = StudentT{1.5, 0.4, 3.5};
    write_json(path("spec.json"), to_json(spec));
    const HmmSpec back = hmm_spec_from_json(read_json(path("spec.json")));
    EXPECT_EQ(to_json(back), to_json(spec));
}

TEST_F(IoTest, HmmSpecJsonRejectsInvalidContent) {
    EXPECT_THROW(hmm_spec_from_json(json::parse(R"({"transition": [[1.0, 0.0], [0.5, 0.5]],
        "emission_L": {"kind": "gaussian", "mean": 0, "std": 1},
        "emission_H": {"kind": "gaussian", "mean": 1, "std": 1}})")),
                 std::invalid_argument);
    EXPECT_THROW(hmm_spec_from_json(json::parse(R"({"transition": [[0.9, 0.1], [0.1, 0.9]],
        "emission_L": {"kind": "cauchy", "location": 0, "scale": 1},
        "emission_H": {"kind": "gaussian", "mean": 1, "std": 1}})")),
                 std::invalid_argument);
}

TEST_F(IoTest, ReferenceSetJsonRoundTripValidatesSelfTerm) {
    const std::vector<double> errors{0.0, 0.5, 1.0, 0.25, 0.75, 0.5};
    const ReferenceSet ref = build_reference(errors, RbfKernel{0.8}, 100);
    write_json(path("ref.json"), to_json(ref));
    const ReferenceSet back = reference_from_json(read_json(path("ref.json")));
    EXPECT_EQ(back.size(), ref.size());
    EXPECT_DOUBLE_EQ(back.self_term(), ref.self_term());

    json tampered = to_json(ref);
    tampered["self_term"] = ref.self_term() + 1e-3;
    EXPECT_THROW(reference_from_json(tampered), std::invalid_argument);
}

TEST_F(IoTest, TraceAndFrontierCsvShapes) {
    const std::vector<TracePoint> trace{{10, 1, 0.5}, {20, 2, 0.75}};
    write_trace_csv(path("trace.csv"), trace);
    std::ifstream in(path("trace.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "step,block,W");
    std::getline(in, line);
    EXPECT_EQ(line, "10,1,0.5");

    const std::vector<FrontierPoint> pts{{0.5, 100, 12, 0, 0, 0}, {1.0, 900, 30, 0, 0, 0}};
    write_frontier_csv(path("frontier.csv"), pts);
    std::ifstream fin(path("frontier.csv"));
    std::getline(fin, line);
    EXPECT_EQ(line, "b,mtfa,wadd");
}

TEST_F(IoTest, AlarmJsonBothShapes) {
    RunResult alarmed;
    alarmed.alarm = Alarm{150, 1.25, 3};
    const json a = alarm_to_json(alarmed, 1000);
    EXPECT_EQ(a.at("stopping_time"), 150);
    EXPECT_EQ(a.at("block"), 3);
    EXPECT_DOUBLE_EQ(a.at("W").get<double>(), 1.25);

    RunResult censored;
    censored.steps = 1000;
    const json c = alarm_to_json(censored, 1000);
    EXPECT_EQ(c.at("censored"), 1000);
}

TEST_F(IoTest, BoundReportVacuousMarker) {
    BoundReport report;
    report.a = 0.4;
    report.d_hat = 0.2;
    const json j = to_json(report);
    EXPECT_EQ(j.at("bound"), "vacuous");
    BoundReport ok = report;
    ok.bound = 123.0;
    EXPECT_DOUBLE_EQ(to_json(ok).at("bound").get<double>(), 123.0);
}

TEST_F(IoTest, PresetRegistryParsesFromFileText) {
    // the embedded registry and the shipped file must stay in sync
    const auto& embedded = default_registry();
    const fs::path file = fs::path(__FILE__).parent_path().parent_path() / "data" / "presets.json";
    std::ifstream in(file);
    ASSERT_TRUE(in.good()) << "expected preset file at " << file;
    std::stringstream ss;
    ss << in.rdbuf();
    const PresetRegistry from_file = parse_preset_registry(ss.str());
    ASSERT_EQ(from_file.scenes.size(), embedded.scenes.size());
    for (std::size_t i = 0; i < from_file.scenes.size(); ++i) {
        EXPECT_EQ(from_file.scenes[i].name, embedded.scenes[i].name);
        EXPECT_DOUBLE_EQ(from_file.scenes[i].p, embedded.scenes[i].p);
        EXPECT_DOUBLE_EQ(from_file.scenes[i].shift_dmu_add, embedded.scenes[i].shift_dmu_add);
    }
}
