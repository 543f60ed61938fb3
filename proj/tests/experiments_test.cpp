#include "geoctrl/errors.hpp"
#include "geoctrl/experiments.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace ex = geoctrl::experiments;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::path(::testing::TempDir()) / ("geoctrl_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream is(path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

json shipped(const std::string& name) {
    return json::parse(slurp(fs::path(GEOCTRL_SOURCE_DIR) / "configs" / (name + ".json")));
}

struct CliResult {
    int status;
    std::string out;
    std::string err;
};

CliResult cli(const std::string& args, const fs::path& dir) {
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string("\"") + GEOCTRL_CLI + "\" " + args + " >\"" +
                            out.string() + "\" 2>\"" + err.string() + "\"";
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

fs::path write_config(const fs::path& dir, const json& config) {
    const fs::path path = dir / "config.json";
    std::ofstream(path) << config.dump(2);
    return path;
}

}  // namespace

TEST(ParseGain, ConstantAndSinusoid) {
    EXPECT_EQ(ex::parse_gain("const(2.5)")(7.0), 2.5);
    EXPECT_EQ(ex::parse_gain(" const( -1e-3 ) ")(0.0), -1e-3);
    const auto s = ex::parse_gain("sinusoid(2, 3, 0.5)");
    EXPECT_DOUBLE_EQ(s(0.4), 2.0 * std::sin(3.0 * 0.4 + 0.5));
}

TEST(ParseGain, RejectsOtherForms) {
    for (const char* bad : {"sin(t)", "const()", "const(1, 2)", "sinusoid(1, 2)", "2.0",
                            "const(abc)", "sinusoid(1,2,3)x"}) {
        EXPECT_THROW(ex::parse_gain(bad), geoctrl::ConfigError) << bad;
    }
}

TEST(ParseConfig, Defaults) {
    const auto cfg = ex::parse_config(shipped("simulate_flat"));
    EXPECT_EQ(cfg.experiment, "simulate");
    EXPECT_EQ(cfg.model.name, "flat");
    EXPECT_EQ(cfg.integrator.dt, 0.01);
    EXPECT_EQ(cfg.output, fs::path("out/simulate_flat"));
}

TEST(ParseConfig, RejectsMalformedFields) {
    const json base = shipped("simulate_flat");
    auto with = [&](const std::string& pointer, const json& value) {
        json c = base;
        c[json::json_pointer(pointer)] = value;
        return c;
    };
    EXPECT_THROW(ex::parse_config(with("/experiment", "fly")), geoctrl::ConfigError);
    EXPECT_THROW(ex::parse_config(with("/experiment", 3)), geoctrl::ConfigError);
    EXPECT_THROW(ex::parse_config(with("/integrator/dt", -0.1)), geoctrl::ConfigError);
    EXPECT_THROW(ex::parse_config(with("/integrator/method", "euler")), geoctrl::ConfigError);
    EXPECT_THROW(ex::parse_config(with("/model/actuators", json::array({1.5}))),
                 geoctrl::ConfigError);
    EXPECT_THROW(ex::parse_config(with("/typo", 1)), geoctrl::ConfigError);
    json no_model = base;
    no_model.erase("model");
    EXPECT_THROW(ex::parse_config(no_model), geoctrl::ConfigError);
}

TEST(Prepare, RejectsInvalidExperimentParameters) {
    auto expect_config_error = [](json c) {
        EXPECT_THROW(ex::prepare(ex::parse_config(c)), geoctrl::ConfigError) << c.dump();
    };
    json c = shipped("convergence_pvtol");
    c["parameters"]["gains"]["z"] = json::array({"const(0)"});
    expect_config_error(c);
    c = shipped("convergence_pvtol");
    c["parameters"]["gains"]["pairs"] = {{"1,3", "const(1)"}};
    expect_config_error(c);
    c = shipped("convergence_pvtol");
    c["parameters"]["gains"]["pairs"] = {{"2,1", "const(1)"}, {"1,2", "const(2)"}};
    expect_config_error(c);
    c = shipped("convergence_pvtol");
    c["parameters"]["epsilons"] = json::array({0.1, -0.05});
    expect_config_error(c);
    c = shipped("convergence_pvtol");
    c["model"]["actuators"] = json::array({1, 3});
    expect_config_error(c);
    c = shipped("series_planar_body");
    c["model"] = {{"name", "blimp"}};
    expect_config_error(c);
    c = shipped("simulate_flat");
    c["parameters"]["horizon"] = 0.015;  // not a multiple of dt
    expect_config_error(c);
    c = shipped("decoupling_3r");
    c["parameters"]["plan"]["segments"][0]["profile"] = "quintic";
    expect_config_error(c);
    c = shipped("simulate_flat");
    c["model"]["name"] = "snakeboard";
    EXPECT_THROW(ex::prepare(ex::parse_config(c)), geoctrl::UnknownModelError);
}

TEST(Prepare, ShippedConfigsAreValid) {
    for (const auto& entry : fs::directory_iterator(fs::path(GEOCTRL_SOURCE_DIR) / "configs")) {
        SCOPED_TRACE(entry.path().string());
        EXPECT_NO_THROW(ex::prepare(ex::load_config(entry.path())));
    }
}

TEST(Run, SimulateFlatZeroInputIsStationary) {
    const fs::path dir = scratch("simulate_flat");
    const auto result = ex::run(ex::parse_config(shipped("simulate_flat")), dir);
    std::istringstream csv(slurp(dir / "trajectory.csv"));
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "t,q1,q2,qd1,qd2,u1");
    int rows = 0;
    while (std::getline(csv, line)) {
        EXPECT_EQ(line.substr(line.find(',')), ",0,0,0,0,0");
        ++rows;
    }
    EXPECT_EQ(rows, 101);
    const json manifest = json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest["config"], shipped("simulate_flat"));
    EXPECT_EQ(manifest["version"], ex::version);
    EXPECT_TRUE(manifest.contains("wall_time_seconds"));
    EXPECT_EQ(result.files.back(), "manifest.json");
}

TEST(Run, DecouplingOnThreeLinkReportsTwoFields) {
    const fs::path dir = scratch("decoupling");
    const auto result = ex::run(ex::parse_config(shipped("decoupling_3r")), dir);
    EXPECT_TRUE(result.report["verdict"].get<bool>());
    ASSERT_EQ(result.report["fields"].size(), 2u);
    for (const auto& f : result.report["fields"]) {
        EXPECT_LT(f["residual"].get<double>(), 1e-8);
    }
    EXPECT_LT(result.report["plan"]["max_residual"].get<double>(), 1e-6);
    EXPECT_TRUE(fs::exists(dir / "plan.csv"));
}

TEST(Run, ConvergenceOnPvtolHasFirstOrderSlope) {
    const fs::path dir = scratch("convergence");
    const auto result = ex::run(ex::parse_config(shipped("convergence_pvtol")), dir);
    const double slope = result.report["slope"].get<double>();
    EXPECT_GE(slope, 0.7);
    EXPECT_LE(slope, 1.3);
    EXPECT_TRUE(result.report["monotone"].get<bool>());
    EXPECT_EQ(slurp(dir / "convergence.csv").substr(0, 30), "epsilon,max_err,slope_partial\n");
}

TEST(Run, SeriesCheckSlopesMatchOrders) {
    const fs::path dir = scratch("series");
    const auto result = ex::run(ex::parse_config(shipped("series_planar_body")), dir);
    for (const auto& s : result.report["studies"]) {
        EXPECT_NEAR(s["slope"].get<double>(), s["order"].get<int>() + 1.0, 0.3);
    }
}

TEST(Run, IdenticalConfigsGiveIdenticalData) {
    for (const char* name : {"simulate_3r", "convergence_pvtol", "tracking_blimp"}) {
        SCOPED_TRACE(name);
        const auto cfg = ex::parse_config(shipped(name));
        const fs::path a = scratch(std::string(name) + "_a");
        const fs::path b = scratch(std::string(name) + "_b");
        const auto ra = ex::run(cfg, a);
        ex::run(cfg, b);
        for (const auto& file : ra.files) {
            if (file != "manifest.json") {
                EXPECT_EQ(slurp(a / file), slurp(b / file)) << file;
            }
        }
    }
}

TEST(Cli, ExitCodesAndErrorObjects) {
    const fs::path dir = scratch("cli");
    const fs::path out = dir / "run";

    json good = shipped("simulate_flat");
    auto r = cli("run \"" + write_config(dir, good).string() + "\" --out \"" + out.string() + "\"",
                 dir);
    EXPECT_EQ(r.status, 0);
    EXPECT_EQ(json::parse(r.out)["status"], "ok");
    EXPECT_TRUE(fs::exists(out / "trajectory.csv"));

    json bad = good;
    bad["parameters"]["inputs"] = json::array({"sin(t)"});
    r = cli("run \"" + write_config(dir, bad).string() + "\"", dir);
    EXPECT_EQ(r.status, 2);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "config");

    std::ofstream(dir / "broken.json") << "{\"experiment\": ";
    r = cli("validate \"" + (dir / "broken.json").string() + "\"", dir);
    EXPECT_EQ(r.status, 2);
    EXPECT_EQ(json::parse(r.err)["error"]["exit_code"], 2);

    // The three-link arm violates the span assumption: numerical failure.
    json span = shipped("tracking_blimp");
    span["model"] = {{"name", "3r"}, {"actuators", {1, 2}}};
    r = cli("run \"" + write_config(dir, span).string() + "\" --out \"" + out.string() + "\"",
            dir);
    EXPECT_EQ(r.status, 3);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "assumption-violation");

    r = cli("frobnicate", dir);
    EXPECT_EQ(r.status, 2);
    EXPECT_TRUE(json::parse(r.err).contains("error"));

    r = cli("list-models", dir);
    EXPECT_EQ(r.status, 0);
    EXPECT_EQ(json::parse(r.out).size(), 5u);

    r = cli("validate \"" + write_config(dir, good).string() + "\"", dir);
    EXPECT_EQ(r.status, 0);
    EXPECT_TRUE(json::parse(r.out)["valid"].get<bool>());
}

TEST(WorkerThreads, ReadsEnvironment) {
    setenv("GEOCTRL_THREADS", "3", 1);
    EXPECT_EQ(ex::worker_threads(), 3);
    setenv("GEOCTRL_THREADS", "zero", 1);
    EXPECT_GE(ex::worker_threads(), 1);
    unsetenv("GEOCTRL_THREADS");
}
