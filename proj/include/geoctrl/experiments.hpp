#pragma once

#include "geoctrl/dynamics.hpp"
#include "geoctrl/models.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace geoctrl::experiments {

inline constexpr const char* version = "0.1.0";

/// Exit statuses of the command-line front end.
enum ExitCode { exit_ok = 0, exit_config = 2, exit_numerical = 3 };

/// `const(c)` or `sinusoid(A, omega, phi)` = A sin(omega t + phi).
/// Throws ConfigError for anything else.
std::function<double(double)> parse_gain(const std::string& spec);

const std::vector<std::string>& experiment_names();

struct ExperimentConfig {
    std::string experiment;
    models::ModelDescriptor model;
    IntegratorConfig integrator;
    nlohmann::json parameters = nlohmann::json::object();
    std::filesystem::path output = "out";
    nlohmann::json source;  ///< config as read
};

/// Throws ConfigError on malformed or out-of-range fields.
ExperimentConfig parse_config(const nlohmann::json& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// A fully checked experiment, ready to execute.
struct PreparedExperiment {
    /// Writes the artifacts into the directory and returns the report.
    std::function<nlohmann::json(const std::filesystem::path&)> execute;
    /// Artifact file names the experiment writes (besides the manifest).
    std::vector<std::string> artifacts;
};

/// Builds the model and parses every experiment parameter. Throws
/// ConfigError, or the model errors for a bad descriptor.
PreparedExperiment prepare(const ExperimentConfig& config);

struct RunResult {
    std::filesystem::path directory;
    std::vector<std::string> files;
    nlohmann::json report;
};

/// Runs the experiment into `directory` and writes `report.json` and
/// `manifest.json` next to the artifacts.
RunResult run(const ExperimentConfig& config, const std::filesystem::path& directory);

/// Worker threads for parallel sweeps: GEOCTRL_THREADS when set to a
/// positive integer, otherwise the available hardware parallelism.
int worker_threads();

/// Catalog as JSON (name, summary, dof, inputs, parameters).
nlohmann::json model_catalog();

/// {"error": {"kind", "message", "exit_code"}}
nlohmann::json error_report(const std::string& kind, const std::string& message, int exit_code);

}  // namespace geoctrl::experiments
