// Command-line front end: run experiments from JSON configs.

#include "geoctrl/errors.hpp"
#include "geoctrl/experiments.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace ex = geoctrl::experiments;
using nlohmann::json;

namespace {

int fail(const std::string& kind, const std::string& message, int code) {
    std::cerr << ex::error_report(kind, message, code).dump() << "\n";
    return code;
}

template <class F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const geoctrl::ConfigError& e) {
        return fail(e.kind(), e.what(), ex::exit_config);
    } catch (const geoctrl::UnknownModelError& e) {
        return fail(e.kind(), e.what(), ex::exit_config);
    } catch (const geoctrl::Error& e) {
        return fail(e.kind(), e.what(), ex::exit_numerical);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), ex::exit_numerical);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Geometric control experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    auto* run = app.add_subcommand("run", "run the experiment described by a config file");
    run->add_option("config", config_path, "JSON config")->required();
    run->add_option("--out", out_dir, "output directory (overrides the config)");

    app.add_subcommand("list-models", "print the model catalog as JSON");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "check a config without running it");
    validate->add_option("config", validate_path, "JSON config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), ex::exit_config);
    }

    if (app.got_subcommand("list-models")) {
        std::cout << ex::model_catalog().dump(2) << "\n";
        return ex::exit_ok;
    }
    if (app.got_subcommand("validate")) {
        return guarded([&] {
            const auto cfg = ex::load_config(validate_path);
            const auto prepared = ex::prepare(cfg);
            std::cout << json{{"valid", true},
                              {"experiment", cfg.experiment},
                              {"artifacts", prepared.artifacts}}
                             .dump()
                      << "\n";
            return ex::exit_ok;
        });
    }
    return guarded([&] {
        const auto cfg = ex::load_config(config_path);
        const auto dir = out_dir.empty() ? cfg.output : std::filesystem::path(out_dir);
        const auto result = ex::run(cfg, dir);
        std::cout << json{{"status", "ok"},
                          {"experiment", cfg.experiment},
                          {"output", result.directory.string()},
                          {"files", result.files}}
                         .dump()
                  << "\n";
        return ex::exit_ok;
    });
}
