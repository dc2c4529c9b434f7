// faultsmith: staged data-generation pipeline driver.
//
// Every stage reads one TOML config, writes its artifacts plus a manifest
// into the run directory, and exits with: 0 on success, 2 on a config
// problem, 3 when an upstream artifact is missing, 4 on any other stage
// failure. Failures also emit a machine-readable JSON report on stderr.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "faultsmith/config.hpp"
#include "faultsmith/errors.hpp"
#include "faultsmith/pipeline.hpp"

namespace {

constexpr const char* kStages[] = {"ingest",   "prompt",   "generate",     "validate",  "select",
                                   "assemble", "evaluate", "characterize", "random-select"};

int exit_code_for(const faultsmith::Error& e) {
    switch (e.code()) {
        case faultsmith::ErrorCode::BadConfig:
        case faultsmith::ErrorCode::MissingFile:
        case faultsmith::ErrorCode::BadRatios:
            return 2;
        case faultsmith::ErrorCode::MissingUpstreamArtifact:
            return 3;
        default:
            return 4;
    }
}

void print_error(const std::string& code, const std::string& message) {
    std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"faultsmith - LLM data generation, validation, selection, and evaluation pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> fraction;
    std::optional<std::string> run_dir;

    std::string stage_name;
    for (const char* stage : kStages) {
        CLI::App* sub = app.add_subcommand(stage, std::string("run the ") + stage + " stage");
        sub->add_option("--config", config_path, "TOML config file")->required();
        sub->add_option("--seed", seed, "override every stage seed");
        sub->add_option("--fraction", fraction, "override selector.fraction");
        sub->add_option("--run-dir", run_dir, "override paths.run_dir");
        sub->callback([&stage_name, stage]() { stage_name = stage; });
    }

    CLI11_PARSE(app, argc, argv);

    faultsmith::RunConfig cfg;
    try {
        cfg = faultsmith::RunConfig::from_file(config_path);
        if (seed) {
            cfg.split_seed = *seed;
            cfg.prompt_seed = *seed;
            cfg.mock_seed = *seed;
            cfg.selector_seed = *seed;
            cfg.random_seed = *seed;
        }
        if (fraction) cfg.fraction = *fraction;
        if (run_dir) cfg.run_dir = *run_dir;
        cfg.validate();
    } catch (const faultsmith::Error& e) {
        print_error(faultsmith::error_code_name(e.code()), e.what());
        return 2;
    }

    try {
        faultsmith::Pipeline pipeline(cfg);
        const nlohmann::json manifest = pipeline.run_stage(stage_name);
        std::cout << stage_name << ": ok";
        if (manifest.contains("counts")) {
            for (const auto& [key, value] : manifest["counts"].items())
                std::cout << " " << key << "=" << value;
        }
        std::cout << "\n";
        return 0;
    } catch (const faultsmith::Error& e) {
        print_error(faultsmith::error_code_name(e.code()), e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        print_error("Unhandled", e.what());
        return 4;
    }
}
