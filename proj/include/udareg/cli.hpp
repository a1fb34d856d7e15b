#pragma once

// Config-driven experiment runner behind the `udareg` executable.

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "udareg/data.hpp"
#include "udareg/mds.hpp"
#include "udareg/trainer.hpp"

namespace udareg {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitConfig = 2,
    kExitData = 3,
    kExitTraining = 4,
    kExitMds = 5,
    kExitInternal = 6,
};

struct DataSettings {
    std::optional<SyntheticConfig> synthetic;    // exactly one of synthetic / files
    std::vector<std::filesystem::path> files;  // embedding files, rows of either domain
    double train_fraction = 0.8;
    std::uint64_t split_seed = 0;
};

struct MdsSettings {
    std::vector<std::filesystem::path> checkpoints;
    std::vector<std::string> anchors;  // "id" or "id:age"
    Domain domain = Domain::Target;
    std::size_t max_items = 100;
    SmacofOptions smacof;
};

struct ExperimentConfig {
    DataSettings data;
    TrainConfig train;
    GridAxes grid;
    MdsSettings mds;
    std::filesystem::path output_dir = "out";
    std::size_t jobs = 1;

    void validate() const;
};

// Strict JSON reader: unknown keys and mistyped values throw ConfigError.
// Relative paths are resolved against `base_dir`.
ExperimentConfig parse_experiment_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct LoadedData {
    std::vector<Example> source;
    std::vector<Example> target;
};
LoadedData load_data(const DataSettings& settings);

void cmd_generate(const ExperimentConfig& config, std::ostream& out);
void cmd_train(const ExperimentConfig& config, std::ostream& out);
void cmd_grid(const ExperimentConfig& config, std::ostream& out);
void cmd_mds(const ExperimentConfig& config, std::ostream& out);

int exit_code_for(const std::exception& e);

int run_cli(int argc, char** argv);
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace udareg
