#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "genflow/flowopt.hpp"
#include "genflow/ratequality.hpp"

namespace genflow::cli {

struct DatasetSpec {
    int count = 256;
    int width = 64;
    int height = 64;
    std::uint64_t seed = 42;
};

struct PipelineConfig {
    DatasetSpec dataset;
    std::vector<int> jpeg_qualities{8, 30, 70};
    std::vector<double> gamma_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::vector<std::string> metrics{"distortion", "perception"};
    std::uint64_t gen_seed = 1001;
    std::uint64_t swap_seed = 2002;
    std::vector<std::filesystem::path> scenario_files;  // resolved absolute
    nlohmann::json canonical;                           // normalized config for hashing
};

PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
PipelineConfig load_config(const std::filesystem::path& path);
std::uint64_t config_hash(const PipelineConfig& config);

struct CommandContext {
    std::filesystem::path out_dir;
    unsigned jobs = 1;
};

// Scenario file + the curve it references (curve paths resolve against the
// artifact directory).
struct LoadedScenario {
    flowopt::GenScenario scenario;
    std::vector<double> w_values;  // sweep grid bundled with the scenario
};

LoadedScenario load_scenario(const std::filesystem::path& scenario_file, const std::filesystem::path& out_dir);

// Commands return process exit codes: 0 ok, 1 infeasible/violations. Usage
// and I/O problems throw (the CLI maps exceptions to exit code 2).
int cmd_gen_dataset(const PipelineConfig& config, const CommandContext& ctx);
int cmd_measure(const PipelineConfig& config, const CommandContext& ctx);
int cmd_fit(const PipelineConfig& config, const CommandContext& ctx);
int cmd_optimize(const std::filesystem::path& scenario_file, const CommandContext& ctx, std::ostream& out);
int cmd_sweep(const std::filesystem::path& scenario_file, std::span<const double> w_override,
              const CommandContext& ctx, std::ostream& out);
int cmd_maxflow(const std::filesystem::path& topology_file, std::ostream& out);
int cmd_pipeline(const PipelineConfig& config, const CommandContext& ctx, std::ostream& out);

// Artifact layout under the output directory.
std::filesystem::path dataset_dir(const std::filesystem::path& out);
std::filesystem::path manifest_path(const std::filesystem::path& out);
std::filesystem::path samples_path(const std::filesystem::path& out);
std::filesystem::path curves_dir(const std::filesystem::path& out);
std::filesystem::path results_dir(const std::filesystem::path& out);
std::filesystem::path curve_path(const std::filesystem::path& out, ratequality::Scheme scheme,
                                 ratequality::Strategy strategy, metrics::MetricKind metric);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace genflow::cli
