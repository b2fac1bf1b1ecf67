#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "genflow/pipeline.hpp"
#include "genflow/util.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    unsigned jobs = 1;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

genflow::cli::PipelineConfig resolve_config(const CommonArgs& args) {
    genflow::cli::PipelineConfig config = args.config_path.empty()
                                              ? genflow::cli::config_from_json(nlohmann::json::object(), ".")
                                              : genflow::cli::load_config(args.config_path);
    if (args.seed_set) {
        config.dataset.seed = args.seed;
        config.canonical["dataset"]["seed"] = args.seed;
    }
    return config;
}

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config) {
    auto* opt = cmd->add_option("--config", args.config_path, "pipeline config JSON");
    if (needs_config) opt->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "artifact directory");
    cmd->add_option("--jobs", args.jobs, "worker threads for measurement")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", args.seed, "override dataset seed")->each([&](const std::string&) {
        args.seed_set = true;
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generative network layer flow analysis toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string scenario_path, topology_path, w_list;

    CLI::App* gen = app.add_subcommand("gen-dataset", "generate the procedural image dataset");
    add_common(gen, args, false);
    CLI::App* measure = app.add_subcommand("measure", "measure rate-quality sample points");
    add_common(measure, args, false);
    CLI::App* fit = app.add_subcommand("fit", "fit rate-quality curves from measured samples");
    add_common(fit, args, false);

    CLI::App* optimize = app.add_subcommand("optimize", "solve the prompt-size optimization for a scenario");
    optimize->add_option("scenario", scenario_path, "scenario JSON")->required()->check(CLI::ExistingFile);
    add_common(optimize, args, false);

    CLI::App* sweep = app.add_subcommand("sweep", "run the optimization across quality weights");
    sweep->add_option("scenario", scenario_path, "scenario JSON")->required()->check(CLI::ExistingFile);
    sweep->add_option("--w", w_list, "comma-separated quality weights (overrides the scenario's list)");
    add_common(sweep, args, false);

    CLI::App* maxflow = app.add_subcommand("maxflow", "max-flow / min-cut report for a topology file");
    maxflow->add_option("topology", topology_path, "topology JSON")->required()->check(CLI::ExistingFile);

    CLI::App* pipeline = app.add_subcommand("pipeline", "gen-dataset + measure + fit + sweeps in one run");
    add_common(pipeline, args, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 2;
    }

    try {
        const genflow::cli::CommandContext ctx{args.out_dir, args.jobs};
        if (gen->parsed()) return genflow::cli::cmd_gen_dataset(resolve_config(args), ctx);
        if (measure->parsed()) return genflow::cli::cmd_measure(resolve_config(args), ctx);
        if (fit->parsed()) return genflow::cli::cmd_fit(resolve_config(args), ctx);
        if (optimize->parsed()) return genflow::cli::cmd_optimize(scenario_path, ctx, std::cout);
        if (sweep->parsed()) {
            std::vector<double> w_values;
            if (!w_list.empty()) {
                std::size_t start = 0;
                while (start <= w_list.size()) {
                    const std::size_t comma = w_list.find(',', start);
                    const std::string field =
                        w_list.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
                    if (!field.empty()) w_values.push_back(std::stod(field));
                    if (comma == std::string::npos) break;
                    start = comma + 1;
                }
            }
            return genflow::cli::cmd_sweep(scenario_path, w_values, ctx, std::cout);
        }
        if (maxflow->parsed()) return genflow::cli::cmd_maxflow(topology_path, std::cout);
        if (pipeline->parsed()) return genflow::cli::cmd_pipeline(resolve_config(args), ctx, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
