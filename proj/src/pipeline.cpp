#include "genflow/pipeline.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <sstream>

#include "genflow/imaging.hpp"
#include "genflow/util.hpp"

namespace genflow::cli {

namespace fs = std::filesystem;
using imaging::Image;
using metrics::MetricKind;
using ratequality::SamplePoint;
using ratequality::Scheme;
using ratequality::Strategy;

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

fs::path dataset_dir(const fs::path& out) { return out / "dataset"; }
fs::path manifest_path(const fs::path& out) { return dataset_dir(out) / "manifest.json"; }
fs::path samples_path(const fs::path& out) { return out / "samples.csv"; }
fs::path curves_dir(const fs::path& out) { return out / "curves"; }
fs::path results_dir(const fs::path& out) { return out / "results"; }

namespace {

std::string strategy_slug(Strategy s) {
    switch (s) {
        case Strategy::PE: return "pe";
        case Strategy::PSLow: return "ps-low";
        case Strategy::PSMed: return "ps-med";
        case Strategy::PSHigh: return "ps-high";
    }
    return "unknown";
}

}  // namespace

fs::path curve_path(const fs::path& out, Scheme scheme, Strategy strategy, MetricKind metric) {
    return curves_dir(out) / ("curve_" + ratequality::scheme_name(scheme) + "_" + strategy_slug(strategy) +
                              "_" + metrics::metric_name(metric) + ".json");
}

// ===========================================================================
// Configuration
// ===========================================================================

PipelineConfig config_from_json(const nlohmann::json& j, const fs::path& base_dir) {
    PipelineConfig config;
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        config.dataset.count = d.value("count", config.dataset.count);
        config.dataset.width = d.value("width", config.dataset.width);
        config.dataset.height = d.value("height", config.dataset.height);
        config.dataset.seed = d.value("seed", config.dataset.seed);
    }
    if (j.contains("jpeg_qualities")) config.jpeg_qualities = j.at("jpeg_qualities").get<std::vector<int>>();
    if (j.contains("gamma_grid")) config.gamma_grid = j.at("gamma_grid").get<std::vector<double>>();
    if (j.contains("metrics")) config.metrics = j.at("metrics").get<std::vector<std::string>>();
    config.gen_seed = j.value("gen_seed", config.gen_seed);
    config.swap_seed = j.value("swap_seed", config.swap_seed);
    if (j.contains("scenarios"))
        for (const auto& s : j.at("scenarios")) {
            fs::path p = s.get<std::string>();
            config.scenario_files.push_back(p.is_absolute() ? p : base_dir / p);
        }

    if (config.jpeg_qualities.size() != 3)
        throw std::invalid_argument("config: jpeg_qualities must list exactly 3 quality settings");
    for (int q : config.jpeg_qualities)
        if (q < 1 || q > 100) throw std::invalid_argument("config: jpeg quality out of [1,100]");
    if (config.gamma_grid.empty() || config.gamma_grid.front() != 0.0)
        throw std::invalid_argument("config: gamma_grid must start at 0");
    for (const auto& m : config.metrics) metrics::metric_from_name(m);  // validates

    // Canonical form: defaults applied, scenario paths as given (location
    // independent), keys sorted by nlohmann's object ordering.
    config.canonical = nlohmann::json{
        {"dataset",
         {{"count", config.dataset.count},
          {"width", config.dataset.width},
          {"height", config.dataset.height},
          {"seed", config.dataset.seed}}},
        {"jpeg_qualities", config.jpeg_qualities},
        {"gamma_grid", config.gamma_grid},
        {"metrics", config.metrics},
        {"gen_seed", config.gen_seed},
        {"swap_seed", config.swap_seed},
        {"scenarios", j.contains("scenarios") ? j.at("scenarios") : nlohmann::json::array()}};
    return config;
}

PipelineConfig load_config(const fs::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("config " + path.string() + ": " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

std::uint64_t config_hash(const PipelineConfig& config) { return fnv1a64(config.canonical.dump()); }

namespace {

std::string artifact_comment(const PipelineConfig& config) {
    return std::string(kToolName) + " " + kToolVersion + " config=" + hex64(config_hash(config)) +
           " fx=" + metrics::kFeatureExtractorVersion;
}

}  // namespace

// ===========================================================================
// gen-dataset
// ===========================================================================

int cmd_gen_dataset(const PipelineConfig& config, const CommandContext& ctx) {
    const auto& spec = config.dataset;
    const std::vector<Image> images =
        imaging::generate_dataset(spec.count, spec.width, spec.height, spec.seed);

    const fs::path dir = dataset_dir(ctx.out_dir);
    fs::create_directories(dir);

    nlohmann::json files = nlohmann::json::array();
    std::string combined;
    for (std::size_t i = 0; i < images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "img_%04zu.ppm", i);
        imaging::write_pnm(images[i], dir / name);
        const std::string bytes = read_text_file(dir / name);
        const std::string hash = hex64(fnv1a64(bytes));
        files.push_back({{"name", name}, {"hash", hash}});
        combined += hash;
    }

    nlohmann::json manifest{{"tool_version", kToolVersion},
                            {"config_hash", hex64(config_hash(config))},
                            {"count", spec.count},
                            {"width", spec.width},
                            {"height", spec.height},
                            {"channels", images.front().channels},
                            {"seed", spec.seed},
                            {"dataset_hash", hex64(fnv1a64(combined))},
                            {"files", files}};
    write_text_file(manifest_path(ctx.out_dir), manifest.dump(2) + "\n");
    return 0;
}

// ===========================================================================
// measure
// ===========================================================================

namespace {

std::vector<Image> load_dataset(const fs::path& out_dir) {
    const fs::path mpath = manifest_path(out_dir);
    if (!fs::exists(mpath)) throw std::runtime_error("dataset manifest missing: " + mpath.string() +
                                                     " (run gen-dataset first)");
    const nlohmann::json manifest = nlohmann::json::parse(read_text_file(mpath));
    std::vector<Image> images;
    for (const auto& f : manifest.at("files"))
        images.push_back(imaging::read_pnm(dataset_dir(out_dir) / f.at("name").get<std::string>()));
    if (images.empty()) throw std::runtime_error("dataset manifest lists no files");
    return images;
}

ratequality::MeasureConfig measure_config(const PipelineConfig& config, unsigned jobs) {
    ratequality::MeasureConfig mc;
    mc.jpeg_qualities = config.jpeg_qualities;
    mc.gamma_grid = config.gamma_grid;
    mc.gen_seed = config.gen_seed;
    mc.swap_seed = config.swap_seed;
    mc.jobs = jobs;
    return mc;
}

}  // namespace

int cmd_measure(const PipelineConfig& config, const CommandContext& ctx) {
    const ratequality::DatasetContext dctx = ratequality::DatasetContext::build(load_dataset(ctx.out_dir), ctx.jobs);
    const ratequality::MeasureConfig mc = measure_config(config, ctx.jobs);

    std::vector<SamplePoint> all;
    for (const std::string& metric_name : config.metrics) {
        const MetricKind metric = metrics::metric_from_name(metric_name);
        for (Scheme scheme : {Scheme::GenAI, Scheme::Jpeg}) {
            const auto pe = ratequality::measure_pe_points(dctx, scheme, metric, mc);
            all.insert(all.end(), pe.begin(), pe.end());
            for (int op = 0; op < 3; ++op) {
                const auto ps = ratequality::measure_ps_points(dctx, scheme, op, metric, mc);
                all.insert(all.end(), ps.begin(), ps.end());
            }
        }
    }
    write_text_file(samples_path(ctx.out_dir), ratequality::samples_to_csv(all, artifact_comment(config)));
    return 0;
}

// ===========================================================================
// fit
// ===========================================================================

int cmd_fit(const PipelineConfig& config, const CommandContext& ctx) {
    const fs::path spath = samples_path(ctx.out_dir);
    if (!fs::exists(spath)) throw std::runtime_error("sample CSV missing: " + spath.string() + " (run measure first)");
    const std::string csv_text = read_text_file(spath);
    const std::string samples_hash = hex64(fnv1a64(csv_text));
    const std::vector<SamplePoint> samples = ratequality::samples_from_csv(csv_text);

    const nlohmann::json manifest = nlohmann::json::parse(read_text_file(manifest_path(ctx.out_dir)));
    const double true_bpp = imaging::raw_bpp(manifest.at("channels").get<int>());

    std::map<std::tuple<Scheme, Strategy, MetricKind>, std::vector<SamplePoint>> groups;
    for (const SamplePoint& s : samples) groups[{s.scheme, s.strategy, s.metric}].push_back(s);

    auto group_of = [&](Scheme scheme, Strategy strategy, MetricKind metric) -> const std::vector<SamplePoint>& {
        const auto it = groups.find({scheme, strategy, metric});
        if (it == groups.end())
            throw std::runtime_error("sample CSV has no rows for " + ratequality::scheme_name(scheme) + "/" +
                                     ratequality::strategy_name(strategy) + "/" + metrics::metric_name(metric));
        return it->second;
    };

    const std::array<ratequality::CurveFamily, 5> ps_candidates = {
        ratequality::CurveFamily{ratequality::FamilyKind::ExponentialDecay, 3},
        ratequality::CurveFamily{ratequality::FamilyKind::PowerLaw, 3},
        ratequality::CurveFamily{ratequality::FamilyKind::Polynomial, 1},
        ratequality::CurveFamily{ratequality::FamilyKind::Polynomial, 2},
        ratequality::CurveFamily{ratequality::FamilyKind::Polynomial, 3}};

    auto write_curve = [&](const ratequality::RateQualityCurve& curve, Scheme scheme, Strategy strategy) {
        const nlohmann::json j = ratequality::curve_to_json(curve, scheme, strategy, samples_hash);
        write_text_file(curve_path(ctx.out_dir, scheme, strategy, curve.metric), j.dump(2) + "\n");
    };

    for (const std::string& metric_name : config.metrics) {
        const MetricKind metric = metrics::metric_from_name(metric_name);

        // PE first: the perception normalization constant comes from the
        // genai PE fit and is shared by every other perception curve.
        std::optional<double> fid_max;
        {
            const auto& pts = group_of(Scheme::GenAI, Strategy::PE, metric);
            const ratequality::PeCurve pe = ratequality::build_pe_curve(pts, true_bpp, metric);
            if (metric == MetricKind::Perception) fid_max = pe.fid_max;
            write_curve(pe.curve, Scheme::GenAI, Strategy::PE);
        }
        {
            const auto& pts = group_of(Scheme::Jpeg, Strategy::PE, metric);
            const ratequality::PeCurve pe = ratequality::build_pe_curve(pts, true_bpp, metric, fid_max);
            write_curve(pe.curve, Scheme::Jpeg, Strategy::PE);
        }

        for (Scheme scheme : {Scheme::GenAI, Scheme::Jpeg}) {
            for (Strategy strategy : {Strategy::PSLow, Strategy::PSMed, Strategy::PSHigh}) {
                const auto& pts = group_of(scheme, strategy, metric);
                const ratequality::RateQualityCurve curve = ratequality::fit_ps_from_samples(
                    pts, true_bpp, metric, metric == MetricKind::Perception ? fid_max : std::nullopt,
                    ps_candidates);
                write_curve(curve, scheme, strategy);
            }
        }
    }
    return 0;
}

// ===========================================================================
// optimize / sweep
// ===========================================================================

LoadedScenario load_scenario(const fs::path& scenario_file, const fs::path& out_dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(scenario_file));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("scenario " + scenario_file.string() + ": " + e.what());
    }

    flowgraph::NetworkTopology topology = flowgraph::topology_from_json(j.at("topology"));
    const std::string g = j.at("g").get<std::string>();

    // An explicit scenario f_min overrides the node role.
    if (j.contains("f_min")) {
        std::vector<flowgraph::Node> nodes = topology.nodes();
        for (auto& n : nodes)
            if (n.id == g) n.role.f_min = j.at("f_min").get<double>();
        topology = flowgraph::NetworkTopology(std::move(nodes), topology.edges());
    }

    fs::path curve_file = j.at("curve_file").get<std::string>();
    if (!curve_file.is_absolute()) curve_file = out_dir / curve_file;
    const ratequality::RateQualityCurve curve =
        ratequality::curve_from_json(nlohmann::json::parse(read_text_file(curve_file)));

    const MetricKind metric = metrics::metric_from_name(j.at("metric").get<std::string>());
    if (metric != curve.metric)
        throw std::runtime_error("scenario " + scenario_file.string() + ": metric does not match curve file");

    flowopt::GenScenario scenario(std::move(topology), g, j.at("L").get<double>(), metric, curve);
    scenario.name = j.value("name", scenario_file.stem().string());
    scenario.w = j.value("w", 0.0);
    if (j.contains("lp_min")) scenario.lp_min = j.at("lp_min").get<double>();
    if (j.contains("lp_max") && !j.at("lp_max").is_null()) scenario.lp_max = j.at("lp_max").get<double>();

    LoadedScenario loaded{std::move(scenario), {}};
    if (j.contains("w_values")) loaded.w_values = j.at("w_values").get<std::vector<double>>();
    return loaded;
}

namespace {

std::string scenario_comment(const flowopt::GenScenario& scenario) {
    return std::string(kToolName) + " " + kToolVersion + " scenario=" + scenario.name +
           " metric=" + metrics::metric_name(scenario.metric);
}

void print_result(std::ostream& out, const flowopt::OptimizationResult& r) {
    if (!r.feasible) {
        out << "w=" << format_double(r.w) << " infeasible\n";
        return;
    }
    out << "w=" << format_double(r.w) << " L_p*=" << format_double(r.lp_star)
        << " lambda*=" << format_double(r.lambda_star) << " y_g=" << format_double(r.y_g)
        << " G_flow=" << format_double(r.g_flow) << " objective=" << format_double(r.objective) << "\n";
}

}  // namespace

int cmd_optimize(const fs::path& scenario_file, const CommandContext& ctx, std::ostream& out) {
    const LoadedScenario loaded = load_scenario(scenario_file, ctx.out_dir);
    const flowopt::OptimizationResult result = flowopt::optimize_prompt_size(loaded.scenario);
    const std::array<flowopt::OptimizationResult, 1> rows = {result};
    write_text_file(results_dir(ctx.out_dir) / (loaded.scenario.name + ".csv"),
                    flowopt::results_to_csv(rows, scenario_comment(loaded.scenario)));
    print_result(out, result);
    return result.feasible ? 0 : 1;
}

int cmd_sweep(const fs::path& scenario_file, std::span<const double> w_override, const CommandContext& ctx,
              std::ostream& out) {
    const LoadedScenario loaded = load_scenario(scenario_file, ctx.out_dir);
    std::vector<double> w_values(w_override.begin(), w_override.end());
    if (w_values.empty()) w_values = loaded.w_values;
    if (w_values.empty())
        throw std::runtime_error("scenario " + scenario_file.string() +
                                 " has no w_values and no --w override was given");

    const std::vector<flowopt::OptimizationResult> results = flowopt::sweep_w(loaded.scenario, w_values);
    write_text_file(results_dir(ctx.out_dir) / (loaded.scenario.name + ".csv"),
                    flowopt::results_to_csv(results, scenario_comment(loaded.scenario)));
    bool any_infeasible = false;
    for (const auto& r : results) {
        print_result(out, r);
        any_infeasible = any_infeasible || !r.feasible;
    }
    return any_infeasible ? 1 : 0;
}

// ===========================================================================
// maxflow
// ===========================================================================

int cmd_maxflow(const fs::path& topology_file, std::ostream& out) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(topology_file));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("topology " + topology_file.string() + ": " + e.what());
    }
    const flowgraph::NetworkTopology topology = flowgraph::topology_from_json(j);
    const std::string s = topology.source_id();
    const std::string d = topology.sink_id();

    const flowgraph::MaxFlowResult flow = flowgraph::max_flow(topology, s, d);
    const flowgraph::CutResult cut = flowgraph::min_cut(topology, s, d);

    out << "max-flow " << s << "->" << d << ": " << format_double(flow.value) << " bpp\n";
    out << "min-cut value: " << format_double(cut.value) << " bpp\n";
    out << "cut edges:";
    for (std::size_t e : cut.cut_edges) {
        const auto& edge = topology.edges()[e];
        out << " " << edge.from << "->" << edge.to << "(" << format_double(edge.capacity) << ")";
    }
    out << "\nsource side:";
    for (const auto& id : cut.source_side) out << " " << id;
    out << "\nnode divergences:\n";
    const flowgraph::FlowValidation validation = flowgraph::validate_flow(topology, flow.flow);
    for (const auto& n : validation.nodes) {
        out << "  " << n.id << " [" << flowgraph::role_name(n.role) << "] y=" << format_double(n.divergence);
        if (!n.ok) out << "  VIOLATION: " << n.note;
        out << "\n";
    }
    for (const auto& v : validation.edge_violations) out << "  edge violation: " << v.note << "\n";
    return validation.ok() ? 0 : 1;
}

// ===========================================================================
// pipeline
// ===========================================================================

int cmd_pipeline(const PipelineConfig& config, const CommandContext& ctx, std::ostream& out) {
    int status = 0;
    out << "[pipeline] gen-dataset\n";
    status = std::max(status, cmd_gen_dataset(config, ctx));
    out << "[pipeline] measure\n";
    status = std::max(status, cmd_measure(config, ctx));
    out << "[pipeline] fit\n";
    status = std::max(status, cmd_fit(config, ctx));
    for (const fs::path& scenario : config.scenario_files) {
        out << "[pipeline] sweep " << scenario.filename().string() << "\n";
        status = std::max(status, cmd_sweep(scenario, {}, ctx, out));
    }
    return status;
}

}  // namespace genflow::cli
