#pragma once

#include <span>
#include <string>
#include <vector>

#include "genflow/flowgraph.hpp"
#include "genflow/ratequality.hpp"

namespace genflow::flowopt {

using metrics::MetricKind;
using ratequality::RateQualityCurve;

// Everything the optimizer needs for one run. The topology must contain a
// direct s->g edge and a direct g->d edge (multi-hop paths are modeled as
// single edges); f_min comes from the generative node's role.
struct GenScenario {
    GenScenario(flowgraph::NetworkTopology topology_, std::string g_, double content_bpp_,
                MetricKind metric_, RateQualityCurve curve_)
        : topology(std::move(topology_)),
          g(std::move(g_)),
          content_bpp(content_bpp_),
          metric(metric_),
          curve(std::move(curve_)) {}

    std::string name = "scenario";
    flowgraph::NetworkTopology topology;
    std::string g;           // generative node id
    double content_bpp = 0;  // L
    double w = 0.0;          // quality weight
    MetricKind metric = MetricKind::Perception;
    RateQualityCurve curve;
    // Prompt-size search bounds; the admissible interval additionally
    // intersects the curve domain and [_, L]. The default lower bound reads
    // the open interval "(1, L]" as 1 + 1e-9 bpp.
    double lp_min = kDefaultLpMin;
    double lp_max = 0.0;  // <= 0 means "no explicit bound" (L governs)

    static constexpr double kDefaultLpMin = 1.0 + 1e-9;

    double c_sg() const;            // capacity of the s->g edge
    double c_gd_effective() const;  // capacity of g->d, capped by generation_cap
    double f_min() const;           // from the generative node role

    GenScenario with_w(double new_w) const {
        GenScenario s = *this;
        s.w = new_w;
        return s;
    }
};

struct OptimizationResult {
    double w = 0.0;
    double lp_star = 0.0;
    double lambda_star = 0.0;
    double f_sg = 0.0;  // lambda* x L_p*
    double f_gd = 0.0;  // lambda* x L
    double y_g = 0.0;   // f_gd - f_sg
    double objective = 0.0;
    double g_flow = 0.0;
    bool feasible = false;
};

// lambda* = min(c_sg / L_p, c_gd / L); all inputs must be > 0.
double optimal_lambda(double c_sg, double c_gd, double lp, double content_bpp);

// y_g * (1 - w * quality(L_p)) with y_g = lambda * (L - L_p). Values with
// w * quality > 1 go negative; negative optima are legal and reported.
double objective(double lp, double lambda, double w, double content_bpp, const RateQualityCurve& curve);

// Maximizes the objective over L_p in the admissible interval with lambda
// fixed to optimal_lambda. 2048-point grid scan followed by golden-section
// refinement to |dL_p| < 1e-6; flat regions resolve to the smallest L_p.
// Scenarios with an empty admissible interval come back infeasible, not as
// errors.
OptimizationResult optimize_prompt_size(const GenScenario& scenario);

// G = 1 + y_g / f'_sd.
double flow_gain(double y_g, double f_prime_sd);

// One result per w, same scenario otherwise; results ordered by input index.
std::vector<OptimizationResult> sweep_w(const GenScenario& scenario, std::span<const double> w_values);

// Testing oracle: exhaustive search over a grid_n x grid_n grid of
// (L_p, lambda) pairs satisfying all constraints. The lambda axis spans
// fractions of lambda_max(L_p) so the closed-form optimum is on the grid.
OptimizationResult brute_force_optimize(const GenScenario& scenario, int grid_n);

// Result CSV: header + one row per result.
std::string results_to_csv(std::span<const OptimizationResult> results, const std::string& comment);

}  // namespace genflow::flowopt
