#include "genflow/flowopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "genflow/util.hpp"

namespace genflow::flowopt {

double GenScenario::c_sg() const {
    const auto cap = topology.edge_capacity(topology.source_id(), g);
    if (!cap) throw std::invalid_argument("scenario '" + name + "': no edge " + topology.source_id() + "->" + g);
    return *cap;
}

double GenScenario::c_gd_effective() const {
    const auto cap = topology.edge_capacity(g, topology.sink_id());
    if (!cap) throw std::invalid_argument("scenario '" + name + "': no edge " + g + "->" + topology.sink_id());
    const auto& role = topology.node(g).role;
    if (role.generation_cap) return std::min(*cap, *role.generation_cap);
    return *cap;
}

double GenScenario::f_min() const {
    const auto& node = topology.node(g);
    if (node.role.kind != flowgraph::RoleKind::Generative)
        throw std::invalid_argument("scenario '" + name + "': node '" + g + "' is not generative");
    return node.role.f_min;
}

double optimal_lambda(double c_sg, double c_gd, double lp, double content_bpp) {
    if (!(c_sg > 0.0) || !(c_gd > 0.0) || !(lp > 0.0) || !(content_bpp > 0.0))
        throw std::invalid_argument("optimal_lambda: all inputs must be > 0");
    return std::min(c_sg / lp, c_gd / content_bpp);
}

double objective(double lp, double lambda, double w, double content_bpp, const RateQualityCurve& curve) {
    if (lambda < 0.0) throw std::invalid_argument("objective: lambda must be >= 0");
    const double y_g = lambda * (content_bpp - lp);
    return y_g * (1.0 - w * ratequality::eval(curve, lp));
}

double flow_gain(double y_g, double f_prime_sd) {
    if (!(f_prime_sd > 0.0)) throw std::invalid_argument("flow_gain: baseline flow must be > 0");
    return 1.0 + y_g / f_prime_sd;
}

namespace {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool feasible = false;
};

// Admissible L_p range: search bounds, curve domain, L itself, and the f_min
// feasibility floor (f_sg(L_p) = min(c_sg, L_p c_gd / L) is non-decreasing).
Interval admissible_interval(const GenScenario& s) {
    Interval iv;
    const double c_sg = s.c_sg();
    const double c_gd = s.c_gd_effective();
    if (!(c_sg > 0.0) || !(c_gd > 0.0) || !(s.content_bpp > 0.0)) return iv;
    if (s.f_min() > c_sg + 1e-12) return iv;  // even a saturated s-g link starves the generator

    double lo = std::max(s.lp_min, s.curve.x_lo);
    if (s.f_min() > 0.0) lo = std::max(lo, s.f_min() * s.content_bpp / c_gd);
    double hi = std::min(s.content_bpp, s.curve.x_hi);
    if (s.lp_max > 0.0) hi = std::min(hi, s.lp_max);
    if (!(lo > 0.0) || lo > hi + 1e-12) return iv;

    iv.lo = lo;
    iv.hi = std::max(lo, hi);  // lo can sit a hair above hi within the tolerance window
    iv.feasible = true;
    return iv;
}

OptimizationResult infeasible_result(double w) {
    OptimizationResult r;
    r.w = w;
    r.feasible = false;
    return r;
}

OptimizationResult package_result(const GenScenario& s, double lp) {
    const double c_sg = s.c_sg();
    const double c_gd = s.c_gd_effective();
    OptimizationResult r;
    r.w = s.w;
    r.feasible = true;
    r.lp_star = lp;
    r.lambda_star = optimal_lambda(c_sg, c_gd, lp, s.content_bpp);
    r.f_sg = r.lambda_star * lp;
    r.f_gd = r.lambda_star * s.content_bpp;
    r.y_g = r.f_gd - r.f_sg;
    r.objective = objective(lp, r.lambda_star, s.w, s.content_bpp, s.curve);
    const double baseline = flowgraph::baseline_max_flow(s.topology, s.topology.source_id(), s.topology.sink_id());
    r.g_flow = flow_gain(r.y_g, baseline);

    // Post-hoc re-assertion of the closed form and the flow constraints.
    if (std::abs(r.lambda_star - std::min(c_sg / lp, c_gd / s.content_bpp)) > 1e-12)
        throw std::logic_error("optimizer invariant violated: lambda* != min(c_sg/L_p, c_gd/L)");
    if (r.f_sg > c_sg + 1e-9 || r.f_gd > c_gd + 1e-9 || r.f_sg < s.f_min() - 1e-9)
        throw std::logic_error("optimizer invariant violated: capacity or f_min constraint");
    return r;
}

}  // namespace

OptimizationResult optimize_prompt_size(const GenScenario& scenario) {
    const Interval iv = admissible_interval(scenario);
    if (!iv.feasible) return infeasible_result(scenario.w);

    const double c_sg = scenario.c_sg();
    const double c_gd = scenario.c_gd_effective();
    auto value_at = [&](double lp) {
        return objective(lp, optimal_lambda(c_sg, c_gd, lp, scenario.content_bpp), scenario.w,
                         scenario.content_bpp, scenario.curve);
    };

    if (iv.hi - iv.lo < 1e-15) return package_result(scenario, iv.lo);

    // Stage 1: 2048-point grid scan (guards against multi-modal fitted curves).
    constexpr int kGridPoints = 2048;
    int best_idx = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    auto grid_x = [&](int i) {
        return iv.lo + (iv.hi - iv.lo) * static_cast<double>(i) / (kGridPoints - 1);
    };
    for (int i = 0; i < kGridPoints; ++i) {
        const double v = value_at(grid_x(i));
        if (v > best_val) {
            best_val = v;
            best_idx = i;
        }
    }

    // Stage 2: golden-section refinement on the bracket around the best grid
    // point (unimodality is assumed only inside this bracket).
    double a = grid_x(std::max(0, best_idx - 1));
    double b = grid_x(std::min(kGridPoints - 1, best_idx + 1));
    constexpr double kInvPhi = 0.6180339887498949;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = value_at(x1);
    double f2 = value_at(x2);
    while (b - a > 1e-6) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + kInvPhi * (b - a);
            f2 = value_at(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - kInvPhi * (b - a);
            f1 = value_at(x1);
        }
    }
    const double golden = 0.5 * (a + b);

    // Candidate set: interval endpoints, the lambda branch point, the grid
    // best, and the refined point. Ties resolve to the smallest L_p (frees the
    // most s-g capacity).
    std::vector<double> candidates = {iv.lo, iv.hi, grid_x(best_idx), golden};
    const double branch = c_sg * scenario.content_bpp / c_gd;  // lambda kink
    if (branch > iv.lo && branch < iv.hi) candidates.push_back(branch);

    double best_lp = candidates.front();
    double best_obj = value_at(best_lp);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double lp = candidates[i];
        const double v = value_at(lp);
        const double tie_tol = 1e-12 * std::max(1.0, std::abs(best_obj));
        if (v > best_obj + tie_tol || (std::abs(v - best_obj) <= tie_tol && lp < best_lp)) {
            best_obj = v;
            best_lp = lp;
        }
    }
    return package_result(scenario, best_lp);
}

std::vector<OptimizationResult> sweep_w(const GenScenario& scenario, std::span<const double> w_values) {
    if (w_values.empty()) throw std::invalid_argument("sweep_w: empty w list");
    std::vector<OptimizationResult> results;
    results.reserve(w_values.size());
    for (double w : w_values) results.push_back(optimize_prompt_size(scenario.with_w(w)));
    return results;
}

OptimizationResult brute_force_optimize(const GenScenario& scenario, int grid_n) {
    if (grid_n < 2) throw std::invalid_argument("brute_force_optimize: grid_n must be >= 2");
    const Interval iv = admissible_interval(scenario);
    if (!iv.feasible) return infeasible_result(scenario.w);

    const double c_sg = scenario.c_sg();
    const double c_gd = scenario.c_gd_effective();
    const double L = scenario.content_bpp;

    std::vector<double> lp_grid;
    lp_grid.reserve(static_cast<std::size_t>(grid_n) + 1);
    for (int i = 0; i < grid_n; ++i)
        lp_grid.push_back(iv.lo + (iv.hi - iv.lo) * static_cast<double>(i) / (grid_n - 1));
    const double branch = c_sg * L / c_gd;
    if (branch > iv.lo && branch < iv.hi) lp_grid.push_back(branch);

    double best_obj = -std::numeric_limits<double>::infinity();
    double best_lp = 0.0, best_lambda = 0.0;
    bool found = false;
    for (double lp : lp_grid) {
        const double quality = ratequality::eval(scenario.curve, lp);
        const double lambda_max = std::min(c_sg / lp, c_gd / L);
        const double factor = (L - lp) * (1.0 - scenario.w * quality);
        for (int j = 0; j < grid_n; ++j) {
            const double lambda = lambda_max * static_cast<double>(j) / (grid_n - 1);
            if (lambda * lp < scenario.f_min() - 1e-12) continue;  // below the generator's floor
            const double obj = lambda * factor;
            if (!found || obj > best_obj + 1e-15 ||
                (std::abs(obj - best_obj) <= 1e-15 && lp < best_lp)) {
                best_obj = obj;
                best_lp = lp;
                best_lambda = lambda;
                found = true;
            }
        }
    }
    if (!found) return infeasible_result(scenario.w);

    OptimizationResult r;
    r.w = scenario.w;
    r.feasible = true;
    r.lp_star = best_lp;
    r.lambda_star = best_lambda;
    r.f_sg = best_lambda * best_lp;
    r.f_gd = best_lambda * L;
    r.y_g = r.f_gd - r.f_sg;
    r.objective = best_obj;
    const double baseline = flowgraph::baseline_max_flow(scenario.topology, scenario.topology.source_id(),
                                                         scenario.topology.sink_id());
    r.g_flow = flow_gain(r.y_g, baseline);
    return r;
}

std::string results_to_csv(std::span<const OptimizationResult> results, const std::string& comment) {
    std::string out;
    if (!comment.empty()) out += "# " + comment + "\n";
    out += "w,L_p_star,lambda_star,f_sg,f_gd,y_g,G_flow,objective,feasible\n";
    for (const auto& r : results) {
        out += format_double(r.w);
        out += ',';
        out += format_double(r.lp_star);
        out += ',';
        out += format_double(r.lambda_star);
        out += ',';
        out += format_double(r.f_sg);
        out += ',';
        out += format_double(r.f_gd);
        out += ',';
        out += format_double(r.y_g);
        out += ',';
        out += format_double(r.g_flow);
        out += ',';
        out += format_double(r.objective);
        out += ',';
        out += r.feasible ? '1' : '0';
        out += '\n';
    }
    return out;
}

}  // namespace genflow::flowopt
