#include "genflow/ratequality.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "genflow/parallel.hpp"
#include "genflow/util.hpp"

namespace genflow::ratequality {

std::string scheme_name(Scheme s) { return s == Scheme::GenAI ? "genai" : "jpeg"; }

Scheme scheme_from_name(const std::string& name) {
    if (name == "genai") return Scheme::GenAI;
    if (name == "jpeg") return Scheme::Jpeg;
    throw std::invalid_argument("unknown scheme '" + name + "'");
}

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::PE: return "PE";
        case Strategy::PSLow: return "PS-low";
        case Strategy::PSMed: return "PS-med";
        case Strategy::PSHigh: return "PS-high";
    }
    return "unknown";
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "PE") return Strategy::PE;
    if (name == "PS-low") return Strategy::PSLow;
    if (name == "PS-med") return Strategy::PSMed;
    if (name == "PS-high") return Strategy::PSHigh;
    throw std::invalid_argument("unknown strategy '" + name + "'");
}

std::string family_name(FamilyKind kind) {
    switch (kind) {
        case FamilyKind::ExponentialDecay: return "exponential_decay";
        case FamilyKind::PowerLaw: return "power_law";
        case FamilyKind::Polynomial: return "polynomial";
    }
    return "unknown";
}

FamilyKind family_from_name(const std::string& name) {
    if (name == "exponential_decay") return FamilyKind::ExponentialDecay;
    if (name == "power_law") return FamilyKind::PowerLaw;
    if (name == "polynomial") return FamilyKind::Polynomial;
    throw std::invalid_argument("unknown curve family '" + name + "'");
}

double RateQualityCurve::eval_unclamped(double x) const {
    switch (family) {
        case FamilyKind::ExponentialDecay:
            return params[0] * std::exp(-params[1] * x) + params[2];
        case FamilyKind::PowerLaw:
            return params[0] * std::pow(x, -params[1]) + params[2];
        case FamilyKind::Polynomial: {
            double acc = 0.0;
            for (std::size_t i = params.size(); i-- > 0;) acc = acc * x + params[i];
            return acc;
        }
    }
    return 0.0;
}

double eval(const RateQualityCurve& curve, double x) {
    const double tol = 1e-9 * std::max(1.0, std::abs(curve.x_hi));
    if (x < curve.x_lo - tol || x > curve.x_hi + tol)
        throw std::domain_error("curve evaluated at " + format_double(x) + " outside domain [" +
                                format_double(curve.x_lo) + ", " + format_double(curve.x_hi) + "]");
    const double clamped_x = std::clamp(x, curve.x_lo, curve.x_hi);
    return std::clamp(curve.eval_unclamped(clamped_x), 0.0, 1.0);
}

// ===========================================================================
// Least-squares machinery
// ===========================================================================

namespace {

// Gaussian elimination with partial pivoting; k <= 4. Returns false when the
// system is numerically singular.
bool solve_linear(std::array<std::array<double, 4>, 4>& a, std::array<double, 4>& b, int k) {
    for (int col = 0; col < k; ++col) {
        int pivot = col;
        for (int r = col + 1; r < k; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-300) return false;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (int r = col + 1; r < k; ++r) {
            const double m = a[r][col] / a[col][col];
            for (int c = col; c < k; ++c) a[r][c] -= m * a[col][c];
            b[r] -= m * b[col];
        }
    }
    for (int col = k - 1; col >= 0; --col) {
        double acc = b[col];
        for (int c = col + 1; c < k; ++c) acc -= a[col][c] * b[c];
        b[col] = acc / a[col][col];
    }
    return true;
}

struct NlsModel {
    int nparams = 0;
    std::function<double(double, const double*)> value;
    std::function<void(double, const double*, double*)> jacobian;
    std::function<void(double*)> clamp;
};

double sum_squared_residuals(const NlsModel& model, std::span<const SamplePoint> pts, const double* p) {
    double acc = 0.0;
    for (const auto& s : pts) {
        const double r = model.value(s.bpp, p) - s.value;
        acc += r * r;
    }
    return acc;
}

// Gauss-Newton with Levenberg damping. Every parameter vector evaluated along
// the way competes for the returned optimum.
void levenberg_fit(const NlsModel& model, std::span<const SamplePoint> pts, std::array<double, 4>& params,
                   double& best_ssr, std::array<double, 4>& best_params) {
    const int k = model.nparams;
    model.clamp(params.data());
    double ssr = sum_squared_residuals(model, pts, params.data());
    if (ssr < best_ssr) {
        best_ssr = ssr;
        best_params = params;
    }

    double damping = 1e-3;
    for (int iter = 0; iter < 200; ++iter) {
        std::array<std::array<double, 4>, 4> jtj{};
        std::array<double, 4> jtr{};
        for (const auto& s : pts) {
            double jac[4];
            model.jacobian(s.bpp, params.data(), jac);
            const double r = model.value(s.bpp, params.data()) - s.value;
            for (int i = 0; i < k; ++i) {
                jtr[i] += jac[i] * r;
                for (int j = 0; j < k; ++j) jtj[i][j] += jac[i] * jac[j];
            }
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
            std::array<std::array<double, 4>, 4> a = jtj;
            std::array<double, 4> rhs{};
            for (int i = 0; i < k; ++i) {
                a[i][i] += damping * std::max(jtj[i][i], 1e-12);
                rhs[i] = -jtr[i];
            }
            if (!solve_linear(a, rhs, k)) {
                damping *= 4.0;
                continue;
            }
            std::array<double, 4> cand = params;
            for (int i = 0; i < k; ++i) cand[i] += rhs[i];
            model.clamp(cand.data());
            const double cand_ssr = sum_squared_residuals(model, pts, cand.data());
            if (cand_ssr < best_ssr) {
                best_ssr = cand_ssr;
                best_params = cand;
            }
            if (cand_ssr < ssr) {
                const double improvement = ssr - cand_ssr;
                params = cand;
                ssr = cand_ssr;
                damping = std::max(damping / 3.0, 1e-12);
                accepted = true;
                if (improvement <= 1e-12 * std::max(ssr, 1e-300)) return;  // converged
            } else {
                damping *= 4.0;
            }
        }
        if (!accepted) return;
    }
}

NlsModel make_model(FamilyKind kind, std::optional<std::pair<double, double>> anchor) {
    NlsModel m;
    if (kind == FamilyKind::ExponentialDecay) {
        if (!anchor) {
            m.nparams = 3;
            m.value = [](double x, const double* p) { return p[0] * std::exp(-p[1] * x) + p[2]; };
            m.jacobian = [](double x, const double* p, double* j) {
                const double e = std::exp(-p[1] * x);
                j[0] = e;
                j[1] = -p[0] * x * e;
                j[2] = 1.0;
            };
        } else {
            const double x0 = anchor->first, y0 = anchor->second;
            m.nparams = 2;
            m.value = [x0, y0](double x, const double* p) {
                return p[0] * (std::exp(-p[1] * x) - std::exp(-p[1] * x0)) + y0;
            };
            m.jacobian = [x0](double x, const double* p, double* j) {
                const double e = std::exp(-p[1] * x);
                const double e0 = std::exp(-p[1] * x0);
                j[0] = e - e0;
                j[1] = p[0] * (-x * e + x0 * e0);
            };
        }
        m.clamp = [](double* p) {
            p[0] = std::max(p[0], 0.0);
            p[1] = std::clamp(p[1], 1e-8, 500.0);
        };
    } else {  // PowerLaw
        if (!anchor) {
            m.nparams = 3;
            m.value = [](double x, const double* p) { return p[0] * std::pow(x, -p[1]) + p[2]; };
            m.jacobian = [](double x, const double* p, double* j) {
                const double xb = std::pow(x, -p[1]);
                j[0] = xb;
                j[1] = -p[0] * std::log(x) * xb;
                j[2] = 1.0;
            };
        } else {
            const double x0 = anchor->first, y0 = anchor->second;
            m.nparams = 2;
            m.value = [x0, y0](double x, const double* p) {
                return p[0] * (std::pow(x, -p[1]) - std::pow(x0, -p[1])) + y0;
            };
            m.jacobian = [x0](double x, const double* p, double* j) {
                const double xb = std::pow(x, -p[1]);
                const double x0b = std::pow(x0, -p[1]);
                j[0] = xb - x0b;
                j[1] = -p[0] * (std::log(x) * xb - std::log(x0) * x0b);
            };
        }
        m.clamp = [](double* p) {
            p[0] = std::max(p[0], 0.0);
            p[1] = std::clamp(p[1], 1e-8, 50.0);
        };
    }
    return m;
}

double r_squared(std::span<const SamplePoint> pts, const std::function<double(double)>& f, bool& degenerate) {
    double mean = 0.0;
    for (const auto& s : pts) mean += s.value;
    mean /= static_cast<double>(pts.size());
    double ss_tot = 0.0, ss_res = 0.0;
    for (const auto& s : pts) {
        ss_tot += (s.value - mean) * (s.value - mean);
        const double r = f(s.bpp) - s.value;
        ss_res += r * r;
    }
    degenerate = ss_tot == 0.0;
    if (degenerate) return 1.0;
    return 1.0 - ss_res / ss_tot;
}

void require_fit_preconditions(std::span<const SamplePoint> samples, int needed) {
    if (static_cast<int>(samples.size()) < needed)
        throw std::invalid_argument("fit requires at least " + std::to_string(needed) + " samples, got " +
                                    std::to_string(samples.size()));
    std::set<double> xs;
    for (const auto& s : samples) xs.insert(s.bpp);
    if (xs.size() != samples.size())
        throw std::invalid_argument("fit requires distinct sample abscissas");
}

bool all_same_ordinate(std::span<const SamplePoint> samples) {
    for (const auto& s : samples)
        if (s.value != samples.front().value) return false;
    return true;
}

RateQualityCurve constant_curve(CurveFamily family, double value, std::span<const SamplePoint> samples) {
    RateQualityCurve curve;
    curve.family = family.kind;
    switch (family.kind) {
        case FamilyKind::ExponentialDecay:
        case FamilyKind::PowerLaw:
            curve.params = {0.0, 1.0, value};
            break;
        case FamilyKind::Polynomial:
            curve.params.assign(static_cast<std::size_t>(family.degree) + 1, 0.0);
            curve.params[0] = value;
            break;
    }
    auto [lo, hi] = std::minmax_element(samples.begin(), samples.end(),
                                        [](const SamplePoint& a, const SamplePoint& b) { return a.bpp < b.bpp; });
    curve.x_lo = lo->bpp;
    curve.x_hi = hi->bpp;
    curve.metric = samples.front().metric;
    curve.r2 = 1.0;
    return curve;
}

RateQualityCurve fit_polynomial(std::span<const SamplePoint> samples, int degree,
                                std::optional<std::pair<double, double>> anchor) {
    // Anchored fits substitute p(x) = y0 + (x - x0) q(x); both cases reduce to
    // a small linear least-squares solve via normal equations.
    const int k = anchor ? degree : degree + 1;  // free coefficients
    if (k > 4) throw std::invalid_argument("polynomial degree must be <= 3");
    std::array<std::array<double, 4>, 4> ata{};
    std::array<double, 4> atb{};
    for (const auto& s : samples) {
        double basis[4];
        double target = s.value;
        if (anchor) {
            const double lead = s.bpp - anchor->first;
            double power = 1.0;
            for (int i = 0; i < k; ++i) {
                basis[i] = lead * power;
                power *= s.bpp;
            }
            target -= anchor->second;
        } else {
            double power = 1.0;
            for (int i = 0; i < k; ++i) {
                basis[i] = power;
                power *= s.bpp;
            }
        }
        for (int i = 0; i < k; ++i) {
            atb[i] += basis[i] * target;
            for (int j = 0; j < k; ++j) ata[i][j] += basis[i] * basis[j];
        }
    }
    if (!solve_linear(ata, atb, k)) throw std::invalid_argument("degenerate polynomial fit");

    RateQualityCurve curve;
    curve.family = FamilyKind::Polynomial;
    curve.params.assign(static_cast<std::size_t>(degree) + 1, 0.0);
    if (anchor) {
        // Expand y0 + (x - x0) * q(x) into plain coefficients.
        const double x0 = anchor->first;
        curve.params[0] = anchor->second - x0 * atb[0];
        for (int mdeg = 1; mdeg <= degree; ++mdeg) {
            const double qm = mdeg < k ? atb[mdeg] : 0.0;
            curve.params[static_cast<std::size_t>(mdeg)] = atb[mdeg - 1] - x0 * qm;
        }
    } else {
        for (int i = 0; i <= degree; ++i) curve.params[static_cast<std::size_t>(i)] = atb[i];
    }
    return curve;
}

RateQualityCurve fit_nonlinear(std::span<const SamplePoint> samples, CurveFamily family,
                               std::optional<std::pair<double, double>> anchor) {
    const NlsModel model = make_model(family.kind, anchor);

    double y_min = samples.front().value, y_max = y_min;
    double x_min = samples.front().bpp, x_max = x_min;
    for (const auto& s : samples) {
        y_min = std::min(y_min, s.value);
        y_max = std::max(y_max, s.value);
        x_min = std::min(x_min, s.bpp);
        x_max = std::max(x_max, s.bpp);
    }
    const double y_span = std::max(y_max - y_min, 1e-6);
    const double x_span = std::max(x_max - x_min, 1e-9);

    // 16 deterministic multi-starts over a log-spaced (a, b) grid; c starts at
    // the minimum ordinate.
    const std::array<double, 4> a_grid = {0.5 * y_span, y_span, 2.0 * y_span, 4.0 * y_span};
    std::array<double, 4> b_grid{};
    if (family.kind == FamilyKind::ExponentialDecay)
        b_grid = {0.25 / x_span, 1.0 / x_span, 4.0 / x_span, 16.0 / x_span};
    else
        b_grid = {0.25, 0.5, 1.0, 2.0};

    double best_ssr = std::numeric_limits<double>::infinity();
    std::array<double, 4> best_params{};
    for (double a0 : a_grid) {
        for (double b0 : b_grid) {
            std::array<double, 4> p{a0, b0, anchor ? 0.0 : y_min, 0.0};
            levenberg_fit(model, samples, p, best_ssr, best_params);
        }
    }

    RateQualityCurve curve;
    curve.family = family.kind;
    if (anchor) {
        const double a = best_params[0], b = best_params[1];
        const double basis0 = family.kind == FamilyKind::ExponentialDecay ? std::exp(-b * anchor->first)
                                                                          : std::pow(anchor->first, -b);
        curve.params = {a, b, anchor->second - a * basis0};
    } else {
        curve.params = {best_params[0], best_params[1], best_params[2]};
    }
    return curve;
}

RateQualityCurve fit_impl(std::span<const SamplePoint> samples, CurveFamily family,
                          std::optional<std::pair<double, double>> anchor) {
    const int needed = anchor ? family.param_count() - 1 : family.param_count();
    require_fit_preconditions(samples, std::max(needed, 1));
    if (family.kind == FamilyKind::Polynomial && (family.degree < 0 || family.degree > 3))
        throw std::invalid_argument("polynomial degree must be in [0,3]");

    if (all_same_ordinate(samples) && (!anchor || samples.front().value == anchor->second))
        return constant_curve(family, samples.front().value, samples);

    RateQualityCurve curve = family.kind == FamilyKind::Polynomial
                                 ? fit_polynomial(samples, family.degree, anchor)
                                 : fit_nonlinear(samples, family, anchor);

    auto [lo, hi] = std::minmax_element(samples.begin(), samples.end(),
                                        [](const SamplePoint& a, const SamplePoint& b) { return a.bpp < b.bpp; });
    curve.x_lo = lo->bpp;
    curve.x_hi = hi->bpp;
    curve.metric = samples.front().metric;
    bool degenerate = false;
    curve.r2 = r_squared(samples, [&](double x) { return curve.eval_unclamped(x); }, degenerate);
    return curve;
}

}  // namespace

RateQualityCurve fit_curve(std::span<const SamplePoint> samples, CurveFamily family) {
    return fit_impl(samples, family, std::nullopt);
}

RateQualityCurve fit_curve_anchored(std::span<const SamplePoint> samples, CurveFamily family,
                                    double x0, double y0) {
    return fit_impl(samples, family, std::make_pair(x0, y0));
}

std::pair<CurveFamily, RateQualityCurve> select_family(std::span<const SamplePoint> samples,
                                                       std::span<const CurveFamily> candidates) {
    if (candidates.empty()) throw std::invalid_argument("select_family: no candidates");
    bool have_best = false;
    CurveFamily best_family{};
    RateQualityCurve best_curve;
    for (const CurveFamily& family : candidates) {
        const RateQualityCurve curve = fit_curve(samples, family);
        const bool better =
            !have_best || curve.r2 > best_curve.r2 + 1e-12 ||
            (std::abs(curve.r2 - best_curve.r2) <= 1e-12 && family.param_count() < best_family.param_count());
        if (better) {
            best_family = family;
            best_curve = curve;
            have_best = true;
        }
    }
    return {best_family, best_curve};
}

PeCurve build_pe_curve(std::span<const SamplePoint> tier_points, double true_bpp, MetricKind metric,
                       std::optional<double> shared_fid_max) {
    if (tier_points.size() < 2) throw std::invalid_argument("build_pe_curve: need at least 2 tier points");
    for (std::size_t i = 1; i < tier_points.size(); ++i)
        if (tier_points[i].bpp <= tier_points[i - 1].bpp)
            throw std::invalid_argument("build_pe_curve: tier points must be sorted by bpp");
    if (tier_points.back().bpp >= true_bpp)
        throw std::invalid_argument("build_pe_curve: tier point at bpp >= content bpp conflicts with the (L, 0) anchor");
    for (const auto& p : tier_points)
        if (p.value < 0.0) throw std::invalid_argument("build_pe_curve: negative quality value");

    std::vector<SamplePoint> anchors(tier_points.begin(), tier_points.end());
    SamplePoint top = anchors.back();
    top.bpp = true_bpp;
    top.value = 0.0;
    anchors.push_back(top);

    PeCurve result;
    if (metric == MetricKind::Perception) {
        double fid_max;
        if (shared_fid_max) {
            fid_max = *shared_fid_max;
            if (!(fid_max > 0.0)) throw std::invalid_argument("build_pe_curve: shared fid_max must be > 0");
        } else {
            // Initial fit on raw values, extrapolated to prompt size zero.
            // Exponential decay is the only candidate that is both finite at 0
            // and monotone, which is what the extrapolation needs.
            const RateQualityCurve raw_fit =
                fit_curve_anchored(anchors, {FamilyKind::ExponentialDecay, 3}, true_bpp, 0.0);
            fid_max = raw_fit.eval_unclamped(0.0);
            if (!(fid_max > 0.0))
                throw std::invalid_argument("build_pe_curve: rate-perception fit gives non-positive value at 0");
        }
        for (auto& a : anchors) a.value = metrics::normalize_fid(a.value, fid_max);
        anchors.back().value = 0.0;
        result.fid_max = fid_max;
    } else {
        for (const auto& p : tier_points)
            if (p.value > 1.0) throw std::invalid_argument("build_pe_curve: distortion values must be in [0,1]");
    }

    const std::array<CurveFamily, 2> candidates = {CurveFamily{FamilyKind::ExponentialDecay, 3},
                                                   CurveFamily{FamilyKind::PowerLaw, 3}};
    bool have_best = false;
    RateQualityCurve best;
    for (const CurveFamily& family : candidates) {
        RateQualityCurve curve = fit_curve_anchored(anchors, family, true_bpp, 0.0);
        if (!have_best || curve.r2 > best.r2 + 1e-12) {
            best = curve;
            have_best = true;
        }
    }
    best.metric = metric;
    best.x_lo = tier_points.front().bpp;
    best.x_hi = true_bpp;
    best.fid_max = result.fid_max;
    result.curve = best;
    return result;
}

// ===========================================================================
// Measurement over a dataset
// ===========================================================================

DatasetContext DatasetContext::build(std::vector<imaging::Image> images, unsigned jobs) {
    if (images.empty()) throw std::invalid_argument("dataset is empty");
    for (const auto& img : images)
        if (!img.same_dims(images.front())) throw std::invalid_argument("dataset images must share dimensions");
    DatasetContext ctx;
    ctx.images = std::move(images);
    ctx.features.resize(ctx.images.size());
    parallel_for(ctx.images.size(), jobs,
                 [&](std::size_t i) { ctx.features[i] = metrics::feature_embed(ctx.images[i]); });
    ctx.gaussian = metrics::gaussian_fit(ctx.features);
    ctx.true_bpp = imaging::raw_bpp(ctx.images.front().channels);
    return ctx;
}

std::uint64_t image_gen_seed(const MeasureConfig& config, Scheme scheme, int operating_point,
                             std::size_t image_index) {
    const std::uint64_t stream = (scheme == Scheme::GenAI ? 0x10u : 0x20u) + static_cast<std::uint64_t>(operating_point);
    return mix64(config.gen_seed, mix64(stream, image_index));
}

std::uint64_t image_swap_seed(const MeasureConfig& config, std::size_t image_index) {
    return mix64(config.swap_seed, image_index);
}

namespace {

imaging::LatentTier tier_for_op(int operating_point) {
    switch (operating_point) {
        case 0: return imaging::LatentTier::Low;
        case 1: return imaging::LatentTier::Med;
        case 2: return imaging::LatentTier::High;
        default: throw std::invalid_argument("operating point must be 0, 1, or 2");
    }
}

Strategy ps_strategy_for_op(int operating_point) {
    switch (operating_point) {
        case 0: return Strategy::PSLow;
        case 1: return Strategy::PSMed;
        case 2: return Strategy::PSHigh;
        default: throw std::invalid_argument("operating point must be 0, 1, or 2");
    }
}

}  // namespace

imaging::Image reconstruct(const imaging::Image& original, Scheme scheme, int operating_point,
                           std::uint64_t gen_seed, const MeasureConfig& config) {
    if (scheme == Scheme::GenAI) {
        const auto prompt = imaging::latent_encode(original, tier_for_op(operating_point));
        return imaging::generative_decode(prompt, gen_seed);
    }
    if (operating_point < 0 || operating_point >= static_cast<int>(config.jpeg_qualities.size()))
        throw std::invalid_argument("jpeg operating point out of range");
    const auto prompt = imaging::jpeg_like_encode(original, config.jpeg_qualities[static_cast<std::size_t>(operating_point)]);
    return imaging::jpeg_like_decode(prompt);
}

double tier_bpp(const DatasetContext& ctx, Scheme scheme, int operating_point, const MeasureConfig& config) {
    double acc = 0.0;
    for (const auto& img : ctx.images) {
        const auto prompt = scheme == Scheme::GenAI
                                ? imaging::latent_encode(img, tier_for_op(operating_point))
                                : imaging::jpeg_like_encode(img, config.jpeg_qualities[static_cast<std::size_t>(operating_point)]);
        acc += prompt.bpp;
    }
    return acc / static_cast<double>(ctx.images.size());
}

namespace {

// Reconstructions for one operating point, order-stable across worker counts.
std::vector<imaging::Image> reconstruct_all(const DatasetContext& ctx, Scheme scheme, int operating_point,
                                            const MeasureConfig& config) {
    std::vector<imaging::Image> out(ctx.images.size());
    parallel_for(ctx.images.size(), config.jobs, [&](std::size_t i) {
        out[i] = reconstruct(ctx.images[i], scheme, operating_point,
                             image_gen_seed(config, scheme, operating_point, i), config);
    });
    return out;
}

double dataset_value(const DatasetContext& ctx, const std::vector<imaging::Image>& candidates,
                     MetricKind metric, unsigned jobs) {
    if (metric == MetricKind::Distortion) {
        std::vector<double> values(candidates.size());
        parallel_for(candidates.size(), jobs,
                     [&](std::size_t i) { values[i] = metrics::normalized_mse(ctx.images[i], candidates[i]); });
        double acc = 0.0;
        for (double v : values) acc += v;
        return acc / static_cast<double>(values.size());
    }
    std::vector<std::vector<double>> features(candidates.size());
    parallel_for(candidates.size(), jobs,
                 [&](std::size_t i) { features[i] = metrics::feature_embed(candidates[i]); });
    return metrics::frechet_distance(ctx.gaussian, metrics::gaussian_fit(features));
}

}  // namespace

std::vector<SamplePoint> measure_pe_points(const DatasetContext& ctx, Scheme scheme, MetricKind metric,
                                           const MeasureConfig& config) {
    std::vector<SamplePoint> points;
    for (int op = 0; op < 3; ++op) {
        const std::vector<imaging::Image> recon = reconstruct_all(ctx, scheme, op, config);
        SamplePoint p;
        p.bpp = tier_bpp(ctx, scheme, op, config);
        p.value = dataset_value(ctx, recon, metric, config.jobs);
        p.metric = metric;
        p.scheme = scheme;
        p.strategy = Strategy::PE;
        points.push_back(p);
    }
    std::sort(points.begin(), points.end(), [](const SamplePoint& a, const SamplePoint& b) { return a.bpp < b.bpp; });
    return points;
}

std::vector<SamplePoint> measure_ps_points(const DatasetContext& ctx, Scheme scheme, int operating_point,
                                           MetricKind metric, const MeasureConfig& config) {
    if (config.gamma_grid.empty() || config.gamma_grid.front() != 0.0)
        throw std::invalid_argument("gamma grid must start at 0");
    for (double g : config.gamma_grid)
        if (g < 0.0 || g > 1.0) throw std::invalid_argument("gamma grid values must lie in [0,1]");

    const std::vector<imaging::Image> recon = reconstruct_all(ctx, scheme, operating_point, config);
    const double lp = tier_bpp(ctx, scheme, operating_point, config);

    std::vector<SamplePoint> points;
    for (double gamma : config.gamma_grid) {
        std::vector<imaging::Image> swapped(recon.size());
        parallel_for(recon.size(), config.jobs, [&](std::size_t i) {
            swapped[i] = imaging::pixel_swap(recon[i], ctx.images[i], gamma, image_swap_seed(config, i));
        });
        SamplePoint p;
        p.bpp = imaging::combined_bpp(lp, gamma, ctx.true_bpp);
        p.value = dataset_value(ctx, swapped, metric, config.jobs);
        p.metric = metric;
        p.scheme = scheme;
        p.strategy = ps_strategy_for_op(operating_point);
        points.push_back(p);
    }
    return points;
}

RateQualityCurve fit_ps_from_samples(std::span<const SamplePoint> samples, double true_bpp, MetricKind metric,
                                     std::optional<double> fid_max, std::span<const CurveFamily> candidates) {
    if (samples.empty()) throw std::invalid_argument("fit_ps_from_samples: no samples");
    std::vector<SamplePoint> pts(samples.begin(), samples.end());
    std::sort(pts.begin(), pts.end(), [](const SamplePoint& a, const SamplePoint& b) { return a.bpp < b.bpp; });
    if (metric == MetricKind::Perception) {
        if (!fid_max || !(*fid_max > 0.0))
            throw std::invalid_argument("fit_ps_from_samples: perception requires a positive fid_max");
        for (auto& p : pts) p.value = metrics::normalize_fid(p.value, *fid_max);
    }
    auto [family, curve] = select_family(pts, candidates);
    (void)family;
    curve.metric = metric;
    curve.x_lo = pts.front().bpp;
    curve.x_hi = pts.front().bpp + true_bpp;  // gamma in [0,1] spans exactly L
    curve.fid_max = fid_max.value_or(0.0);
    return curve;
}

RateQualityCurve build_ps_curve(const DatasetContext& ctx, Scheme scheme, int operating_point, MetricKind metric,
                                const MeasureConfig& config, std::optional<double> fid_max,
                                std::span<const CurveFamily> candidates) {
    const std::vector<SamplePoint> samples = measure_ps_points(ctx, scheme, operating_point, metric, config);
    return fit_ps_from_samples(samples, ctx.true_bpp, metric, fid_max, candidates);
}

// ===========================================================================
// Serialization
// ===========================================================================

std::string samples_to_csv(std::span<const SamplePoint> samples, const std::string& comment) {
    std::string out;
    if (!comment.empty()) out += "# " + comment + "\n";
    out += "bpp,value,metric,scheme,strategy\n";
    for (const auto& s : samples) {
        out += format_double(s.bpp);
        out += ',';
        out += format_double(s.value);
        out += ',';
        out += metrics::metric_name(s.metric);
        out += ',';
        out += scheme_name(s.scheme);
        out += ',';
        out += strategy_name(s.strategy);
        out += '\n';
    }
    return out;
}

namespace {

double parse_csv_double(const std::string& field) {
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw std::invalid_argument("malformed numeric CSV field '" + field + "'");
    return v;
}

}  // namespace

std::vector<SamplePoint> samples_from_csv(const std::string& text) {
    std::vector<SamplePoint> samples;
    std::istringstream in(text);
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line != "bpp,value,metric,scheme,strategy")
                throw std::invalid_argument("unexpected sample CSV header: '" + line + "'");
            saw_header = true;
            continue;
        }
        std::array<std::string, 5> fields;
        std::size_t start = 0;
        for (int f = 0; f < 5; ++f) {
            const std::size_t comma = line.find(',', start);
            if (f < 4 && comma == std::string::npos)
                throw std::invalid_argument("sample CSV row has too few fields: '" + line + "'");
            fields[static_cast<std::size_t>(f)] =
                line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            start = comma + 1;
        }
        SamplePoint s;
        s.bpp = parse_csv_double(fields[0]);
        s.value = parse_csv_double(fields[1]);
        s.metric = metrics::metric_from_name(fields[2]);
        s.scheme = scheme_from_name(fields[3]);
        s.strategy = strategy_from_name(fields[4]);
        samples.push_back(s);
    }
    if (!saw_header) throw std::invalid_argument("sample CSV has no header row");
    return samples;
}

nlohmann::json curve_to_json(const RateQualityCurve& curve, Scheme scheme, Strategy strategy,
                             const std::string& samples_hash) {
    nlohmann::json j;
    j["family"] = family_name(curve.family);
    j["params"] = curve.params;
    j["domain"] = {curve.x_lo, curve.x_hi};
    j["metric"] = metrics::metric_name(curve.metric);
    j["scheme"] = scheme_name(scheme);
    j["strategy"] = strategy_name(strategy);
    j["r2"] = curve.r2;
    if (curve.fid_max > 0.0) j["fid_max"] = curve.fid_max;
    j["feature_extractor"] = metrics::kFeatureExtractorVersion;
    j["samples_hash"] = samples_hash;
    return j;
}

RateQualityCurve curve_from_json(const nlohmann::json& j) {
    RateQualityCurve curve;
    curve.family = family_from_name(j.at("family").get<std::string>());
    curve.params = j.at("params").get<std::vector<double>>();
    if (curve.params.empty() || curve.params.size() > 4)
        throw std::invalid_argument("curve params must have 1..4 entries");
    curve.x_lo = j.at("domain").at(0).get<double>();
    curve.x_hi = j.at("domain").at(1).get<double>();
    if (!(curve.x_lo < curve.x_hi)) throw std::invalid_argument("curve domain must satisfy x_lo < x_hi");
    curve.metric = metrics::metric_from_name(j.at("metric").get<std::string>());
    curve.r2 = j.at("r2").get<double>();
    curve.fid_max = j.value("fid_max", 0.0);
    return curve;
}

}  // namespace genflow::ratequality
