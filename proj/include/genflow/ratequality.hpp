#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "genflow/imaging.hpp"
#include "genflow/metrics.hpp"

namespace genflow::ratequality {

using metrics::MetricKind;

enum class Scheme { GenAI, Jpeg };
enum class Strategy { PE, PSLow, PSMed, PSHigh };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);
std::string strategy_name(Strategy s);          // "PE", "PS-low", "PS-med", "PS-high"
Strategy strategy_from_name(const std::string& name);

// One measured (prompt size, quality) pair. For distortion the value is the
// normalized MSE in [0,1]; for perception rows produced by measurement it is
// the raw set-level Frechet distance (normalization happens at fit time).
struct SamplePoint {
    double bpp = 0.0;
    double value = 0.0;
    MetricKind metric = MetricKind::Distortion;
    Scheme scheme = Scheme::GenAI;
    Strategy strategy = Strategy::PE;
};

enum class FamilyKind { ExponentialDecay, PowerLaw, Polynomial };

std::string family_name(FamilyKind kind);
FamilyKind family_from_name(const std::string& name);

// A candidate fit family. ExponentialDecay: a*exp(-b*x)+c, PowerLaw:
// a*x^-b+c (a >= 0, b > 0 for both); Polynomial: degree <= 3.
struct CurveFamily {
    FamilyKind kind = FamilyKind::ExponentialDecay;
    int degree = 3;  // Polynomial only

    int param_count() const { return kind == FamilyKind::Polynomial ? degree + 1 : 3; }
};

struct RateQualityCurve {
    FamilyKind family = FamilyKind::ExponentialDecay;
    std::vector<double> params;  // exp/pow: {a,b,c}; polynomial: {c0..cd}
    double x_lo = 0.0;
    double x_hi = 0.0;
    MetricKind metric = MetricKind::Distortion;
    double r2 = 0.0;
    double fid_max = 0.0;  // > 0 on perception curves normalized via the PE fit

    double eval_unclamped(double x) const;  // raw family value, no domain check
};

// Family value at x, clamped to [0,1]; throws std::domain_error outside
// [x_lo, x_hi].
double eval(const RateQualityCurve& curve, double x);

// Least-squares fit of `family` to the samples; nonlinear families use
// Gauss-Newton with Levenberg damping over 16 deterministic multi-starts.
// All-equal ordinates degenerate to a constant fit with r^2 = 1.
RateQualityCurve fit_curve(std::span<const SamplePoint> samples, CurveFamily family);

// Same, constrained to pass exactly through (x0, y0).
RateQualityCurve fit_curve_anchored(std::span<const SamplePoint> samples, CurveFamily family,
                                    double x0, double y0);

// Fits every candidate and returns the highest r^2; ties break toward fewer
// parameters.
std::pair<CurveFamily, RateQualityCurve> select_family(std::span<const SamplePoint> samples,
                                                       std::span<const CurveFamily> candidates);

struct PeCurve {
    RateQualityCurve curve;
    double fid_max = 0.0;  // 0 for distortion
};

// Prompt-extension curve over the anchors (3 tier points + (true_bpp, 0)),
// domain [smallest tier bpp, true_bpp]. Perception runs the two-pass
// normalization: an initial fit on raw values is evaluated at x = 0 to obtain
// fid_max (unless a shared one is supplied), values are normalized, and the
// final fit runs on the normalized anchors.
PeCurve build_pe_curve(std::span<const SamplePoint> tier_points, double true_bpp, MetricKind metric,
                       std::optional<double> shared_fid_max = std::nullopt);

// ---------------------------------------------------------------------------
// Sample-point measurement over a dataset
// ---------------------------------------------------------------------------

// Cached originals: embeddings and the control Gaussian are computed once.
struct DatasetContext {
    std::vector<imaging::Image> images;
    std::vector<std::vector<double>> features;
    metrics::FeatureGaussian gaussian;
    double true_bpp = 0.0;  // 8 * channels

    static DatasetContext build(std::vector<imaging::Image> images, unsigned jobs = 1);
};

struct MeasureConfig {
    std::vector<int> jpeg_qualities{8, 30, 70};  // jpeg scheme operating points (3)
    std::vector<double> gamma_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    std::uint64_t gen_seed = 1001;   // per-image generation seeds derive from this
    std::uint64_t swap_seed = 2002;  // per-image swap-mask seeds derive from this
    unsigned jobs = 1;
};

// Per-image seeds; shared by PE and PS so gamma = 0 reproduces tier points.
std::uint64_t image_gen_seed(const MeasureConfig& config, Scheme scheme, int operating_point, std::size_t image_index);
std::uint64_t image_swap_seed(const MeasureConfig& config, std::size_t image_index);

// The decoded (or generated) image for one operating point of a scheme:
// latent tier for GenAI, quality index for Jpeg.
imaging::Image reconstruct(const imaging::Image& original, Scheme scheme, int operating_point,
                           std::uint64_t gen_seed, const MeasureConfig& config);

// Mean prompt bpp of an operating point over the dataset.
double tier_bpp(const DatasetContext& ctx, Scheme scheme, int operating_point, const MeasureConfig& config);

// Three PE tier points for a scheme; perception values are raw set-level FID.
std::vector<SamplePoint> measure_pe_points(const DatasetContext& ctx, Scheme scheme, MetricKind metric,
                                           const MeasureConfig& config);

// PS samples for one tier across the gamma grid. Abscissa L_c = L_p + gamma*L.
std::vector<SamplePoint> measure_ps_points(const DatasetContext& ctx, Scheme scheme, int operating_point,
                                           MetricKind metric, const MeasureConfig& config);

// Measures PS samples for a tier and fits the best family; domain
// [tier bpp, tier bpp + L]. Perception values are normalized with fid_max.
RateQualityCurve build_ps_curve(const DatasetContext& ctx, Scheme scheme, int operating_point, MetricKind metric,
                                const MeasureConfig& config, std::optional<double> fid_max,
                                std::span<const CurveFamily> candidates);

// Fit pre-measured PS samples (used by the file-based fit stage).
RateQualityCurve fit_ps_from_samples(std::span<const SamplePoint> samples, double true_bpp, MetricKind metric,
                                     std::optional<double> fid_max, std::span<const CurveFamily> candidates);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

// CSV: comment lines ("# ..."), header "bpp,value,metric,scheme,strategy".
std::string samples_to_csv(std::span<const SamplePoint> samples, const std::string& comment);
std::vector<SamplePoint> samples_from_csv(const std::string& text);

nlohmann::json curve_to_json(const RateQualityCurve& curve, Scheme scheme, Strategy strategy,
                             const std::string& samples_hash);
RateQualityCurve curve_from_json(const nlohmann::json& j);

}  // namespace genflow::ratequality
