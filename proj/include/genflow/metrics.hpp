#pragma once

#include <string>
#include <vector>

#include "genflow/imaging.hpp"

namespace genflow::metrics {

enum class MetricKind { Distortion, Perception };

std::string metric_name(MetricKind kind);
MetricKind metric_from_name(const std::string& name);

// Version string of the fixed feature extractor; embedded in every metric
// artifact, changing it invalidates cached sample points.
inline constexpr const char* kFeatureExtractorVersion = "fx-v1";
inline constexpr int kFeatureDim = 64;

// Mean squared sample difference in squared 8-bit units.
double mse(const imaging::Image& a, const imaging::Image& b);

imaging::Image invert(const imaging::Image& image);

// mse(original, candidate) / mse(original, invert(original)), clamped to [0,1].
double normalized_mse(const imaging::Image& original, const imaging::Image& candidate);

// Fixed 64-dim embedding (see docs/features.md): 48 mean-removed 8x8
// luminance grid cells, 8 gradient-magnitude histogram fractions, 8 blockwise
// luminance standard deviations. All components scaled to roughly [-1, 1].
std::vector<double> feature_embed(const imaging::Image& image);

struct FeatureGaussian {
    int dim = 0;
    std::vector<double> mean;  // dim
    std::vector<double> cov;   // dim x dim, row-major, symmetric
};

// Sample mean and covariance (denominator N-1), symmetrized. With fewer than
// dim+1 samples a shrinkage term 1e-6*I keeps the matrix square root
// well-conditioned.
FeatureGaussian gaussian_fit(const std::vector<std::vector<double>>& features);

// ||mu1-mu2||^2 + Tr(S1 + S2 - 2*(S1^1/2 S2 S1^1/2)^1/2), square roots by
// symmetric Jacobi eigendecomposition with eigenvalue clamping at zero.
double frechet_distance(const FeatureGaussian& g1, const FeatureGaussian& g2);

double fid(const std::vector<imaging::Image>& real, const std::vector<imaging::Image>& generated);

// min(value / fid_max, 1); fid_max comes from the rate-perception fit
// extrapolated to prompt size zero.
double normalize_fid(double value, double fid_max);

struct QualityScore {
    MetricKind kind = MetricKind::Distortion;
    double raw = 0.0;
    double normalized = 0.0;  // in [0,1], 0 means perfect
};

}  // namespace genflow::metrics
