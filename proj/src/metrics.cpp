#include "genflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace genflow::metrics {

std::string metric_name(MetricKind kind) {
    return kind == MetricKind::Distortion ? "distortion" : "perception";
}

MetricKind metric_from_name(const std::string& name) {
    if (name == "distortion") return MetricKind::Distortion;
    if (name == "perception") return MetricKind::Perception;
    throw std::invalid_argument("unknown metric '" + name + "'");
}

double mse(const imaging::Image& a, const imaging::Image& b) {
    if (!a.same_dims(b)) throw std::invalid_argument("mse: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        const double d = static_cast<double>(a.samples[i]) - static_cast<double>(b.samples[i]);
        acc += d * d;
    }
    return acc / static_cast<double>(a.samples.size());
}

imaging::Image invert(const imaging::Image& image) {
    imaging::Image out = image;
    for (auto& s : out.samples) s = static_cast<std::uint8_t>(255 - s);
    return out;
}

double normalized_mse(const imaging::Image& original, const imaging::Image& candidate) {
    if (!original.same_dims(candidate)) throw std::invalid_argument("normalized_mse: dimension mismatch");
    // Denominator is >= 1 for any 8-bit image: (255 - 2s)^2 is an odd square.
    const double max_mse = mse(original, invert(original));
    const double value = mse(original, candidate) / max_mse;
    return std::clamp(value, 0.0, 1.0);
}

// ===========================================================================
// Feature embedding
// ===========================================================================

namespace {

std::vector<double> luminance(const imaging::Image& img) {
    std::vector<double> lum(img.pixel_count());
    const int ch = img.channels;
    for (std::size_t p = 0; p < lum.size(); ++p) {
        double acc = 0.0;
        for (int c = 0; c < ch; ++c) acc += img.samples[p * ch + c];
        lum[p] = acc / ch;
    }
    return lum;
}

}  // namespace

std::vector<double> feature_embed(const imaging::Image& image) {
    const int w = image.width, h = image.height;
    const std::vector<double> lum = luminance(image);
    std::vector<double> feat;
    feat.reserve(kFeatureDim);

    // 8x8 grid cell means, overall mean removed; first 48 cells in row-major
    // order. Cell x-range [gx*w/8, (gx+1)*w/8), same for y.
    double cell_mean[64];
    double overall = 0.0;
    for (int gy = 0; gy < 8; ++gy) {
        for (int gx = 0; gx < 8; ++gx) {
            const int x0 = gx * w / 8, x1 = (gx + 1) * w / 8;
            const int y0 = gy * h / 8, y1 = (gy + 1) * h / 8;
            double acc = 0.0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) acc += lum[static_cast<std::size_t>(y) * w + x];
            cell_mean[gy * 8 + gx] = acc / ((x1 - x0) * (y1 - y0));
            overall += cell_mean[gy * 8 + gx];
        }
    }
    overall /= 64.0;
    for (int i = 0; i < 48; ++i) feat.push_back((cell_mean[i] - overall) / 255.0);

    // Gradient-magnitude histogram, 8 bins with fixed edges, as fractions.
    double bins[8] = {0};
    std::size_t total = 0;
    for (int y = 0; y + 1 < h; ++y) {
        for (int x = 0; x + 1 < w; ++x) {
            const double gx = lum[static_cast<std::size_t>(y) * w + x + 1] - lum[static_cast<std::size_t>(y) * w + x];
            const double gy = lum[static_cast<std::size_t>(y + 1) * w + x] - lum[static_cast<std::size_t>(y) * w + x];
            const double mag = std::sqrt(gx * gx + gy * gy);
            static constexpr double edges[7] = {1, 2, 4, 8, 16, 32, 64};
            int bin = 7;
            for (int e = 0; e < 7; ++e) {
                if (mag < edges[e]) {
                    bin = e;
                    break;
                }
            }
            bins[bin] += 1.0;
            ++total;
        }
    }
    for (double b : bins) feat.push_back(b / static_cast<double>(total));

    // Blockwise luminance standard deviation on a 4x2 grid.
    for (int gy = 0; gy < 2; ++gy) {
        for (int gx = 0; gx < 4; ++gx) {
            const int x0 = gx * w / 4, x1 = (gx + 1) * w / 4;
            const int y0 = gy * h / 2, y1 = (gy + 1) * h / 2;
            double acc = 0.0, acc2 = 0.0;
            std::size_t n = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    const double v = lum[static_cast<std::size_t>(y) * w + x];
                    acc += v;
                    acc2 += v * v;
                    ++n;
                }
            const double mean = acc / static_cast<double>(n);
            const double var = std::max(0.0, acc2 / static_cast<double>(n) - mean * mean);
            feat.push_back(std::sqrt(var) / 255.0);
        }
    }
    return feat;
}

// ===========================================================================
// Gaussian fitting and Frechet distance
// ===========================================================================

FeatureGaussian gaussian_fit(const std::vector<std::vector<double>>& features) {
    if (features.size() < 2) throw std::invalid_argument("gaussian_fit: need at least 2 vectors");
    const int dim = static_cast<int>(features.front().size());
    for (const auto& f : features)
        if (static_cast<int>(f.size()) != dim) throw std::invalid_argument("gaussian_fit: inconsistent dimensions");

    FeatureGaussian g;
    g.dim = dim;
    g.mean.assign(static_cast<std::size_t>(dim), 0.0);
    for (const auto& f : features)
        for (int i = 0; i < dim; ++i) g.mean[static_cast<std::size_t>(i)] += f[static_cast<std::size_t>(i)];
    const double n = static_cast<double>(features.size());
    for (auto& m : g.mean) m /= n;

    g.cov.assign(static_cast<std::size_t>(dim) * dim, 0.0);
    for (const auto& f : features) {
        for (int i = 0; i < dim; ++i) {
            const double di = f[static_cast<std::size_t>(i)] - g.mean[static_cast<std::size_t>(i)];
            for (int j = i; j < dim; ++j) {
                const double dj = f[static_cast<std::size_t>(j)] - g.mean[static_cast<std::size_t>(j)];
                g.cov[static_cast<std::size_t>(i) * dim + j] += di * dj;
            }
        }
    }
    for (int i = 0; i < dim; ++i)
        for (int j = i; j < dim; ++j) {
            const double v = g.cov[static_cast<std::size_t>(i) * dim + j] / (n - 1.0);
            g.cov[static_cast<std::size_t>(i) * dim + j] = v;
            g.cov[static_cast<std::size_t>(j) * dim + i] = v;
        }

    // Shrinkage below the full-rank sample count keeps sqrtm well-conditioned.
    if (features.size() < static_cast<std::size_t>(dim) + 1)
        for (int i = 0; i < dim; ++i) g.cov[static_cast<std::size_t>(i) * dim + i] += 1e-6;
    return g;
}

namespace {

// Cyclic Jacobi eigendecomposition for symmetric matrices. Deterministic
// sweep order; converges when the off-diagonal Frobenius norm drops below
// 1e-12 (features are scaled to order one, so the absolute threshold is
// attainable in double precision).
void jacobi_eigen(std::vector<double> a, int n, std::vector<double>& eigvals, std::vector<double>& eigvecs) {
    eigvecs.assign(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) eigvecs[static_cast<std::size_t>(i) * n + i] = 1.0;

    auto off_norm = [&] {
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double v = a[static_cast<std::size_t>(i) * n + j];
                acc += 2.0 * v * v;
            }
        return std::sqrt(acc);
    };

    double prev = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < 128; ++sweep) {
        const double off = off_norm();
        if (off < 1e-13 || off >= prev) break;  // past the contract floor or stalled
        prev = off;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a[static_cast<std::size_t>(p) * n + q];
                if (apq == 0.0) continue;
                const double app = a[static_cast<std::size_t>(p) * n + p];
                const double aqq = a[static_cast<std::size_t>(q) * n + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a[static_cast<std::size_t>(k) * n + p];
                    const double akq = a[static_cast<std::size_t>(k) * n + q];
                    a[static_cast<std::size_t>(k) * n + p] = c * akp - s * akq;
                    a[static_cast<std::size_t>(k) * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a[static_cast<std::size_t>(p) * n + k];
                    const double aqk = a[static_cast<std::size_t>(q) * n + k];
                    a[static_cast<std::size_t>(p) * n + k] = c * apk - s * aqk;
                    a[static_cast<std::size_t>(q) * n + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = eigvecs[static_cast<std::size_t>(k) * n + p];
                    const double vkq = eigvecs[static_cast<std::size_t>(k) * n + q];
                    eigvecs[static_cast<std::size_t>(k) * n + p] = c * vkp - s * vkq;
                    eigvecs[static_cast<std::size_t>(k) * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    eigvals.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) eigvals[static_cast<std::size_t>(i)] = a[static_cast<std::size_t>(i) * n + i];
}

// Floors eigenvalues at zero; entries below a relative threshold collapse to
// zero so that sqrt noise on near-null directions cannot break symmetry.
void clamp_spectrum(std::vector<double>& eigvals) {
    double top = 0.0;
    for (double e : eigvals) top = std::max(top, e);
    const double floor_at = top * 1e-12;
    for (auto& e : eigvals) e = e <= floor_at ? 0.0 : e;
}

// Symmetric PSD square root via eigendecomposition, eigenvalues clamped at 0.
std::vector<double> sqrtm_psd(const std::vector<double>& m, int n) {
    std::vector<double> eigvals, v;
    jacobi_eigen(m, n, eigvals, v);
    clamp_spectrum(eigvals);
    for (auto& e : eigvals) e = std::sqrt(e);
    std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k)
                acc += v[static_cast<std::size_t>(i) * n + k] * eigvals[static_cast<std::size_t>(k)] *
                       v[static_cast<std::size_t>(j) * n + k];
            out[static_cast<std::size_t>(i) * n + j] = acc;
            out[static_cast<std::size_t>(j) * n + i] = acc;
        }
    return out;
}

std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, int n) {
    std::vector<double> out(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
            const double aik = a[static_cast<std::size_t>(i) * n + k];
            if (aik == 0.0) continue;
            for (int j = 0; j < n; ++j)
                out[static_cast<std::size_t>(i) * n + j] += aik * b[static_cast<std::size_t>(k) * n + j];
        }
    return out;
}

}  // namespace

double frechet_distance(const FeatureGaussian& g1, const FeatureGaussian& g2) {
    if (g1.dim != g2.dim) throw std::invalid_argument("frechet_distance: dimension mismatch");
    const int n = g1.dim;
    for (double v : g1.cov)
        if (!std::isfinite(v)) throw std::invalid_argument("frechet_distance: non-finite covariance entry");
    for (double v : g2.cov)
        if (!std::isfinite(v)) throw std::invalid_argument("frechet_distance: non-finite covariance entry");

    double mean_term = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = g1.mean[static_cast<std::size_t>(i)] - g2.mean[static_cast<std::size_t>(i)];
        mean_term += d * d;
    }

    const std::vector<double> s1_half = sqrtm_psd(g1.cov, n);
    std::vector<double> inner = matmul(matmul(s1_half, g2.cov, n), s1_half, n);
    for (int i = 0; i < n; ++i)  // symmetrize fp residue before the second root
        for (int j = i + 1; j < n; ++j) {
            const double v = 0.5 * (inner[static_cast<std::size_t>(i) * n + j] +
                                    inner[static_cast<std::size_t>(j) * n + i]);
            inner[static_cast<std::size_t>(i) * n + j] = v;
            inner[static_cast<std::size_t>(j) * n + i] = v;
        }

    std::vector<double> eigvals, v;
    jacobi_eigen(inner, n, eigvals, v);
    clamp_spectrum(eigvals);
    double trace_sqrt = 0.0;
    for (double e : eigvals) trace_sqrt += std::sqrt(e);

    double trace_term = 0.0;
    for (int i = 0; i < n; ++i)
        trace_term += g1.cov[static_cast<std::size_t>(i) * n + i] + g2.cov[static_cast<std::size_t>(i) * n + i];
    trace_term -= 2.0 * trace_sqrt;
    if (trace_term < 0.0) trace_term = 0.0;  // fp residue

    return std::max(0.0, mean_term + trace_term);
}

double fid(const std::vector<imaging::Image>& real, const std::vector<imaging::Image>& generated) {
    if (real.empty() || generated.empty()) throw std::invalid_argument("fid: image lists must be non-empty");
    std::vector<std::vector<double>> fr, fg;
    fr.reserve(real.size());
    fg.reserve(generated.size());
    for (const auto& img : real) fr.push_back(feature_embed(img));
    for (const auto& img : generated) fg.push_back(feature_embed(img));
    return frechet_distance(gaussian_fit(fr), gaussian_fit(fg));
}

double normalize_fid(double value, double fid_max) {
    if (!(fid_max > 0.0)) throw std::invalid_argument("normalize_fid: fid_max must be > 0");
    return std::min(value / fid_max, 1.0);
}

}  // namespace genflow::metrics
