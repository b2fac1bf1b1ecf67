#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "genflow/metrics.hpp"
#include "genflow/rng.hpp"
#include "oracles.hpp"

using namespace genflow::metrics;
using genflow::imaging::Image;
using genflow::imaging::LatentTier;

namespace {

Image constant_image(int w, int h, int channels, std::uint8_t value) {
    Image img = Image::create(w, h, channels);
    std::fill(img.samples.begin(), img.samples.end(), value);
    return img;
}

FeatureGaussian gaussian_1d(double mean, double var) {
    FeatureGaussian g;
    g.dim = 1;
    g.mean = {mean};
    g.cov = {var};
    return g;
}

}  // namespace

TEST_CASE("mse basics and oracle agreement") {
    const auto images = genflow::imaging::generate_dataset(4, 32, 32, 13);
    CHECK(mse(images[0], images[0]) == 0.0);

    const Image zeros = constant_image(16, 16, 1, 0);
    const Image full = constant_image(16, 16, 1, 255);
    CHECK(mse(zeros, full) == doctest::Approx(65025.0));

    for (std::size_t i = 0; i + 1 < images.size(); ++i)
        CHECK(mse(images[i], images[i + 1]) ==
              doctest::Approx(oracles::naive_mse(images[i], images[i + 1])).epsilon(1e-9));

    CHECK_THROWS_AS(mse(zeros, constant_image(16, 8, 1, 0)), std::invalid_argument);
}

TEST_CASE("normalized mse endpoints and the half mix") {
    const auto images = genflow::imaging::generate_dataset(6, 32, 32, 29);
    for (const auto& img : images) {
        CHECK(normalized_mse(img, img) == 0.0);
        CHECK(normalized_mse(img, invert(img)) == 1.0);
    }

    // Constant image: every pixel has identical inversion error, so a mix
    // that inverts exactly half the pixels lands on 0.5 exactly.
    const Image base = constant_image(32, 32, 1, 100);
    Image mix = base;
    const Image inv = invert(base);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
            if ((x + y * 32) % 2 == 0) mix.at(x, y, 0) = inv.at(x, y, 0);
    CHECK(normalized_mse(base, mix) == 0.5);

    // Mid-gray constants keep a nonzero denominator (255 - 2s is odd).
    const Image mid = constant_image(16, 16, 1, 127);
    CHECK(normalized_mse(mid, mid) == 0.0);
    CHECK(normalized_mse(mid, invert(mid)) == 1.0);
}

TEST_CASE("feature embedding shape and fixed ordering") {
    const Image flat = constant_image(64, 64, 3, 90);
    const auto f = feature_embed(flat);
    REQUIRE(f.size() == std::size_t(kFeatureDim));

    // Constant image: grid deviations all zero, gradients concentrate in bin 0,
    // block deviations zero.
    for (int i = 0; i < 48; ++i) CHECK(f[std::size_t(i)] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(f[48] == doctest::Approx(1.0));
    for (int i = 49; i < 56; ++i) CHECK(f[std::size_t(i)] == 0.0);
    for (int i = 56; i < 64; ++i) CHECK(f[std::size_t(i)] == doctest::Approx(0.0).epsilon(1e-12));

    const auto again = feature_embed(flat);
    CHECK(f == again);
}

TEST_CASE("mean-removed grid components ignore global brightness") {
    const auto images = genflow::imaging::generate_dataset(3, 64, 64, 31);
    for (const auto& img : images) {
        // Compress toward mid-range so a +10 shift cannot clamp.
        Image squeezed = img;
        for (auto& s : squeezed.samples) s = static_cast<std::uint8_t>(60 + (s * 120) / 255);
        Image shifted = squeezed;
        for (auto& s : shifted.samples) s = static_cast<std::uint8_t>(s + 10);

        const auto fa = feature_embed(squeezed);
        const auto fb = feature_embed(shifted);
        for (int i = 0; i < 48; ++i)
            CHECK(fa[std::size_t(i)] == doctest::Approx(fb[std::size_t(i)]).epsilon(1e-12));
    }
}

TEST_CASE("gaussian fit matches hand computation and the naive oracle") {
    SUBCASE("identical vectors give a zero covariance") {
        const std::vector<std::vector<double>> rows(4, std::vector<double>{1.5, -2.0});
        const FeatureGaussian g = gaussian_fit(rows);
        for (double v : g.cov) CHECK(v == 0.0);
    }
    SUBCASE("2-D hand dataset") {
        const std::vector<std::vector<double>> rows = {{0, 0}, {2, 0}, {0, 2}, {2, 2}};
        const FeatureGaussian g = gaussian_fit(rows);
        CHECK(g.mean[0] == doctest::Approx(1.0));
        CHECK(g.mean[1] == doctest::Approx(1.0));
        CHECK(g.cov[0] == doctest::Approx(4.0 / 3.0));
        CHECK(g.cov[3] == doctest::Approx(4.0 / 3.0));
        CHECK(g.cov[1] == doctest::Approx(0.0));
    }
    SUBCASE("random data matches the two-pass oracle") {
        genflow::Rng rng(404);
        std::vector<std::vector<double>> rows;
        for (int i = 0; i < 40; ++i) {
            std::vector<double> r;
            for (int j = 0; j < 6; ++j) r.push_back(rng.uniform(-3.0, 3.0));
            rows.push_back(std::move(r));
        }
        const FeatureGaussian g = gaussian_fit(rows);
        const auto oracle = oracles::naive_covariance(rows);
        for (std::size_t i = 0; i < oracle.size(); ++i)
            CHECK(g.cov[i] == doctest::Approx(oracle[i]).epsilon(1e-9));
    }
    SUBCASE("shrinkage applies below dim+1 samples") {
        const std::vector<std::vector<double>> rows(3, std::vector<double>(8, 2.0));
        const FeatureGaussian g = gaussian_fit(rows);  // 3 < 9 samples
        for (int i = 0; i < 8; ++i) CHECK(g.cov[std::size_t(i) * 8 + i] == doctest::Approx(1e-6));
    }
    CHECK_THROWS_AS(gaussian_fit({{1.0, 2.0}}), std::invalid_argument);
}

TEST_CASE("frechet distance closed forms") {
    SUBCASE("identical gaussians") {
        const FeatureGaussian g = gaussian_1d(0.7, 2.3);
        CHECK(frechet_distance(g, g) == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("1-D closed form over random gaussians") {
        genflow::Rng rng(505);
        for (int i = 0; i < 100; ++i) {
            const double m1 = rng.uniform(-5, 5), m2 = rng.uniform(-5, 5);
            const double s1 = rng.uniform(0.1, 3.0), s2 = rng.uniform(0.1, 3.0);
            const double expected = (m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2);
            const double got = frechet_distance(gaussian_1d(m1, s1 * s1), gaussian_1d(m2, s2 * s2));
            CHECK(got == doctest::Approx(expected).epsilon(1e-9));
        }
    }
    SUBCASE("diagonal covariances reduce per axis") {
        genflow::Rng rng(606);
        const int d = 5;
        FeatureGaussian g1, g2;
        g1.dim = g2.dim = d;
        g1.cov.assign(d * d, 0.0);
        g2.cov.assign(d * d, 0.0);
        double expected = 0.0;
        for (int i = 0; i < d; ++i) {
            const double m1 = rng.uniform(-2, 2), m2 = rng.uniform(-2, 2);
            const double s1 = rng.uniform(0.2, 2.0), s2 = rng.uniform(0.2, 2.0);
            g1.mean.push_back(m1);
            g2.mean.push_back(m2);
            g1.cov[std::size_t(i) * d + i] = s1 * s1;
            g2.cov[std::size_t(i) * d + i] = s2 * s2;
            expected += (m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2);
        }
        CHECK(frechet_distance(g1, g2) == doctest::Approx(expected).epsilon(1e-9));
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(frechet_distance(gaussian_1d(0, 1), FeatureGaussian{2, {0, 0}, {1, 0, 0, 1}}),
                        std::invalid_argument);
    }
}

TEST_CASE("fid over datasets: identity, positivity, symmetry") {
    const auto real = genflow::imaging::generate_dataset(80, 32, 32, 321);
    CHECK(fid(real, real) == doctest::Approx(0.0).epsilon(1e-12));

    auto perturbed = real;
    for (auto& s : perturbed[0].samples) s = static_cast<std::uint8_t>(255 - s);
    const double d = fid(real, perturbed);
    CHECK(d > 0.0);

    std::vector<Image> generated;
    for (std::size_t i = 0; i < real.size(); ++i)
        generated.push_back(genflow::imaging::generative_decode(
            genflow::imaging::latent_encode(real[i], LatentTier::Low), 900 + i));
    const double ab = fid(real, generated);
    const double ba = fid(generated, real);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
    CHECK(std::abs(ab - ba) < 1e-9);

    CHECK_THROWS_AS(fid({}, real), std::invalid_argument);
}

TEST_CASE("within-set fid sits below cross-set fid") {
    const auto real = genflow::imaging::generate_dataset(256, 32, 32, 888);
    std::vector<Image> generated;
    for (std::size_t i = 0; i < real.size(); ++i)
        generated.push_back(genflow::imaging::generative_decode(
            genflow::imaging::latent_encode(real[i], LatentTier::Low), 4000 + i));

    const std::vector<Image> half_a(generated.begin(), generated.begin() + 128);
    const std::vector<Image> half_b(generated.begin() + 128, generated.end());
    CHECK(fid(half_a, half_b) < fid(real, generated));
}

TEST_CASE("fid normalization clamps at one") {
    CHECK(normalize_fid(0.0, 10.0) == 0.0);
    CHECK(normalize_fid(10.0, 10.0) == 1.0);
    CHECK(normalize_fid(20.0, 10.0) == 1.0);  // measured values may exceed the extrapolated max
    CHECK(normalize_fid(2.5, 10.0) == doctest::Approx(0.25));
    CHECK_THROWS_AS(normalize_fid(1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(normalize_fid(1.0, -2.0), std::invalid_argument);
}
