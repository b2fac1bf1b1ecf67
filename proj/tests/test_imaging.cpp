#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "genflow/imaging.hpp"
#include "genflow/metrics.hpp"
#include "oracles.hpp"

using namespace genflow::imaging;

namespace {

Image constant_image(int w, int h, int channels, std::uint8_t value) {
    Image img = Image::create(w, h, channels);
    std::fill(img.samples.begin(), img.samples.end(), value);
    return img;
}

double sample_variance(const Image& img) {
    double mean = 0.0;
    for (auto s : img.samples) mean += s;
    mean /= double(img.samples.size());
    double var = 0.0;
    for (auto s : img.samples) var += (s - mean) * (s - mean);
    return var / double(img.samples.size());
}

}  // namespace

TEST_CASE("dataset generation is deterministic per seed") {
    const auto a = generate_dataset(2, 64, 64, 7);
    const auto b = generate_dataset(2, 64, 64, 7);
    REQUIRE(a.size() == 2);
    CHECK(a[0].samples == b[0].samples);
    CHECK(a[1].samples == b[1].samples);

    const auto c = generate_dataset(1, 64, 64, 8);
    CHECK(a[0].samples != c[0].samples);
}

TEST_CASE("dataset images are non-degenerate") {
    const auto images = generate_dataset(256, 32, 32, 11);
    for (const auto& img : images) CHECK(sample_variance(img) > 0.0);
    CHECK_THROWS_AS(generate_dataset(0, 64, 64, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_dataset(1, 4, 64, 1), std::invalid_argument);
}

TEST_CASE("jpeg-like: constant gray stays below 0.1 bpp at any quality") {
    const Image gray = constant_image(64, 64, 1, 128);
    for (int q : {1, 10, 50, 90, 100}) {
        const EncodedPrompt p = jpeg_like_encode(gray, q);
        CHECK(p.bpp < 0.1);  // DC-only blocks
        const Image back = jpeg_like_decode(p);
        CHECK(back.samples == gray.samples);
    }
}

TEST_CASE("jpeg-like: bpp grows with quality, distortion shrinks") {
    const auto images = generate_dataset(24, 64, 64, 3);

    double prev_bpp = -1.0;
    double prev_mse = 1e18;
    for (int q : {10, 30, 50, 70, 90}) {
        double bpp = 0.0, err = 0.0;
        for (const auto& img : images) {
            const EncodedPrompt p = jpeg_like_encode(img, q);
            bpp += p.bpp;
            err += genflow::metrics::mse(img, jpeg_like_decode(p));
        }
        bpp /= double(images.size());
        err /= double(images.size());
        CHECK(bpp > prev_bpp);      // strictly increasing on average
        CHECK(err <= prev_mse);     // round-trip error non-increasing
        prev_bpp = bpp;
        prev_mse = err;
    }
}

TEST_CASE("jpeg-like: quality 100 is near lossless") {
    const auto images = generate_dataset(8, 64, 64, 5);
    for (const auto& img : images) {
        const Image back = jpeg_like_decode(jpeg_like_encode(img, 100));
        CHECK(genflow::metrics::normalized_mse(img, back) < 0.005);
        CHECK(back.width == img.width);
        CHECK(back.height == img.height);
    }
}

TEST_CASE("jpeg-like: decode is deterministic and strict on garbage") {
    const auto images = generate_dataset(1, 48, 40, 9);  // non multiple of 8 height path
    const EncodedPrompt p = jpeg_like_encode(images[0], 60);
    const Image once = jpeg_like_decode(p);
    const Image twice = jpeg_like_decode(p);
    CHECK(once.samples == twice.samples);

    SUBCASE("out-of-range quality argument") {
        CHECK_THROWS_AS(jpeg_like_encode(images[0], 0), std::invalid_argument);
        CHECK_THROWS_AS(jpeg_like_encode(images[0], 101), std::invalid_argument);
    }
    SUBCASE("truncated payload reports the byte offset") {
        EncodedPrompt clipped = p;
        clipped.payload.resize(clipped.payload.size() / 2);
        clipped = EncodedPrompt::make(clipped.codec, clipped.width, clipped.height, clipped.channels,
                                      clipped.seed, std::move(clipped.payload));
        try {
            jpeg_like_decode(clipped);
            FAIL("expected DecodeError");
        } catch (const DecodeError& e) {
            CHECK(e.byte_offset <= clipped.payload.size());
            CHECK(std::string(e.what()).find("payload byte") != std::string::npos);
        }
    }
    SUBCASE("bad quality byte") {
        EncodedPrompt corrupt = p;
        corrupt.payload[0] = 0;
        CHECK_THROWS_AS(jpeg_like_decode(corrupt), DecodeError);
    }
}

TEST_CASE("latent tiers are deterministic and well separated in bpp") {
    const auto images = generate_dataset(64, 64, 64, 21);
    double mean_bpp[3] = {0, 0, 0};
    const LatentTier tiers[3] = {LatentTier::Low, LatentTier::Med, LatentTier::High};
    for (const auto& img : images)
        for (int t = 0; t < 3; ++t) mean_bpp[t] += latent_encode(img, tiers[t]).bpp / double(images.size());

    CHECK(mean_bpp[0] < mean_bpp[1]);
    CHECK(mean_bpp[1] < mean_bpp[2]);
    CHECK(mean_bpp[1] >= 1.5 * mean_bpp[0]);  // neighbors differ by at least 50%
    CHECK(mean_bpp[2] >= 1.5 * mean_bpp[1]);

    const EncodedPrompt a = latent_encode(images[0], LatentTier::Med);
    const EncodedPrompt b = latent_encode(images[0], LatentTier::Med);
    CHECK(a.payload == b.payload);

    // tier low on 64x64: at most (64/8)^2 * channels * 2 bytes
    const EncodedPrompt low = latent_encode(images[0], LatentTier::Low);
    CHECK(low.payload.size() <= 8 * 8 * 3 * 2);
}

TEST_CASE("generative decode honors the seeding guarantee") {
    const auto images = generate_dataset(1, 64, 64, 33);
    const EncodedPrompt prompt = latent_encode(images[0], LatentTier::Med);

    const Image g1 = generative_decode(prompt, 5);
    const Image g2 = generative_decode(prompt, 5);
    CHECK(g1.samples == g2.samples);  // same prompt + same seed -> bit identical

    const Image g3 = generative_decode(prompt, 6);
    CHECK(genflow::metrics::mse(g1, g3) > 0.0);  // stochastic across seeds

    const EncodedPrompt jp = jpeg_like_encode(images[0], 50);
    CHECK_THROWS_AS(generative_decode(jp, 1), std::invalid_argument);
}

TEST_CASE("generative reconstruction improves with tier") {
    const auto images = generate_dataset(48, 64, 64, 55);
    double err[3] = {0, 0, 0};
    const LatentTier tiers[3] = {LatentTier::Low, LatentTier::Med, LatentTier::High};
    for (std::size_t i = 0; i < images.size(); ++i)
        for (int t = 0; t < 3; ++t) {
            const Image gen = generative_decode(latent_encode(images[i], tiers[t]), 1000 + i);
            err[t] += genflow::metrics::mse(images[i], gen) / double(images.size());
        }
    CHECK(err[0] > err[1]);
    CHECK(err[1] > err[2]);
}

TEST_CASE("pixel swap endpoints and nesting") {
    const auto images = generate_dataset(2, 32, 32, 77);
    const Image& original = images[0];
    const Image generated = generative_decode(latent_encode(original, LatentTier::Low), 3);

    CHECK(pixel_swap(generated, original, 0.0, 9).samples == generated.samples);
    CHECK(pixel_swap(generated, original, 1.0, 9).samples == original.samples);

    // Nested masks make the error monotone per image, exactly.
    double prev = 1e18;
    for (double gamma : {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0}) {
        const double err = genflow::metrics::mse(original, pixel_swap(generated, original, gamma, 9));
        CHECK(err <= prev);
        prev = err;
    }

    const Image small = Image::create(16, 16, 3);
    CHECK_THROWS_AS(pixel_swap(small, original, 0.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(pixel_swap(generated, original, 1.5, 1), std::invalid_argument);
}

TEST_CASE("swap masks nest across gamma for a fixed seed") {
    const SwapMask mask = SwapMask::from_seed(123, 1024);
    CHECK(mask.prefix_len(0.0) == 0);
    CHECK(mask.prefix_len(1.0) == 1024);
    CHECK(mask.prefix_len(0.33) == 337);  // floor(0.33 * 1024)
    const SwapMask again = SwapMask::from_seed(123, 1024);
    CHECK(mask.order == again.order);  // prefix of gamma1 is a subset of gamma2's by construction
}

TEST_CASE("combined bpp is Eq-of-line exact") {
    CHECK(combined_bpp(0.5, 0.0, 24.0) == 0.5);
    CHECK(combined_bpp(0.5, 1.0, 24.0) == 24.5);
    CHECK(combined_bpp(1.2, 0.25, 24.0) == doctest::Approx(7.2).epsilon(1e-15));
    CHECK_THROWS_AS(combined_bpp(-0.1, 0.5, 24.0), std::invalid_argument);
    CHECK_THROWS_AS(combined_bpp(0.5, -0.1, 24.0), std::invalid_argument);
    CHECK_THROWS_AS(combined_bpp(0.5, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("bpp accounting") {
    std::vector<std::uint8_t> payload(512, 0xab);
    const EncodedPrompt p = EncodedPrompt::make(CodecId::LatentLow, 64, 64, 3, 0, payload);
    CHECK(p.bpp == 1.0);  // 4096 bits over 4096 pixels
    CHECK(bpp_of(p) == p.bpp);

    const EncodedPrompt empty = EncodedPrompt::make(CodecId::LatentLow, 64, 64, 3, 0, {});
    CHECK(empty.bpp == 0.0);

    CHECK(raw_bpp(3) == 24.0);
    CHECK(raw_bpp(1) == 8.0);
}

TEST_CASE("PNM and prompt container round trips") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "genflow_imaging_test";
    fs::create_directories(dir);

    const auto images = generate_dataset(1, 40, 24, 99);
    write_pnm(images[0], dir / "color.ppm");
    const Image color = read_pnm(dir / "color.ppm");
    CHECK(color.samples == images[0].samples);

    const Image gray = constant_image(16, 16, 1, 77);
    write_pnm(gray, dir / "gray.pgm");
    CHECK(read_pnm(dir / "gray.pgm").samples == gray.samples);

    EncodedPrompt prompt = latent_encode(images[0], LatentTier::High);
    prompt.seed = 0xdeadbeefcafef00dull;
    const auto bytes = serialize_prompt(prompt);
    CHECK(bytes.size() == 16 + prompt.payload.size());
    const EncodedPrompt back = deserialize_prompt(bytes);
    CHECK(back.codec == prompt.codec);
    CHECK(back.width == prompt.width);
    CHECK(back.height == prompt.height);
    CHECK(back.channels == prompt.channels);
    CHECK(back.seed == prompt.seed);
    CHECK(back.payload == prompt.payload);
    CHECK(back.bpp == prompt.bpp);

    std::vector<std::uint8_t> junk = {'X', 'Y', 0, 0};
    CHECK_THROWS_AS(deserialize_prompt(junk), DecodeError);

    fs::remove_all(dir);
}
