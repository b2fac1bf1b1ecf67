#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace genflow::imaging {

// 8-bit image, row-major, channel-interleaved. Minimum 8x8 (codec block size).
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> samples;

    static Image create(int width, int height, int channels);

    std::uint8_t at(int x, int y, int c) const {
        return samples[static_cast<std::size_t>((y * width + x) * channels + c)];
    }
    std::uint8_t& at(int x, int y, int c) {
        return samples[static_cast<std::size_t>((y * width + x) * channels + c)];
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    bool same_dims(const Image& other) const {
        return width == other.width && height == other.height && channels == other.channels;
    }
};

enum class CodecId : std::uint8_t { JpegLike = 0, LatentLow = 1, LatentMed = 2, LatentHigh = 3 };
enum class LatentTier { Low, Med, High };

std::string codec_name(CodecId id);
CodecId codec_for_tier(LatentTier tier);
std::string tier_name(LatentTier tier);

// Codec bitstream, plus the rate bookkeeping the flow model consumes.
struct EncodedPrompt {
    CodecId codec = CodecId::JpegLike;
    int width = 0;
    int height = 0;
    int channels = 1;
    std::uint64_t seed = 0;  // generation seed carried with the prompt
    std::vector<std::uint8_t> payload;
    double bpp = 0.0;  // 8 * |payload| / (width * height), fixed at construction

    static EncodedPrompt make(CodecId codec, int width, int height, int channels,
                              std::uint64_t seed, std::vector<std::uint8_t> payload);
};

// Decode failure; carries the payload byte offset where decoding stopped.
struct DecodeError : std::runtime_error {
    DecodeError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at payload byte " + std::to_string(offset) + ")"),
          byte_offset(offset) {}
    std::size_t byte_offset;
};

// Procedural dataset: gradients + periodic textures + hard-edged shapes with
// low-level grain, deterministic per master seed. Images are 3-channel.
std::vector<Image> generate_dataset(int count, int width, int height, std::uint64_t master_seed);

// Baseline transform codec: 8x8 block DCT, quality-scaled quantization,
// zig-zag + run-length + fixed canonical prefix codes (tables in docs/codec.md).
EncodedPrompt jpeg_like_encode(const Image& image, int quality);
Image jpeg_like_decode(const EncodedPrompt& prompt);

// Emulated latent codec: tiered downsample (8x/4x/2x) with coarse sample
// quantization (4/5/6 bits).
EncodedPrompt latent_encode(const Image& image, LatentTier tier);

// Deterministic base reconstruction (upsample + smoothing) plus seeded
// high-frequency detail synthesis; same prompt + same seed => same image.
Image generative_decode(const EncodedPrompt& prompt, std::uint64_t seed);
inline Image generative_decode(const EncodedPrompt& prompt) { return generative_decode(prompt, prompt.seed); }

// Seed-derived pixel permutation; prefixes are nested across gamma.
struct SwapMask {
    std::vector<std::uint32_t> order;

    static SwapMask from_seed(std::uint64_t seed, std::size_t pixel_count);
    std::size_t prefix_len(double gamma) const;  // floor(gamma * pixel_count)
};

// Copies floor(gamma * w * h) whole pixels (all channels) from original into
// generated, positions given by the SwapMask prefix for `seed`.
Image pixel_swap(const Image& generated, const Image& original, double gamma, std::uint64_t seed);

// L_c = L_p + gamma * L.
double combined_bpp(double prompt_bpp, double gamma, double true_bpp);

double bpp_of(const EncodedPrompt& prompt);

// Raw 8-bit content size in bpp (the rate-quality upper anchor abscissa).
inline double raw_bpp(int channels) { return 8.0 * channels; }

// Binary PGM (P5) for 1-channel, PPM (P6) for 3-channel, maxval 255.
void write_pnm(const Image& image, const std::filesystem::path& path);
Image read_pnm(const std::filesystem::path& path);

// 16-byte container header (magic, codec id, channels, dims, seed) + payload.
std::vector<std::uint8_t> serialize_prompt(const EncodedPrompt& prompt);
EncodedPrompt deserialize_prompt(std::span<const std::uint8_t> bytes);

}  // namespace genflow::imaging
