#include "genflow/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "genflow/rng.hpp"
#include "genflow/util.hpp"

namespace genflow::imaging {

Image Image::create(int width, int height, int channels) {
    if (width < 8 || height < 8)
        throw std::invalid_argument("image dimensions must be at least 8x8");
    if (channels != 1 && channels != 3)
        throw std::invalid_argument("image must have 1 or 3 channels");
    Image img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.samples.assign(static_cast<std::size_t>(width) * height * channels, 0);
    return img;
}

std::string codec_name(CodecId id) {
    switch (id) {
        case CodecId::JpegLike: return "jpeg-like";
        case CodecId::LatentLow: return "latent-low";
        case CodecId::LatentMed: return "latent-med";
        case CodecId::LatentHigh: return "latent-high";
    }
    return "unknown";
}

CodecId codec_for_tier(LatentTier tier) {
    switch (tier) {
        case LatentTier::Low: return CodecId::LatentLow;
        case LatentTier::Med: return CodecId::LatentMed;
        case LatentTier::High: return CodecId::LatentHigh;
    }
    return CodecId::LatentLow;
}

std::string tier_name(LatentTier tier) {
    switch (tier) {
        case LatentTier::Low: return "low";
        case LatentTier::Med: return "med";
        case LatentTier::High: return "high";
    }
    return "unknown";
}

EncodedPrompt EncodedPrompt::make(CodecId codec, int width, int height, int channels,
                                  std::uint64_t seed, std::vector<std::uint8_t> payload) {
    if (width < 8 || height < 8) throw std::invalid_argument("prompt dimensions must be at least 8x8");
    if (channels != 1 && channels != 3) throw std::invalid_argument("prompt channels must be 1 or 3");
    EncodedPrompt p;
    p.codec = codec;
    p.width = width;
    p.height = height;
    p.channels = channels;
    p.seed = seed;
    p.payload = std::move(payload);
    p.bpp = 8.0 * static_cast<double>(p.payload.size()) /
            (static_cast<double>(width) * static_cast<double>(height));
    return p;
}

double bpp_of(const EncodedPrompt& prompt) {
    return 8.0 * static_cast<double>(prompt.payload.size()) /
           (static_cast<double>(prompt.width) * static_cast<double>(prompt.height));
}

double combined_bpp(double prompt_bpp, double gamma, double true_bpp) {
    if (prompt_bpp < 0.0) throw std::invalid_argument("combined_bpp: prompt bpp must be >= 0");
    if (!(true_bpp > 0.0)) throw std::invalid_argument("combined_bpp: content bpp must be > 0");
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("combined_bpp: gamma must be in [0,1]");
    return prompt_bpp + gamma * true_bpp;
}

// ===========================================================================
// Procedural dataset
// ===========================================================================

namespace {

std::uint8_t clamp_u8(double v) {
    return static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, std::floor(v + 0.5))));
}

void paint_gradient(Image& img, Rng& rng) {
    double c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = rng.uniform(20.0, 235.0);
        c1[c] = rng.uniform(20.0, 235.0);
    }
    const double theta = rng.uniform(0.0, 6.283185307179586);
    const double dx = std::cos(theta), dy = std::sin(theta);
    const double radial = rng.uniform() < 0.35 ? 1.0 : 0.0;
    const double cx = rng.uniform(0.2, 0.8) * img.width;
    const double cy = rng.uniform(0.2, 0.8) * img.height;
    const double diag = std::sqrt(double(img.width) * img.width + double(img.height) * img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double t;
            if (radial > 0.5) {
                t = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (0.5 * diag);
            } else {
                t = 0.5 + (dx * (x - img.width / 2.0) + dy * (y - img.height / 2.0)) / diag;
            }
            t = std::min(1.0, std::max(0.0, t));
            for (int c = 0; c < img.channels; ++c)
                img.at(x, y, c) = clamp_u8(c0[c] + (c1[c] - c0[c]) * t);
        }
    }
}

void add_sinusoids(Image& img, Rng& rng) {
    const int waves = rng.range(1, 2);
    for (int k = 0; k < waves; ++k) {
        const double amp = rng.uniform(8.0, 34.0);
        const double cycles = rng.uniform(2.0, 11.0);
        const double phi = rng.uniform(0.0, 6.283185307179586);
        const double orient = rng.uniform(0.0, 6.283185307179586);
        const double fx = std::cos(orient) * cycles / img.width;
        const double fy = std::sin(orient) * cycles / img.width;
        double weight[3];
        for (int c = 0; c < 3; ++c) weight[c] = rng.uniform(0.45, 1.0);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                const double s = amp * std::sin(6.283185307179586 * (fx * x + fy * y) + phi);
                for (int c = 0; c < img.channels; ++c) {
                    const double v = img.at(x, y, c) + weight[c] * s;
                    img.at(x, y, c) = clamp_u8(v);
                }
            }
        }
    }
}

void paint_shapes(Image& img, Rng& rng) {
    const int count = rng.range(2, 4);
    for (int k = 0; k < count; ++k) {
        double color[3];
        for (int c = 0; c < 3; ++c) color[c] = rng.uniform(0.0, 255.0);
        const bool disk = rng.uniform() < 0.4;
        if (disk) {
            const double r = rng.uniform(img.width / 12.0, img.width / 4.0);
            const double cx = rng.uniform(0.0, double(img.width));
            const double cy = rng.uniform(0.0, double(img.height));
            const int x0 = std::max(0, int(cx - r) - 1), x1 = std::min(img.width - 1, int(cx + r) + 1);
            const int y0 = std::max(0, int(cy - r) - 1), y1 = std::min(img.height - 1, int(cy + r) + 1);
            for (int y = y0; y <= y1; ++y)
                for (int x = x0; x <= x1; ++x)
                    if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r)
                        for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = clamp_u8(color[c]);
        } else {
            const int bw = rng.range(img.width / 8, img.width / 2);
            const int bh = rng.range(img.height / 8, img.height / 2);
            const int x0 = rng.range(0, std::max(0, img.width - bw));
            const int y0 = rng.range(0, std::max(0, img.height - bh));
            for (int y = y0; y < std::min(img.height, y0 + bh); ++y)
                for (int x = x0; x < std::min(img.width, x0 + bw); ++x)
                    for (int c = 0; c < img.channels; ++c) img.at(x, y, c) = clamp_u8(color[c]);
        }
    }
}

void add_grain(Image& img, std::uint64_t grain_seed) {
    std::size_t idx = 0;
    for (auto& s : img.samples) {
        const double n = bits_to_unit_double(mix64(grain_seed, idx++)) * 4.0 - 2.0;
        s = clamp_u8(s + n);
    }
}

}  // namespace

std::vector<Image> generate_dataset(int count, int width, int height, std::uint64_t master_seed) {
    if (count < 1) throw std::invalid_argument("dataset count must be >= 1");
    if (width < 8 || height < 8) throw std::invalid_argument("dataset dimensions must be at least 8x8");
    std::vector<Image> images;
    images.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const std::uint64_t seed = mix64(master_seed, static_cast<std::uint64_t>(i));
        Rng rng(seed);
        Image img = Image::create(width, height, 3);
        paint_gradient(img, rng);
        add_sinusoids(img, rng);
        paint_shapes(img, rng);
        add_grain(img, mix64(seed, 0xfeedbeef));
        images.push_back(std::move(img));
    }
    return images;
}

// ===========================================================================
// Block transform codec (jpeg-like)
// ===========================================================================

namespace {

// Base quantization table (widely used luminance table), scaled by quality.
constexpr std::array<int, 64> kBaseQuant = {
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99};

// Raster index of the k-th coefficient in zig-zag scan order.
constexpr std::array<int, 64> kZigZag = {
    0, 1, 8, 16, 9, 2, 3, 10,
    17, 24, 32, 25, 18, 11, 4, 5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13, 6, 7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63};

// Fixed canonical prefix-code tables (see docs/codec.md, version jc-v1):
// counts per code length 1..16, then symbol values in code order.
constexpr std::array<std::uint8_t, 16> kDcBits = {0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
constexpr std::array<std::uint8_t, 12> kDcVals = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};

constexpr std::array<std::uint8_t, 16> kAcBits = {0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 125};
constexpr std::array<std::uint8_t, 162> kAcVals = {
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12,
    0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07,
    0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08,
    0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52, 0xd1, 0xf0,
    0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0a, 0x16,
    0x17, 0x18, 0x19, 0x1a, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2a, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39,
    0x3a, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49,
    0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
    0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69,
    0x6a, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79,
    0x7a, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98,
    0x99, 0x9a, 0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7,
    0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6,
    0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5,
    0xc6, 0xc7, 0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4,
    0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2,
    0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea,
    0xf1, 0xf2, 0xf3, 0xf4, 0xf5, 0xf6, 0xf7, 0xf8,
    0xf9, 0xfa};

struct PrefixCode {
    std::array<std::uint16_t, 256> code{};
    std::array<std::uint8_t, 256> length{};
};

// Canonical code assignment: increasing length, symbols in table order.
template <std::size_t N>
PrefixCode build_encoder(const std::array<std::uint8_t, 16>& bits, const std::array<std::uint8_t, N>& vals) {
    PrefixCode table;
    std::uint16_t code = 0;
    std::size_t k = 0;
    for (int len = 1; len <= 16; ++len) {
        for (int i = 0; i < bits[static_cast<std::size_t>(len - 1)]; ++i) {
            const std::uint8_t sym = vals[k++];
            table.code[sym] = code;
            table.length[sym] = static_cast<std::uint8_t>(len);
            ++code;
        }
        code = static_cast<std::uint16_t>(code << 1);
    }
    return table;
}

struct PrefixDecoder {
    std::array<std::int32_t, 17> mincode{};
    std::array<std::int32_t, 17> maxcode{};  // -1 where no codes of that length
    std::array<std::int32_t, 17> valptr{};
    const std::uint8_t* vals = nullptr;
};

template <std::size_t N>
PrefixDecoder build_decoder(const std::array<std::uint8_t, 16>& bits, const std::array<std::uint8_t, N>& vals) {
    PrefixDecoder d;
    d.vals = vals.data();
    std::int32_t code = 0;
    std::int32_t k = 0;
    for (int len = 1; len <= 16; ++len) {
        if (bits[static_cast<std::size_t>(len - 1)] == 0) {
            d.maxcode[static_cast<std::size_t>(len)] = -1;
        } else {
            d.valptr[static_cast<std::size_t>(len)] = k;
            d.mincode[static_cast<std::size_t>(len)] = code;
            k += bits[static_cast<std::size_t>(len - 1)];
            code += bits[static_cast<std::size_t>(len - 1)];
            d.maxcode[static_cast<std::size_t>(len)] = code - 1;
        }
        code <<= 1;
    }
    return d;
}

const PrefixCode& dc_encoder() { static const PrefixCode t = build_encoder(kDcBits, kDcVals); return t; }
const PrefixCode& ac_encoder() { static const PrefixCode t = build_encoder(kAcBits, kAcVals); return t; }
const PrefixDecoder& dc_decoder() { static const PrefixDecoder t = build_decoder(kDcBits, kDcVals); return t; }
const PrefixDecoder& ac_decoder() { static const PrefixDecoder t = build_decoder(kAcBits, kAcVals); return t; }

class BitWriter {
public:
    void put(std::uint32_t value, int nbits) {
        for (int i = nbits - 1; i >= 0; --i) {
            acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((value >> i) & 1));
            if (++filled_ == 8) {
                bytes_.push_back(acc_);
                acc_ = 0;
                filled_ = 0;
            }
        }
    }
    std::vector<std::uint8_t> finish() {
        if (filled_ > 0) {
            acc_ = static_cast<std::uint8_t>((acc_ << (8 - filled_)) | ((1u << (8 - filled_)) - 1));
            bytes_.push_back(acc_);
            acc_ = 0;
            filled_ = 0;
        }
        return std::move(bytes_);
    }

private:
    std::vector<std::uint8_t> bytes_;
    std::uint8_t acc_ = 0;
    int filled_ = 0;
};

class BitReader {
public:
    BitReader(std::span<const std::uint8_t> bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

    int get_bit() {
        if (pos_ >= bytes_.size()) throw DecodeError("bitstream exhausted", pos_);
        const int bit = (bytes_[pos_] >> (7 - fill_)) & 1;
        if (++fill_ == 8) {
            fill_ = 0;
            ++pos_;
        }
        return bit;
    }
    std::uint32_t get_bits(int n) {
        std::uint32_t v = 0;
        for (int i = 0; i < n; ++i) v = (v << 1) | static_cast<std::uint32_t>(get_bit());
        return v;
    }
    std::size_t byte_offset() const { return pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_;
    int fill_ = 0;
};

int decode_symbol(BitReader& reader, const PrefixDecoder& table) {
    std::int32_t code = reader.get_bit();
    for (int len = 1; len <= 16; ++len) {
        if (table.maxcode[static_cast<std::size_t>(len)] >= 0 &&
            code <= table.maxcode[static_cast<std::size_t>(len)]) {
            const std::int32_t idx = table.valptr[static_cast<std::size_t>(len)] +
                                     (code - table.mincode[static_cast<std::size_t>(len)]);
            return table.vals[idx];
        }
        if (len < 16) code = (code << 1) | reader.get_bit();
    }
    throw DecodeError("invalid prefix code", reader.byte_offset());
}

int magnitude_category(int v) {
    int a = std::abs(v), s = 0;
    while (a) {
        a >>= 1;
        ++s;
    }
    return s;
}

int extend_value(std::uint32_t raw, int size) {
    if (size == 0) return 0;
    const std::int32_t v = static_cast<std::int32_t>(raw);
    return v < (1 << (size - 1)) ? v - (1 << size) + 1 : v;
}

std::array<int, 64> quant_table(int quality) {
    const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
    std::array<int, 64> q{};
    for (int i = 0; i < 64; ++i)
        q[static_cast<std::size_t>(i)] =
            std::clamp((kBaseQuant[static_cast<std::size_t>(i)] * scale + 50) / 100, 1, 255);
    return q;
}

// Orthonormal DCT-II basis, F = C f C^T.
const std::array<std::array<double, 8>, 8>& dct_basis() {
    static const auto basis = [] {
        std::array<std::array<double, 8>, 8> c{};
        const double pi = 3.14159265358979323846;
        for (int u = 0; u < 8; ++u) {
            const double cu = u == 0 ? std::sqrt(0.5) : 1.0;
            for (int x = 0; x < 8; ++x)
                c[static_cast<std::size_t>(u)][static_cast<std::size_t>(x)] =
                    0.5 * cu * std::cos((2 * x + 1) * u * pi / 16.0);
        }
        return c;
    }();
    return basis;
}

void forward_dct(const double in[64], double out[64]) {
    const auto& c = dct_basis();
    double tmp[64];
    for (int u = 0; u < 8; ++u)
        for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int y = 0; y < 8; ++y) acc += c[u][y] * in[y * 8 + x];
            tmp[u * 8 + x] = acc;
        }
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int x = 0; x < 8; ++x) acc += tmp[u * 8 + x] * c[v][x];
            out[u * 8 + v] = acc;
        }
}

void inverse_dct(const double in[64], double out[64]) {
    const auto& c = dct_basis();
    double tmp[64];
    for (int y = 0; y < 8; ++y)
        for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int u = 0; u < 8; ++u) acc += c[u][y] * in[u * 8 + v];
            tmp[y * 8 + v] = acc;
        }
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int v = 0; v < 8; ++v) acc += tmp[y * 8 + v] * c[v][x];
            out[y * 8 + x] = acc;
        }
}

// Channel plane with edge replication to block-aligned dimensions.
std::vector<double> padded_plane(const Image& img, int channel, int& pw, int& ph) {
    pw = (img.width + 7) / 8 * 8;
    ph = (img.height + 7) / 8 * 8;
    std::vector<double> plane(static_cast<std::size_t>(pw) * ph);
    for (int y = 0; y < ph; ++y) {
        const int sy = std::min(y, img.height - 1);
        for (int x = 0; x < pw; ++x) {
            const int sx = std::min(x, img.width - 1);
            plane[static_cast<std::size_t>(y) * pw + x] = img.at(sx, sy, channel) - 128.0;
        }
    }
    return plane;
}

}  // namespace

EncodedPrompt jpeg_like_encode(const Image& image, int quality) {
    if (quality < 1 || quality > 100) throw std::invalid_argument("quality must be in [1,100]");
    if (image.width < 8 || image.height < 8 || image.samples.size() != image.pixel_count() * image.channels)
        throw std::invalid_argument("malformed image");

    const auto q = quant_table(quality);
    const PrefixCode& dc = dc_encoder();
    const PrefixCode& ac = ac_encoder();

    BitWriter writer;
    for (int ch = 0; ch < image.channels; ++ch) {
        int pw = 0, ph = 0;
        const std::vector<double> plane = padded_plane(image, ch, pw, ph);
        int dc_pred = 0;
        double block[64], coeffs[64];
        for (int by = 0; by < ph; by += 8) {
            for (int bx = 0; bx < pw; bx += 8) {
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x)
                        block[y * 8 + x] = plane[static_cast<std::size_t>(by + y) * pw + (bx + x)];
                forward_dct(block, coeffs);

                int zz[64];
                for (int k = 0; k < 64; ++k) {
                    const int raster = kZigZag[static_cast<std::size_t>(k)];
                    zz[k] = static_cast<int>(
                        std::lround(coeffs[raster] / q[static_cast<std::size_t>(raster)]));
                }

                const int diff = zz[0] - dc_pred;
                dc_pred = zz[0];
                const int dsize = magnitude_category(diff);
                writer.put(dc.code[static_cast<std::size_t>(dsize)], dc.length[static_cast<std::size_t>(dsize)]);
                if (dsize > 0) {
                    const std::uint32_t raw = diff >= 0
                                                  ? static_cast<std::uint32_t>(diff)
                                                  : static_cast<std::uint32_t>(diff + (1 << dsize) - 1);
                    writer.put(raw, dsize);
                }

                int run = 0;
                for (int k = 1; k < 64; ++k) {
                    if (zz[k] == 0) {
                        ++run;
                        continue;
                    }
                    while (run >= 16) {
                        writer.put(ac.code[0xf0], ac.length[0xf0]);
                        run -= 16;
                    }
                    const int asize = magnitude_category(zz[k]);
                    const int sym = (run << 4) | asize;
                    writer.put(ac.code[static_cast<std::size_t>(sym)], ac.length[static_cast<std::size_t>(sym)]);
                    const std::uint32_t raw = zz[k] >= 0
                                                  ? static_cast<std::uint32_t>(zz[k])
                                                  : static_cast<std::uint32_t>(zz[k] + (1 << asize) - 1);
                    writer.put(raw, asize);
                    run = 0;
                }
                if (run > 0) writer.put(ac.code[0x00], ac.length[0x00]);  // EOB
            }
        }
    }

    std::vector<std::uint8_t> payload;
    payload.push_back(static_cast<std::uint8_t>(quality));
    std::vector<std::uint8_t> bits = writer.finish();
    payload.insert(payload.end(), bits.begin(), bits.end());
    return EncodedPrompt::make(CodecId::JpegLike, image.width, image.height, image.channels, 0, std::move(payload));
}

Image jpeg_like_decode(const EncodedPrompt& prompt) {
    if (prompt.codec != CodecId::JpegLike)
        throw std::invalid_argument("jpeg_like_decode: prompt codec is " + codec_name(prompt.codec));
    if (prompt.payload.empty()) throw DecodeError("empty payload", 0);
    const int quality = prompt.payload[0];
    if (quality < 1 || quality > 100) throw DecodeError("invalid quality byte", 0);

    const auto q = quant_table(quality);
    const PrefixDecoder& dc = dc_decoder();
    const PrefixDecoder& ac = ac_decoder();

    Image out = Image::create(prompt.width, prompt.height, prompt.channels);
    BitReader reader(prompt.payload, 1);

    const int pw = (prompt.width + 7) / 8 * 8;
    const int ph = (prompt.height + 7) / 8 * 8;
    std::vector<double> plane(static_cast<std::size_t>(pw) * ph);
    for (int ch = 0; ch < prompt.channels; ++ch) {
        int dc_pred = 0;
        double coeffs[64], block[64];
        for (int by = 0; by < ph; by += 8) {
            for (int bx = 0; bx < pw; bx += 8) {
                int zz[64] = {0};
                const int dsize = decode_symbol(reader, dc);
                if (dsize > 11) throw DecodeError("invalid DC category", reader.byte_offset());
                dc_pred += extend_value(reader.get_bits(dsize), dsize);
                zz[0] = dc_pred;
                int k = 1;
                while (k < 64) {
                    const int sym = decode_symbol(reader, ac);
                    if (sym == 0x00) break;  // EOB
                    if (sym == 0xf0) {
                        k += 16;
                        if (k > 64) throw DecodeError("zero run overflows block", reader.byte_offset());
                        continue;
                    }
                    const int run = sym >> 4;
                    const int asize = sym & 0xf;
                    k += run;
                    if (asize == 0 || k >= 64)
                        throw DecodeError("coefficient index overflows block", reader.byte_offset());
                    zz[k] = extend_value(reader.get_bits(asize), asize);
                    ++k;
                }
                for (int i = 0; i < 64; ++i) {
                    const int raster = kZigZag[static_cast<std::size_t>(i)];
                    coeffs[raster] = static_cast<double>(zz[i]) * q[static_cast<std::size_t>(raster)];
                }
                inverse_dct(coeffs, block);
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x)
                        plane[static_cast<std::size_t>(by + y) * pw + (bx + x)] = block[y * 8 + x];
            }
        }
        for (int y = 0; y < prompt.height; ++y)
            for (int x = 0; x < prompt.width; ++x)
                out.at(x, y, ch) = clamp_u8(plane[static_cast<std::size_t>(y) * pw + x] + 128.0);
    }
    return out;
}

// ===========================================================================
// Emulated latent codec
// ===========================================================================

namespace {

struct TierParams {
    int factor;
    int bits;
    double noise_amp;
};

TierParams tier_params(LatentTier tier) {
    switch (tier) {
        case LatentTier::Low: return {8, 4, 14.0};
        case LatentTier::Med: return {4, 5, 8.0};
        case LatentTier::High: return {2, 6, 4.0};
    }
    return {8, 4, 14.0};
}

LatentTier tier_of(CodecId codec) {
    switch (codec) {
        case CodecId::LatentLow: return LatentTier::Low;
        case CodecId::LatentMed: return LatentTier::Med;
        case CodecId::LatentHigh: return LatentTier::High;
        default: throw std::invalid_argument("prompt is not a latent tier");
    }
}

class BitPacker {
public:
    void put(std::uint32_t value, int nbits) {
        for (int i = nbits - 1; i >= 0; --i) {
            acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((value >> i) & 1));
            if (++filled_ == 8) {
                bytes_.push_back(acc_);
                filled_ = 0;
                acc_ = 0;
            }
        }
    }
    std::vector<std::uint8_t> finish() {
        if (filled_ > 0) bytes_.push_back(static_cast<std::uint8_t>(acc_ << (8 - filled_)));
        return std::move(bytes_);
    }

private:
    std::vector<std::uint8_t> bytes_;
    std::uint8_t acc_ = 0;
    int filled_ = 0;
};

// 3x3 binomial smoothing with clamped edges.
std::vector<double> blur3(const std::vector<double>& in, int w, int h) {
    std::vector<double> out(in.size());
    auto sample = [&](int x, int y) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return in[static_cast<std::size_t>(y) * w + x];
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = 4 * sample(x, y) + 2 * (sample(x - 1, y) + sample(x + 1, y) + sample(x, y - 1) + sample(x, y + 1)) +
                             sample(x - 1, y - 1) + sample(x + 1, y - 1) + sample(x - 1, y + 1) + sample(x + 1, y + 1);
            out[static_cast<std::size_t>(y) * w + x] = v / 16.0;
        }
    return out;
}

}  // namespace

EncodedPrompt latent_encode(const Image& image, LatentTier tier) {
    const TierParams params = tier_params(tier);
    const int ws = (image.width + params.factor - 1) / params.factor;
    const int hs = (image.height + params.factor - 1) / params.factor;
    const int levels = 1 << params.bits;
    const double step = 256.0 / levels;

    BitPacker packer;
    for (int c = 0; c < image.channels; ++c) {
        for (int j = 0; j < hs; ++j) {
            for (int i = 0; i < ws; ++i) {
                const int x0 = i * params.factor, x1 = std::min(image.width, x0 + params.factor);
                const int y0 = j * params.factor, y1 = std::min(image.height, y0 + params.factor);
                double acc = 0.0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) acc += image.at(x, y, c);
                const double mean = acc / ((x1 - x0) * (y1 - y0));
                const int level = std::min(levels - 1, static_cast<int>(mean / step));
                packer.put(static_cast<std::uint32_t>(level), params.bits);
            }
        }
    }
    return EncodedPrompt::make(codec_for_tier(tier), image.width, image.height, image.channels, 0, packer.finish());
}

Image generative_decode(const EncodedPrompt& prompt, std::uint64_t seed) {
    const LatentTier tier = tier_of(prompt.codec);
    const TierParams params = tier_params(tier);
    const int w = prompt.width, h = prompt.height;
    const int ws = (w + params.factor - 1) / params.factor;
    const int hs = (h + params.factor - 1) / params.factor;
    const int levels = 1 << params.bits;
    const double step = 256.0 / levels;

    const std::size_t expected_bits = static_cast<std::size_t>(ws) * hs * prompt.channels * params.bits;
    if (prompt.payload.size() != (expected_bits + 7) / 8)
        throw DecodeError("latent payload size mismatch", prompt.payload.size());

    Image out = Image::create(w, h, prompt.channels);
    std::size_t bitpos = 0;
    auto next_level = [&]() {
        std::uint32_t v = 0;
        for (int i = 0; i < params.bits; ++i) {
            v = (v << 1) | ((prompt.payload[bitpos >> 3] >> (7 - (bitpos & 7))) & 1);
            ++bitpos;
        }
        return v;
    };

    for (int c = 0; c < prompt.channels; ++c) {
        std::vector<double> low(static_cast<std::size_t>(ws) * hs);
        for (double& v : low) v = (next_level() + 0.5) * step;

        // Bilinear upsample from cell centers.
        std::vector<double> base(static_cast<std::size_t>(w) * h);
        for (int y = 0; y < h; ++y) {
            const double v = (y + 0.5) * hs / h - 0.5;
            const int j0 = std::clamp(static_cast<int>(std::floor(v)), 0, hs - 1);
            const int j1 = std::min(j0 + 1, hs - 1);
            const double fy = std::clamp(v - j0, 0.0, 1.0);
            for (int x = 0; x < w; ++x) {
                const double u = (x + 0.5) * ws / w - 0.5;
                const int i0 = std::clamp(static_cast<int>(std::floor(u)), 0, ws - 1);
                const int i1 = std::min(i0 + 1, ws - 1);
                const double fx = std::clamp(u - i0, 0.0, 1.0);
                const double top = low[static_cast<std::size_t>(j0) * ws + i0] * (1 - fx) +
                                   low[static_cast<std::size_t>(j0) * ws + i1] * fx;
                const double bot = low[static_cast<std::size_t>(j1) * ws + i0] * (1 - fx) +
                                   low[static_cast<std::size_t>(j1) * ws + i1] * fx;
                base[static_cast<std::size_t>(y) * w + x] = top * (1 - fy) + bot * fy;
            }
        }
        base = blur3(base, w, h);

        // Seeded detail: high-pass shaped noise, amplitude per tier.
        std::vector<double> noise(static_cast<std::size_t>(w) * h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::uint64_t idx = (static_cast<std::uint64_t>(c) * h + y) * static_cast<std::uint64_t>(w) + x;
                noise[static_cast<std::size_t>(y) * w + x] = bits_to_unit_double(mix64(seed, idx)) * 2.0 - 1.0;
            }
        const std::vector<double> smooth = blur3(noise, w, h);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t k = static_cast<std::size_t>(y) * w + x;
                out.at(x, y, c) = clamp_u8(base[k] + params.noise_amp * (noise[k] - smooth[k]));
            }
    }
    return out;
}

// ===========================================================================
// Pixel swapping
// ===========================================================================

SwapMask SwapMask::from_seed(std::uint64_t seed, std::size_t pixel_count) {
    SwapMask mask;
    mask.order.resize(pixel_count);
    for (std::size_t i = 0; i < pixel_count; ++i) mask.order[i] = static_cast<std::uint32_t>(i);
    Rng rng(seed);
    for (std::size_t i = pixel_count; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(mask.order[i - 1], mask.order[j]);
    }
    return mask;
}

std::size_t SwapMask::prefix_len(double gamma) const {
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must be in [0,1]");
    return static_cast<std::size_t>(std::floor(gamma * static_cast<double>(order.size())));
}

Image pixel_swap(const Image& generated, const Image& original, double gamma, std::uint64_t seed) {
    if (!generated.same_dims(original)) throw std::invalid_argument("pixel_swap: dimension mismatch");
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("pixel_swap: gamma must be in [0,1]");
    Image out = generated;
    const SwapMask mask = SwapMask::from_seed(seed, generated.pixel_count());
    const std::size_t n = mask.prefix_len(gamma);
    const int ch = generated.channels;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t p = static_cast<std::size_t>(mask.order[k]) * ch;
        for (int c = 0; c < ch; ++c) out.samples[p + c] = original.samples[p + c];
    }
    return out;
}

// ===========================================================================
// File I/O
// ===========================================================================

void write_pnm(const Image& image, const std::filesystem::path& path) {
    std::ofstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open for writing: " + path.string());
    file << (image.channels == 1 ? "P5" : "P6") << "\n"
         << image.width << " " << image.height << "\n255\n";
    file.write(reinterpret_cast<const char*>(image.samples.data()),
               static_cast<std::streamsize>(image.samples.size()));
    if (!file) throw std::runtime_error("write failed: " + path.string());
}

namespace {

int read_pnm_int(std::istream& in, const std::filesystem::path& path) {
    // Skips whitespace and '#' comments per the PNM header grammar.
    int c = in.get();
    while (c == '#' || std::isspace(c)) {
        if (c == '#')
            while (c != '\n' && c != EOF) c = in.get();
        c = in.get();
    }
    int value = 0;
    bool any = false;
    while (std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw std::runtime_error("malformed PNM header: " + path.string());
    return value;
}

}  // namespace

Image read_pnm(const std::filesystem::path& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open: " + path.string());
    char m0 = 0, m1 = 0;
    file.get(m0);
    file.get(m1);
    int channels = 0;
    if (m0 == 'P' && m1 == '5') channels = 1;
    else if (m0 == 'P' && m1 == '6') channels = 3;
    else throw std::runtime_error("unsupported PNM magic in " + path.string());
    const int w = read_pnm_int(file, path);
    const int h = read_pnm_int(file, path);
    const int maxval = read_pnm_int(file, path);
    if (maxval != 255) throw std::runtime_error("unsupported maxval (want 255): " + path.string());
    Image img = Image::create(w, h, channels);
    file.read(reinterpret_cast<char*>(img.samples.data()), static_cast<std::streamsize>(img.samples.size()));
    if (file.gcount() != static_cast<std::streamsize>(img.samples.size()))
        throw std::runtime_error("truncated PNM data: " + path.string());
    return img;
}

namespace {
constexpr std::size_t kHeaderSize = 16;
constexpr std::uint8_t kMagic0 = 'G';
constexpr std::uint8_t kMagic1 = 'P';

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}
}  // namespace

std::vector<std::uint8_t> serialize_prompt(const EncodedPrompt& prompt) {
    if (prompt.width > 0xffff || prompt.height > 0xffff)
        throw std::invalid_argument("prompt dimensions exceed container limit");
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderSize + prompt.payload.size());
    out.push_back(kMagic0);
    out.push_back(kMagic1);
    out.push_back(static_cast<std::uint8_t>(prompt.codec));
    out.push_back(static_cast<std::uint8_t>(prompt.channels));
    put_u16(out, static_cast<std::uint16_t>(prompt.width));
    put_u16(out, static_cast<std::uint16_t>(prompt.height));
    put_u64(out, prompt.seed);
    out.insert(out.end(), prompt.payload.begin(), prompt.payload.end());
    return out;
}

EncodedPrompt deserialize_prompt(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderSize) throw DecodeError("container shorter than header", bytes.size());
    if (bytes[0] != kMagic0 || bytes[1] != kMagic1) throw DecodeError("bad container magic", 0);
    if (bytes[2] > 3) throw DecodeError("unknown codec id", 2);
    const CodecId codec = static_cast<CodecId>(bytes[2]);
    const int channels = bytes[3];
    const int width = bytes[4] | (bytes[5] << 8);
    const int height = bytes[6] | (bytes[7] << 8);
    std::uint64_t seed = 0;
    for (int i = 0; i < 8; ++i) seed |= static_cast<std::uint64_t>(bytes[8 + i]) << (8 * i);
    std::vector<std::uint8_t> payload(bytes.begin() + kHeaderSize, bytes.end());
    return EncodedPrompt::make(codec, width, height, channels, seed, std::move(payload));
}

}  // namespace genflow::imaging
