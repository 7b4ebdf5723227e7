#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include <json.hpp>

#include "tomomip/core.hpp"
#include "tomomip/projector.hpp"
#include "tomomip/rng.hpp"

namespace tomomip {

/// Elliptical phantom with two circular holes; all lengths are fractions
/// of the image side.
struct PhantomSpec {
    int side = 64;
    double center_x = 0.5, center_y = 0.5;
    double semi_axis_x = 0.35, semi_axis_y = 0.25;
    struct Hole {
        double center_x, center_y, radius;
    };
    std::array<Hole, 2> holes{{{0.38, 0.5, 0.06}, {0.62, 0.5, 0.06}}};
    double material_value = 255.0;

    void validate() const {
        if (side < 1)
            throw std::invalid_argument("PhantomSpec: side must be >= 1");
        if (material_value <= 0.0)
            throw std::invalid_argument("PhantomSpec: material_value must be > 0");
        for (const Hole& h : holes) {
            double dx = (h.center_x - center_x) / semi_axis_x;
            double dy = (h.center_y - center_y) / semi_axis_y;
            double margin = h.radius / std::min(semi_axis_x, semi_axis_y);
            if (std::sqrt(dx * dx + dy * dy) + margin >= 1.0)
                throw std::invalid_argument("PhantomSpec: hole not strictly inside ellipse");
        }
    }
};

/// Binary phantom: omega inside the ellipse and outside both holes, else 0.
/// Membership is evaluated at pixel centers.
inline Image generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    Image img(spec.side, spec.side);
    for (int row = 0; row < spec.side; ++row) {
        for (int col = 0; col < spec.side; ++col) {
            double x = (col + 0.5) / spec.side;
            double y = (row + 0.5) / spec.side;
            double ex = (x - spec.center_x) / spec.semi_axis_x;
            double ey = (y - spec.center_y) / spec.semi_axis_y;
            if (ex * ex + ey * ey > 1.0)
                continue;
            bool in_hole = false;
            for (const auto& h : spec.holes) {
                double hx = x - h.center_x, hy = y - h.center_y;
                if (hx * hx + hy * hy <= h.radius * h.radius) {
                    in_hole = true;
                    break;
                }
            }
            if (!in_hole)
                img.at(row, col) = spec.material_value;
        }
    }
    return img;
}

/// Shot-noise model: expected counts `dose` at the maximum bin.
struct NoiseSpec {
    double dose = 1e4;
    std::uint64_t seed = 0;

    void validate() const {
        if (dose <= 0.0)
            throw std::invalid_argument("NoiseSpec: dose must be > 0");
    }
};

/**
 * Replaces every bin p_i by Poisson(dose * p_i / p_ref) * p_ref / dose with
 * p_ref = max_i p_i. Deterministic given the seed: each bin draws from its
 * own counter stream, so the result does not depend on evaluation order.
 */
inline Sinogram apply_poisson_noise(const Sinogram& p, const NoiseSpec& spec) {
    spec.validate();
    Sinogram out = p;
    double p_ref = 0.0;
    for (double v : p.values) {
        if (v < 0.0)
            throw std::invalid_argument("apply_poisson_noise: negative sinogram value");
        p_ref = std::max(p_ref, v);
    }
    if (p_ref == 0.0)
        return out;
    const double unit = p_ref / spec.dose;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        CounterRng rng(spec.seed, i);
        out.values[i] = static_cast<double>(rng.poisson(p.values[i] / unit)) * unit;
    }
    return out;
}

/// Restricts a sinogram to the target geometry's angles (order preserved).
inline Sinogram subsample_angles(const Sinogram& full, const ProjectionGeometry& target) {
    Sinogram out(target.angles_deg, full.detector_count);
    for (std::size_t t = 0; t < target.angles_deg.size(); ++t) {
        std::size_t src = full.angles_deg.size();
        for (std::size_t a = 0; a < full.angles_deg.size(); ++a) {
            if (std::abs(full.angles_deg[a] - target.angles_deg[t]) <= 1e-9) {
                src = a;
                break;
            }
        }
        if (src == full.angles_deg.size())
            throw std::invalid_argument("subsample_angles: angle not present in full set");
        std::copy_n(full.values.begin() + src * full.detector_count, full.detector_count,
                    out.values.begin() + t * full.detector_count);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Raw image / sinogram files: JSON sidecar + little-endian f64 payload
// ---------------------------------------------------------------------------

namespace detail {

inline void write_f64_payload(const std::string& path, const std::vector<double>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open " + path);
    for (double v : data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        unsigned char buf[8];
        for (int i = 0; i < 8; ++i)
            buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
        out.write(reinterpret_cast<const char*>(buf), 8);
    }
    if (!out)
        throw std::runtime_error("write failed for " + path);
}

inline std::vector<double> read_f64_payload(const std::string& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        unsigned char buf[8];
        in.read(reinterpret_cast<char*>(buf), 8);
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b)
            bits |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
        std::memcpy(&data[i], &bits, 8);
    }
    if (!in)
        throw std::runtime_error("truncated payload " + path);
    return data;
}

} // namespace detail

/// Writes stem.img.json + stem.img.bin (lossless raw format).
inline void save_image(const Image& img, const std::string& stem) {
    nlohmann::json meta{{"width", img.width}, {"height", img.height}, {"dtype", "f64"}};
    std::ofstream js(stem + ".img.json");
    if (!js)
        throw std::runtime_error("cannot open " + stem + ".img.json");
    js << meta.dump(2) << '\n';
    detail::write_f64_payload(stem + ".img.bin", img.pixels);
}

inline Image load_image(const std::string& stem) {
    std::ifstream js(stem + ".img.json");
    if (!js)
        throw std::runtime_error("cannot open " + stem + ".img.json");
    nlohmann::json meta = nlohmann::json::parse(js);
    if (meta.value("dtype", "") != "f64")
        throw std::runtime_error("unsupported image dtype in " + stem);
    int w = meta.at("width").get<int>();
    int h = meta.at("height").get<int>();
    if (w <= 0 || h <= 0 || static_cast<std::int64_t>(w) * h > (1LL << 31))
        throw std::runtime_error("image dimensions out of range in " + stem);
    Image img(w, h);
    img.pixels = detail::read_f64_payload(stem + ".img.bin",
                                          static_cast<std::size_t>(w) * h);
    return img;
}

/// Writes stem.sino.json + stem.sino.bin.
inline void save_sinogram(const Sinogram& sino, const std::string& stem) {
    nlohmann::json meta{{"angles_deg", sino.angles_deg},
                        {"detector_count", sino.detector_count},
                        {"dtype", "f64"}};
    std::ofstream js(stem + ".sino.json");
    if (!js)
        throw std::runtime_error("cannot open " + stem + ".sino.json");
    js << meta.dump(2) << '\n';
    detail::write_f64_payload(stem + ".sino.bin", sino.values);
}

inline Sinogram load_sinogram(const std::string& stem) {
    std::ifstream js(stem + ".sino.json");
    if (!js)
        throw std::runtime_error("cannot open " + stem + ".sino.json");
    nlohmann::json meta = nlohmann::json::parse(js);
    Sinogram sino(meta.at("angles_deg").get<std::vector<double>>(),
                  meta.at("detector_count").get<int>());
    sino.values = detail::read_f64_payload(stem + ".sino.bin", sino.size());
    return sino;
}

// ---------------------------------------------------------------------------
// PNG export (grayscale, 8 or 16 bit); the maximum pixel maps to full range
// ---------------------------------------------------------------------------

namespace detail {

inline void png_chunk(std::ofstream& out, const char type[4],
                      const std::vector<unsigned char>& data) {
    auto be32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
        out.write(reinterpret_cast<char*>(b), 4);
    };
    be32(static_cast<std::uint32_t>(data.size()));
    out.write(type, 4);
    if (!data.empty())
        out.write(reinterpret_cast<const char*>(data.data()), data.size());
    std::uint32_t crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty())
        crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    be32(crc);
}

} // namespace detail

inline void export_png(const Image& img, const std::string& path, int bit_depth = 8) {
    if (bit_depth != 8 && bit_depth != 16)
        throw std::invalid_argument("export_png: bit depth must be 8 or 16");
    const double fmax = img.max_pixel();
    const double full = bit_depth == 8 ? 255.0 : 65535.0;
    const double scale = fmax > 0.0 ? full / fmax : 0.0;

    const int bytes_per_pixel = bit_depth / 8;
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<std::size_t>(img.height) * (1 + img.width * bytes_per_pixel));
    for (int row = 0; row < img.height; ++row) {
        raw.push_back(0); // filter: none
        for (int col = 0; col < img.width; ++col) {
            auto v = static_cast<std::uint32_t>(std::lround(img.at(row, col) * scale));
            if (bit_depth == 16)
                raw.push_back(static_cast<unsigned char>(v >> 8));
            raw.push_back(static_cast<unsigned char>(v & 0xff));
        }
    }

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("export_png: deflate failed");
    compressed.resize(bound);

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("export_png: cannot open " + path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    out.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<unsigned char> ihdr(13);
    auto put_be32 = [&](std::size_t pos, std::uint32_t v) {
        ihdr[pos] = static_cast<unsigned char>(v >> 24);
        ihdr[pos + 1] = static_cast<unsigned char>(v >> 16);
        ihdr[pos + 2] = static_cast<unsigned char>(v >> 8);
        ihdr[pos + 3] = static_cast<unsigned char>(v);
    };
    put_be32(0, static_cast<std::uint32_t>(img.width));
    put_be32(4, static_cast<std::uint32_t>(img.height));
    ihdr[8] = static_cast<unsigned char>(bit_depth);
    ihdr[9] = 0;  // grayscale
    ihdr[10] = 0; // deflate
    ihdr[11] = 0; // default filtering
    ihdr[12] = 0; // no interlace
    detail::png_chunk(out, "IHDR", ihdr);
    detail::png_chunk(out, "IDAT", compressed);
    detail::png_chunk(out, "IEND", {});
    if (!out)
        throw std::runtime_error("export_png: write failed for " + path);
}

} // namespace tomomip
