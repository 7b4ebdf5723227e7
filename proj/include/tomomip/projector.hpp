#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include "tomomip/core.hpp"
#include "tomomip/rng.hpp"

namespace tomomip {

/// Parallel-beam acquisition layout over a square image.
struct ProjectionGeometry {
    std::vector<double> angles_deg;
    int detector_count = 0;
    double detector_spacing = 1.0;
    int image_side = 0;

    std::size_t ray_count() const {
        return angles_deg.size() * static_cast<std::size_t>(detector_count);
    }
};

inline int default_detector_count(int image_side) {
    return static_cast<int>(std::ceil(std::sqrt(2.0) * image_side));
}

/**
 * Equidistant angle set over the available tilt range.
 *
 * Without a missing wedge the angles run over [0, 180): first angle 0,
 * spacing 180/n. With a missing wedge of x degrees they span the closed
 * interval [x/2, 180 - x/2] inclusive of both endpoints.
 */
inline ProjectionGeometry build_geometry(int n_angles, double missing_wedge_deg,
                                         int image_side) {
    if (n_angles < 1)
        throw std::invalid_argument("build_geometry: n_angles must be >= 1");
    if (missing_wedge_deg < 0.0 || missing_wedge_deg >= 180.0)
        throw std::invalid_argument("build_geometry: wedge must be in [0, 180)");
    if (image_side < 1)
        throw std::invalid_argument("build_geometry: image_side must be >= 1");

    ProjectionGeometry geom;
    geom.image_side = image_side;
    geom.detector_count = default_detector_count(image_side);
    geom.angles_deg.reserve(n_angles);
    if (missing_wedge_deg == 0.0) {
        double spacing = 180.0 / n_angles;
        for (int i = 0; i < n_angles; ++i)
            geom.angles_deg.push_back(spacing * i);
    } else {
        double first = missing_wedge_deg / 2.0;
        double last = 180.0 - missing_wedge_deg / 2.0;
        if (n_angles == 1) {
            geom.angles_deg.push_back(first);
        } else {
            double spacing = (last - first) / (n_angles - 1);
            for (int i = 0; i < n_angles; ++i)
                geom.angles_deg.push_back(first + spacing * i);
        }
    }
    return geom;
}

namespace detail {

/// Traces one ray through the [0,side]^2 pixel grid and appends
/// (pixel, chord length) pairs. Siddon-style: exact intersection lengths.
inline void trace_ray(double angle_deg, double detector_offset, int side,
                      std::vector<SparseOperator::Entry>& out, std::uint32_t row) {
    const double rad = angle_deg * 3.14159265358979323846 / 180.0;
    const double dir_x = std::cos(rad), dir_y = std::sin(rad);
    const double cx = side / 2.0, cy = side / 2.0;
    // Detector axis is perpendicular to the ray direction.
    const double px = cx - dir_y * detector_offset;
    const double py = cy + dir_x * detector_offset;

    // Parametric range of the ray inside the bounding box.
    double s_min = -kInfinity, s_max = kInfinity;
    const double eps = 1e-12;
    if (std::abs(dir_x) > eps) {
        double s0 = (0.0 - px) / dir_x, s1 = (side - px) / dir_x;
        s_min = std::max(s_min, std::min(s0, s1));
        s_max = std::min(s_max, std::max(s0, s1));
    } else if (px < 0.0 || px > side) {
        return;
    }
    if (std::abs(dir_y) > eps) {
        double s0 = (0.0 - py) / dir_y, s1 = (side - py) / dir_y;
        s_min = std::max(s_min, std::min(s0, s1));
        s_max = std::min(s_max, std::max(s0, s1));
    } else if (py < 0.0 || py > side) {
        return;
    }
    if (!(s_min < s_max))
        return;

    // Crossing parameters with x- and y-gridlines, merged in order.
    std::vector<double> crossings;
    crossings.push_back(s_min);
    if (std::abs(dir_x) > eps) {
        int k_lo = static_cast<int>(std::ceil(std::min(px + s_min * dir_x, px + s_max * dir_x)));
        int k_hi = static_cast<int>(std::floor(std::max(px + s_min * dir_x, px + s_max * dir_x)));
        for (int k = std::max(k_lo, 0); k <= std::min(k_hi, side); ++k)
            crossings.push_back((k - px) / dir_x);
    }
    if (std::abs(dir_y) > eps) {
        int k_lo = static_cast<int>(std::ceil(std::min(py + s_min * dir_y, py + s_max * dir_y)));
        int k_hi = static_cast<int>(std::floor(std::max(py + s_min * dir_y, py + s_max * dir_y)));
        for (int k = std::max(k_lo, 0); k <= std::min(k_hi, side); ++k)
            crossings.push_back((k - py) / dir_y);
    }
    crossings.push_back(s_max);
    std::sort(crossings.begin(), crossings.end());

    std::int64_t last_pixel = -1;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < crossings.size(); ++i) {
        double a = std::max(crossings[i], s_min);
        double b = std::min(crossings[i + 1], s_max);
        double len = b - a;
        if (len <= eps)
            continue;
        double mid = (a + b) / 2.0;
        int ix = static_cast<int>(std::floor(px + mid * dir_x));
        int iy = static_cast<int>(std::floor(py + mid * dir_y));
        if (ix < 0 || ix >= side || iy < 0 || iy >= side)
            continue;
        std::int64_t pixel = static_cast<std::int64_t>(iy) * side + ix;
        if (pixel == last_pixel) {
            acc += len;
        } else {
            if (last_pixel >= 0 && acc > 0.0)
                out.push_back({row, static_cast<std::uint32_t>(last_pixel), acc});
            last_pixel = pixel;
            acc = len;
        }
    }
    if (last_pixel >= 0 && acc > 0.0)
        out.push_back({row, static_cast<std::uint32_t>(last_pixel), acc});
}

} // namespace detail

/**
 * Discretized Radon transform for the given geometry: one row per
 * (angle, detector bin) ray, weights are exact ray/pixel intersection
 * lengths. Deterministic: identical inputs give bit-identical operators
 * regardless of the thread count.
 */
inline SparseOperator build_radon_matrix(const ProjectionGeometry& geom,
                                         int n_threads = 1) {
    const int side = geom.image_side;
    const int det = geom.detector_count;
    const std::size_t n_rays = geom.ray_count();

    std::vector<std::vector<SparseOperator::Entry>> per_ray(n_rays);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            std::size_t a = r / det;
            int d = static_cast<int>(r % det);
            double offset = (d - (det - 1) / 2.0) * geom.detector_spacing;
            detail::trace_ray(geom.angles_deg[a], offset, side, per_ray[r],
                              static_cast<std::uint32_t>(r));
        }
    };

    if (n_threads <= 1) {
        work(0, n_rays);
    } else {
        std::vector<std::thread> pool;
        std::size_t chunk = (n_rays + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            std::size_t begin = t * chunk;
            std::size_t end = std::min(n_rays, begin + chunk);
            if (begin < end)
                pool.emplace_back(work, begin, end);
        }
        for (auto& th : pool)
            th.join();
    }

    SparseOperator op;
    op.rows = static_cast<std::uint32_t>(n_rays);
    op.cols = static_cast<std::uint32_t>(static_cast<std::size_t>(side) * side);
    std::size_t total = 0;
    for (const auto& v : per_ray)
        total += v.size();
    op.entries.reserve(total);
    for (const auto& v : per_ray)
        op.entries.insert(op.entries.end(), v.begin(), v.end());
    return op;
}

/// p = R f, labeled with the geometry's angles.
inline Sinogram forward_project(const SparseOperator& R, const Image& f,
                                const ProjectionGeometry& geom) {
    if (R.cols != f.size() || R.rows != geom.ray_count())
        throw std::invalid_argument("forward_project: dimension mismatch");
    Sinogram p(geom.angles_deg, geom.detector_count);
    p.values = R.apply(f.pixels);
    return p;
}

/// f = R^T p on a side x side grid.
inline Image back_project(const SparseOperator& R, const Sinogram& p, int image_side) {
    if (R.rows != p.size() ||
        R.cols != static_cast<std::size_t>(image_side) * image_side)
        throw std::invalid_argument("back_project: dimension mismatch");
    Image f(image_side, image_side);
    f.pixels = R.apply_transpose(p.values);
    return f;
}

// ---------------------------------------------------------------------------
// Operator disk cache
// ---------------------------------------------------------------------------

namespace detail {

constexpr char kCacheMagic[8] = {'R', 'A', 'D', 'O', 'N', 'O', 'P', '1'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T> void write_le(std::ofstream& out, T value) {
    unsigned char buf[sizeof(T)];
    std::uint64_t bits;
    if constexpr (sizeof(T) == 8) {
        std::uint64_t tmp;
        std::memcpy(&tmp, &value, 8);
        bits = tmp;
    } else {
        bits = static_cast<std::uint64_t>(value);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i)
        buf[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T> T read_le(std::ifstream& in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char*>(buf), sizeof(T));
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    if constexpr (sizeof(T) == 8 && std::is_floating_point_v<T>) {
        T value;
        std::memcpy(&value, &bits, 8);
        return value;
    } else {
        return static_cast<T>(bits);
    }
}

} // namespace detail

inline void save_operator(const SparseOperator& op, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("save_operator: cannot open " + path);
    out.write(detail::kCacheMagic, 8);
    detail::write_le<std::uint32_t>(out, detail::kCacheVersion);
    detail::write_le<std::uint32_t>(out, op.rows);
    detail::write_le<std::uint32_t>(out, op.cols);
    detail::write_le<std::uint64_t>(out, op.entries.size());
    for (const auto& e : op.entries) {
        detail::write_le<std::uint32_t>(out, e.row);
        detail::write_le<std::uint32_t>(out, e.col);
        detail::write_le<double>(out, e.weight);
    }
    if (!out)
        throw std::runtime_error("save_operator: write failed for " + path);
}

inline SparseOperator load_operator(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("load_operator: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, detail::kCacheMagic, 8) != 0)
        throw std::runtime_error("load_operator: bad magic in " + path);
    auto version = detail::read_le<std::uint32_t>(in);
    if (version != detail::kCacheVersion)
        throw std::runtime_error("load_operator: unsupported version");
    SparseOperator op;
    op.rows = detail::read_le<std::uint32_t>(in);
    op.cols = detail::read_le<std::uint32_t>(in);
    auto count = detail::read_le<std::uint64_t>(in);
    op.entries.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        op.entries[i].row = detail::read_le<std::uint32_t>(in);
        op.entries[i].col = detail::read_le<std::uint32_t>(in);
        op.entries[i].weight = detail::read_le<double>(in);
        if (op.entries[i].row >= op.rows || op.entries[i].col >= op.cols)
            throw std::runtime_error("load_operator: entry out of bounds");
    }
    if (!in)
        throw std::runtime_error("load_operator: truncated file " + path);
    return op;
}

/// Content hash identifying a geometry (and the builder version).
inline std::uint64_t geometry_hash(const ProjectionGeometry& geom) {
    std::uint64_t h = fnv1a64(&detail::kCacheVersion, sizeof(detail::kCacheVersion));
    h = fnv1a64(geom.angles_deg.data(), geom.angles_deg.size() * sizeof(double), h);
    h = fnv1a64(&geom.detector_count, sizeof(geom.detector_count), h);
    h = fnv1a64(&geom.detector_spacing, sizeof(geom.detector_spacing), h);
    h = fnv1a64(&geom.image_side, sizeof(geom.image_side), h);
    return h;
}

/// Loads the operator for `geom` from `cache_dir`, building and storing it
/// on a miss. The matrix build dominates setup cost, hence the cache.
inline SparseOperator load_or_build_operator(const ProjectionGeometry& geom,
                                             const std::string& cache_dir,
                                             int n_threads = 1) {
    namespace fs = std::filesystem;
    fs::create_directories(cache_dir);
    char name[32];
    std::snprintf(name, sizeof(name), "%016llx.rop",
                  static_cast<unsigned long long>(geometry_hash(geom)));
    fs::path path = fs::path(cache_dir) / name;
    if (fs::exists(path))
        return load_operator(path.string());
    SparseOperator op = build_radon_matrix(geom, n_threads);
    save_operator(op, path.string());
    return op;
}

} // namespace tomomip
