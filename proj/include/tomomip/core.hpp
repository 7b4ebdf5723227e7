#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tomomip {

/// 2D pixel grid with nonnegative intensities, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0)
            throw std::invalid_argument("Image: dimensions must be positive");
    }

    std::size_t size() const { return pixels.size(); }

    double& at(int row, int col) {
        return pixels[static_cast<std::size_t>(row) * width + col];
    }
    double at(int row, int col) const {
        return pixels[static_cast<std::size_t>(row) * width + col];
    }

    double max_pixel() const {
        double m = 0.0;
        for (double v : pixels)
            m = std::max(m, v);
        return m;
    }
};

/// Stacked projection measurements, angle-major.
struct Sinogram {
    std::vector<double> angles_deg;
    int detector_count = 0;
    std::vector<double> values;

    Sinogram() = default;
    Sinogram(std::vector<double> angles, int detectors, double fill = 0.0)
        : angles_deg(std::move(angles)), detector_count(detectors),
          values(angles_deg.size() * static_cast<std::size_t>(detectors), fill) {}

    std::size_t size() const { return values.size(); }

    double& at(std::size_t angle, int detector) {
        return values[angle * detector_count + detector];
    }
    double at(std::size_t angle, int detector) const {
        return values[angle * detector_count + detector];
    }
};

/// Expected homogeneous material intensity.
struct MaterialParams {
    double omega = 255.0;
};

/// Sparse nonnegative matrix in triplet form; rows are rays, columns pixels.
struct SparseOperator {
    struct Entry {
        std::uint32_t row;
        std::uint32_t col;
        double weight;
    };

    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<Entry> entries;

    /// y = R x
    std::vector<double> apply(const std::vector<double>& x) const {
        if (x.size() != cols)
            throw std::invalid_argument("SparseOperator::apply: dimension mismatch");
        std::vector<double> y(rows, 0.0);
        for (const Entry& e : entries)
            y[e.row] += e.weight * x[e.col];
        return y;
    }

    /// y = R^T x
    std::vector<double> apply_transpose(const std::vector<double>& x) const {
        if (x.size() != rows)
            throw std::invalid_argument("SparseOperator::apply_transpose: dimension mismatch");
        std::vector<double> y(cols, 0.0);
        for (const Entry& e : entries)
            y[e.col] += e.weight * x[e.row];
        return y;
    }
};

// ---------------------------------------------------------------------------
// Quality metrics
// ---------------------------------------------------------------------------

/// Relative mean error sum|f - f_hat| / sum|f_hat| against a ground truth.
inline double rme(const Image& recon, const Image& ground_truth) {
    if (recon.width != ground_truth.width || recon.height != ground_truth.height)
        throw std::invalid_argument("rme: dimension mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < recon.size(); ++i) {
        num += std::abs(recon.pixels[i] - ground_truth.pixels[i]);
        den += std::abs(ground_truth.pixels[i]);
    }
    if (den == 0.0)
        throw std::domain_error("rme: ground truth is identically zero");
    return num / den;
}

/// Raw data coverage sum|(Rf) - p_hat| / sum|p_hat| against measured data.
inline double rdc(const SparseOperator& R, const Image& recon, const Sinogram& measured) {
    if (R.cols != recon.size() || R.rows != measured.size())
        throw std::invalid_argument("rdc: dimension mismatch");
    std::vector<double> proj = R.apply(recon.pixels);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < proj.size(); ++i) {
        num += std::abs(proj[i] - measured.values[i]);
        den += std::abs(measured.values[i]);
    }
    if (den == 0.0)
        throw std::domain_error("rdc: measured sinogram is identically zero");
    return num / den;
}

/**
 * Bimodal contrast score: fraction of pixels within epsilon of either
 * extreme after linear rescaling to the 8-bit range [0, 255].
 *
 * The rescale divides by the image maximum; pass `fixed_max` to scale
 * against a known range instead (e.g. 255 for already 8-bit data).
 * A constant-zero image scores 1 (every pixel sits at the 0 extreme).
 */
inline double bms(const Image& recon, double epsilon,
                  std::optional<double> fixed_max = std::nullopt) {
    if (recon.size() == 0)
        throw std::invalid_argument("bms: empty image");
    if (epsilon < 0.0)
        throw std::invalid_argument("bms: epsilon must be nonnegative");
    double fmax = fixed_max ? *fixed_max : recon.max_pixel();
    if (fmax <= 0.0)
        return 1.0;
    const double scale = 255.0 / fmax;
    std::size_t hits = 0;
    for (double v : recon.pixels) {
        double s = v * scale;
        if (s <= epsilon || s >= 255.0 - epsilon)
            ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(recon.size());
}

/// Material coverage: number of pixels strictly above `zero_tol` (default 0).
inline std::int64_t mc(const Image& recon, double zero_tol = 0.0) {
    std::int64_t count = 0;
    for (double v : recon.pixels)
        if (v > zero_tol)
            ++count;
    return count;
}

// ---------------------------------------------------------------------------
// Metric report
// ---------------------------------------------------------------------------

/// Quality summary for one reconstruction run.
struct MetricReport {
    std::optional<double> rme;
    std::optional<double> rdc;
    double bms = 0.0;
    std::int64_t mc = 0;
    double runtime_seconds = 0.0;

    static std::string csv_header() {
        return "dataset,algorithm,params,rme,rdc,bms,mc,runtime_seconds";
    }

    /// One CSV row; absent metrics are emitted as empty fields.
    std::string csv_row(const std::string& dataset, const std::string& algorithm,
                        const std::string& params) const {
        std::ostringstream out;
        out.precision(12);
        out << dataset << ',' << algorithm << ',' << params << ',';
        if (rme)
            out << *rme;
        out << ',';
        if (rdc)
            out << *rdc;
        out << ',' << bms << ',' << mc << ',' << runtime_seconds;
        return out.str();
    }
};

constexpr double kInfinity = std::numeric_limits<double>::infinity();

} // namespace tomomip
