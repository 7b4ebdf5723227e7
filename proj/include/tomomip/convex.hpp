#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "tomomip/core.hpp"
#include "tomomip/saddle.hpp"

namespace tomomip {

/// Total-variation regularized least squares settings.
struct CsConfig {
    double lambda_tv = 0.0;
    int max_iters = 20000;
    double tol = 1e-6;
    std::ostream* trace = nullptr; // iteration,objective,residual CSV when set
    int trace_every = 50;

    void validate() const {
        if (lambda_tv < 0.0)
            throw std::invalid_argument("CsConfig: lambda_tv must be >= 0");
        if (tol <= 0.0)
            throw std::invalid_argument("CsConfig: tol must be > 0");
        if (max_iters < 1)
            throw std::invalid_argument("CsConfig: max_iters must be >= 1");
    }
};

/// CS extended with the homogeneous-material density penalty and per-pixel
/// ray-derived upper bounds.
struct CshmConfig : CsConfig {
    double mu = 0.0;
    double omega = 255.0;
    bool use_pixel_bounds = true;

    void validate() const {
        CsConfig::validate();
        if (mu < 0.0)
            throw std::invalid_argument("CshmConfig: mu must be >= 0");
        if (omega <= 0.0)
            throw std::invalid_argument("CshmConfig: omega must be > 0");
    }
};

struct SolveStats {
    double objective = 0.0;
    bool converged = false;
    int iterations = 0;
};

// ---------------------------------------------------------------------------
// SIRT
// ---------------------------------------------------------------------------

/**
 * Simultaneous iterative reconstruction with nonnegativity projection:
 *
 *   f <- max(0, f + C R^T W (p - R f))
 *
 * where W and C hold inverse row and column sums (zero where the sum is
 * zero). Starts from f = 0. The optional callback sees the iterate after
 * every sweep.
 */
inline Image sirt(const SparseOperator& R, const Sinogram& p, int iters, int width,
                  int height, const std::function<void(const Image&, int)>& callback = {}) {
    if (iters < 1)
        throw std::invalid_argument("sirt: iters must be >= 1");
    if (R.rows != p.size() ||
        R.cols != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("sirt: dimension mismatch");

    std::vector<double> row_sum(R.rows, 0.0), col_sum(R.cols, 0.0);
    for (const auto& e : R.entries) {
        row_sum[e.row] += e.weight;
        col_sum[e.col] += e.weight;
    }
    for (double& v : row_sum)
        v = v > 0.0 ? 1.0 / v : 0.0;
    for (double& v : col_sum)
        v = v > 0.0 ? 1.0 / v : 0.0;

    Image f(width, height);
    std::vector<double> residual(R.rows), update(R.cols);
    for (int it = 0; it < iters; ++it) {
        residual = R.apply(f.pixels);
        for (std::size_t i = 0; i < residual.size(); ++i)
            residual[i] = (p.values[i] - residual[i]) * row_sum[i];
        update = R.apply_transpose(residual);
        for (std::size_t j = 0; j < update.size(); ++j)
            f.pixels[j] = std::max(0.0, f.pixels[j] + col_sum[j] * update[j]);
        if (callback)
            callback(f, it + 1);
    }
    return f;
}

/// Convenience overload for square images.
inline Image sirt(const SparseOperator& R, const Sinogram& p, int iters, int image_side,
                  const std::function<void(const Image&, int)>& callback = {}) {
    return sirt(R, p, iters, image_side, image_side, callback);
}

// ---------------------------------------------------------------------------
// Total variation
// ---------------------------------------------------------------------------

/// Anisotropic TV: l1 norm of forward differences, zero across the border.
inline double tv_norm(const Image& f) {
    double tv = 0.0;
    for (int r = 0; r < f.height; ++r) {
        for (int c = 0; c < f.width; ++c) {
            if (r + 1 < f.height)
                tv += std::abs(f.at(r + 1, c) - f.at(r, c));
            if (c + 1 < f.width)
                tv += std::abs(f.at(r, c + 1) - f.at(r, c));
        }
    }
    return tv;
}

// ---------------------------------------------------------------------------
// Pixel upper bounds (CSHM constraint)
// ---------------------------------------------------------------------------

/// b_j = min over rays i with R_ij > 0 of p_i / R_ij; +inf for pixels no
/// ray touches.
inline std::vector<double> pixel_upper_bounds(const SparseOperator& R, const Sinogram& p) {
    if (R.rows != p.size())
        throw std::invalid_argument("pixel_upper_bounds: dimension mismatch");
    std::vector<double> bounds(R.cols, kInfinity);
    for (const auto& e : R.entries) {
        double candidate = p.values[e.row] / e.weight;
        if (candidate < bounds[e.col])
            bounds[e.col] = candidate;
    }
    return bounds;
}

// ---------------------------------------------------------------------------
// CS / CSHM solvers
// ---------------------------------------------------------------------------

namespace detail {

inline void add_tv_rows(SaddleProblem& prob, int width, int height, double lambda) {
    auto idx = [width](int r, int c) { return r * width + c; };
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            if (r + 1 < height)
                prob.add_row(SaddleProblem::RowKind::l1,
                             {{idx(r + 1, c), 1.0}, {idx(r, c), -1.0}}, 0.0, lambda);
            if (c + 1 < width)
                prob.add_row(SaddleProblem::RowKind::l1,
                             {{idx(r, c + 1), 1.0}, {idx(r, c), -1.0}}, 0.0, lambda);
        }
    }
}

inline void add_data_rows(SaddleProblem& prob, const SparseOperator& R, const Sinogram& p) {
    std::vector<std::vector<std::pair<int, double>>> by_row(R.rows);
    for (const auto& e : R.entries)
        by_row[e.row].emplace_back(static_cast<int>(e.col), e.weight);
    for (std::uint32_t i = 0; i < R.rows; ++i)
        prob.add_row(SaddleProblem::RowKind::quad_fit, by_row[i], p.values[i], 1.0);
}

inline Image run_tv_solver(const SparseOperator& R, const Sinogram& p, int side,
                           const CsConfig& cfg, double mu, double omega,
                           const std::vector<double>* bounds, SolveStats* stats) {
    SaddleProblem prob;
    for (std::uint32_t j = 0; j < R.cols; ++j) {
        SaddleProblem::VarSpec v;
        v.lo = 0.0;
        v.hi = bounds ? (*bounds)[j] : kInfinity;
        if (mu > 0.0) {
            v.hinge = mu;
            v.hinge_at = omega;
        }
        prob.add_variable(v);
    }
    add_data_rows(prob, R, p);
    if (cfg.lambda_tv > 0.0)
        add_tv_rows(prob, side, side, cfg.lambda_tv);

    SaddleProblem::Options opt;
    opt.max_iters = cfg.max_iters;
    opt.tol = cfg.tol;
    if (cfg.trace) {
        *cfg.trace << "iteration,objective\n";
        std::ostream* trace = cfg.trace;
        int every = std::max(1, cfg.trace_every);
        opt.checkpoint = [trace, every](int it, double obj) {
            if (it % every == 0)
                *trace << it << ',' << obj << '\n';
        };
    }
    auto res = prob.solve(opt);
    if (stats) {
        stats->objective = res.objective;
        stats->converged = res.converged;
        stats->iterations = res.iterations;
    }
    Image f(side, side);
    f.pixels = std::move(res.x);
    for (double& v : f.pixels)
        v = std::max(0.0, v);
    return f;
}

} // namespace detail

/// min ||Rf - p||^2 + lambda ||f||_TV with f >= 0.
inline Image solve_cs(const SparseOperator& R, const Sinogram& p, int image_side,
                      const CsConfig& cfg, SolveStats* stats = nullptr) {
    cfg.validate();
    if (R.rows != p.size() ||
        R.cols != static_cast<std::size_t>(image_side) * image_side)
        throw std::invalid_argument("solve_cs: dimension mismatch");
    return detail::run_tv_solver(R, p, image_side, cfg, 0.0, 1.0, nullptr, stats);
}

/// Objective value of the CS model at f.
inline double cs_objective(const SparseOperator& R, const Sinogram& p, const Image& f,
                           double lambda_tv) {
    std::vector<double> rf = R.apply(f.pixels);
    double obj = 0.0;
    for (std::size_t i = 0; i < rf.size(); ++i)
        obj += (rf[i] - p.values[i]) * (rf[i] - p.values[i]);
    return obj + lambda_tv * tv_norm(f);
}

struct CshmResult {
    Image f;
    std::vector<double> slack; // d_j = max(0, f_j - omega) at return
    std::vector<double> bounds;
    SolveStats stats;
};

/// min ||Rf - p||^2 + lambda ||f||_TV + mu ||d||^2 with d_j >= f_j - omega,
/// d >= 0, 0 <= f_j <= min_i p_i / R_ij.
inline CshmResult solve_cshm(const SparseOperator& R, const Sinogram& p, int image_side,
                             const CshmConfig& cfg) {
    cfg.validate();
    if (R.rows != p.size() ||
        R.cols != static_cast<std::size_t>(image_side) * image_side)
        throw std::invalid_argument("solve_cshm: dimension mismatch");

    CshmResult result;
    result.bounds = cfg.use_pixel_bounds ? pixel_upper_bounds(R, p)
                                         : std::vector<double>(R.cols, kInfinity);
    result.f = detail::run_tv_solver(R, p, image_side, cfg, cfg.mu, cfg.omega,
                                     &result.bounds, &result.stats);
    for (std::size_t j = 0; j < result.f.size(); ++j)
        result.f.pixels[j] = std::min(result.f.pixels[j], result.bounds[j]);
    result.slack.resize(result.f.size());
    for (std::size_t j = 0; j < result.f.size(); ++j)
        result.slack[j] = std::max(0.0, result.f.pixels[j] - cfg.omega);
    return result;
}

/// Objective value of the CSHM model at f with optimal slack.
inline double cshm_objective(const SparseOperator& R, const Sinogram& p, const Image& f,
                             const CshmConfig& cfg) {
    double obj = cs_objective(R, p, f, cfg.lambda_tv);
    for (double v : f.pixels) {
        double over = std::max(0.0, v - cfg.omega);
        obj += cfg.mu * over * over;
    }
    return obj;
}

} // namespace tomomip
