#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <vector>

#include "tomomip/convex.hpp"
#include "tomomip/core.hpp"
#include "tomomip/edgenet.hpp"
#include "tomomip/relumip.hpp"
#include "tomomip/saddle.hpp"

namespace tomomip {

/// Region of interest in pixel coordinates (row-major rectangle).
struct Roi {
    int row0 = 0, col0 = 0, height = 0, width = 0;

    bool contains(int row, int col) const {
        return row >= row0 && row < row0 + height && col >= col0 && col < col0 + width;
    }
};

struct IntegratedConfig {
    double phi = 1e8; // weight of the edge objective; scale-dependent
    Roi roi;
    enum class Windows { overlapping, non_overlapping };
    Windows windows = Windows::non_overlapping;
    double gap_tol = 0.15;
    double time_limit_seconds = 600.0;
    int window_cap = 25;
    int node_iters = 4000;   // primal-dual iterations per node relaxation
    int root_iters = 12000;
    std::optional<Image> prior; // completed CSHM reconstruction (required)
    std::ostream* trace = nullptr; // node,bound,incumbent,gap CSV
};

struct IntegratedResult {
    Image image;       // incumbent embedded in the full frame
    double objective = kInfinity; // Eq-form value of the incumbent (minimization)
    double bound = -kInfinity;    // certified lower bound
    double gap = kInfinity;
    long nodes = 0;
    MipStatus status = MipStatus::time_limit;
    int window_count = 0;
};

namespace detail {

inline std::vector<int> roi_window_starts(int extent, bool overlapping) {
    std::vector<int> starts;
    int step = overlapping ? 1 : 3;
    for (int x = 0; x + 3 <= extent; x += step)
        starts.push_back(x);
    // overlapping mode covers trailing pixels with one clamped window;
    // non-overlapping windows stay mutually exclusive and may leave a
    // remainder strip without edge terms
    if (overlapping && (starts.empty() || starts.back() != extent - 3))
        starts.push_back(extent - 3);
    return starts;
}

} // namespace detail

/**
 * Monolithic reconstruction: minimizes the homogeneous-material objective
 * together with a phi-weighted edge reward over every subregion of the
 * region of interest, with the trained network compiled into the model.
 * Pixels outside the ROI stay fixed to the prior reconstruction. Branch
 * and bound over the activation and edge binaries; node relaxations are
 * solved by the first-order primal-dual engine, whose dual value provides
 * the certified node bound.
 */
inline IntegratedResult solve_integrated(const SparseOperator& R, const Sinogram& p,
                                         int image_side, const CshmConfig& cshm_cfg,
                                         const EdgeNet& net, double threshold_paper,
                                         const IntegratedConfig& cfg) {
    cshm_cfg.validate();
    if (!cfg.prior)
        throw std::invalid_argument("solve_integrated: prior CSHM solution missing");
    if (net.u_bar <= 0.0)
        throw std::invalid_argument("solve_integrated: net has no computed maximum");
    const Image& prior = *cfg.prior;
    if (prior.width != image_side || prior.height != image_side)
        throw std::invalid_argument("solve_integrated: prior dimensions mismatch");
    const Roi& roi = cfg.roi;
    if (roi.row0 < 0 || roi.col0 < 0 || roi.height < 3 || roi.width < 3 ||
        roi.row0 + roi.height > image_side || roi.col0 + roi.width > image_side)
        throw std::invalid_argument("solve_integrated: roi outside image");

    const double omega = cshm_cfg.omega;
    const double f_max = prior.max_pixel();
    if (f_max <= 0.0)
        throw std::invalid_argument("solve_integrated: prior has no positive pixels");
    const double u_bar = net.u_bar;
    const double t_net = threshold_paper * u_bar / 550.0;

    // windows inside the ROI
    bool overlapping = cfg.windows == IntegratedConfig::Windows::overlapping;
    auto row_starts = detail::roi_window_starts(roi.height, overlapping);
    auto col_starts = detail::roi_window_starts(roi.width, overlapping);
    struct Window {
        int row, col; // absolute image coordinates of the top-left pixel
    };
    std::vector<Window> windows;
    for (int r : row_starts)
        for (int c : col_starts)
            windows.push_back({roi.row0 + r, roi.col0 + c});
    if (static_cast<int>(windows.size()) > cfg.window_cap)
        throw std::invalid_argument("solve_integrated: roi needs " +
                                    std::to_string(windows.size()) +
                                    " windows, cap is " +
                                    std::to_string(cfg.window_cap));

    // the network sees f = omega * f_tilde / f_max; fold the scale into the
    // first layer so the model works on f_tilde directly
    EdgeNet scaled = net;
    for (double& w : scaled.weights[0])
        w *= omega / f_max;

    std::vector<double> pixel_bounds = cshm_cfg.use_pixel_bounds
                                           ? pixel_upper_bounds(R, p)
                                           : std::vector<double>(R.cols, kInfinity);

    // ---- assemble the saddle problem over ROI variables --------------------
    SaddleProblem prob;
    const int n_roi = roi.height * roi.width;
    std::vector<int> pixel_var(static_cast<std::size_t>(image_side) * image_side, -1);
    std::vector<bool> in_window(static_cast<std::size_t>(image_side) * image_side, false);
    for (const auto& win : windows)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                in_window[static_cast<std::size_t>(win.row + i) * image_side + win.col +
                          j] = true;

    for (int r = roi.row0; r < roi.row0 + roi.height; ++r) {
        for (int c = roi.col0; c < roi.col0 + roi.width; ++c) {
            std::size_t j = static_cast<std::size_t>(r) * image_side + c;
            SaddleProblem::VarSpec v;
            v.lo = 0.0;
            v.hi = std::min(pixel_bounds[j], in_window[j] ? f_max : kInfinity);
            pixel_var[j] = prob.add_variable(v);
        }
    }
    // density slack d with quadratic penalty, coupled by d >= f_tilde - omega
    std::vector<int> d_var(n_roi, -1);
    if (cshm_cfg.mu > 0.0) {
        int idx = 0;
        for (int r = roi.row0; r < roi.row0 + roi.height; ++r)
            for (int c = roi.col0; c < roi.col0 + roi.width; ++c, ++idx) {
                SaddleProblem::VarSpec v;
                v.lo = 0.0;
                v.hi = kInfinity;
                v.quadratic = cshm_cfg.mu;
                d_var[idx] = prob.add_variable(v);
                std::size_t j = static_cast<std::size_t>(r) * image_side + c;
                prob.add_row(SaddleProblem::RowKind::inequality,
                             {{pixel_var[j], 1.0}, {d_var[idx], -1.0}}, omega);
            }
    }

    double constant = 0.0; // objective pieces fully determined by fixed pixels
    if (cshm_cfg.mu > 0.0) {
        for (std::size_t j = 0; j < prior.size(); ++j) {
            if (pixel_var[j] >= 0)
                continue;
            double over = std::max(0.0, prior.pixels[j] - omega);
            constant += cshm_cfg.mu * over * over;
        }
    }

    // data rows: residual targets fold in the fixed pixels
    {
        std::vector<std::vector<std::pair<int, double>>> coeffs(R.rows);
        std::vector<double> offset(R.rows, 0.0);
        for (const auto& e : R.entries) {
            if (pixel_var[e.col] >= 0)
                coeffs[e.row].emplace_back(pixel_var[e.col], e.weight);
            else
                offset[e.row] += e.weight * prior.pixels[e.col];
        }
        for (std::uint32_t i = 0; i < R.rows; ++i) {
            double target = p.values[i] - offset[i];
            if (coeffs[i].empty()) {
                constant += target * target;
                continue;
            }
            prob.add_row(SaddleProblem::RowKind::quad_fit, coeffs[i], target, 1.0);
        }
    }
    // TV rows: pairs touching the ROI; fully fixed pairs are constant
    if (cshm_cfg.lambda_tv > 0.0) {
        auto add_pair = [&](std::size_t a, std::size_t b) {
            int va = pixel_var[a], vb = pixel_var[b];
            if (va < 0 && vb < 0) {
                constant += cshm_cfg.lambda_tv *
                            std::abs(prior.pixels[a] - prior.pixels[b]);
                return;
            }
            std::vector<std::pair<int, double>> coeffs;
            double offset = 0.0;
            if (va >= 0)
                coeffs.emplace_back(va, 1.0);
            else
                offset += prior.pixels[a];
            if (vb >= 0)
                coeffs.emplace_back(vb, -1.0);
            else
                offset -= prior.pixels[b];
            prob.add_row(SaddleProblem::RowKind::l1, coeffs, offset,
                         cshm_cfg.lambda_tv);
        };
        for (int r = 0; r < image_side; ++r)
            for (int c = 0; c < image_side; ++c) {
                std::size_t j = static_cast<std::size_t>(r) * image_side + c;
                if (r + 1 < image_side)
                    add_pair(static_cast<std::size_t>(r + 1) * image_side + c, j);
                if (c + 1 < image_side)
                    add_pair(j, j + 1);
            }
    }

    // network blocks per window
    struct WindowVars {
        std::vector<std::vector<int>> x, s, z;
        int y = -1, e = -1, w = -1;
        Window win;
    };
    std::vector<WindowVars> wvars;
    std::vector<int> binaries; // branching order: z layer-major per window, e last
    const double phi = cfg.phi;
    for (const auto& win : windows) {
        std::vector<double> in_lo(9, 0.0), in_hi(9);
        std::vector<int> in_vars(9);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                std::size_t px =
                    static_cast<std::size_t>(win.row + i) * image_side + win.col + j;
                in_vars[i * 3 + j] = pixel_var[px];
                in_hi[i * 3 + j] = prob.var(pixel_var[px]).hi;
            }
        NeuronBounds nb = compute_neuron_bounds(scaled, in_lo, in_hi);

        WindowVars wv;
        wv.win = win;
        std::vector<int> prev = in_vars;
        for (int k = 0; k < scaled.num_layers(); ++k) {
            int rows = scaled.layer_sizes[k + 1], cols = scaled.layer_sizes[k];
            std::vector<int> xs, ss, zs;
            for (int r = 0; r < rows; ++r) {
                double lo = nb.lo[k][r], hi = nb.hi[k][r];
                int x, s, z = -1;
                if (hi <= 0.0) {
                    x = prob.add_variable({0.0, 0.0});
                    s = prob.add_variable({std::max(0.0, -hi), -lo});
                } else if (lo >= 0.0) {
                    x = prob.add_variable({lo, hi});
                    s = prob.add_variable({0.0, 0.0});
                } else {
                    x = prob.add_variable({0.0, hi});
                    s = prob.add_variable({0.0, -lo});
                    z = prob.add_variable({0.0, 1.0});
                    prob.add_row(SaddleProblem::RowKind::inequality,
                                 {{x, 1.0}, {z, -hi}}, 0.0);
                    prob.add_row(SaddleProblem::RowKind::inequality,
                                 {{s, 1.0}, {z, -lo}}, -lo);
                    binaries.push_back(z);
                }
                std::vector<std::pair<int, double>> coeffs;
                const double* w =
                    scaled.weights[k].data() + static_cast<std::size_t>(r) * cols;
                for (int c = 0; c < cols; ++c)
                    if (w[c] != 0.0)
                        coeffs.emplace_back(prev[c], w[c]);
                coeffs.emplace_back(x, -1.0);
                coeffs.emplace_back(s, 1.0);
                prob.add_row(SaddleProblem::RowKind::equality, coeffs,
                             -scaled.biases[k][r]);
                xs.push_back(x);
                ss.push_back(s);
                zs.push_back(z);
            }
            wv.x.push_back(xs);
            wv.s.push_back(ss);
            wv.z.push_back(zs);
            prev = xs;
        }
        wv.y = wv.x.back()[0];
        prob.var(wv.y).hi = std::min(prob.var(wv.y).hi, u_bar);
        wv.e = prob.add_variable({0.0, 1.0});
        wv.w = prob.add_variable({0.0, u_bar});
        prob.add_row(SaddleProblem::RowKind::inequality,
                     {{wv.w, 1.0}, {wv.e, -u_bar}}, 0.0);
        prob.add_row(SaddleProblem::RowKind::inequality,
                     {{wv.w, 1.0}, {wv.y, -1.0}}, 0.0);
        prob.add_row(SaddleProblem::RowKind::inequality,
                     {{wv.y, 1.0}, {wv.w, -1.0}, {wv.e, u_bar}}, u_bar);
        // minimize -phi * (2w - T e - y + T)
        prob.var(wv.w).linear += -2.0 * phi;
        prob.var(wv.e).linear += phi * t_net;
        prob.var(wv.y).linear += phi;
        constant += -phi * t_net;
        binaries.push_back(wv.e);
        wvars.push_back(std::move(wv));
    }

    // ---- exact Eq-form evaluation of a candidate ROI patch ------------------
    auto evaluate_candidate = [&](const std::vector<double>& x_roi_pixels) {
        // x_roi_pixels indexed like prob variables; read pixels via pixel_var
        Image full = prior;
        for (std::size_t j = 0; j < pixel_var.size(); ++j)
            if (pixel_var[j] >= 0) {
                double lo = 0.0, hi = prob.var(pixel_var[j]).hi;
                full.pixels[j] = std::clamp(x_roi_pixels[pixel_var[j]], lo, hi);
            }
        double value = cshm_objective(R, p, full, cshm_cfg);
        for (const auto& win : windows) {
            Subregion window;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    window[i * 3 + j] =
                        full.pixels[static_cast<std::size_t>(win.row + i) * image_side +
                                    win.col + j];
            double y = forward(scaled, window);
            value -= phi * std::max(y, t_net - y);
        }
        return std::make_pair(std::move(full), value);
    };

    // ---- branch and bound over the binaries ---------------------------------
    struct Node {
        std::vector<std::pair<int, double>> fixes; // (var, value)
        double bound = -kInfinity;
        long id = 0;
        std::shared_ptr<std::vector<double>> warm_x, warm_y;
    };
    struct Order {
        bool operator()(const std::shared_ptr<Node>& a,
                        const std::shared_ptr<Node>& b) const {
            if (a->bound != b->bound)
                return a->bound > b->bound; // min-heap on lower bound
            return a->id > b->id;
        }
    };
    std::priority_queue<std::shared_ptr<Node>, std::vector<std::shared_ptr<Node>>, Order>
        queue;

    IntegratedResult result;
    result.window_count = static_cast<int>(windows.size());

    // incumbent seed: the prior itself completed through the network
    {
        std::vector<double> seed(prob.num_vars(), 0.0);
        for (std::size_t j = 0; j < pixel_var.size(); ++j)
            if (pixel_var[j] >= 0)
                seed[pixel_var[j]] = prior.pixels[j];
        auto [img, value] = evaluate_candidate(seed);
        result.image = std::move(img);
        result.objective = value;
    }

    auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    };

    auto root = std::make_shared<Node>();
    queue.push(root);
    long next_id = 1;
    result.status = MipStatus::optimal;
    double closed_bound = kInfinity; // weakest bound among slack-closed nodes

    while (!queue.empty()) {
        double scale = std::max(1.0, std::abs(result.objective));
        double global_lb = queue.top()->bound;
        if (cfg.trace && std::isfinite(global_lb))
            *cfg.trace << result.nodes << ',' << global_lb << ',' << result.objective
                       << ',' << (result.objective - global_lb) / scale << '\n';
        if (std::isfinite(global_lb) &&
            result.objective - global_lb <= cfg.gap_tol * scale) {
            result.status = MipStatus::gap_reached;
            result.bound = global_lb;
            break;
        }
        if (elapsed() > cfg.time_limit_seconds) {
            result.status = MipStatus::time_limit;
            result.bound = global_lb;
            break;
        }
        auto node = queue.top();
        queue.pop();
        if (std::isfinite(node->bound) &&
            result.objective - node->bound <= 1e-9 * scale) {
            closed_bound = std::min(closed_bound, node->bound);
            continue;
        }

        // apply binary fixes as bounds
        std::vector<std::pair<int, SaddleProblem::VarSpec>> saved;
        for (auto [var, val] : node->fixes) {
            saved.emplace_back(var, prob.var(var));
            prob.var(var).lo = val;
            prob.var(var).hi = val;
        }

        SaddleProblem::Options opt;
        opt.max_iters = node->fixes.empty() ? cfg.root_iters : cfg.node_iters;
        opt.tol = 1e-9;
        opt.track_dual = true;
        if (node->warm_x)
            opt.warm_x = node->warm_x.get();
        if (node->warm_y)
            opt.warm_y = node->warm_y.get();
        SaddleProblem::Result rel = prob.solve(opt);
        ++result.nodes;

        double node_lb = rel.dual_bound + constant;
        if (std::isfinite(node->bound))
            node_lb = std::max(node_lb, node->bound);

        // completion heuristic from the relaxation's pixels
        auto [img, value] = evaluate_candidate(rel.x);
        if (value < result.objective) {
            result.objective = value;
            result.image = std::move(img);
        }

        // restore bounds
        for (auto& [var, spec] : saved)
            prob.var(var) = spec;

        scale = std::max(1.0, std::abs(result.objective));
        if (result.objective - node_lb <= std::max(cfg.gap_tol, 1e-9) * scale) {
            closed_bound = std::min(closed_bound, node_lb);
            continue; // node cannot improve enough
        }

        // branch on the most fractional unfixed binary
        int branch = -1;
        double best_frac = 1e-6;
        for (int z : binaries) {
            bool fixed = false;
            for (auto [var, val] : node->fixes)
                if (var == z)
                    fixed = true;
            if (fixed)
                continue;
            double frac = 0.5 - std::abs(rel.x[z] - 0.5);
            if (frac > best_frac) {
                best_frac = frac;
                branch = z;
            }
        }
        if (branch < 0) {
            closed_bound = std::min(closed_bound, node_lb);
            continue; // relaxation is already integral: node solved
        }

        auto wx = std::make_shared<std::vector<double>>(rel.x);
        auto wy = std::make_shared<std::vector<double>>(rel.y);
        for (double val : {0.0, 1.0}) {
            auto child = std::make_shared<Node>();
            child->fixes = node->fixes;
            child->fixes.emplace_back(branch, val);
            child->bound = node_lb;
            child->id = next_id++;
            child->warm_x = wx;
            child->warm_y = wy;
            queue.push(child);
        }
    }

    double scale = std::max(1.0, std::abs(result.objective));
    if (queue.empty()) {
        result.bound = std::min(closed_bound, result.objective);
        result.status = result.objective - result.bound <= 1e-9 * scale
                            ? MipStatus::optimal
                            : MipStatus::gap_reached;
    } else {
        result.bound = std::min(result.bound, closed_bound);
    }
    result.gap = std::abs(result.objective - result.bound) / scale;
    if (result.status == MipStatus::optimal)
        result.gap = 0.0;
    return result;
}

} // namespace tomomip
