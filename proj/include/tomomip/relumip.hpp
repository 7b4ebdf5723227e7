#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "tomomip/core.hpp"
#include "tomomip/edgenet.hpp"
#include "tomomip/lp.hpp"

namespace tomomip {

// ---------------------------------------------------------------------------
// Interval bound propagation
// ---------------------------------------------------------------------------

/// Pre-activation intervals per layer, valid for every input in the box the
/// bounds were computed from. Post-activation follows by clamping at zero.
struct NeuronBounds {
    std::vector<std::vector<double>> lo, hi; // [layer][neuron]
};

inline NeuronBounds compute_neuron_bounds(const EdgeNet& net,
                                          const std::vector<double>& input_lo,
                                          const std::vector<double>& input_hi) {
    net.validate();
    if (input_lo.size() != static_cast<std::size_t>(net.input_size()) ||
        input_hi.size() != input_lo.size())
        throw std::invalid_argument("compute_neuron_bounds: box size mismatch");
    for (std::size_t i = 0; i < input_lo.size(); ++i)
        if (!(input_lo[i] <= input_hi[i]) || !std::isfinite(input_lo[i]) ||
            !std::isfinite(input_hi[i]))
            throw std::invalid_argument("compute_neuron_bounds: box must be finite");

    NeuronBounds nb;
    std::vector<double> prev_lo = input_lo, prev_hi = input_hi;
    for (int k = 0; k < net.num_layers(); ++k) {
        int rows = net.layer_sizes[k + 1], cols = net.layer_sizes[k];
        std::vector<double> lo(rows), hi(rows);
        for (int r = 0; r < rows; ++r) {
            double acc_lo = net.biases[k][r], acc_hi = net.biases[k][r];
            const double* w = net.weights[k].data() + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) {
                if (w[c] >= 0.0) {
                    acc_lo += w[c] * prev_lo[c];
                    acc_hi += w[c] * prev_hi[c];
                } else {
                    acc_lo += w[c] * prev_hi[c];
                    acc_hi += w[c] * prev_lo[c];
                }
            }
            lo[r] = acc_lo;
            hi[r] = acc_hi;
        }
        nb.lo.push_back(lo);
        nb.hi.push_back(hi);
        prev_lo.resize(rows);
        prev_hi.resize(rows);
        for (int r = 0; r < rows; ++r) {
            prev_lo[r] = std::max(0.0, lo[r]);
            prev_hi[r] = std::max(0.0, hi[r]);
        }
    }
    return nb;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/**
 * Mixed-integer model over a box-bounded ReLU network: the LP relaxation
 * plus the list of binary variables and any quadratic objective terms.
 * Quadratic terms stay out of the LP matrix; at every node the solver
 * replaces coeff * var^2 by a linear overestimator on the node's interval
 * (tangent for concave terms, chord for convex ones) and tightens the
 * interval itself by branching when the overestimate is what blocks.
 */
struct MipModel {
    LpProblem lp; // objective holds the linear part only
    std::vector<int> binaries; // branching order: layer-major z, then e

    struct QuadTerm {
        int var; // objective += coeff * var^2
        double coeff;
    };
    std::vector<QuadTerm> quads;
    double constant = 0.0;

    /// Mapping from model variables back to the network, used by the
    /// rounding heuristic and the encoding checks.
    struct NetMap {
        EdgeNet net;
        std::vector<int> input_vars;
        std::vector<std::vector<int>> x_vars, s_vars, z_vars; // -1 where absent
        int y_var = -1;
        int e_var = -1;
        int w_var = -1;
        double T = 0.0;
    };
    std::optional<NetMap> netmap;

    bool has_nonconvex_terms() const {
        for (const auto& q : quads)
            if (q.coeff > 0.0)
                return true;
        return false;
    }
};

/**
 * Exact MIP encoding of a trained network over the given input box:
 * per neuron W x_prev + b = x - s with x, s >= 0 and indicator links
 * realized as big-M rows from the propagated bounds. Neurons whose
 * pre-activation interval is one-sided are pre-fixed (dead: x = 0;
 * always-active: s = 0) and contribute no binary.
 */
inline MipModel encode_network(const EdgeNet& net, const NeuronBounds& bounds,
                               const std::vector<double>& input_lo,
                               const std::vector<double>& input_hi) {
    net.validate();
    if (net.layer_sizes.back() != 1)
        throw std::invalid_argument("encode_network: single output neuron expected");

    MipModel model;
    MipModel::NetMap map;
    map.net = net;

    for (int i = 0; i < net.input_size(); ++i)
        map.input_vars.push_back(
            model.lp.add_var(input_lo[i], input_hi[i], 0.0, "f" + std::to_string(i)));

    std::vector<int> prev_vars = map.input_vars;
    for (int k = 0; k < net.num_layers(); ++k) {
        int rows = net.layer_sizes[k + 1], cols = net.layer_sizes[k];
        std::vector<int> xs, ss, zs;
        for (int r = 0; r < rows; ++r) {
            double lo = bounds.lo[k][r], hi = bounds.hi[k][r];
            std::string tag = std::to_string(k) + "_" + std::to_string(r);
            int x, s, z = -1;
            if (hi <= 0.0) { // dead: output pinned to zero
                x = model.lp.add_var(0.0, 0.0, 0.0, "x" + tag);
                s = model.lp.add_var(std::max(0.0, -hi), -lo, 0.0, "s" + tag);
            } else if (lo >= 0.0) { // always active: slack pinned to zero
                x = model.lp.add_var(lo, hi, 0.0, "x" + tag);
                s = model.lp.add_var(0.0, 0.0, 0.0, "s" + tag);
            } else {
                x = model.lp.add_var(0.0, hi, 0.0, "x" + tag);
                s = model.lp.add_var(0.0, -lo, 0.0, "s" + tag);
                z = model.lp.add_var(0.0, 1.0, 0.0, "z" + tag);
                model.lp.add_row('<', {{x, 1.0}, {z, -hi}}, 0.0);
                model.lp.add_row('<', {{s, 1.0}, {z, -lo}}, -lo);
                model.binaries.push_back(z);
            }
            // W x_prev + b = x - s
            std::vector<std::pair<int, double>> coeffs;
            const double* w = net.weights[k].data() + static_cast<std::size_t>(r) * cols;
            for (int c = 0; c < cols; ++c)
                if (w[c] != 0.0)
                    coeffs.emplace_back(prev_vars[c], w[c]);
            coeffs.emplace_back(x, -1.0);
            coeffs.emplace_back(s, 1.0);
            model.lp.add_row('=', coeffs, -net.biases[k][r]);
            xs.push_back(x);
            ss.push_back(s);
            zs.push_back(z);
        }
        map.x_vars.push_back(xs);
        map.s_vars.push_back(ss);
        map.z_vars.push_back(zs);
        prev_vars = xs;
    }
    map.y_var = map.x_vars.back()[0];
    model.netmap = std::move(map);
    return model;
}

// ---------------------------------------------------------------------------
// Solution and limits
// ---------------------------------------------------------------------------

enum class MipStatus { optimal, gap_reached, time_limit, node_limit };

struct MipLimits {
    double gap_tol = 1e-6;
    double time_limit_seconds = kInfinity;
    long node_limit = 2000000;
};

struct MipSolution {
    std::vector<double> x; // incumbent assignment over all model variables
    double value = -kInfinity;
    double bound = kInfinity;
    double gap = kInfinity;
    long nodes = 0;
    MipStatus status = MipStatus::node_limit;
    bool certified = true; // false whenever non-convex quadratics are present
    bool found = false;
};

// ---------------------------------------------------------------------------
// Branch and bound
// ---------------------------------------------------------------------------

namespace detail {

class BranchAndBound {
  public:
    BranchAndBound(const MipModel& model, const MipLimits& limits)
        : model_(model), lp_(model.lp), limits_(limits),
          base_objective_(model.lp.objective) {
        root_lo_ = lp_.lower;
        root_hi_ = lp_.upper;
    }

    MipSolution run() {
        auto started = std::chrono::steady_clock::now();
        MipSolution sol;
        sol.certified = !model_.has_nonconvex_terms();

        nodes_.push_back(Node{});
        queue_.push({kInfinity, 0});

        long evaluated = 0;
        MipStatus status = MipStatus::optimal;
        double closed_bound = -kInfinity; // strongest bound among slack-closed nodes

        std::vector<double> lo, hi;
        while (!queue_.empty()) {
            double scale = std::max(1.0, std::abs(incumbent_));
            if (incumbent_ > -kInfinity &&
                queue_.top().bound - incumbent_ <=
                    limits_.gap_tol * scale + 1e-10 * scale) {
                status = limits_.gap_tol > 0.0 ? MipStatus::gap_reached
                                               : MipStatus::optimal;
                sol.bound = std::max(incumbent_, queue_.top().bound);
                break;
            }
            if (evaluated >= limits_.node_limit) {
                status = MipStatus::node_limit;
                sol.bound = std::max(incumbent_, queue_.top().bound);
                break;
            }
            if (std::isfinite(limits_.time_limit_seconds)) {
                double elapsed = std::chrono::duration<double>(
                                     std::chrono::steady_clock::now() - started)
                                     .count();
                if (elapsed > limits_.time_limit_seconds) {
                    status = MipStatus::time_limit;
                    sol.bound = std::max(incumbent_, queue_.top().bound);
                    break;
                }
            }

            auto [est_bound, node_id] = queue_.top();
            queue_.pop();
            if (incumbent_ > -kInfinity &&
                est_bound - incumbent_ <= prune_eps()) {
                closed_bound = std::max(closed_bound, est_bound);
                continue; // dominated while waiting
            }

            collect_bounds(node_id, lo, hi);

            // linear overestimate of the quadratic terms on this node's box
            lp_.objective = base_objective_;
            double intercepts = 0.0;
            for (const auto& term : model_.quads) {
                double l = lo[term.var], u = hi[term.var];
                double slope, intercept;
                if (term.coeff > 0.0) { // chord of a convex term
                    slope = term.coeff * (l + u);
                    intercept = -term.coeff * l * u;
                } else { // tangent of a concave term at the midpoint
                    double mid = 0.5 * (l + u);
                    slope = 2.0 * term.coeff * mid;
                    intercept = -term.coeff * mid * mid;
                }
                lp_.objective[term.var] += slope;
                intercepts += intercept;
            }

            LpSolution lp_sol = solve_lp(lp_, &lo, &hi);
            ++evaluated;
            if (lp_sol.status == LpStatus::infeasible)
                continue; // prune
            if (lp_sol.status != LpStatus::optimal)
                throw std::runtime_error("solve_mip: node LP did not solve");
            double node_bound =
                std::min(est_bound, lp_sol.value + intercepts + model_.constant);
            nodes_[node_id].bound = node_bound;

            // rounding heuristic: forward-pass completion of the LP point
            if (model_.netmap)
                offer_incumbent(complete_from_inputs(lp_sol.x));
            if (incumbent_ > -kInfinity && node_bound - incumbent_ <= prune_eps()) {
                closed_bound = std::max(closed_bound, node_bound);
                continue; // pruned by bound
            }

            int branch_var = pick_fractional_binary(lp_sol.x, lo, hi);
            if (branch_var >= 0) {
                push_child(node_id, branch_var, lo[branch_var], 0.0, node_bound);
                push_child(node_id, branch_var, 1.0, hi[branch_var], node_bound);
                continue;
            }

            // binaries integral: the LP point is feasible; its true value
            // differs from the bound by the overestimator gaps
            double total_gap = 0.0;
            int worst = -1;
            double worst_gap = 0.0;
            for (std::size_t qi = 0; qi < model_.quads.size(); ++qi) {
                const auto& term = model_.quads[qi];
                double l = lo[term.var], u = hi[term.var];
                double v = lp_sol.x[term.var];
                double over = term.coeff > 0.0
                                  ? term.coeff * (l + u) * v - term.coeff * l * u
                                  : [&] {
                                        double mid = 0.5 * (l + u);
                                        return 2.0 * term.coeff * mid * v -
                                               term.coeff * mid * mid;
                                    }();
                double gap = over - term.coeff * v * v;
                if (gap > 0.0)
                    total_gap += gap;
                if (gap > worst_gap && u - l > 1e-10) {
                    worst_gap = gap;
                    worst = static_cast<int>(qi);
                }
            }
            offer_incumbent({lp_sol.x, true_value(lp_sol.x)});
            if (total_gap <= 1e-9 * std::max(1.0, std::abs(node_bound))) {
                closed_bound = std::max(closed_bound, node_bound);
                continue; // leaf solved exactly
            }
            if (incumbent_ > -kInfinity && node_bound - incumbent_ <= prune_eps()) {
                closed_bound = std::max(closed_bound, node_bound);
                continue;
            }
            if (worst >= 0) {
                spatial_branch(node_id, worst, lp_sol.x, lo, hi);
            } else {
                // every refinable interval is exhausted: the bound is as
                // tight as this node can get
                closed_bound = std::max(closed_bound, node_bound);
            }
        }

        sol.value = incumbent_;
        sol.found = incumbent_ > -kInfinity;
        if (sol.found)
            sol.x = incumbent_x_;
        double scale = std::max(1.0, std::abs(sol.value));
        if (queue_.empty()) {
            sol.bound = std::max(incumbent_, closed_bound);
            status = (!sol.found || sol.bound - sol.value <= 1e-8 * scale)
                         ? MipStatus::optimal
                         : MipStatus::gap_reached;
        } else {
            sol.bound = std::max(sol.bound, closed_bound);
        }
        sol.nodes = evaluated;
        sol.status = status;
        sol.gap = sol.found ? std::abs(sol.bound - sol.value) / scale : kInfinity;
        if (sol.status == MipStatus::optimal)
            sol.gap = 0.0;
        return sol;
    }

  private:
    struct Node {
        int parent = -1;
        int var = -1;
        double lo = 0.0, hi = 0.0;
        double bound = kInfinity;
    };
    struct QueueItem {
        double bound;
        long id;
        bool operator<(const QueueItem& other) const {
            if (bound != other.bound)
                return bound < other.bound; // max-heap on bound
            return id > other.id;           // older node first
        }
    };

    double prune_eps() const {
        double scale = std::max(1.0, std::abs(incumbent_));
        return std::max(limits_.gap_tol * scale, 1e-10 * scale);
    }

    void collect_bounds(long node_id, std::vector<double>& lo, std::vector<double>& hi) {
        lo = root_lo_;
        hi = root_hi_;
        for (int cur = static_cast<int>(node_id); cur > 0; cur = nodes_[cur].parent) {
            const Node& n = nodes_[cur];
            lo[n.var] = std::max(lo[n.var], n.lo);
            hi[n.var] = std::min(hi[n.var], n.hi);
        }
    }

    int pick_fractional_binary(const std::vector<double>& x, const std::vector<double>& lo,
                               const std::vector<double>& hi) const {
        int best = -1;
        double best_frac = 1e-7;
        for (int z : model_.binaries) {
            if (lo[z] >= hi[z])
                continue; // fixed
            double frac = 0.5 - std::abs(x[z] - 0.5);
            if (frac > best_frac + 1e-12) {
                best_frac = frac;
                best = z;
            }
        }
        return best;
    }

    void push_child(long parent, int var, double lo, double hi, double parent_bound) {
        Node child;
        child.parent = static_cast<int>(parent);
        child.var = var;
        child.lo = lo;
        child.hi = hi;
        child.bound = parent_bound;
        nodes_.push_back(child);
        queue_.push({parent_bound, static_cast<long>(nodes_.size()) - 1});
    }

    void spatial_branch(long node_id, int qi, const std::vector<double>& x,
                        const std::vector<double>& lo, const std::vector<double>& hi) {
        const auto& term = model_.quads[qi];
        double l = lo[term.var], u = hi[term.var];
        double mid = std::clamp(x[term.var], l + 0.25 * (u - l), u - 0.25 * (u - l));
        push_child(node_id, term.var, l, mid, nodes_[node_id].bound);
        push_child(node_id, term.var, mid, u, nodes_[node_id].bound);
    }

    /// base-linear + quadratic + constant objective at a full assignment
    double true_value(const std::vector<double>& x) const {
        double value = model_.constant;
        for (int j = 0; j < static_cast<int>(base_objective_.size()); ++j)
            value += base_objective_[j] * x[j];
        for (const auto& term : model_.quads)
            value += term.coeff * x[term.var] * x[term.var];
        return value;
    }

    void offer_incumbent(std::pair<std::vector<double>, double> cand) {
        if (cand.second > incumbent_) {
            incumbent_ = cand.second;
            incumbent_x_ = std::move(cand.first);
        }
    }

    // feasible completion: forward pass from the LP's input values
    std::pair<std::vector<double>, double> complete_from_inputs(
        const std::vector<double>& lp_x) {
        const auto& map = *model_.netmap;
        std::vector<double> x = lp_x;

        std::vector<double> cur;
        cur.reserve(map.input_vars.size());
        for (int v : map.input_vars)
            cur.push_back(lp_x[v]);

        const EdgeNet& net = map.net;
        for (int k = 0; k < net.num_layers(); ++k) {
            int rows = net.layer_sizes[k + 1], cols = net.layer_sizes[k];
            std::vector<double> next(rows);
            for (int r = 0; r < rows; ++r) {
                double acc = net.biases[k][r];
                const double* w =
                    net.weights[k].data() + static_cast<std::size_t>(r) * cols;
                for (int c = 0; c < cols; ++c)
                    acc += w[c] * cur[c];
                next[r] = std::max(0.0, acc);
                x[map.x_vars[k][r]] = next[r];
                x[map.s_vars[k][r]] = std::max(0.0, -acc);
                if (map.z_vars[k][r] >= 0)
                    x[map.z_vars[k][r]] = acc >= 0.0 ? 1.0 : 0.0;
            }
            cur.swap(next);
        }
        double y = cur[0];
        if (map.e_var >= 0) {
            double e = 2.0 * y >= map.T ? 1.0 : 0.0;
            x[map.e_var] = e;
            if (map.w_var >= 0)
                x[map.w_var] = e * y;
        }
        return {x, true_value(x)};
    }

    const MipModel& model_;
    LpProblem lp_; // working copy; only the objective is rewritten per node
    MipLimits limits_;
    std::vector<double> base_objective_;
    std::vector<double> root_lo_, root_hi_;
    std::vector<Node> nodes_;
    std::priority_queue<QueueItem> queue_;
    double incumbent_ = -kInfinity;
    std::vector<double> incumbent_x_;
};

} // namespace detail

/// Best-first branch and bound over the model's binaries (and, when
/// quadratic terms require it, over envelope intervals). Deterministic for
/// fixed inputs whenever no wall-clock limit triggers.
inline MipSolution solve_mip(const MipModel& model, const MipLimits& limits = {}) {
    detail::BranchAndBound bnb(model, limits);
    return bnb.run();
}

// ---------------------------------------------------------------------------
// Model builders
// ---------------------------------------------------------------------------

namespace detail {

inline void attach_quadratic(MipModel& model, int var, double coeff) {
    if (coeff == 0.0)
        return;
    model.quads.push_back({var, coeff});
}

} // namespace detail

enum class SubregionFormulation {
    automatic,           // affine collapse at alpha == beta, combined quadratic else
    separate_quadratics, // literal transcription: Dev and L kept as two terms
};

/**
 * Per-subregion edge decision model: maximize
 *
 *   e*y + (1-e)*(T-y) - alpha * sum (omega - f) f - beta * sum (f - f*)^2
 *
 * over the network encoding of y = DNN(f) with f in [0, omega]^9. The
 * bilinear e*y is linearized exactly through w = e*y with big-M rows using
 * the network maximum u_bar. With alpha == beta the quadratic terms
 * collapse to an affine function of f and the model is a pure binary LP.
 */
inline MipModel build_subregion_mip(const EdgeNet& net, double T, double alpha,
                                    double beta, double omega,
                                    const std::optional<Subregion>& f_star,
                                    SubregionFormulation formulation =
                                        SubregionFormulation::automatic) {
    if (T < 0.0)
        throw std::invalid_argument("build_subregion_mip: T must be >= 0");
    if (alpha < 0.0 || beta < 0.0)
        throw std::invalid_argument("build_subregion_mip: weights must be >= 0");
    if (beta > 0.0 && !f_star)
        throw std::invalid_argument("build_subregion_mip: beta > 0 needs a reference");
    if (net.input_size() != 9)
        throw std::invalid_argument("build_subregion_mip: 3x3 input expected");

    std::vector<double> lo(9, 0.0), hi(9, omega);
    NeuronBounds bounds = compute_neuron_bounds(net, lo, hi);
    MipModel model = encode_network(net, bounds, lo, hi);
    auto& map = *model.netmap;
    map.T = T;

    const double u_bar = std::max(0.0, net.u_bar);
    int y = map.y_var;
    model.lp.upper[y] = std::min(model.lp.upper[y], u_bar);
    int e = model.lp.add_var(0.0, 1.0, 0.0, "e");
    int w = model.lp.add_var(0.0, u_bar, 0.0, "w");
    map.e_var = e;
    map.w_var = w;
    model.binaries.push_back(e);
    model.lp.add_row('<', {{w, 1.0}, {e, -u_bar}}, 0.0);
    model.lp.add_row('<', {{w, 1.0}, {y, -1.0}}, 0.0);
    model.lp.add_row('<', {{y, 1.0}, {w, -1.0}, {e, u_bar}}, u_bar);

    // e y + (1-e)(T-y) = 2w - T e - y + T
    model.lp.objective[w] += 2.0;
    model.lp.objective[e] -= T;
    model.lp.objective[y] -= 1.0;
    model.constant += T;

    bool collapse =
        formulation == SubregionFormulation::automatic && alpha == beta;
    for (int j = 0; j < 9; ++j) {
        int f = map.input_vars[j];
        double ref = f_star ? (*f_star)[j] : 0.0;
        if (collapse) {
            if (alpha > 0.0) {
                model.lp.objective[f] += -alpha * (omega - 2.0 * ref);
                model.constant += -alpha * ref * ref;
            }
        } else if (formulation == SubregionFormulation::automatic) {
            model.lp.objective[f] += -alpha * omega + 2.0 * beta * ref;
            model.constant += -beta * ref * ref;
            detail::attach_quadratic(model, f, alpha - beta);
        } else {
            model.lp.objective[f] += -alpha * omega + 2.0 * beta * ref;
            model.constant += -beta * ref * ref;
            detail::attach_quadratic(model, f, alpha);
            detail::attach_quadratic(model, f, -beta);
        }
    }
    return model;
}

/// Global maximum of the network over [0, omega]^n, solved to zero gap;
/// the result is stored on the net as u_bar.
inline double max_output(EdgeNet& net, const MipLimits& limits = {0.0, kInfinity, 2000000}) {
    std::vector<double> lo(net.input_size(), 0.0), hi(net.input_size(), net.omega);
    NeuronBounds bounds = compute_neuron_bounds(net, lo, hi);
    MipModel model = encode_network(net, bounds, lo, hi);
    model.lp.objective[model.netmap->y_var] = 1.0;
    MipSolution sol = solve_mip(model, limits);
    if (!sol.found || sol.status != MipStatus::optimal)
        throw std::runtime_error("max_output: solver did not reach optimality");
    net.u_bar = std::max(0.0, sol.value);
    return net.u_bar;
}

/// True objective of a subregion model at given window values (the network
/// output and the edge flag are implied by the forward pass).
inline double subregion_objective(const EdgeNet& net, double T, double alpha, double beta,
                                  double omega, const std::optional<Subregion>& f_star,
                                  const Subregion& f) {
    double y = forward(net, f);
    double edge = std::max(y, T - y);
    double value = edge;
    for (int j = 0; j < 9; ++j) {
        value -= alpha * (omega - f[j]) * f[j];
        if (beta > 0.0) {
            double d = f[j] - (*f_star)[j];
            value -= beta * d * d;
        }
    }
    return value;
}

// ---------------------------------------------------------------------------
// LP-format text dump (for cross-checking against external solvers)
// ---------------------------------------------------------------------------

inline void dump_lp_format(const MipModel& model, std::ostream& out) {
    const LpProblem& lp = model.lp;
    out << "\\ relaxation dump; quadratic terms appear through their aux vars\n";
    out << "Maximize\n obj:";
    bool first = true;
    for (int j = 0; j < lp.num_vars(); ++j) {
        if (lp.objective[j] == 0.0)
            continue;
        double c = lp.objective[j];
        out << (c < 0 ? " - " : (first ? " " : " + ")) << std::abs(c) << ' '
            << lp.names[j];
        first = false;
    }
    if (first)
        out << " 0 " << (lp.num_vars() ? lp.names[0] : "x0");
    out << "\nSubject To\n";
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        out << " c" << i << ":";
        bool f2 = true;
        for (auto [v, c] : lp.rows[i].coeffs) {
            out << (c < 0 ? " - " : (f2 ? " " : " + ")) << std::abs(c) << ' '
                << lp.names[v];
            f2 = false;
        }
        out << (lp.rows[i].type == '=' ? " = " : " <= ") << lp.rows[i].rhs << '\n';
    }
    out << "Bounds\n";
    for (int j = 0; j < lp.num_vars(); ++j) {
        out << ' ';
        if (lp.lower[j] == -kInfinity)
            out << "-inf";
        else
            out << lp.lower[j];
        out << " <= " << lp.names[j] << " <= ";
        if (lp.upper[j] == kInfinity)
            out << "+inf";
        else
            out << lp.upper[j];
        out << '\n';
    }
    if (!model.binaries.empty()) {
        out << "Binaries\n";
        for (int z : model.binaries)
            out << ' ' << lp.names[z];
        out << '\n';
    }
    out << "End\n";
}

} // namespace tomomip
