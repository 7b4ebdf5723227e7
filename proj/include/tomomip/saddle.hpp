#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tomomip/core.hpp"
#include "tomomip/rng.hpp"

namespace tomomip {

/**
 * First-order primal-dual solver (Chambolle-Pock scheme) for problems of
 * the form
 *
 *     min_x  sum_j G_j(x_j) + F(K x)
 *
 * where G_j is a per-variable convex piece (box + linear + quadratic +
 * one-sided hinge quadratic) and F decomposes over row blocks: weighted
 * quadratic fit, weighted l1 with offset, equality, and inequality rows.
 *
 * Besides the primal iterate the engine tracks the dual objective, which is
 * a certified lower bound on the optimum at any dual-feasible iterate; the
 * integrated reconstruction model relies on that bound for its node
 * relaxations.
 */
class SaddleProblem {
  public:
    enum class RowKind { quad_fit, l1, equality, inequality };

    struct VarSpec {
        double lo = 0.0;
        double hi = kInfinity;
        double linear = 0.0;    // g * x
        double quadratic = 0.0; // q * x^2, q >= 0
        double hinge = 0.0;     // mu * max(0, x - hinge_at)^2
        double hinge_at = 0.0;
    };

    int add_variable(const VarSpec& spec) {
        vars_.push_back(spec);
        col_entries_.emplace_back();
        return static_cast<int>(vars_.size()) - 1;
    }

    /// Appends one row of K. `param` is the fit target (quad_fit), the l1
    /// offset r0, or the right-hand side (equality/inequality). `weight`
    /// scales quad_fit (w*||.-t||^2) and l1 (w*|.+r0|) rows.
    int add_row(RowKind kind, const std::vector<std::pair<int, double>>& coeffs,
                double param, double weight = 1.0) {
        Row row;
        row.kind = kind;
        row.param = param;
        row.weight = weight;
        row.offset = static_cast<std::uint32_t>(row_entries_.size());
        row.count = static_cast<std::uint32_t>(coeffs.size());
        for (auto [var, c] : coeffs) {
            row_entries_.push_back({static_cast<std::uint32_t>(var), c});
            col_entries_[var].push_back({static_cast<std::uint32_t>(rows_.size()), c});
        }
        rows_.push_back(row);
        return static_cast<int>(rows_.size()) - 1;
    }

    int num_vars() const { return static_cast<int>(vars_.size()); }
    int num_rows() const { return static_cast<int>(rows_.size()); }
    VarSpec& var(int j) { return vars_[j]; }
    const VarSpec& var(int j) const { return vars_[j]; }

    /// Estimated operator norm of K via power iteration.
    double operator_norm(int iterations = 20) const {
        if (rows_.empty() || vars_.empty())
            return 0.0;
        CounterRng rng(0x9e1ed2f5, 7);
        std::vector<double> v(vars_.size());
        for (double& x : v)
            x = rng.next_double() - 0.5;
        double norm_sq = 1.0;
        std::vector<double> kv(rows_.size());
        for (int it = 0; it < iterations; ++it) {
            apply(v, kv);
            apply_transpose(kv, v);
            norm_sq = 0.0;
            for (double x : v)
                norm_sq += x * x;
            double inv = norm_sq > 0.0 ? 1.0 / std::sqrt(norm_sq) : 0.0;
            for (double& x : v)
                x *= inv;
        }
        apply(v, kv);
        double out = 0.0;
        for (double x : kv)
            out += x * x;
        return std::sqrt(out);
    }

    void apply(const std::vector<double>& x, std::vector<double>& out) const {
        out.assign(rows_.size(), 0.0);
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            const Row& row = rows_[r];
            double acc = 0.0;
            for (std::uint32_t k = row.offset; k < row.offset + row.count; ++k)
                acc += row_entries_[k].coeff * x[row_entries_[k].var];
            out[r] = acc;
        }
    }

    void apply_transpose(const std::vector<double>& y, std::vector<double>& out) const {
        out.assign(vars_.size(), 0.0);
        for (std::size_t j = 0; j < vars_.size(); ++j) {
            double acc = 0.0;
            for (const auto& e : col_entries_[j])
                acc += e.coeff * y[e.row];
            out[j] = acc;
        }
    }

    /// Primal objective at x (infeasible rows contribute a large penalty
    /// indicator so the caller can detect them; boxes are assumed held).
    double primal_objective(const std::vector<double>& x) const {
        std::vector<double> kx(rows_.size());
        apply(x, kx);
        double obj = 0.0;
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            const Row& row = rows_[r];
            switch (row.kind) {
            case RowKind::quad_fit: {
                double d = kx[r] - row.param;
                obj += row.weight * d * d;
                break;
            }
            case RowKind::l1:
                obj += row.weight * std::abs(kx[r] + row.param);
                break;
            case RowKind::equality:
            case RowKind::inequality:
                break;
            }
        }
        for (std::size_t j = 0; j < vars_.size(); ++j) {
            const VarSpec& v = vars_[j];
            obj += v.linear * x[j] + v.quadratic * x[j] * x[j];
            if (v.hinge > 0.0) {
                double over = std::max(0.0, x[j] - v.hinge_at);
                obj += v.hinge * over * over;
            }
        }
        return obj;
    }

    /// Largest violation of equality/inequality rows and boxes at x.
    double feasibility_violation(const std::vector<double>& x) const {
        std::vector<double> kx(rows_.size());
        apply(x, kx);
        double viol = 0.0;
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            if (rows_[r].kind == RowKind::equality)
                viol = std::max(viol, std::abs(kx[r] - rows_[r].param));
            else if (rows_[r].kind == RowKind::inequality)
                viol = std::max(viol, kx[r] - rows_[r].param);
        }
        for (std::size_t j = 0; j < vars_.size(); ++j) {
            viol = std::max(viol, vars_[j].lo - x[j]);
            viol = std::max(viol, x[j] - vars_[j].hi);
        }
        return viol;
    }

    /// Dual objective -F*(y) - G*(-K^T y): a valid lower bound on the
    /// optimum for any y (returns -inf when y is outside dom F* / dom G*).
    double dual_objective(const std::vector<double>& y) const {
        double value = 0.0;
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            const Row& row = rows_[r];
            switch (row.kind) {
            case RowKind::quad_fit:
                value -= y[r] * row.param + y[r] * y[r] / (4.0 * row.weight);
                break;
            case RowKind::l1:
                if (std::abs(y[r]) > row.weight + 1e-12)
                    return -kInfinity;
                value += y[r] * row.param;
                break;
            case RowKind::equality:
                value -= y[r] * row.param;
                break;
            case RowKind::inequality:
                if (y[r] < -1e-12)
                    return -kInfinity;
                value -= std::max(0.0, y[r]) * row.param;
                break;
            }
        }
        std::vector<double> kty(vars_.size());
        apply_transpose(y, kty);
        for (std::size_t j = 0; j < vars_.size(); ++j) {
            double sup = conjugate_sup(vars_[j], -kty[j]);
            if (sup == kInfinity)
                return -kInfinity;
            value -= sup;
        }
        return value;
    }

    struct Result {
        std::vector<double> x;
        std::vector<double> y;
        double objective = 0.0;
        double dual_bound = -kInfinity;
        bool converged = false;
        int iterations = 0;
    };

    struct Options {
        int max_iters = 20000;
        double tol = 1e-6;
        int check_every = 25;
        int patience = 3;
        bool track_dual = false;
        // diagonal (per-row/per-column) steps; scalar steps from the
        // operator norm when disabled
        bool preconditioned = true;
        const std::vector<double>* warm_x = nullptr;
        const std::vector<double>* warm_y = nullptr;
        // called at every objective checkpoint with (iteration, objective)
        std::function<void(int, double)> checkpoint;
    };

    Result solve(const Options& opt) const {
        const std::size_t n = vars_.size(), m = rows_.size();
        Result res;
        res.x.assign(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            const VarSpec& v = vars_[j];
            double x0 = 0.0;
            if (v.lo > x0)
                x0 = v.lo;
            if (v.hi < x0)
                x0 = v.hi;
            res.x[j] = x0;
        }
        if (opt.warm_x && opt.warm_x->size() == n)
            res.x = *opt.warm_x;
        res.y.assign(m, 0.0);
        if (opt.warm_y && opt.warm_y->size() == m)
            res.y = *opt.warm_y;

        std::vector<double> tau(n, 1.0), sigma(m, 1.0);
        if (opt.preconditioned) {
            std::vector<double> col_sum(n, 0.0);
            for (std::size_t r = 0; r < m; ++r) {
                const Row& row = rows_[r];
                double row_sum = 0.0;
                for (std::uint32_t k = row.offset; k < row.offset + row.count; ++k) {
                    double a = std::abs(row_entries_[k].coeff);
                    row_sum += a;
                    col_sum[row_entries_[k].var] += a;
                }
                sigma[r] = row_sum > 0.0 ? 1.0 / row_sum : 1.0;
            }
            for (std::size_t j = 0; j < n; ++j)
                tau[j] = col_sum[j] > 0.0 ? 1.0 / col_sum[j] : 1.0;
        } else {
            double L = operator_norm();
            double step = L > 0.0 ? 0.95 / L : 1.0;
            tau.assign(n, step);
            sigma.assign(m, step);
        }

        std::vector<double> x_bar = res.x, kx(m), kty(n);
        std::vector<double> best_x = res.x;
        double best_obj = primal_objective(res.x);
        double prev_obj = best_obj;
        int calm = 0;

        for (int it = 1; it <= opt.max_iters; ++it) {
            // dual ascent
            apply(x_bar, kx);
            for (std::size_t r = 0; r < m; ++r) {
                const Row& row = rows_[r];
                double s = sigma[r];
                double v = res.y[r] + s * kx[r];
                switch (row.kind) {
                case RowKind::quad_fit:
                    res.y[r] = (v - s * row.param) / (1.0 + s / (2.0 * row.weight));
                    break;
                case RowKind::l1:
                    res.y[r] = std::clamp(v + s * row.param, -row.weight, row.weight);
                    break;
                case RowKind::equality:
                    res.y[r] = v - s * row.param;
                    break;
                case RowKind::inequality:
                    res.y[r] = std::max(0.0, v - s * row.param);
                    break;
                }
            }
            // primal descent
            apply_transpose(res.y, kty);
            for (std::size_t j = 0; j < n; ++j) {
                const VarSpec& v = vars_[j];
                double old = res.x[j];
                double t = prox(v, old - tau[j] * kty[j], tau[j]);
                res.x[j] = t;
                x_bar[j] = 2.0 * t - old;
            }

            if (it % opt.check_every == 0 || it == opt.max_iters) {
                double obj = primal_objective(res.x);
                if (opt.checkpoint)
                    opt.checkpoint(it, obj);
                if (obj < best_obj) {
                    best_obj = obj;
                    best_x = res.x;
                }
                if (opt.track_dual)
                    res.dual_bound = std::max(res.dual_bound, dual_objective(res.y));
                double rel = std::abs(prev_obj - obj) / std::max(1.0, std::abs(obj));
                calm = rel < opt.tol ? calm + 1 : 0;
                prev_obj = obj;
                res.iterations = it;
                if (calm >= opt.patience) {
                    res.converged = true;
                    break;
                }
            }
        }
        res.objective = best_obj;
        if (opt.track_dual)
            res.dual_bound = std::max(res.dual_bound, dual_objective(res.y));
        std::swap(res.x, best_x);
        return res;
    }

  private:
    struct Row {
        RowKind kind;
        double param;
        double weight;
        std::uint32_t offset;
        std::uint32_t count;
    };
    struct RowEntry {
        std::uint32_t var;
        double coeff;
    };
    struct ColEntry {
        std::uint32_t row;
        double coeff;
    };

    // argmin_t (t - v)^2 / (2 tau) + G_j(t) over the box.
    static double prox(const VarSpec& s, double v, double tau) {
        double v_lin = v - tau * s.linear;
        double t;
        double denom_base = 1.0 + 2.0 * tau * s.quadratic;
        double t_low = v_lin / denom_base; // valid while t <= hinge_at (or no hinge)
        if (s.hinge <= 0.0 || t_low <= s.hinge_at) {
            t = t_low;
        } else {
            double denom = denom_base + 2.0 * tau * s.hinge;
            double t_high = (v_lin + 2.0 * tau * s.hinge * s.hinge_at) / denom;
            t = std::max(t_high, s.hinge_at);
        }
        return std::clamp(t, s.lo, s.hi);
    }

    // sup_t in box of (v t - q t^2 - mu max(0, t - a)^2 ... minus nothing else);
    // linear part of G is folded in by the caller via v.
    static double conjugate_sup(const VarSpec& s, double v) {
        double coeff = v - s.linear;
        auto piece_value = [&](double t) {
            double val = coeff * t - s.quadratic * t * t;
            if (s.hinge > 0.0) {
                double over = std::max(0.0, t - s.hinge_at);
                val -= s.hinge * over * over;
            }
            return val;
        };
        double best = -kInfinity;
        // candidate points: finite endpoints and the vertices of each piece
        std::vector<double> cands;
        cands.push_back(0.0);
        if (s.lo > -kInfinity)
            cands.push_back(s.lo);
        if (s.hi < kInfinity)
            cands.push_back(s.hi);
        if (s.quadratic > 0.0)
            cands.push_back(coeff / (2.0 * s.quadratic));
        if (s.hinge > 0.0) {
            double q2 = s.quadratic + s.hinge;
            cands.push_back((coeff + 2.0 * s.hinge * s.hinge_at) / (2.0 * q2));
            cands.push_back(s.hinge_at);
        }
        for (double t : cands)
            best = std::max(best, piece_value(std::clamp(t, s.lo, s.hi)));
        // unbounded directions
        if (s.hi == kInfinity) {
            double asym_quad = s.quadratic + (s.hinge > 0.0 ? s.hinge : 0.0);
            if (asym_quad <= 0.0 && coeff > 1e-12)
                return kInfinity;
            if (asym_quad > 0.0) {
                double vertex = s.hinge > 0.0
                                    ? (coeff + 2.0 * s.hinge * s.hinge_at) / (2.0 * asym_quad)
                                    : coeff / (2.0 * s.quadratic);
                best = std::max(best, piece_value(std::max(vertex, s.lo)));
            }
        }
        if (s.lo == -kInfinity) {
            if (s.quadratic <= 0.0 && coeff < -1e-12)
                return kInfinity;
            if (s.quadratic > 0.0)
                best = std::max(best, piece_value(std::min(coeff / (2.0 * s.quadratic), s.hi)));
        }
        return best;
    }

    std::vector<VarSpec> vars_;
    std::vector<Row> rows_;
    std::vector<RowEntry> row_entries_;
    std::vector<std::vector<ColEntry>> col_entries_;
};

} // namespace tomomip
