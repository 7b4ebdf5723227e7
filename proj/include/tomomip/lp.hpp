#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tomomip/core.hpp"

namespace tomomip {

/// Linear program in maximization form: max c'x subject to equality and
/// less-equal rows plus per-variable box bounds (infinities allowed).
struct LpProblem {
    std::vector<double> lower, upper, objective;
    std::vector<std::string> names;

    struct Row {
        std::vector<std::pair<int, double>> coeffs;
        double rhs = 0.0;
        char type = '='; // '=' or '<'
    };
    std::vector<Row> rows;

    int add_var(double lo, double hi, double obj = 0.0, const std::string& name = "") {
        lower.push_back(lo);
        upper.push_back(hi);
        objective.push_back(obj);
        names.push_back(name.empty() ? "x" + std::to_string(lower.size() - 1) : name);
        return static_cast<int>(lower.size()) - 1;
    }

    int add_row(char type, std::vector<std::pair<int, double>> coeffs, double rhs) {
        rows.push_back({std::move(coeffs), rhs, type});
        return static_cast<int>(rows.size()) - 1;
    }

    int num_vars() const { return static_cast<int>(lower.size()); }
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpSolution {
    LpStatus status = LpStatus::iteration_limit;
    double value = 0.0;
    std::vector<double> x;     // structural variables only
    std::vector<double> duals; // one multiplier per row
    long iterations = 0;
};

namespace detail {

/**
 * Bounded-variable primal simplex with an explicit dense basis inverse.
 * Two phases: artificial variables minimize infeasibility, then the true
 * objective is optimized. Dantzig pricing with a Bland fallback after a
 * run of degenerate pivots; deterministic tie-breaking throughout.
 */
class Simplex {
  public:
    Simplex(const LpProblem& prob, const std::vector<double>* lo_override,
            const std::vector<double>* hi_override)
        : prob_(prob) {
        n_struct_ = prob.num_vars();
        m_ = static_cast<int>(prob.rows.size());

        lo_.assign(prob.lower.begin(), prob.lower.end());
        hi_.assign(prob.upper.begin(), prob.upper.end());
        if (lo_override)
            lo_ = *lo_override;
        if (hi_override)
            hi_ = *hi_override;
        cost_.assign(prob.objective.begin(), prob.objective.end());

        // slack variables for '<' rows
        cols_.resize(n_struct_);
        for (int i = 0; i < m_; ++i) {
            for (auto [v, c] : prob.rows[i].coeffs)
                if (c != 0.0)
                    cols_[v].push_back({i, c});
            rhs_.push_back(prob.rows[i].rhs);
            if (prob.rows[i].type == '<') {
                int s = static_cast<int>(lo_.size());
                lo_.push_back(0.0);
                hi_.push_back(kInfinity);
                cost_.push_back(0.0);
                cols_.push_back({{i, 1.0}});
                (void)s;
            }
        }
        n_total_ = static_cast<int>(lo_.size());
    }

    LpSolution run(long max_iters) {
        // a singular basis (possible with numerically dependent cut rows)
        // triggers one clean restart on the Bland pivot path
        for (int attempt = 0; attempt < 2; ++attempt) {
            try {
                return run_attempt(max_iters);
            } catch (const SingularBasis&) {
                force_bland_ = true;
                iterations_ = 0;
                degenerate_run_ = 0;
                unbounded_ = false;
            }
        }
        throw std::runtime_error("simplex: singular basis persisted across restart");
    }

  private:
    struct SingularBasis {};

    LpSolution run_attempt(long max_iters) {
        LpSolution sol;
        if (m_ == 0) {
            // box-only problem: each variable sits at its favored bound
            sol.x.assign(n_struct_, 0.0);
            for (int j = 0; j < n_struct_; ++j) {
                if (cost_[j] > 0.0) {
                    if (hi_[j] == kInfinity) {
                        sol.status = LpStatus::unbounded;
                        return sol;
                    }
                    sol.x[j] = hi_[j];
                } else if (cost_[j] < 0.0) {
                    if (lo_[j] == -kInfinity) {
                        sol.status = LpStatus::unbounded;
                        return sol;
                    }
                    sol.x[j] = lo_[j];
                } else {
                    sol.x[j] = std::clamp(0.0, lo_[j], hi_[j]);
                }
                if (lo_[j] > hi_[j] + 1e-12) {
                    sol.status = LpStatus::infeasible;
                    return sol;
                }
                sol.value += cost_[j] * sol.x[j];
            }
            sol.status = LpStatus::optimal;
            return sol;
        }

        for (int j = 0; j < n_total_; ++j)
            if (lo_[j] > hi_[j] + 1e-9) {
                sol.status = LpStatus::infeasible;
                return sol;
            }

        init_phase1();
        bool ok = true;
        for (int pass = 0; pass < 6; ++pass) {
            ok = iterate(max_iters, /*phase1=*/true);
            if (!ok)
                break;
            long before = iterations_;
            refactorize(); // exact state before declaring the phase done
            if (!iterate(max_iters, /*phase1=*/true))
                ok = false;
            if (!ok || iterations_ == before)
                break;
        }
        if (!ok) {
            sol.status = LpStatus::iteration_limit;
            sol.iterations = iterations_;
            return sol;
        }
        double infeas = 0.0;
        for (int j = n_total_; j < n_total_ + m_; ++j)
            if (state_[j] == Basic)
                infeas += std::abs(value_of(j));
            else
                infeas += std::abs(bound_value(j));
        double scale = 1.0;
        for (double b : rhs_)
            scale = std::max(scale, std::abs(b));
        if (infeas > 1e-7 * scale) {
            sol.status = LpStatus::infeasible;
            sol.iterations = iterations_;
            return sol;
        }

        // phase 2: pin artificials to zero, restore true costs
        for (int j = n_total_; j < n_total_ + m_; ++j) {
            lo_[j] = 0.0;
            hi_[j] = 0.0;
            cost_[j] = 0.0;
            if (state_[j] != Basic) {
                state_[j] = AtLower;
                xval_[j] = 0.0;
            }
        }
        for (int j = 0; j < n_total_; ++j)
            cost_[j] = j < n_struct_ ? prob_.objective[j] : 0.0;

        refactorize();
        for (int pass = 0; pass < 6; ++pass) {
            ok = iterate(max_iters, /*phase1=*/false);
            if (!ok)
                break;
            long before = iterations_;
            refactorize();
            if (!iterate(max_iters, /*phase1=*/false))
                ok = false;
            if (!ok || iterations_ == before)
                break;
        }
        sol.iterations = iterations_;
        if (!ok) {
            sol.status = unbounded_ ? LpStatus::unbounded : LpStatus::iteration_limit;
            if (unbounded_)
                return sol;
        } else {
            sol.status = LpStatus::optimal;
        }

        // the solution is read from an exactly refactorized basis; any basic
        // variable outside its bounds means the pivot path went numerically
        // bad, so restart on the Bland path
        refactorize();
        double bound_violation = 0.0;
        for (int i = 0; i < m_; ++i) {
            int bj = basis_[i];
            if (lo_[bj] > -kInfinity)
                bound_violation = std::max(bound_violation, lo_[bj] - xb_[i]);
            if (hi_[bj] < kInfinity)
                bound_violation = std::max(bound_violation, xb_[i] - hi_[bj]);
        }
        if (bound_violation > 1e-6 * std::max(1.0, scale))
            throw SingularBasis{};

        sol.x.assign(n_struct_, 0.0);
        for (int j = 0; j < n_struct_; ++j)
            sol.x[j] = value_of_any(j);
        sol.value = 0.0;
        for (int j = 0; j < n_struct_; ++j)
            sol.value += prob_.objective[j] * sol.x[j];
        sol.duals = compute_duals();
        return sol;
    }

    enum State : unsigned char { AtLower, AtUpper, Basic, Free };

    const LpProblem& prob_;
    int n_struct_ = 0, n_total_ = 0, m_ = 0;
    std::vector<double> lo_, hi_, cost_, rhs_;
    std::vector<std::vector<std::pair<int, double>>> cols_; // per-var (row, coeff)

    std::vector<int> basis_;        // var index per row
    std::vector<unsigned char> state_;
    std::vector<double> xval_;      // current value per var (valid for nonbasic; basic held in xb_)
    std::vector<double> xb_;        // basic values per row
    std::vector<double> binv_;      // dense m x m row-major basis inverse
    std::vector<double> art_sign_;  // +-1 per row (artificial column signs)
    long iterations_ = 0;
    bool unbounded_ = false;
    bool force_bland_ = false;
    int degenerate_run_ = 0;

    static constexpr double kPivTol = 1e-9;
    static constexpr double kCostTol = 1e-9;

    double bound_value(int j) const {
        if (state_[j] == AtLower)
            return lo_[j];
        if (state_[j] == AtUpper)
            return hi_[j];
        return 0.0; // Free
    }

    double value_of(int j) const { // basic only
        for (int i = 0; i < m_; ++i)
            if (basis_[i] == j)
                return xb_[i];
        return 0.0;
    }

    double value_of_any(int j) const {
        if (state_[j] == Basic) {
            for (int i = 0; i < m_; ++i)
                if (basis_[i] == j)
                    return xb_[i];
        }
        return bound_value(j);
    }

    // column j of the full constraint matrix (artificials included)
    void column(int j, std::vector<double>& out) const {
        out.assign(m_, 0.0);
        if (j < n_total_) {
            for (auto [r, c] : cols_[j])
                out[r] = c;
        } else {
            out[j - n_total_] = art_sign_[j - n_total_];
        }
    }

    void init_phase1() {
        state_.assign(n_total_ + m_, AtLower);
        xval_.assign(n_total_ + m_, 0.0);
        for (int j = 0; j < n_total_; ++j) {
            if (lo_[j] == -kInfinity && hi_[j] == kInfinity) {
                state_[j] = Free;
                xval_[j] = 0.0;
            } else if (lo_[j] == -kInfinity) {
                state_[j] = AtUpper;
                xval_[j] = hi_[j];
            } else if (hi_[j] == kInfinity || std::abs(lo_[j]) <= std::abs(hi_[j])) {
                state_[j] = AtLower;
                xval_[j] = lo_[j];
            } else {
                state_[j] = AtUpper;
                xval_[j] = hi_[j];
            }
        }
        // residual determines artificial signs
        std::vector<double> resid = rhs_;
        for (int j = 0; j < n_total_; ++j) {
            double v = xval_[j];
            if (v != 0.0)
                for (auto [r, c] : cols_[j])
                    resid[r] -= c * v;
        }
        art_sign_.assign(m_, 1.0);
        basis_.assign(m_, 0);
        xb_.assign(m_, 0.0);
        cost_.resize(n_total_ + m_);
        lo_.resize(n_total_ + m_);
        hi_.resize(n_total_ + m_);
        for (int i = 0; i < m_; ++i) {
            art_sign_[i] = resid[i] >= 0.0 ? 1.0 : -1.0;
            int a = n_total_ + i;
            basis_[i] = a;
            state_[a] = Basic;
            lo_[a] = 0.0;
            hi_[a] = kInfinity;
            xb_[i] = std::abs(resid[i]);
        }
        for (int j = 0; j < n_total_; ++j)
            cost_[j] = 0.0;
        for (int i = 0; i < m_; ++i)
            cost_[n_total_ + i] = -1.0;
        binv_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
        for (int i = 0; i < m_; ++i)
            binv_[static_cast<std::size_t>(i) * m_ + i] = 1.0 / art_sign_[i];
    }

    void refactorize() {
        // Gauss-Jordan inversion of the basis matrix
        std::vector<double> mat(static_cast<std::size_t>(m_) * m_, 0.0);
        std::vector<double> col;
        for (int i = 0; i < m_; ++i) {
            column(basis_[i], col);
            for (int r = 0; r < m_; ++r)
                mat[static_cast<std::size_t>(r) * m_ + i] = col[r];
        }
        std::vector<double> inv(static_cast<std::size_t>(m_) * m_, 0.0);
        for (int i = 0; i < m_; ++i)
            inv[static_cast<std::size_t>(i) * m_ + i] = 1.0;
        for (int c = 0; c < m_; ++c) {
            int piv = c;
            double best = std::abs(mat[static_cast<std::size_t>(c) * m_ + c]);
            for (int r = c + 1; r < m_; ++r) {
                double v = std::abs(mat[static_cast<std::size_t>(r) * m_ + c]);
                if (v > best) {
                    best = v;
                    piv = r;
                }
            }
            if (best < 1e-13)
                throw SingularBasis{};
            if (piv != c)
                for (int k = 0; k < m_; ++k) {
                    std::swap(mat[static_cast<std::size_t>(piv) * m_ + k],
                              mat[static_cast<std::size_t>(c) * m_ + k]);
                    std::swap(inv[static_cast<std::size_t>(piv) * m_ + k],
                              inv[static_cast<std::size_t>(c) * m_ + k]);
                }
            double d = 1.0 / mat[static_cast<std::size_t>(c) * m_ + c];
            for (int k = 0; k < m_; ++k) {
                mat[static_cast<std::size_t>(c) * m_ + k] *= d;
                inv[static_cast<std::size_t>(c) * m_ + k] *= d;
            }
            for (int r = 0; r < m_; ++r) {
                if (r == c)
                    continue;
                double f = mat[static_cast<std::size_t>(r) * m_ + c];
                if (f == 0.0)
                    continue;
                for (int k = 0; k < m_; ++k) {
                    mat[static_cast<std::size_t>(r) * m_ + k] -=
                        f * mat[static_cast<std::size_t>(c) * m_ + k];
                    inv[static_cast<std::size_t>(r) * m_ + k] -=
                        f * inv[static_cast<std::size_t>(c) * m_ + k];
                }
            }
        }
        binv_ = std::move(inv);
        recompute_basics();
    }

    void recompute_basics() {
        std::vector<double> b_eff = rhs_;
        for (int j = 0; j < n_total_ + m_; ++j) {
            if (state_[j] == Basic)
                continue;
            double v = bound_value(j);
            if (v == 0.0)
                continue;
            if (j < n_total_) {
                for (auto [r, c] : cols_[j])
                    b_eff[r] -= c * v;
            } else {
                b_eff[j - n_total_] -= art_sign_[j - n_total_] * v;
            }
        }
        for (int i = 0; i < m_; ++i) {
            double acc = 0.0;
            const double* row = binv_.data() + static_cast<std::size_t>(i) * m_;
            for (int r = 0; r < m_; ++r)
                acc += row[r] * b_eff[r];
            xb_[i] = acc;
        }
    }

    std::vector<double> compute_duals() const {
        std::vector<double> y(m_, 0.0);
        for (int i = 0; i < m_; ++i) {
            double cb = cost_[basis_[i]];
            if (cb == 0.0)
                continue;
            const double* row = binv_.data() + static_cast<std::size_t>(i) * m_;
            for (int r = 0; r < m_; ++r)
                y[r] += cb * row[r];
        }
        return y;
    }

    bool iterate(long max_iters, bool phase1) {
        std::vector<double> y(m_), w(m_), col;
        int since_refactor = 0;
        while (iterations_ < max_iters) {
            // y = c_B B^-1
            std::fill(y.begin(), y.end(), 0.0);
            for (int i = 0; i < m_; ++i) {
                double cb = cost_[basis_[i]];
                if (cb == 0.0)
                    continue;
                const double* row = binv_.data() + static_cast<std::size_t>(i) * m_;
                for (int r = 0; r < m_; ++r)
                    y[r] += cb * row[r];
            }
            // pricing
            int enter = -1, dir = 0;
            double best = kCostTol;
            bool bland = force_bland_ || degenerate_run_ > 2 * m_ + 50;
            int limit = phase1 ? n_total_ + m_ : n_total_;
            for (int j = 0; j < limit; ++j) {
                if (state_[j] == Basic)
                    continue;
                if (lo_[j] == hi_[j])
                    continue; // fixed
                double d = cost_[j];
                if (j < n_total_) {
                    for (auto [r, c] : cols_[j])
                        d -= y[r] * c;
                } else {
                    d -= y[j - n_total_] * art_sign_[j - n_total_];
                }
                int cand_dir = 0;
                if ((state_[j] == AtLower || state_[j] == Free) && d > kCostTol)
                    cand_dir = 1;
                else if ((state_[j] == AtUpper || state_[j] == Free) && d < -kCostTol)
                    cand_dir = -1;
                if (cand_dir == 0)
                    continue;
                if (bland) {
                    enter = j;
                    dir = cand_dir;
                    break;
                }
                if (std::abs(d) > best) {
                    best = std::abs(d);
                    enter = j;
                    dir = cand_dir;
                }
            }
            if (enter < 0)
                return true; // optimal for this phase

            column(enter, col);
            double t_max = hi_[enter] - lo_[enter]; // bound flip distance
            if (state_[enter] == Free)
                t_max = kInfinity;
            int leave_row = -1;
            double leave_piv = 0.0;
            char leave_to = 0; // bound the leaving variable lands on
            double best_t = kInfinity;

            // Tiny pivots amplify eta-update noise by 1/pivot, which is how
            // bases go numerically singular; before accepting one the basis
            // is refactorized and the ratio test redone on exact data.
            bool fresh = false;
            for (;;) {
                // w = B^-1 a_enter
                for (int i = 0; i < m_; ++i) {
                    double acc = 0.0;
                    const double* row = binv_.data() + static_cast<std::size_t>(i) * m_;
                    for (int r = 0; r < m_; ++r)
                        acc += row[r] * col[r];
                    w[i] = acc;
                }
                // pass 1: minimum blocking ratio
                best_t = kInfinity;
                for (int i = 0; i < m_; ++i) {
                    double coef = dir * w[i];
                    int bj = basis_[i];
                    double t;
                    if (coef > kPivTol) {
                        if (lo_[bj] == -kInfinity)
                            continue;
                        t = (xb_[i] - lo_[bj]) / coef;
                    } else if (coef < -kPivTol) {
                        if (hi_[bj] == kInfinity)
                            continue;
                        t = (xb_[i] - hi_[bj]) / coef;
                    } else {
                        continue;
                    }
                    best_t = std::min(best_t, std::max(t, 0.0));
                }
                // pass 2: largest pivot within a tight window of the minimum
                leave_row = -1;
                leave_piv = 0.0;
                leave_to = 0;
                if (best_t < kInfinity) {
                    double window = best_t + 1e-9 * (1.0 + best_t);
                    for (int i = 0; i < m_; ++i) {
                        double coef = dir * w[i];
                        int bj = basis_[i];
                        double t;
                        char to;
                        if (coef > kPivTol) {
                            if (lo_[bj] == -kInfinity)
                                continue;
                            t = (xb_[i] - lo_[bj]) / coef;
                            to = 'l';
                        } else if (coef < -kPivTol) {
                            if (hi_[bj] == kInfinity)
                                continue;
                            t = (xb_[i] - hi_[bj]) / coef;
                            to = 'u';
                        } else {
                            continue;
                        }
                        if (std::max(t, 0.0) > window)
                            continue;
                        if (leave_row < 0 || std::abs(w[i]) > std::abs(leave_piv)) {
                            leave_row = i;
                            leave_piv = w[i];
                            leave_to = to;
                        }
                    }
                }
                if (fresh || leave_row < 0 || std::abs(leave_piv) >= 1e-5 ||
                    best_t >= t_max)
                    break;
                refactorize();
                fresh = true;
            }

            if (best_t == kInfinity && t_max == kInfinity) {
                if (phase1)
                    throw std::runtime_error("simplex: unbounded phase 1");
                unbounded_ = true;
                return false;
            }
            bool flip = t_max <= best_t;
            double step = flip ? t_max : best_t;

            ++iterations_;
            degenerate_run_ = step < 1e-11 ? degenerate_run_ + 1 : 0;

            // move basics
            if (step != 0.0)
                for (int i = 0; i < m_; ++i)
                    xb_[i] -= dir * step * w[i];

            if (flip) {
                if (state_[enter] == AtLower)
                    state_[enter] = AtUpper;
                else if (state_[enter] == AtUpper)
                    state_[enter] = AtLower;
                xval_[enter] = bound_value(enter);
            } else {
                int leaving = basis_[leave_row];
                state_[leaving] = leave_to == 'l' ? AtLower : AtUpper;
                xval_[leaving] = bound_value(leaving);
                double enter_start = state_[enter] == Free ? 0.0 : bound_value(enter);
                basis_[leave_row] = enter;
                state_[enter] = Basic;
                xb_[leave_row] = enter_start + dir * step;
                // eta update of the inverse
                double piv = w[leave_row];
                double* prow = binv_.data() + static_cast<std::size_t>(leave_row) * m_;
                double inv_piv = 1.0 / piv;
                for (int k = 0; k < m_; ++k)
                    prow[k] *= inv_piv;
                for (int i = 0; i < m_; ++i) {
                    if (i == leave_row)
                        continue;
                    double f = w[i];
                    if (f == 0.0)
                        continue;
                    double* row = binv_.data() + static_cast<std::size_t>(i) * m_;
                    for (int k = 0; k < m_; ++k)
                        row[k] -= f * prow[k];
                }
                // a small accepted pivot amplifies noise by 1/pivot in the
                // update, so rebuild the inverse immediately afterwards
                if (std::abs(piv) < 1e-6)
                    since_refactor += 1000;
                if (++since_refactor >= 25) {
                    refactorize();
                    since_refactor = 0;
                }
            }
        }
        return false;
    }
};

} // namespace detail

/// Solves the LP; optional arrays override the variable bounds (used by the
/// branch-and-bound to apply node-local bound changes without copying).
inline LpSolution solve_lp(const LpProblem& prob,
                           const std::vector<double>* lower_override = nullptr,
                           const std::vector<double>* upper_override = nullptr,
                           long max_iters = 50000) {
    detail::Simplex simplex(prob, lower_override, upper_override);
    return simplex.run(max_iters);
}

} // namespace tomomip
