#include <gtest/gtest.h>
#include <sstream>

#include <cmath>

#include "tomomip/convex.hpp"
#include "tomomip/datasets.hpp"
#include "tomomip/projector.hpp"
#include "tomomip/rng.hpp"

using namespace tomomip;

namespace {

SparseOperator dense_operator(const std::vector<std::vector<double>>& rows, int cols) {
    SparseOperator R;
    R.rows = static_cast<std::uint32_t>(rows.size());
    R.cols = static_cast<std::uint32_t>(cols);
    for (std::uint32_t i = 0; i < R.rows; ++i)
        for (int j = 0; j < cols; ++j)
            if (rows[i][j] != 0.0)
                R.entries.push_back({i, static_cast<std::uint32_t>(j), rows[i][j]});
    return R;
}

} // namespace

TEST(Sirt, ZeroDataFixedPoint) {
    auto geom = build_geometry(5, 0.0, 8);
    SparseOperator R = build_radon_matrix(geom);
    Sinogram p(geom.angles_deg, geom.detector_count);
    Image f = sirt(R, p, 25, 8);
    for (double v : f.pixels)
        EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Sirt, ConsistentSystemConvergesToUniqueSolution) {
    // 2x2 invertible nonnegative system posed as a 1x2 "image"
    SparseOperator R = dense_operator({{2.0, 1.0}, {1.0, 3.0}}, 2);
    std::vector<double> truth = {1.5, 2.0};
    Sinogram p({0.0, 90.0}, 1);
    p.values = R.apply(truth);

    // direct solve oracle
    double det = 2.0 * 3.0 - 1.0 * 1.0;
    double x0 = (3.0 * p.values[0] - 1.0 * p.values[1]) / det;
    double x1 = (2.0 * p.values[1] - 1.0 * p.values[0]) / det;

    Image g = sirt(R, p, 1000, 2, 1);
    EXPECT_NEAR(g.pixels[0], x0, 1e-6);
    EXPECT_NEAR(g.pixels[1], x1, 1e-6);
}

TEST(Sirt, ResidualNonIncreasingOnPhantomData) {
    const int side = 24;
    PhantomSpec spec;
    spec.side = side;
    Image truth = generate_phantom(spec);
    auto geom = build_geometry(8, 0.0, side);
    SparseOperator R = build_radon_matrix(geom);
    Sinogram p = forward_project(R, truth, geom);

    std::vector<double> residuals;
    sirt(R, p, 50, side, [&](const Image& f, int) {
        std::vector<double> rf = R.apply(f.pixels);
        double resid = 0.0;
        for (std::size_t i = 0; i < rf.size(); ++i)
            resid += (rf[i] - p.values[i]) * (rf[i] - p.values[i]);
        residuals.push_back(std::sqrt(resid));
    });
    for (std::size_t i = 1; i < residuals.size(); ++i)
        EXPECT_LE(residuals[i], residuals[i - 1] + 1e-9);
}

TEST(TvNorm, ConstantImageIsZero) {
    Image img(9, 7, 3.25);
    EXPECT_DOUBLE_EQ(tv_norm(img), 0.0);
}

TEST(TvNorm, VerticalStepCostsRowsTimesHeight) {
    const int rows = 6, cols = 8;
    Image img(cols, rows);
    const double h = 2.5;
    for (int r = 0; r < rows; ++r)
        for (int c = 4; c < cols; ++c)
            img.at(r, c) = h;
    EXPECT_DOUBLE_EQ(tv_norm(img), rows * h);
}

TEST(TvNorm, MatchesBruteForceDoubleLoop) {
    Image img(5, 5);
    CounterRng rng(3);
    for (double& v : img.pixels)
        v = rng.next_double() * 10.0;
    double expected = 0.0;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            if (i + 1 < 5)
                expected += std::abs(img.at(i + 1, j) - img.at(i, j));
            if (j + 1 < 5)
                expected += std::abs(img.at(i, j + 1) - img.at(i, j));
        }
    EXPECT_NEAR(tv_norm(img), expected, 1e-12);
}

TEST(PixelBounds, TinyCase) {
    SparseOperator R = dense_operator({{1.0, 1.0}}, 2);
    Sinogram p({0.0}, 1);
    p.values = {2.0};
    auto b = pixel_upper_bounds(R, p);
    ASSERT_EQ(b.size(), 2u);
    EXPECT_DOUBLE_EQ(b[0], 2.0);
    EXPECT_DOUBLE_EQ(b[1], 2.0);
}

TEST(PixelBounds, UntouchedPixelIsUnbounded) {
    SparseOperator R = dense_operator({{1.0, 0.0}}, 2);
    Sinogram p({0.0}, 1);
    p.values = {5.0};
    auto b = pixel_upper_bounds(R, p);
    EXPECT_DOUBLE_EQ(b[0], 5.0);
    EXPECT_EQ(b[1], kInfinity);
}

TEST(PixelBounds, MatchesBruteForceScan) {
    const int side = 8;
    auto geom = build_geometry(5, 0.0, side);
    SparseOperator R = build_radon_matrix(geom);
    PhantomSpec spec;
    spec.side = side;
    Image f = generate_phantom(spec);
    Sinogram p = forward_project(R, f, geom);
    auto bounds = pixel_upper_bounds(R, p);

    std::vector<std::vector<double>> dense(R.rows, std::vector<double>(R.cols, 0.0));
    for (const auto& e : R.entries)
        dense[e.row][e.col] = e.weight;
    for (std::uint32_t j = 0; j < R.cols; ++j) {
        double expected = kInfinity;
        for (std::uint32_t i = 0; i < R.rows; ++i)
            if (dense[i][j] > 0.0)
                expected = std::min(expected, p.values[i] / dense[i][j]);
        EXPECT_EQ(bounds[j], expected);
    }
}

TEST(SolveCs, LambdaZeroRecoversConsistentSystem) {
    const int side = 12;
    PhantomSpec spec;
    spec.side = side;
    spec.material_value = 10.0;
    Image truth = generate_phantom(spec);
    auto geom = build_geometry(24, 0.0, side); // overdetermined, consistent
    SparseOperator R = build_radon_matrix(geom);
    Sinogram p = forward_project(R, truth, geom);

    CsConfig cfg;
    cfg.lambda_tv = 0.0;
    cfg.max_iters = 40000;
    cfg.tol = 1e-9;
    Image f = solve_cs(R, p, side, cfg);
    std::vector<double> rf = R.apply(f.pixels);
    double resid = 0.0;
    for (std::size_t i = 0; i < rf.size(); ++i)
        resid += (rf[i] - p.values[i]) * (rf[i] - p.values[i]);
    EXPECT_LE(std::sqrt(resid), 1e-6 * std::max(1.0, std::sqrt(p.values.size())));
}

TEST(SolveCs, HugeLambdaFlattensImage) {
    const int side = 10;
    PhantomSpec spec;
    spec.side = side;
    Image truth = generate_phantom(spec);
    auto geom = build_geometry(6, 0.0, side);
    SparseOperator R = build_radon_matrix(geom);
    Sinogram p = forward_project(R, truth, geom);

    CsConfig cfg;
    cfg.lambda_tv = 1e9;
    cfg.max_iters = 30000;
    Image f = solve_cs(R, p, side, cfg);
    double mean = 0.0;
    for (double v : f.pixels)
        mean += v;
    mean /= f.size();
    double var = 0.0;
    for (double v : f.pixels)
        var += (v - mean) * (v - mean);
    var /= f.size();
    EXPECT_LE(var, 1e-8 * std::max(1.0, mean * mean));
}

namespace {

// Slow independent oracle: accelerated projected gradient on the CS
// objective with the TV term smoothed by a tiny Huber width.
double projected_gradient_cs_objective(const SparseOperator& R, const Sinogram& p,
                                       int side, double lambda, int iters) {
    const double delta = 1e-3;
    std::vector<double> x(R.cols, 0.0), x_prev = x, grad(R.cols);
    // ||R||^2 via power iteration on R^T R
    double norm_sq;
    {
        std::vector<double> v(R.cols);
        CounterRng rng(17);
        for (double& a : v)
            a = rng.next_double();
        norm_sq = 1.0;
        for (int it = 0; it < 50; ++it) {
            auto rv = R.apply(v);
            v = R.apply_transpose(rv);
            norm_sq = 0.0;
            for (double a : v)
                norm_sq += a * a;
            norm_sq = std::sqrt(norm_sq);
            double inv = norm_sq > 0 ? 1.0 / norm_sq : 0.0;
            for (double& a : v)
                a *= inv;
        }
    }
    double step = 1.0 / (2.0 * norm_sq + lambda * 8.0 / delta);

    auto huber_grad = [&](const std::vector<double>& f, std::vector<double>& g) {
        std::fill(g.begin(), g.end(), 0.0);
        auto idx = [side](int r, int c) { return r * side + c; };
        for (int r = 0; r < side; ++r)
            for (int c = 0; c < side; ++c) {
                if (r + 1 < side) {
                    double d = f[idx(r + 1, c)] - f[idx(r, c)];
                    double gd = std::abs(d) <= delta ? d / delta : (d > 0 ? 1.0 : -1.0);
                    g[idx(r + 1, c)] += lambda * gd;
                    g[idx(r, c)] -= lambda * gd;
                }
                if (c + 1 < side) {
                    double d = f[idx(r, c + 1)] - f[idx(r, c)];
                    double gd = std::abs(d) <= delta ? d / delta : (d > 0 ? 1.0 : -1.0);
                    g[idx(r, c + 1)] += lambda * gd;
                    g[idx(r, c)] -= lambda * gd;
                }
            }
    };

    std::vector<double> y = x, rf(R.rows), g2(R.cols);
    double t_acc = 1.0;
    for (int it = 0; it < iters; ++it) {
        rf = R.apply(y);
        for (std::size_t i = 0; i < rf.size(); ++i)
            rf[i] = 2.0 * (rf[i] - p.values[i]);
        grad = R.apply_transpose(rf);
        huber_grad(y, g2);
        for (std::size_t j = 0; j < grad.size(); ++j)
            grad[j] += g2[j];
        x_prev = x;
        for (std::size_t j = 0; j < x.size(); ++j)
            x[j] = std::max(0.0, y[j] - step * grad[j]);
        double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc)) / 2.0;
        for (std::size_t j = 0; j < x.size(); ++j)
            y[j] = x[j] + (t_acc - 1.0) / t_next * (x[j] - x_prev[j]);
        t_acc = t_next;
    }
    Image f(side, side);
    f.pixels = x;
    return cs_objective(R, p, f, lambda);
}

} // namespace

TEST(SolveCs, ObjectiveMatchesProjectedGradientOracle) {
    const int side = 64;
    PhantomSpec spec;
    spec.side = side;
    Image truth = generate_phantom(spec);
    auto geom = build_geometry(20, 0.0, side);
    SparseOperator R = build_radon_matrix(geom);
    Sinogram clean = forward_project(R, truth, geom);
    Sinogram p = apply_poisson_noise(clean, {1e4, 7});

    CsConfig cfg;
    cfg.lambda_tv = 300.0;
    cfg.max_iters = 12000;
    cfg.tol = 1e-8;
    SolveStats stats;
    Image f = solve_cs(R, p, side, cfg, &stats);
    double ours = cs_objective(R, p, f, cfg.lambda_tv);
    double oracle = projected_gradient_cs_objective(R, p, side, cfg.lambda_tv, 6000);
    EXPECT_NEAR(ours, oracle, 1e-3 * std::abs(oracle));
}

TEST(SolveCshm, MuZeroMatchesCs) {
    const int side = 12;
    PhantomSpec spec;
    spec.side = side;
    Image truth = generate_phantom(spec);
    auto geom = build_geometry(8, 0.0, side);
    SparseOperator R = build_radon_matrix(geom);
    Sinogram p = forward_project(R, truth, geom);

    CshmConfig cfg;
    cfg.lambda_tv = 50.0;
    cfg.mu = 0.0;
    cfg.use_pixel_bounds = false;
    cfg.max_iters = 20000;
    cfg.tol = 1e-8;
    CshmResult res = solve_cshm(R, p, side, cfg);

    CsConfig cs_cfg;
    cs_cfg.lambda_tv = cfg.lambda_tv;
    cs_cfg.max_iters = cfg.max_iters;
    cs_cfg.tol = cfg.tol;
    Image f_cs = solve_cs(R, p, side, cs_cfg);

    double obj_cshm = cs_objective(R, p, res.f, cfg.lambda_tv);
    double obj_cs = cs_objective(R, p, f_cs, cfg.lambda_tv);
    EXPECT_NEAR(obj_cshm, obj_cs, 2e-4 * std::max(1.0, std::abs(obj_cs)));
}

TEST(SolveCshm, ZeroSinogramCollapsesBoxToZero) {
    const int side = 8;
    auto geom = build_geometry(5, 0.0, side);
    SparseOperator R = build_radon_matrix(geom);
    Sinogram p(geom.angles_deg, geom.detector_count); // all zeros
    CshmConfig cfg;
    cfg.lambda_tv = 10.0;
    cfg.mu = 1.0;
    CshmResult res = solve_cshm(R, p, side, cfg);
    for (double v : res.f.pixels)
        EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(SolveCshm, FeasibilityAndSlackIdentity) {
    const int side = 16;
    PhantomSpec spec;
    spec.side = side;
    Image truth = generate_phantom(spec);
    auto geom = build_geometry(10, 0.0, side);
    SparseOperator R = build_radon_matrix(geom);
    Sinogram clean = forward_project(R, truth, geom);
    Sinogram p = apply_poisson_noise(clean, {1e4, 3});

    CshmConfig cfg;
    cfg.lambda_tv = 40.0;
    cfg.mu = 0.5;
    cfg.omega = 255.0;
    CshmResult res = solve_cshm(R, p, side, cfg);
    for (std::size_t j = 0; j < res.f.size(); ++j) {
        EXPECT_GE(res.f.pixels[j], 0.0);
        EXPECT_LE(res.f.pixels[j], res.bounds[j] + 1e-9);
        EXPECT_DOUBLE_EQ(res.slack[j], std::max(0.0, res.f.pixels[j] - cfg.omega));
    }
}

TEST(SolveCshm, DeterministicAcrossRuns) {
    const int side = 10;
    PhantomSpec spec;
    spec.side = side;
    Image truth = generate_phantom(spec);
    auto geom = build_geometry(6, 0.0, side);
    SparseOperator R = build_radon_matrix(geom);
    Sinogram p = forward_project(R, truth, geom);
    CshmConfig cfg;
    cfg.lambda_tv = 25.0;
    cfg.mu = 0.1;
    cfg.max_iters = 3000;
    CshmResult a = solve_cshm(R, p, side, cfg);
    CshmResult b = solve_cshm(R, p, side, cfg);
    EXPECT_EQ(a.f.pixels, b.f.pixels);
}

TEST(SolveCs, NonConvergenceIsFlaggedWithBestIterate) {
    const int side = 16;
    PhantomSpec spec;
    spec.side = side;
    Image truth = generate_phantom(spec);
    auto geom = build_geometry(8, 0.0, side);
    SparseOperator R = build_radon_matrix(geom);
    Sinogram p = forward_project(R, truth, geom);
    CsConfig cfg;
    cfg.lambda_tv = 100.0;
    cfg.max_iters = 60; // far too few to converge
    cfg.tol = 1e-14;
    SolveStats stats;
    Image f = solve_cs(R, p, side, cfg, &stats);
    EXPECT_FALSE(stats.converged);
    EXPECT_EQ(f.size(), static_cast<std::size_t>(side) * side);
}

TEST(SolveCshm, TraceCheckpointsNearlyMonotone) {
    const int side = 16;
    PhantomSpec spec;
    spec.side = side;
    Image truth = generate_phantom(spec);
    auto geom = build_geometry(10, 0.0, side);
    SparseOperator R = build_radon_matrix(geom);
    Sinogram p = apply_poisson_noise(forward_project(R, truth, geom), {1e4, 4});
    CshmConfig cfg;
    cfg.lambda_tv = 80.0;
    cfg.mu = 1.0;
    cfg.max_iters = 4000;
    std::ostringstream trace;
    cfg.trace = &trace;
    cfg.trace_every = 25;
    solve_cshm(R, p, side, cfg);

    std::istringstream in(trace.str());
    std::string header, line;
    std::getline(in, header);
    EXPECT_EQ(header, "iteration,objective");
    std::vector<double> objectives;
    while (std::getline(in, line)) {
        auto comma = line.find(',');
        ASSERT_NE(comma, std::string::npos);
        objectives.push_back(std::stod(line.substr(comma + 1)));
    }
    ASSERT_GE(objectives.size(), 5u);
    for (std::size_t i = 1; i < objectives.size(); ++i)
        EXPECT_LE(objectives[i], objectives[i - 1] +
                                     0.01 * std::max(1.0, std::abs(objectives[i - 1])));
    EXPECT_LT(objectives.back(), objectives.front());
}
