#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "tomomip/core.hpp"
#include "tomomip/projector.hpp"
#include "tomomip/rng.hpp"

using namespace tomomip;

TEST(Geometry, EquidistantOverHalfCircle) {
    auto geom = build_geometry(5, 0.0, 64);
    std::vector<double> expected = {0, 36, 72, 108, 144};
    ASSERT_EQ(geom.angles_deg.size(), 5u);
    for (int i = 0; i < 5; ++i)
        EXPECT_DOUBLE_EQ(geom.angles_deg[i], expected[i]);
    EXPECT_GE(geom.detector_count, static_cast<int>(std::ceil(64 * std::sqrt(2.0))));
}

TEST(Geometry, MissingWedgeSpansClosedInterval) {
    auto geom = build_geometry(11, 60.0, 512);
    ASSERT_EQ(geom.angles_deg.size(), 11u);
    EXPECT_DOUBLE_EQ(geom.angles_deg.front(), 30.0);
    EXPECT_DOUBLE_EQ(geom.angles_deg.back(), 150.0);
    for (std::size_t i = 1; i < geom.angles_deg.size(); ++i)
        EXPECT_NEAR(geom.angles_deg[i] - geom.angles_deg[i - 1], 12.0, 1e-12);
}

TEST(Geometry, OneDegreeIncrements) {
    auto geom = build_geometry(180, 0.0, 1024);
    ASSERT_EQ(geom.angles_deg.size(), 180u);
    for (int i = 0; i < 180; ++i)
        EXPECT_DOUBLE_EQ(geom.angles_deg[i], static_cast<double>(i));
}

TEST(Geometry, RejectsBadArguments) {
    EXPECT_THROW(build_geometry(0, 0.0, 64), std::invalid_argument);
    EXPECT_THROW(build_geometry(5, 180.0, 64), std::invalid_argument);
}

TEST(Radon, HorizontalRayThroughPixelRow) {
    // 4 detector bins at unit spacing pass through the 4 pixel-center rows
    ProjectionGeometry geom;
    geom.angles_deg = {0.0};
    geom.detector_count = 4;
    geom.detector_spacing = 1.0;
    geom.image_side = 4;
    SparseOperator R = build_radon_matrix(geom);
    ASSERT_EQ(R.rows, 4u);
    ASSERT_EQ(R.cols, 16u);
    std::vector<std::vector<double>> weights(4, std::vector<double>(16, 0.0));
    for (const auto& e : R.entries)
        weights[e.row][e.col] = e.weight;
    // each ray crosses one full row: 4 weights of exactly 1.0
    for (int ray = 0; ray < 4; ++ray) {
        int nonzero = 0;
        for (int j = 0; j < 16; ++j) {
            if (weights[ray][j] > 0.0) {
                EXPECT_DOUBLE_EQ(weights[ray][j], 1.0);
                ++nonzero;
            }
        }
        EXPECT_EQ(nonzero, 4);
    }
}

TEST(Radon, DiagonalRayChordIsSqrt2) {
    ProjectionGeometry geom;
    geom.angles_deg = {45.0};
    geom.detector_count = 1;
    geom.detector_spacing = 1.0;
    geom.image_side = 1;
    SparseOperator R = build_radon_matrix(geom);
    double total = 0.0;
    for (const auto& e : R.entries)
        total += e.weight;
    EXPECT_NEAR(total, std::sqrt(2.0), 1e-12);
}

TEST(Radon, ZeroImageProjectsToZero) {
    auto geom = build_geometry(7, 0.0, 16);
    SparseOperator R = build_radon_matrix(geom);
    Image f(16, 16);
    Sinogram p = forward_project(R, f, geom);
    for (double v : p.values)
        EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(Radon, IndicatorImageExtractsColumn) {
    auto geom = build_geometry(3, 0.0, 8);
    SparseOperator R = build_radon_matrix(geom);
    int j = 3 * 8 + 5;
    Image f(8, 8);
    f.pixels[j] = 1.0;
    Sinogram p = forward_project(R, f, geom);
    std::vector<double> column(R.rows, 0.0);
    for (const auto& e : R.entries)
        if (e.col == static_cast<std::uint32_t>(j))
            column[e.row] = e.weight;
    for (std::size_t i = 0; i < column.size(); ++i)
        EXPECT_DOUBLE_EQ(p.values[i], column[i]);
}

TEST(Radon, RowSumsBoundedByDiagonal) {
    auto geom = build_geometry(9, 0.0, 12);
    SparseOperator R = build_radon_matrix(geom);
    std::vector<double> row_sum(R.rows, 0.0);
    for (const auto& e : R.entries) {
        EXPECT_GT(e.weight, 0.0);
        row_sum[e.row] += e.weight;
    }
    double diagonal = 12.0 * std::sqrt(2.0);
    for (double s : row_sum)
        EXPECT_LE(s, diagonal + 1e-9);
}

TEST(Radon, DiskPhantomMatchesAnalyticChords) {
    const int side = 128;
    const double radius = 40.0, value = 1.0;
    auto geom = build_geometry(8, 0.0, side);
    SparseOperator R = build_radon_matrix(geom);
    Image disk(side, side);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
            double dx = c + 0.5 - side / 2.0, dy = r + 0.5 - side / 2.0;
            if (dx * dx + dy * dy <= radius * radius)
                disk.at(r, c) = value;
        }
    Sinogram p = forward_project(R, disk, geom);

    double err = 0.0, norm = 0.0;
    for (std::size_t a = 0; a < geom.angles_deg.size(); ++a) {
        for (int d = 0; d < geom.detector_count; ++d) {
            double offset = (d - (geom.detector_count - 1) / 2.0);
            double chord =
                std::abs(offset) < radius
                    ? 2.0 * std::sqrt(radius * radius - offset * offset) * value
                    : 0.0;
            err += std::abs(p.at(a, d) - chord);
            norm += chord;
        }
    }
    EXPECT_LT(err / norm, 0.02);
}

TEST(Radon, AdjointIdentity) {
    auto geom = build_geometry(12, 0.0, 24);
    SparseOperator R = build_radon_matrix(geom);
    CounterRng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> f(R.cols), p(R.rows);
        double nf = 0.0, np = 0.0;
        for (double& v : f) {
            v = rng.next_double() - 0.5;
            nf += v * v;
        }
        for (double& v : p) {
            v = rng.next_double() - 0.5;
            np += v * v;
        }
        std::vector<double> rf = R.apply(f);
        std::vector<double> rtp = R.apply_transpose(p);
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < rf.size(); ++i)
            lhs += rf[i] * p[i];
        for (std::size_t j = 0; j < rtp.size(); ++j)
            rhs += rtp[j] * f[j];
        EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::sqrt(nf) * std::sqrt(np));
    }
}

TEST(Radon, BackProjectionOfSingleRayIsMatrixRow) {
    auto geom = build_geometry(4, 0.0, 6);
    SparseOperator R = build_radon_matrix(geom);
    Sinogram p(geom.angles_deg, geom.detector_count);
    std::size_t ray = 2 * geom.detector_count + 3;
    p.values[ray] = 1.0;
    Image img = back_project(R, p, 6);
    std::vector<double> row(R.cols, 0.0);
    for (const auto& e : R.entries)
        if (e.row == ray)
            row[e.col] = e.weight;
    for (std::size_t j = 0; j < row.size(); ++j)
        EXPECT_DOUBLE_EQ(img.pixels[j], row[j]);
}

TEST(Radon, DeterministicAcrossThreadCounts) {
    auto geom = build_geometry(10, 0.0, 32);
    SparseOperator a = build_radon_matrix(geom, 1);
    SparseOperator b = build_radon_matrix(geom, 4);
    ASSERT_EQ(a.entries.size(), b.entries.size());
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
        EXPECT_EQ(a.entries[i].row, b.entries[i].row);
        EXPECT_EQ(a.entries[i].col, b.entries[i].col);
        EXPECT_EQ(a.entries[i].weight, b.entries[i].weight);
    }
}

TEST(OperatorCache, RoundTripIsBitIdentical) {
    auto geom = build_geometry(6, 30.0, 20);
    SparseOperator op = build_radon_matrix(geom);
    auto dir = std::filesystem::temp_directory_path() / "tomomip_cache_test";
    std::filesystem::create_directories(dir);
    auto path = (dir / "op.rop").string();
    save_operator(op, path);
    SparseOperator loaded = load_operator(path);
    ASSERT_EQ(loaded.rows, op.rows);
    ASSERT_EQ(loaded.cols, op.cols);
    ASSERT_EQ(loaded.entries.size(), op.entries.size());
    for (std::size_t i = 0; i < op.entries.size(); ++i) {
        EXPECT_EQ(loaded.entries[i].row, op.entries[i].row);
        EXPECT_EQ(loaded.entries[i].col, op.entries[i].col);
        EXPECT_EQ(loaded.entries[i].weight, op.entries[i].weight);
    }
    std::filesystem::remove_all(dir);
}

TEST(OperatorCache, LoadOrBuildHitsCache) {
    auto geom = build_geometry(4, 0.0, 10);
    auto dir = std::filesystem::temp_directory_path() / "tomomip_cache_test2";
    std::filesystem::remove_all(dir);
    SparseOperator first = load_or_build_operator(geom, dir.string());
    SparseOperator second = load_or_build_operator(geom, dir.string());
    EXPECT_EQ(first.entries.size(), second.entries.size());
    std::filesystem::remove_all(dir);
}

TEST(OperatorCache, RejectsCorruptHeader) {
    auto dir = std::filesystem::temp_directory_path() / "tomomip_cache_test3";
    std::filesystem::create_directories(dir);
    auto path = (dir / "bad.rop").string();
    std::ofstream out(path, std::ios::binary);
    out << "NOTMAGIC-and-some-noise";
    out.close();
    EXPECT_THROW(load_operator(path), std::runtime_error);
    std::filesystem::remove_all(dir);
}
