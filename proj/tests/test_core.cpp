#include <gtest/gtest.h>

#include "tomomip/core.hpp"
#include "tomomip/rng.hpp"

using namespace tomomip;

namespace {

Image random_image(int w, int h, double scale, std::uint64_t seed) {
    Image img(w, h);
    CounterRng rng(seed);
    for (double& p : img.pixels)
        p = scale * rng.next_double();
    return img;
}

} // namespace

TEST(Rme, IdentityIsZero) {
    Image f = random_image(8, 8, 255.0, 1);
    EXPECT_DOUBLE_EQ(rme(f, f), 0.0);
}

TEST(Rme, AllZeroReconIsOne) {
    Image gt = random_image(8, 8, 255.0, 2);
    Image zeros(8, 8);
    EXPECT_DOUBLE_EQ(rme(zeros, gt), 1.0);
}

TEST(Rme, Errors) {
    Image a(4, 4), b(5, 4, 1.0);
    EXPECT_THROW(rme(a, b), std::invalid_argument);
    Image zeros(4, 4);
    EXPECT_THROW(rme(a, zeros), std::domain_error);
}

namespace {

SparseOperator small_operator() {
    SparseOperator R;
    R.rows = 3;
    R.cols = 4;
    R.entries = {{0, 0, 1.0}, {0, 1, 2.0}, {1, 1, 0.5}, {1, 2, 1.5}, {2, 3, 3.0}};
    return R;
}

} // namespace

TEST(Rdc, ExactDataIsZero) {
    SparseOperator R = small_operator();
    Image f(2, 2);
    f.pixels = {1.0, 2.0, 3.0, 4.0};
    Sinogram p({0.0, 60.0, 120.0}, 1);
    p.values = R.apply(f.pixels);
    EXPECT_NEAR(rdc(R, f, p), 0.0, 1e-15);
}

TEST(Rdc, ZeroReconIsOne) {
    SparseOperator R = small_operator();
    Image f(2, 2);
    Sinogram p({0.0, 60.0, 120.0}, 1);
    p.values = {3.0, 1.0, 2.0};
    EXPECT_DOUBLE_EQ(rdc(R, f, p), 1.0);
}

TEST(Rdc, ZeroSinogramThrows) {
    SparseOperator R = small_operator();
    Image f(2, 2, 1.0);
    Sinogram p({0.0, 60.0, 120.0}, 1);
    EXPECT_THROW(rdc(R, f, p), std::domain_error);
}

TEST(Rdc, InvariantUnderConsistentPermutation) {
    SparseOperator R = small_operator();
    Image f = random_image(2, 2, 10.0, 3);
    Sinogram p({0.0, 60.0, 120.0}, 1);
    p.values = {3.0, 1.5, 2.0};
    double base = rdc(R, f, p);

    // permute rays (rows of R together with bins of p)
    std::vector<std::uint32_t> perm = {2, 0, 1};
    SparseOperator Rp = R;
    for (auto& e : Rp.entries)
        e.row = perm[e.row];
    Sinogram pp = p;
    for (std::uint32_t i = 0; i < 3; ++i)
        pp.values[perm[i]] = p.values[i];
    EXPECT_DOUBLE_EQ(rdc(Rp, f, pp), base);
}

TEST(Bms, BinaryImageIsOne) {
    Image img(4, 4);
    img.pixels = {0, 200, 0, 200, 200, 0, 0, 0, 200, 200, 0, 200, 0, 0, 200, 0};
    EXPECT_DOUBLE_EQ(bms(img, 10.0), 1.0);
}

TEST(Bms, MidGrayAgainstFixedRangeIsZero) {
    Image img(4, 4, 128.0);
    EXPECT_DOUBLE_EQ(bms(img, 10.0, 255.0), 0.0);
}

TEST(Bms, ConstantImageDegeneratesToOne) {
    // per-image rescaling maps a positive constant to the 255 extreme,
    // and the all-zero image is defined to score 1
    Image img(4, 4, 128.0);
    EXPECT_DOUBLE_EQ(bms(img, 10.0), 1.0);
    Image zeros(4, 4);
    EXPECT_DOUBLE_EQ(bms(zeros, 10.0), 1.0);
}

TEST(Bms, AlwaysInUnitInterval) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Image img = random_image(6, 6, 300.0, seed);
        double score = bms(img, 10.0);
        EXPECT_GE(score, 0.0);
        EXPECT_LE(score, 1.0);
    }
}

TEST(Mc, ZeroImage) {
    Image img(8, 8);
    EXPECT_EQ(mc(img), 0);
}

TEST(Mc, CountsMaterialPixels) {
    Image img(8, 8);
    int k = 13;
    for (int i = 0; i < k; ++i)
        img.pixels[i * 3] = 255.0;
    EXPECT_EQ(mc(img), k);
}

TEST(Mc, ComplementsZeroCount) {
    Image img = random_image(7, 5, 1.0, 9);
    img.pixels[3] = 0.0;
    img.pixels[17] = 0.0;
    std::int64_t zeros = 0;
    for (double v : img.pixels)
        if (v == 0.0)
            ++zeros;
    EXPECT_EQ(mc(img) + zeros, static_cast<std::int64_t>(img.size()));
}

TEST(Mc, ToleranceForSolverDust) {
    Image img(2, 2);
    img.pixels = {1e-12, 0.0, 5.0, 1e-8};
    EXPECT_EQ(mc(img), 3);
    EXPECT_EQ(mc(img, 1e-6), 1);
}

TEST(MetricReport, CsvRowLeavesAbsentMetricsEmpty) {
    MetricReport report;
    report.rdc = 0.25;
    report.bms = 0.5;
    report.mc = 42;
    report.runtime_seconds = 1.5;
    EXPECT_EQ(report.csv_row("phantom64", "sirt", "iters=1000"),
              "phantom64,sirt,iters=1000,,0.25,0.5,42,1.5");
    EXPECT_EQ(MetricReport::csv_header(),
              "dataset,algorithm,params,rme,rdc,bms,mc,runtime_seconds");
}
