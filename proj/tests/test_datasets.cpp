#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "tomomip/core.hpp"
#include "tomomip/datasets.hpp"
#include "tomomip/projector.hpp"

using namespace tomomip;

namespace {

// independent membership oracle used to cross-check the generator
bool oracle_inside(const PhantomSpec& spec, int row, int col) {
    double x = (col + 0.5) / spec.side;
    double y = (row + 0.5) / spec.side;
    double ex = (x - spec.center_x) / spec.semi_axis_x;
    double ey = (y - spec.center_y) / spec.semi_axis_y;
    if (ex * ex + ey * ey > 1.0)
        return false;
    for (const auto& h : spec.holes) {
        double dx = x - h.center_x, dy = y - h.center_y;
        if (std::sqrt(dx * dx + dy * dy) <= h.radius)
            return false;
    }
    return true;
}

} // namespace

TEST(Phantom, CenterIsMaterialCornerIsVoid) {
    PhantomSpec spec;
    spec.side = 64;
    Image img = generate_phantom(spec);
    EXPECT_DOUBLE_EQ(img.at(32, 32), spec.material_value);
    EXPECT_DOUBLE_EQ(img.at(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(img.at(63, 63), 0.0);
}

TEST(Phantom, MaterialCountMatchesMembershipOracle) {
    PhantomSpec spec;
    spec.side = 48;
    Image img = generate_phantom(spec);
    std::int64_t expected = 0;
    for (int r = 0; r < spec.side; ++r)
        for (int c = 0; c < spec.side; ++c)
            if (oracle_inside(spec, r, c))
                ++expected;
    EXPECT_EQ(mc(img), expected);
}

TEST(Phantom, ValuesAreExactlyBinaryAndBmsIsOne) {
    PhantomSpec spec;
    spec.side = 32;
    Image img = generate_phantom(spec);
    for (double v : img.pixels)
        EXPECT_TRUE(v == 0.0 || v == spec.material_value);
    EXPECT_DOUBLE_EQ(bms(img, 10.0), 1.0);
}

TEST(Phantom, RejectsHoleOutsideEllipse) {
    PhantomSpec spec;
    spec.holes[0] = {0.05, 0.05, 0.06};
    EXPECT_THROW(generate_phantom(spec), std::invalid_argument);
}

TEST(PoissonNoise, ZeroStaysZero) {
    Sinogram p({0.0, 90.0}, 3);
    NoiseSpec spec{1e4, 11};
    Sinogram noisy = apply_poisson_noise(p, spec);
    for (double v : noisy.values)
        EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(PoissonNoise, DeterministicGivenSeed) {
    Sinogram p({0.0, 90.0}, 4);
    p.values = {5.0, 1.0, 0.0, 3.0, 2.0, 8.0, 0.5, 4.0};
    NoiseSpec spec{500.0, 123};
    Sinogram a = apply_poisson_noise(p, spec);
    Sinogram b = apply_poisson_noise(p, spec);
    for (std::size_t i = 0; i < a.values.size(); ++i)
        EXPECT_EQ(a.values[i], b.values[i]);
    NoiseSpec other{500.0, 124};
    Sinogram c = apply_poisson_noise(p, other);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        any_diff |= a.values[i] != c.values[i];
    EXPECT_TRUE(any_diff);
}

TEST(PoissonNoise, SampleMeanWithinThreeSigma) {
    // one bin with known mean, 10^4 independent draws via varying seeds
    Sinogram p({0.0}, 2);
    p.values = {6.0, 10.0}; // target bin mean = dose * 6/10
    const double dose = 400.0;
    const int draws = 10000;
    double sum = 0.0;
    for (int k = 0; k < draws; ++k) {
        NoiseSpec spec{dose, static_cast<std::uint64_t>(k)};
        sum += apply_poisson_noise(p, spec).values[0];
    }
    double mean = sum / draws;
    double lambda = dose * 0.6;
    double unit = 10.0 / dose;
    double sigma = std::sqrt(lambda) * unit / std::sqrt(static_cast<double>(draws));
    EXPECT_NEAR(mean, 6.0, 3.0 * sigma);
}

TEST(Subsample, FullSetIsIdentity) {
    auto geom = build_geometry(6, 0.0, 8);
    Sinogram full(geom.angles_deg, geom.detector_count);
    for (std::size_t i = 0; i < full.values.size(); ++i)
        full.values[i] = static_cast<double>(i);
    Sinogram out = subsample_angles(full, geom);
    EXPECT_EQ(out.values, full.values);
}

TEST(Subsample, FiveFromOneEighty) {
    auto full_geom = build_geometry(180, 0.0, 8);
    Sinogram full(full_geom.angles_deg, full_geom.detector_count);
    for (std::size_t a = 0; a < 180; ++a)
        for (int d = 0; d < full.detector_count; ++d)
            full.at(a, d) = static_cast<double>(a);
    auto target = build_geometry(5, 0.0, 8);
    Sinogram out = subsample_angles(full, target);
    ASSERT_EQ(out.angles_deg.size(), 5u);
    std::vector<double> expected = {0, 36, 72, 108, 144};
    for (int i = 0; i < 5; ++i) {
        EXPECT_DOUBLE_EQ(out.angles_deg[i], expected[i]);
        EXPECT_DOUBLE_EQ(out.at(i, 0), expected[i]);
    }
}

TEST(Subsample, WedgeSelectsTwentyOneAngles) {
    auto full_geom = build_geometry(180, 0.0, 8);
    Sinogram full(full_geom.angles_deg, full_geom.detector_count);
    auto target = build_geometry(21, 60.0, 8);
    Sinogram out = subsample_angles(full, target);
    ASSERT_EQ(out.angles_deg.size(), 21u);
    EXPECT_DOUBLE_EQ(out.angles_deg.front(), 30.0);
    EXPECT_DOUBLE_EQ(out.angles_deg.back(), 150.0);
}

TEST(Subsample, MissingAngleThrows) {
    auto full_geom = build_geometry(10, 0.0, 8);
    Sinogram full(full_geom.angles_deg, full_geom.detector_count);
    ProjectionGeometry target = full_geom;
    target.angles_deg = {17.5};
    EXPECT_THROW(subsample_angles(full, target), std::invalid_argument);
}

TEST(Subsample, CommutesWithOperatorRowRestriction) {
    const int side = 16;
    auto full_geom = build_geometry(12, 0.0, side);
    auto sub_geom = build_geometry(4, 0.0, side);
    SparseOperator R_full = build_radon_matrix(full_geom);
    SparseOperator R_sub = build_radon_matrix(sub_geom);
    PhantomSpec spec;
    spec.side = side;
    Image f = generate_phantom(spec);
    Sinogram p_full = forward_project(R_full, f, full_geom);
    Sinogram restricted = subsample_angles(p_full, sub_geom);
    Sinogram direct = forward_project(R_sub, f, sub_geom);
    ASSERT_EQ(restricted.values.size(), direct.values.size());
    for (std::size_t i = 0; i < direct.values.size(); ++i)
        EXPECT_NEAR(restricted.values[i], direct.values[i], 1e-9);
}

TEST(ImageIo, RawRoundTripIsBitIdentical) {
    auto dir = std::filesystem::temp_directory_path() / "tomomip_io_test";
    std::filesystem::create_directories(dir);
    Image img(5, 3);
    CounterRng rng(5);
    for (double& v : img.pixels)
        v = rng.next_double() * 1e6;
    std::string stem = (dir / "img").string();
    save_image(img, stem);
    Image loaded = load_image(stem);
    EXPECT_EQ(loaded.width, img.width);
    EXPECT_EQ(loaded.height, img.height);
    for (std::size_t i = 0; i < img.size(); ++i)
        EXPECT_EQ(loaded.pixels[i], img.pixels[i]);
    std::filesystem::remove_all(dir);
}

TEST(ImageIo, SinogramRoundTrip) {
    auto dir = std::filesystem::temp_directory_path() / "tomomip_io_test2";
    std::filesystem::create_directories(dir);
    Sinogram sino({0.0, 45.0, 90.0}, 7);
    CounterRng rng(6);
    for (double& v : sino.values)
        v = rng.next_double();
    std::string stem = (dir / "sino").string();
    save_sinogram(sino, stem);
    Sinogram loaded = load_sinogram(stem);
    EXPECT_EQ(loaded.angles_deg, sino.angles_deg);
    EXPECT_EQ(loaded.detector_count, sino.detector_count);
    EXPECT_EQ(loaded.values, sino.values);
    std::filesystem::remove_all(dir);
}

TEST(ImageIo, MalformedSidecarThrows) {
    auto dir = std::filesystem::temp_directory_path() / "tomomip_io_test3";
    std::filesystem::create_directories(dir);
    std::string stem = (dir / "bad").string();
    std::ofstream js(stem + ".img.json");
    js << "{\"width\": 4, \"height\": 4, \"dtype\": \"u8\"}";
    js.close();
    EXPECT_THROW(load_image(stem), std::runtime_error);
    std::filesystem::remove_all(dir);
}

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST(PngExport, BinaryImageHasTwoGrayLevelsAndMaxMapsTo255) {
    auto dir = std::filesystem::temp_directory_path() / "tomomip_png_test";
    std::filesystem::create_directories(dir);
    PhantomSpec spec;
    spec.side = 16;
    spec.material_value = 100.0;
    Image img = generate_phantom(spec);
    std::string path = (dir / "img.png").string();
    export_png(img, path, 8);

    auto bytes = read_file(path);
    ASSERT_GT(bytes.size(), 8u);
    EXPECT_EQ(bytes[1], 'P');
    EXPECT_EQ(bytes[2], 'N');
    EXPECT_EQ(bytes[3], 'G');

    // decode the single IDAT stream and count gray levels
    std::vector<unsigned char> idat;
    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        std::uint32_t len = (bytes[pos] << 24) | (bytes[pos + 1] << 16) |
                            (bytes[pos + 2] << 8) | bytes[pos + 3];
        std::string type(bytes.begin() + pos + 4, bytes.begin() + pos + 8);
        if (type == "IDAT")
            idat.insert(idat.end(), bytes.begin() + pos + 8, bytes.begin() + pos + 8 + len);
        pos += 12 + len;
    }
    uLongf out_len = 16 * 17;
    std::vector<unsigned char> raw(out_len);
    ASSERT_EQ(uncompress(raw.data(), &out_len, idat.data(), idat.size()), Z_OK);
    std::set<unsigned char> levels;
    for (int row = 0; row < 16; ++row)
        for (int col = 0; col < 16; ++col)
            levels.insert(raw[row * 17 + 1 + col]);
    EXPECT_EQ(levels.size(), 2u);
    EXPECT_TRUE(levels.count(0));
    EXPECT_TRUE(levels.count(255));
    std::filesystem::remove_all(dir);
}

TEST(PngExport, SixteenBitFileHasValidSignature) {
    auto dir = std::filesystem::temp_directory_path() / "tomomip_png16_test";
    std::filesystem::create_directories(dir);
    Image img(8, 8);
    img.pixels[5] = 1000.0;
    img.pixels[9] = 250.0;
    std::string path = (dir / "img16.png").string();
    export_png(img, path, 16);
    auto bytes = read_file(path);
    ASSERT_GT(bytes.size(), 33u);
    EXPECT_EQ(bytes[1], 'P');
    EXPECT_EQ(bytes[24], 16); // IHDR bit depth (8 sig + 8 chunk header + 8 dims)
    EXPECT_THROW(export_png(img, path, 12), std::invalid_argument);
    std::filesystem::remove_all(dir);
}
