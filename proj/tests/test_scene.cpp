#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oread/scene.hpp"

using namespace oread;
namespace fs = std::filesystem;

namespace {

scene::ImagePlane random_plane(int32_t h, int32_t w, int32_t c, uint64_t seed,
                               double lo = 0.0, double hi = 1.0) {
    scene::ImagePlane p = scene::ImagePlane::filled(h, w, c, 0.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : p.values) v = dist(rng);
    return p;
}

} // namespace

TEST_CASE("psnr_score hits the pinned landmarks of 10*log10(MSE)") {
    // Constant offset c gives MSE = c^2 exactly.
    auto with_mse = [](double offset) {
        const auto a = scene::ImagePlane::filled(8, 8, 3, 0.5);
        const auto b = scene::ImagePlane::filled(8, 8, 3, 0.5 + offset);
        return scene::psnr_score(b, a);
    };
    CHECK(with_mse(0.0) == doctest::Approx(-100.0));          // floored at MSE 1e-10
    CHECK(with_mse(1e-6) == doctest::Approx(-100.0));         // 1e-12 floors too
    CHECK(with_mse(0.1) == doctest::Approx(-20.0).epsilon(1e-12));
    CHECK(with_mse(1.0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("psnr_score grows with the error") {
    const auto target = random_plane(6, 6, 1, 3);
    double prev = -1e9;
    for (const double off : {0.001, 0.01, 0.1, 0.5}) {
        scene::ImagePlane pred = target;
        for (double& v : pred.values) v += off;
        const double s = scene::psnr_score(pred, target);
        CHECK(s > prev);
        prev = s;
    }
}

TEST_CASE("psnr_score rejects mismatched shapes") {
    const auto a = scene::ImagePlane::filled(4, 4, 1, 0.0);
    const auto b = scene::ImagePlane::filled(4, 5, 1, 0.0);
    CHECK_THROWS_AS(scene::psnr_score(a, b), std::invalid_argument);
}

TEST_CASE("ffp_losses: constant offset charges only the intensity term") {
    const int32_t h = 5, w = 7, c = 3;
    const auto target = random_plane(h, w, c, 11);
    scene::ImagePlane pred = target;
    const double off = 0.2;
    for (double& v : pred.values) v += off;
    const auto flow = scene::ImagePlane::filled(h, w, 2, 0.0);

    const auto l = scene::ffp_losses(pred, target, flow, flow);
    CHECK(l.l2 == doctest::Approx(h * w * c * off * off).epsilon(1e-9));
    // A constant shift leaves all forward differences unchanged.
    CHECK(l.l_grad == doctest::Approx(0.0));
    CHECK(l.l_of == doctest::Approx(0.0));
    CHECK(l.l_ffp == doctest::Approx(l.l2 + l.l_grad + l.l_of));
}

TEST_CASE("ffp_losses: smooth-L1 flow error is quadratic below 1 and linear above") {
    const int32_t h = 4, w = 4;
    const auto img = scene::ImagePlane::filled(h, w, 1, 0.0);
    const auto flow_t = scene::ImagePlane::filled(h, w, 2, 0.0);

    auto flow_off = [&](double off) {
        auto f = scene::ImagePlane::filled(h, w, 2, off);
        return scene::ffp_losses(img, img, f, flow_t).l_of;
    };
    const double n = h * w * 2;
    CHECK(flow_off(0.5) == doctest::Approx(n * 0.125).epsilon(1e-12)); // 0.5*0.5^2
    CHECK(flow_off(3.0) == doctest::Approx(n * 2.5).epsilon(1e-12));   // 3 - 0.5
}

TEST_CASE("ffp_losses charges gradient disagreement") {
    // Flat prediction vs a single vertical edge: the target has |grad| = 1
    // across the edge, the prediction none.
    const int32_t h = 4, w = 6;
    auto target = scene::ImagePlane::filled(h, w, 1, 0.0);
    for (int32_t y = 0; y < h; ++y)
        for (int32_t x = 3; x < w; ++x) target.at(y, x, 0) = 1.0;
    const auto pred = scene::ImagePlane::filled(h, w, 1, 0.5);
    const auto flow = scene::ImagePlane::filled(h, w, 2, 0.0);
    const auto l = scene::ffp_losses(pred, target, flow, flow);
    CHECK(l.l_grad == doctest::Approx(h * 1.0)); // one edge crossing per row
}

TEST_CASE("str_score: hand-computed reconstruction errors") {
    const int32_t h = 3, w = 3;
    const auto disp = scene::ImagePlane::filled(h, w, 1, 0.4);
    const auto flow = scene::ImagePlane::filled(h, w, 2, 1.0);

    // Flat reconstructions offset by 0.1 (disp) and 0.5 (flow); flat planes
    // carry zero total variation, so only the L1 terms remain.
    auto rd = scene::ImagePlane::filled(h, w, 1, 0.5);
    auto rf = scene::ImagePlane::filled(h, w, 2, 0.5);
    const double l1_d = 9 * 0.1, l1_f = 18 * 0.5;
    CHECK(scene::str_score(rd, disp, rf, flow) ==
          doctest::Approx(100.0 * l1_d + l1_f).epsilon(1e-9));
    CHECK(scene::str_score(rd, disp, rf, flow, 2.0, 0.1) ==
          doctest::Approx(2.0 * l1_d + l1_f).epsilon(1e-9));

    // Add a single step of height 0.2 in the reconstructed disparity: its
    // anisotropic total variation is 0.2 per adjacent pair across the step.
    rd.at(1, 1, 0) += 0.2;
    const double tv = 0.2 * 4;               // four neighbors see the bump
    const double l1_bump = 8 * 0.1 + 0.3;    // |0.7-0.4| replaces the center's 0.1
    CHECK(scene::str_score(rd, disp, rf, flow) ==
          doctest::Approx(100.0 * l1_bump + l1_f + 0.1 * (100.0 * tv)).epsilon(1e-9));
}

TEST_CASE("str_score total variation penalizes rougher reconstructions") {
    const int32_t h = 8, w = 8;
    const auto disp = random_plane(h, w, 1, 21);
    const auto flow = scene::ImagePlane::filled(h, w, 2, 0.0);
    const auto rf = flow;

    auto smooth = scene::ImagePlane::filled(h, w, 1, 0.5);
    auto rough = smooth;
    for (int32_t y = 0; y < h; ++y)
        for (int32_t x = 0; x < w; ++x)
            rough.at(y, x, 0) = ((x + y) % 2 == 0) ? 0.45 : 0.55; // same mean, checkered

    // Identical L1 distance to a 0.5-centered target is not guaranteed, so
    // compare pure-TV scores: same planes as target, different roughness.
    const double s_smooth = scene::str_score(smooth, smooth, rf, flow);
    const double s_rough = scene::str_score(rough, rough, rf, flow);
    CHECK(s_rough > s_smooth);
}

TEST_CASE("planes survive the binary container round trip") {
    const fs::path dir = fs::temp_directory_path() / "oread_scene_rt";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto p = random_plane(5, 9, 2, 31, -3.0, 3.0);
    scene::write_plane(dir / "p.oimg", p);
    const auto r = scene::read_plane(dir / "p.oimg");
    CHECK(r.height == p.height);
    CHECK(r.width == p.width);
    CHECK(r.channels == p.channels);
    CHECK(r.values == p.values);
    fs::remove_all(dir);
}

TEST_CASE("read_plane rejects foreign bytes") {
    const fs::path dir = fs::temp_directory_path() / "oread_scene_bad";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "junk.oimg", std::ios::binary);
        out << "JUNKJUNKJUNK";
    }
    CHECK_THROWS_WITH_AS(scene::read_plane(dir / "junk.oimg"),
                         doctest::Contains("bad magic"), std::runtime_error);
    fs::remove_all(dir);
}
