#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oread/lowpass.hpp"

using namespace oread;

namespace {

// Zero-state direct form 1 recursion, deliberately a different structure
// from the library's transposed form 2.
std::vector<double> df1_zero_state(const std::vector<double>& x, const BiquadCoeffs& c) {
    std::vector<double> y(x.size());
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    for (size_t n = 0; n < x.size(); ++n) {
        y[n] = c.b0 * x[n] + c.b1 * x1 + c.b2 * x2 - c.a1 * y1 - c.a2 * y2;
        x2 = x1;
        x1 = x[n];
        y2 = y1;
        y1 = y[n];
    }
    return y;
}

} // namespace

TEST_CASE("design matches the reference tool's coefficients at 0.2 Hz / 10 Hz") {
    // Frozen from an independent filter-design package (bilinear transform
    // with prewarping, order 2, Wn = 0.04).
    const auto c = design_butterworth_lowpass(10.0, 0.2);
    CHECK(c.b0 == doctest::Approx(0.0036216815149286417).epsilon(1e-12));
    CHECK(c.b1 == doctest::Approx(0.007243363029857283).epsilon(1e-12));
    CHECK(c.b2 == doctest::Approx(0.0036216815149286417).epsilon(1e-12));
    CHECK(c.a1 == doctest::Approx(-1.822694925196308).epsilon(1e-12));
    CHECK(c.a2 == doctest::Approx(0.8371816512560226).epsilon(1e-12));
}

TEST_CASE("design agrees with the audio-cookbook closed form across cutoffs") {
    // Second derivation route: w0 = 2*pi*fc/fs, Q = 1/sqrt(2),
    // alpha = sin(w0)/(2Q), all coefficients in closed form.
    for (const double fc : {0.05, 0.2, 1.0, 2.4, 4.9}) {
        const double fs = 10.0;
        const double w0 = 2.0 * std::numbers::pi * fc / fs;
        const double alpha = std::sin(w0) * std::numbers::sqrt2 / 2.0;
        const double a0 = 1.0 + alpha;
        const auto c = design_butterworth_lowpass(fs, fc);
        CHECK(c.b0 == doctest::Approx((1.0 - std::cos(w0)) / 2.0 / a0).epsilon(1e-12));
        CHECK(c.b1 == doctest::Approx((1.0 - std::cos(w0)) / a0).epsilon(1e-12));
        CHECK(c.b2 == doctest::Approx((1.0 - std::cos(w0)) / 2.0 / a0).epsilon(1e-12));
        CHECK(c.a1 == doctest::Approx(-2.0 * std::cos(w0) / a0).epsilon(1e-12));
        CHECK(c.a2 == doctest::Approx((1.0 - alpha) / a0).epsilon(1e-12));
    }
}

TEST_CASE("design keeps unit DC gain and zero Nyquist gain") {
    for (const double fc : {0.1, 0.2, 1.0, 3.0}) {
        const auto c = design_butterworth_lowpass(10.0, fc);
        CHECK(c.b0 + c.b1 + c.b2 == doctest::Approx(1.0 + c.a1 + c.a2).epsilon(1e-12));
        CHECK(std::abs(c.b0 - c.b1 + c.b2) < 1e-15);
    }
}

TEST_CASE("design rejects cutoffs outside (0, Nyquist)") {
    CHECK_THROWS_AS(design_butterworth_lowpass(10.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(design_butterworth_lowpass(10.0, -0.2), std::invalid_argument);
    CHECK_THROWS_AS(design_butterworth_lowpass(10.0, 5.0), std::invalid_argument);
    CHECK_THROWS_AS(design_butterworth_lowpass(10.0, 6.0), std::invalid_argument);
}

TEST_CASE("impulse response matches a zero-state reference recursion") {
    // A leading zero warms the filter state to zero, so samples 1.. are the
    // true zero-state impulse response.
    const auto c = design_butterworth_lowpass(10.0, 0.2);
    std::vector<double> x(300, 0.0);
    x[1] = 1.0;
    const auto out = lowpass(x, c);

    std::vector<double> impulse(299, 0.0);
    impulse[0] = 1.0;
    const auto ref = df1_zero_state(impulse, c);
    for (size_t k = 0; k < ref.size(); ++k) {
        CHECK(out[k + 1] == doctest::Approx(ref[k]).epsilon(1e-9));
    }
    // Spot values from the reference recursion, frozen.
    CHECK(out[1] == doctest::Approx(0.0036216815149286417).epsilon(1e-9));
    CHECK(out[2] == doctest::Approx(0.013844583547794996).epsilon(1e-9));
    CHECK(out[5] == doctest::Approx(0.043048046115762392).epsilon(1e-9));
}

TEST_CASE("constant input passes through from the first sample") {
    const auto c = design_butterworth_lowpass(10.0, 0.2);
    const std::vector<double> x(250, 3.7);
    const auto out = lowpass(x, c);
    CHECK(out[0] == doctest::Approx(3.7).epsilon(1e-12));
    for (size_t t = 0; t < out.size(); ++t) {
        CHECK(std::abs(out[t] - 3.7) < 1e-6);
    }
}

TEST_CASE("zero input stays zero") {
    const auto c = design_butterworth_lowpass(10.0, 0.2);
    const std::vector<double> x(100, 0.0);
    for (const double v : lowpass(x, c)) CHECK(v == 0.0);
}

TEST_CASE("filtering is linear") {
    const auto c = design_butterworth_lowpass(10.0, 0.2);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> x(200), y(200), mix(200);
    const double a = 2.5, b = -0.75;
    for (size_t i = 0; i < x.size(); ++i) {
        x[i] = dist(rng);
        y[i] = dist(rng);
        mix[i] = a * x[i] + b * y[i];
    }
    const auto fx = lowpass(x, c);
    const auto fy = lowpass(y, c);
    const auto fmix = lowpass(mix, c);
    for (size_t i = 0; i < x.size(); ++i) {
        CHECK(fmix[i] == doctest::Approx(a * fx[i] + b * fy[i]).epsilon(1e-9));
    }
}

TEST_CASE("output is causal: truncating the input leaves the prefix unchanged") {
    const auto c = design_butterworth_lowpass(10.0, 0.2);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> x(120);
    for (double& v : x) v = dist(rng);
    const auto full = lowpass(x, c);
    std::vector<double> head(x.begin(), x.begin() + 60);
    const auto part = lowpass(head, c);
    for (size_t i = 0; i < part.size(); ++i) CHECK(part[i] == full[i]);
}

TEST_CASE("alternating input at the Nyquist rate is rejected") {
    const auto c = design_butterworth_lowpass(10.0, 0.2);
    std::vector<double> x(400);
    for (size_t i = 0; i < x.size(); ++i) x[i] = (i % 2 == 0) ? 1.0 : -1.0;
    const auto out = lowpass(x, c);
    for (size_t t = 300; t < out.size(); ++t) CHECK(std::abs(out[t]) < 1e-6);
}

TEST_CASE("lowpass_filter keeps the series identity fields") {
    ScoreSeries s;
    s.video_id = "clip42";
    s.valid_from = 3;
    s.values = {0.0, 0.0, 0.0, 1.0, 2.0, 1.5, 1.0, 0.5};
    const ScoreSeries out = lowpass_filter(s, 10.0, 0.2);
    CHECK(out.video_id == "clip42");
    CHECK(out.valid_from == 3);
    CHECK(out.values.size() == s.values.size());
}
