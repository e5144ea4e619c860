#include "oread/lowpass.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace oread {

BiquadCoeffs design_butterworth_lowpass(double fs_hz, double cutoff_hz) {
    if (!(fs_hz > 0.0))
        throw std::invalid_argument("design_butterworth_lowpass: fs must be positive");
    if (!(cutoff_hz > 0.0 && cutoff_hz < 0.5 * fs_hz))
        throw std::invalid_argument(
            "design_butterworth_lowpass: cutoff must lie in (0, fs/2)");
    const double k = std::tan(std::numbers::pi * cutoff_hz / fs_hz);
    const double sq2 = std::numbers::sqrt2;
    const double d = 1.0 + sq2 * k + k * k;
    BiquadCoeffs c;
    c.b0 = k * k / d;
    c.b1 = 2.0 * c.b0;
    c.b2 = c.b0;
    c.a1 = 2.0 * (k * k - 1.0) / d;
    c.a2 = (1.0 - sq2 * k + k * k) / d;
    return c;
}

std::vector<double> lowpass(const std::vector<double>& x, const BiquadCoeffs& c) {
    std::vector<double> y(x.size());
    if (x.empty()) return y;
    // Steady state for input x[0]: with unit DC gain the stationary output
    // equals the input, which pins both delay registers.
    double z1 = x[0] * (1.0 - c.b0);
    double z2 = x[0] * (c.b2 - c.a2);
    for (size_t n = 0; n < x.size(); ++n) {
        const double out = c.b0 * x[n] + z1;
        z1 = c.b1 * x[n] - c.a1 * out + z2;
        z2 = c.b2 * x[n] - c.a2 * out;
        y[n] = out;
    }
    return y;
}

ScoreSeries lowpass_filter(const ScoreSeries& s, double fs_hz, double cutoff_hz) {
    const BiquadCoeffs c = design_butterworth_lowpass(fs_hz, cutoff_hz);
    ScoreSeries out;
    out.video_id = s.video_id;
    out.valid_from = s.valid_from;
    out.values = lowpass(s.values, c);
    return out;
}

} // namespace oread
