#pragma once

#include <vector>

#include "oread/types.hpp"

namespace oread {

// Second order IIR section, direct form 2 transposed, denominator
// normalized so a0 == 1.
struct BiquadCoeffs {
    double b0, b1, b2;
    double a1, a2;
};

// Second order Butterworth lowpass via the bilinear transform with
// frequency prewarping. Requires 0 < cutoff_hz < fs_hz / 2. The section has
// unit DC gain: b0 + b1 + b2 == 1 + a1 + a2 up to rounding.
BiquadCoeffs design_butterworth_lowpass(double fs_hz, double cutoff_hz);

// Causal filtering. The filter state is warmed to the steady state of the
// first sample, so constant inputs pass through unchanged from sample one
// and the output has no startup transient toward zero.
std::vector<double> lowpass(const std::vector<double>& x, const BiquadCoeffs& c);

// Convenience wrapper for score traces; preserves video_id and valid_from.
ScoreSeries lowpass_filter(const ScoreSeries& s, double fs_hz, double cutoff_hz);

} // namespace oread
