#pragma once

#include <span>

#include "oread/types.hpp"

namespace oread {

// Applies relative offsets to an anchor box:
//   cx + px, cy + py, w * exp(pw), h * exp(ph).
// Positive extents stay positive for any finite params.
Box apply_transform(const Box& anchor, const TransformParams& p);

// Recovers the offsets that carry `anchor` onto `target`, the exact inverse
// of apply_transform. Requires strictly positive extents on both boxes.
TransformParams infer_transform(const Box& anchor, const Box& target);

// Single-frame gap between two boxes:
//   |cx_i - cx_j| - (w_i + w_j)/2 + |cy_i - cy_j| - (h_i + h_j)/2.
// Touching boxes give 0, overlap goes negative. Symmetric.
double box_gap(const Box& a, const Box& b);

// Proximity of two objects over a shared window: the minimum box_gap across
// paired frames. Lower means more likely to interact. Both windows must
// cover the same frames and be the same nonzero length.
double distance_score(std::span<const Box> win_i, std::span<const Box> win_j);

} // namespace oread
