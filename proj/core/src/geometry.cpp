#include "oread/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace oread {

std::string to_string(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::none: return "none";
        case AnomalyKind::pair_collision: return "pair_collision";
        case AnomalyKind::zigzag: return "zigzag";
        case AnomalyKind::sudden_stop: return "sudden_stop";
        case AnomalyKind::scene_only: return "scene_only";
    }
    throw std::invalid_argument("to_string: bad AnomalyKind");
}

std::string to_string(Involvement v) {
    switch (v) {
        case Involvement::none: return "none";
        case Involvement::ego: return "ego";
        case Involvement::non_ego: return "non_ego";
    }
    throw std::invalid_argument("to_string: bad Involvement");
}

AnomalyKind anomaly_kind_from_string(const std::string& s) {
    if (s == "none") return AnomalyKind::none;
    if (s == "pair_collision") return AnomalyKind::pair_collision;
    if (s == "zigzag") return AnomalyKind::zigzag;
    if (s == "sudden_stop") return AnomalyKind::sudden_stop;
    if (s == "scene_only") return AnomalyKind::scene_only;
    throw std::invalid_argument("unknown anomaly kind: " + s);
}

Involvement involvement_from_string(const std::string& s) {
    if (s == "none") return Involvement::none;
    if (s == "ego") return Involvement::ego;
    if (s == "non_ego") return Involvement::non_ego;
    throw std::invalid_argument("unknown involvement tag: " + s);
}

Box apply_transform(const Box& anchor, const TransformParams& p) {
    return Box{anchor.cx + p.px, anchor.cy + p.py,
               anchor.w * std::exp(p.pw), anchor.h * std::exp(p.ph)};
}

TransformParams infer_transform(const Box& anchor, const Box& target) {
    if (!(anchor.w > 0.0 && anchor.h > 0.0 && target.w > 0.0 && target.h > 0.0))
        throw std::invalid_argument("infer_transform: extents must be positive");
    return TransformParams{target.cx - anchor.cx, target.cy - anchor.cy,
                           std::log(target.w / anchor.w),
                           std::log(target.h / anchor.h)};
}

double box_gap(const Box& a, const Box& b) {
    return std::abs(a.cx - b.cx) - 0.5 * (a.w + b.w) +
           std::abs(a.cy - b.cy) - 0.5 * (a.h + b.h);
}

double distance_score(std::span<const Box> win_i, std::span<const Box> win_j) {
    if (win_i.size() != win_j.size() || win_i.empty())
        throw std::invalid_argument("distance_score: windows must match and be nonempty");
    double best = box_gap(win_i[0], win_j[0]);
    for (size_t k = 1; k < win_i.size(); ++k)
        best = std::min(best, box_gap(win_i[k], win_j[k]));
    return best;
}

} // namespace oread
