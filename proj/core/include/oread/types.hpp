#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace oread {

// Axis-aligned bounding box in normalized image coordinates.
// (cx, cy) is the center, w and h are full extents. A box is valid when
// w > 0 and h > 0; cx/cy may leave [0, 1] while an object exits the frame.
struct Box {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool valid() const { return w > 0.0 && h > 0.0; }
};

inline bool operator==(const Box& a, const Box& b) {
    return a.cx == b.cx && a.cy == b.cy && a.w == b.w && a.h == b.h;
}

// Relative offsets that carry one box onto another: translation of the
// center plus log-scale ratios for the extents.
struct TransformParams {
    double px = 0.0;
    double py = 0.0;
    double pw = 0.0;
    double ph = 0.0;
};

// One object's box per frame over a contiguous frame interval
// [first_frame, first_frame + boxes.size()).
struct Track {
    int32_t object_id = 0;
    int32_t first_frame = 0;
    std::vector<Box> boxes;

    int32_t last_frame() const {
        return first_frame + static_cast<int32_t>(boxes.size()) - 1;
    }
    bool covers(int32_t frame) const {
        return frame >= first_frame && frame <= last_frame();
    }
    const Box& at(int32_t frame) const {
        if (!covers(frame)) throw std::out_of_range("Track::at: frame outside track");
        return boxes[static_cast<size_t>(frame - first_frame)];
    }
};

enum class AnomalyKind {
    none,           // fully normal video
    pair_collision, // two objects converge, touch, then move erratically
    zigzag,         // one object weaves laterally at high frequency
    sudden_stop,    // one object freezes in place
    scene_only,     // normal kinematics; anomaly exists only in scene scores
};

enum class Involvement { none, ego, non_ego };

std::string to_string(AnomalyKind k);
std::string to_string(Involvement v);
AnomalyKind anomaly_kind_from_string(const std::string& s);
Involvement involvement_from_string(const std::string& s);

// A labeled video: per-object tracks plus per-frame ground truth.
struct VideoRecord {
    std::string video_id;
    double fps = 10.0;
    int32_t num_frames = 0;
    std::vector<Track> tracks;
    std::vector<uint8_t> frame_labels; // size num_frames, 1 = anomalous
    AnomalyKind category = AnomalyKind::none;
    Involvement involvement = Involvement::none;
};

// One scalar score per frame for one video. Entries before valid_from are
// placeholders (the producer had not yet seen enough history) and hold the
// score assigned to a normal frame, zero for raw expert outputs.
struct ScoreSeries {
    std::string video_id;
    int32_t valid_from = 0;
    std::vector<double> values;

    int32_t size() const { return static_cast<int32_t>(values.size()); }
};

} // namespace oread
