#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <utility>
#include <vector>

#include "oread/types.hpp"

namespace oread::sim {

// Largest center acceleration (second difference per frame, normalized
// units) the normal kinematic model can produce on noiseless data. Injected
// anomalies exceed it by an order of magnitude.
inline constexpr double kCenterAccelBound = 0.0025;

struct ScenarioSpec {
    uint64_t seed = 0;
    int32_t num_frames = 80;
    double fps = 10.0;
    int32_t num_objects = 4;
    AnomalyKind anomaly_kind = AnomalyKind::none;
    double anomaly_start_frac = 0.35;
    double anomaly_end_frac = 0.65;
    double noise_std = 0.0;
    std::string video_id = "video";
};

// Builds one labeled video. Normal motion is a straight glide between two
// sampled waypoints plus a gentle lateral sway and a slow size drift.
// Anomalies:
//   pair_collision: objects 0 and 1 converge onto their midpoint, overlap,
//     then jitter erratically until the interval ends (needs >= 2 objects);
//   zigzag: object 0 weaves laterally at ~2 Hz, amplitude chosen to exceed
//     normal sway by an order of magnitude, phase aligned so the weave
//     enters and exits the interval without a position jump;
//   sudden_stop: object 0 freezes at the interval start and stays frozen to
//     the end of the video; only [start, end) is labeled;
//   scene_only: kinematics stay normal, labels mark the interval, and the
//     involvement tag is ego (the anomaly lives in the scene scores).
// Injected kinds other than scene_only set involvement to non_ego.
VideoRecord generate_video(const ScenarioSpec& spec);

// Stand-in scene-expert score streams for a generated video: normal frames
// draw N(mu, sigma), labeled frames N(mu + delta, sigma); frames before each
// stream's valid_from hold mu exactly (the assigned normal score). These are
// placeholders for testing the ensemble, never real FFP/STR outputs.
struct SceneScoreSpec {
    uint64_t seed = 0;
    double ffp_mu = -35.0;
    double ffp_sigma = 2.0;
    double ffp_delta = 0.0;
    double str_mu = 50.0;
    double str_sigma = 5.0;
    double str_delta = 0.0;
    // Frame budget the real scene expert would spend before its first
    // genuine score: the future-frame stream starts at index t_ffp, the
    // reconstruction stream one frame earlier.
    int32_t t_ffp = 4;
};

std::pair<ScoreSeries, ScoreSeries> generate_scene_scores(
    const VideoRecord& video, const SceneScoreSpec& spec);

struct DatasetSpec {
    int32_t train_count = 0;
    int32_t test_count = 0;
    // Fraction of test videos per anomaly kind; the remainder stays normal.
    std::map<AnomalyKind, double> anomaly_mix;
    uint64_t seed = 0;
    int32_t num_frames = 80;
    int32_t num_objects = 4;
    double fps = 10.0;
    double noise_std = 0.002;
    // Label length for sudden_stop (the detectable transient is short; the
    // frozen object itself persists to the end of the video).
    int32_t sudden_stop_label_frames = 15;
    // Scene-score elevation applied to scene_only videos.
    double scene_delta_ffp = 6.0;
    double scene_delta_str = 15.0;
};

struct Dataset {
    std::vector<VideoRecord> train;
    std::vector<VideoRecord> test;
    // Scene score streams aligned with train/test by index.
    std::vector<std::pair<ScoreSeries, ScoreSeries>> train_scene;
    std::vector<std::pair<ScoreSeries, ScoreSeries>> test_scene;
};

// Deterministic under spec.seed. Train videos are normal only; test kinds
// follow anomaly_mix with largest-remainder rounding (each kind within one
// video of its target count).
Dataset make_dataset(const DatasetSpec& spec);

// make_dataset plus writing: <out_dir>/{train,test}/<id>.tracks.csv,
// <id>.meta and <id>.scene.csv per video. Byte-identical re-runs under the
// same spec.
Dataset generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

} // namespace oread::sim
