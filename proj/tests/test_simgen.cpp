#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <vector>

#include "oread/geometry.hpp"
#include "oread/sim.hpp"

using namespace oread;
namespace fs = std::filesystem;

namespace {

bool identical(const VideoRecord& a, const VideoRecord& b) {
    if (a.video_id != b.video_id || a.fps != b.fps || a.num_frames != b.num_frames ||
        a.frame_labels != b.frame_labels || a.category != b.category ||
        a.involvement != b.involvement || a.tracks.size() != b.tracks.size())
        return false;
    for (size_t i = 0; i < a.tracks.size(); ++i) {
        if (a.tracks[i].object_id != b.tracks[i].object_id ||
            a.tracks[i].first_frame != b.tracks[i].first_frame ||
            a.tracks[i].boxes.size() != b.tracks[i].boxes.size())
            return false;
        for (size_t k = 0; k < a.tracks[i].boxes.size(); ++k)
            if (!(a.tracks[i].boxes[k] == b.tracks[i].boxes[k])) return false;
    }
    return true;
}

// Per-frame center acceleration magnitude (euclidean over both axes).
std::vector<double> accel(const Track& tr) {
    std::vector<double> out;
    for (size_t t = 1; t + 1 < tr.boxes.size(); ++t) {
        const double ax = tr.boxes[t + 1].cx - 2.0 * tr.boxes[t].cx + tr.boxes[t - 1].cx;
        const double ay = tr.boxes[t + 1].cy - 2.0 * tr.boxes[t].cy + tr.boxes[t - 1].cy;
        out.push_back(std::hypot(ax, ay));
    }
    return out;
}

std::pair<int32_t, int32_t> labeled_interval(const VideoRecord& v) {
    int32_t t0 = -1, t1 = -1;
    for (int32_t t = 0; t < v.num_frames; ++t) {
        if (v.frame_labels[static_cast<size_t>(t)]) {
            if (t0 < 0) t0 = t;
            t1 = t + 1;
        }
    }
    return {t0, t1};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("generate_video is deterministic for a fixed DatasetSpec") {
    sim::ScenarioSpec spec;
    spec.seed = 1;
    spec.noise_std = 0.003;
    spec.anomaly_kind = AnomalyKind::zigzag;
    const VideoRecord a = sim::generate_video(spec);
    const VideoRecord b = sim::generate_video(spec);
    CHECK(identical(a, b));
    spec.seed = 2;
    CHECK_FALSE(identical(a, sim::generate_video(spec)));
}

TEST_CASE("normal videos carry no labels") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        sim::ScenarioSpec spec;
        spec.seed = seed;
        spec.noise_std = 0.002;
        const VideoRecord v = sim::generate_video(spec);
        CHECK(v.category == AnomalyKind::none);
        CHECK(v.involvement == Involvement::none);
        for (const uint8_t l : v.frame_labels) CHECK(l == 0);
    }
}

TEST_CASE("noiseless normal motion respects the acceleration bound") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        sim::ScenarioSpec spec;
        spec.seed = seed;
        spec.noise_std = 0.0;
        const VideoRecord v = sim::generate_video(spec);
        for (const Track& tr : v.tracks)
            for (const double a : accel(tr)) CHECK(a <= sim::kCenterAccelBound);
    }
}

TEST_CASE("zigzag injects accelerations the normal model cannot produce") {
    sim::ScenarioSpec spec;
    spec.seed = 5;
    spec.noise_std = 0.0;
    spec.anomaly_kind = AnomalyKind::zigzag;
    const VideoRecord v = sim::generate_video(spec);
    const auto [t0, t1] = labeled_interval(v);
    REQUIRE(t0 >= 0);

    const auto acc = accel(v.tracks[0]); // acc[k] is the acceleration at frame k+1
    double inside = 0.0, outside = 0.0;
    int n_in = 0, n_out = 0;
    for (size_t k = 0; k < acc.size(); ++k) {
        const int32_t t = static_cast<int32_t>(k) + 1;
        // Attribute a window to "inside" only when fully labeled, to
        // "outside" only when fully clear of the interval.
        if (t - 1 >= t0 && t + 1 < t1) {
            inside += acc[k];
            ++n_in;
        } else if (t + 1 < t0 || t - 1 >= t1) {
            outside += acc[k];
            ++n_out;
        }
    }
    REQUIRE(n_in > 0);
    REQUIRE(n_out > 0);
    inside /= n_in;
    outside /= n_out;
    CHECK(inside > outside);
    CHECK(inside > sim::kCenterAccelBound);
    CHECK(outside <= sim::kCenterAccelBound);
}

TEST_CASE("pair_collision brings the pair closer than at the video start") {
    sim::ScenarioSpec spec;
    spec.seed = 9;
    spec.noise_std = 0.0;
    spec.anomaly_kind = AnomalyKind::pair_collision;
    const VideoRecord v = sim::generate_video(spec);
    const auto [t0, t1] = labeled_interval(v);
    REQUIRE(t0 >= 0);

    const Track& a = v.tracks[0];
    const Track& b = v.tracks[1];
    const double at_start = box_gap(a.at(0), b.at(0));
    double closest = at_start;
    for (int32_t t = t0; t < t1; ++t)
        closest = std::min(closest, box_gap(a.at(t), b.at(t)));
    CHECK(closest < at_start);
    CHECK(closest < 0.0); // they end up overlapping
}

TEST_CASE("pair_collision with fewer than two objects is rejected") {
    sim::ScenarioSpec spec;
    spec.num_objects = 1;
    spec.anomaly_kind = AnomalyKind::pair_collision;
    CHECK_THROWS_AS(sim::generate_video(spec), std::invalid_argument);
}

TEST_CASE("sudden_stop freezes the object to the end but labels only the onset") {
    sim::ScenarioSpec spec;
    spec.seed = 3;
    spec.noise_std = 0.0;
    spec.anomaly_kind = AnomalyKind::sudden_stop;
    spec.anomaly_start_frac = 0.4;
    spec.anomaly_end_frac = 0.6;
    const VideoRecord v = sim::generate_video(spec);
    const auto [t0, t1] = labeled_interval(v);
    REQUIRE(t0 >= 0);
    CHECK(t1 < v.num_frames); // labels stop before the video does

    const Track& tr = v.tracks[0];
    const Box& hold = tr.at(t0);
    for (int32_t t = t0; t < v.num_frames; ++t) CHECK(tr.at(t) == hold);
    // The frame before the stop still moves.
    CHECK_FALSE(tr.at(t0 - 1) == hold);
    for (int32_t t = 0; t < v.num_frames; ++t)
        CHECK(v.frame_labels[static_cast<size_t>(t)] == (t >= t0 && t < t1 ? 1 : 0));
}

TEST_CASE("scene_only keeps normal kinematics and tags the ego vehicle") {
    sim::ScenarioSpec spec;
    spec.seed = 12;
    spec.noise_std = 0.0;
    spec.anomaly_kind = AnomalyKind::scene_only;
    const VideoRecord v = sim::generate_video(spec);
    CHECK(v.involvement == Involvement::ego);
    const auto [t0, t1] = labeled_interval(v);
    CHECK(t0 >= 0);
    CHECK(t1 > t0);
    for (const Track& tr : v.tracks)
        for (const double a : accel(tr)) CHECK(a <= sim::kCenterAccelBound);
}

TEST_CASE("zero objects yield an empty-track video") {
    sim::ScenarioSpec spec;
    spec.num_objects = 0;
    const VideoRecord v = sim::generate_video(spec);
    CHECK(v.tracks.empty());
    CHECK(v.num_frames == spec.num_frames);
}

TEST_CASE("scene score streams hold the normal mean before their first genuine frame") {
    sim::ScenarioSpec spec;
    spec.seed = 21;
    spec.anomaly_kind = AnomalyKind::scene_only;
    const VideoRecord v = sim::generate_video(spec);
    sim::SceneScoreSpec ss;
    ss.seed = 77;
    ss.ffp_delta = 6.0;
    ss.str_delta = 15.0;
    const auto [ffp, str] = sim::generate_scene_scores(v, ss);

    CHECK(ffp.valid_from == 4);
    CHECK(str.valid_from == 3);
    for (int32_t t = 0; t < ffp.valid_from; ++t) CHECK(ffp.values[t] == -35.0);
    for (int32_t t = 0; t < str.valid_from; ++t) CHECK(str.values[t] == 50.0);

    // Labeled frames sit delta above the normal level on average.
    double lab_f = 0.0, norm_f = 0.0;
    int n_lab = 0, n_norm = 0;
    for (int32_t t = ffp.valid_from; t < v.num_frames; ++t) {
        if (v.frame_labels[static_cast<size_t>(t)]) {
            lab_f += ffp.values[t];
            ++n_lab;
        } else {
            norm_f += ffp.values[t];
            ++n_norm;
        }
    }
    REQUIRE(n_lab > 0);
    REQUIRE(n_norm > 0);
    CHECK(lab_f / n_lab - norm_f / n_norm > 3.0);

    const auto again = sim::generate_scene_scores(v, ss);
    CHECK(again.first.values == ffp.values);
    CHECK(again.second.values == str.values);
}

TEST_CASE("all-normal datasets contain no anomalous frame anywhere") {
    sim::DatasetSpec spec;
    spec.train_count = 5;
    spec.test_count = 5;
    spec.seed = 7;
    const sim::Dataset ds = sim::make_dataset(spec);
    CHECK(ds.train.size() == 5);
    CHECK(ds.test.size() == 5);
    for (const auto& v : ds.train)
        for (const uint8_t l : v.frame_labels) CHECK(l == 0);
    for (const auto& v : ds.test)
        for (const uint8_t l : v.frame_labels) CHECK(l == 0);
}

TEST_CASE("train split is normal even when the test split is mixed") {
    sim::DatasetSpec spec;
    spec.train_count = 8;
    spec.test_count = 8;
    spec.seed = 13;
    spec.anomaly_mix = {{AnomalyKind::zigzag, 0.5}};
    const sim::Dataset ds = sim::make_dataset(spec);
    for (const auto& v : ds.train) {
        CHECK(v.category == AnomalyKind::none);
        for (const uint8_t l : v.frame_labels) CHECK(l == 0);
    }
}

TEST_CASE("test-split anomaly counts match the mix within one video") {
    sim::DatasetSpec spec;
    spec.train_count = 1;
    spec.test_count = 100;
    spec.seed = 3;
    spec.anomaly_mix = {{AnomalyKind::pair_collision, 0.17},
                        {AnomalyKind::zigzag, 0.17},
                        {AnomalyKind::sudden_stop, 0.16}};
    const sim::Dataset ds = sim::make_dataset(spec);

    std::map<AnomalyKind, int> counts;
    for (const auto& v : ds.test) counts[v.category] += 1;
    int anomalous = 0;
    for (const auto& [kind, frac] : spec.anomaly_mix) {
        const double target = frac * spec.test_count;
        CHECK(std::abs(counts[kind] - target) <= 1.0);
        anomalous += counts[kind];
    }
    CHECK(std::abs(anomalous - 50.0) <= 1.0);
    CHECK(counts[AnomalyKind::none] == spec.test_count - anomalous);
}

TEST_CASE("generate_dataset writes byte-identical files on re-run") {
    sim::DatasetSpec spec;
    spec.train_count = 3;
    spec.test_count = 4;
    spec.seed = 31;
    spec.anomaly_mix = {{AnomalyKind::pair_collision, 0.5}};

    const fs::path base = fs::temp_directory_path() / "oread_simgen_rerun";
    fs::remove_all(base);
    sim::generate_dataset(spec, base / "a");
    sim::generate_dataset(spec, base / "b");

    size_t files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(base / "a")) {
        if (!entry.is_regular_file()) continue;
        ++files;
        const fs::path rel = fs::relative(entry.path(), base / "a");
        CHECK(slurp(entry.path()) == slurp(base / "b" / rel));
    }
    CHECK(files == 3 * (3 + 4)); // tracks, meta, scene per video
    fs::remove_all(base);
}
