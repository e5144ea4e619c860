#include "oread/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "oread/track_io.hpp"

namespace oread::sim {

namespace {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

double smoothstep(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}

struct BaseMotion {
    Vec2 p0, p1;     // waypoints
    Vec2 lateral;    // unit normal to the glide direction
    double amp = 0.0;
    double omega = 0.0; // rad per second
    double phase = 0.0;
    double w0 = 0.0, h0 = 0.0;
    double growth = 0.0; // log-size drift per frame

    Vec2 center(double t_frames, double fps, int32_t num_frames) const {
        const double u = num_frames > 1 ? t_frames / (num_frames - 1) : 0.0;
        const double sway = amp * std::sin(omega * t_frames / fps + phase);
        return {p0.x + (p1.x - p0.x) * u + sway * lateral.x,
                p0.y + (p1.y - p0.y) * u + sway * lateral.y};
    }
    double width(double t_frames) const { return w0 * std::exp(growth * t_frames); }
    double height(double t_frames) const { return h0 * std::exp(growth * t_frames); }
};

BaseMotion sample_motion(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> upos(0.2, 0.8);
    std::uniform_real_distribution<double> usize(0.07, 0.13);
    std::uniform_real_distribution<double> uaspect(0.8, 1.25);
    std::uniform_real_distribution<double> uamp(0.0, 0.02);
    std::uniform_real_distribution<double> ufreq(0.15, 0.45);
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> ugrowth(-0.002, 0.002);

    BaseMotion m;
    m.p0 = {upos(rng), upos(rng)};
    for (int attempt = 0; attempt < 32; ++attempt) {
        m.p1 = {upos(rng), upos(rng)};
        const double dx = m.p1.x - m.p0.x, dy = m.p1.y - m.p0.y;
        if (dx * dx + dy * dy >= 0.25 * 0.25) break;
    }
    const double dx = m.p1.x - m.p0.x, dy = m.p1.y - m.p0.y;
    const double len = std::max(1e-9, std::hypot(dx, dy));
    m.lateral = {-dy / len, dx / len};
    m.w0 = usize(rng);
    m.h0 = m.w0 * uaspect(rng);
    m.amp = uamp(rng);
    m.omega = 2.0 * std::numbers::pi * ufreq(rng);
    m.phase = uphase(rng);
    m.growth = ugrowth(rng);
    return m;
}

} // namespace

VideoRecord generate_video(const ScenarioSpec& spec) {
    if (spec.num_frames <= 0) throw std::invalid_argument("generate_video: num_frames <= 0");
    if (!(spec.anomaly_start_frac >= 0.0 && spec.anomaly_start_frac < spec.anomaly_end_frac &&
          spec.anomaly_end_frac <= 1.0))
        throw std::invalid_argument("generate_video: bad anomaly interval");
    if (spec.noise_std < 0.0) throw std::invalid_argument("generate_video: negative noise");
    if (spec.anomaly_kind == AnomalyKind::pair_collision && spec.num_objects < 2)
        throw std::invalid_argument("generate_video: pair_collision needs >= 2 objects");

    const int32_t n = spec.num_frames;
    std::mt19937_64 rng(spec.seed);

    std::vector<BaseMotion> motions;
    motions.reserve(static_cast<size_t>(std::max<int32_t>(spec.num_objects, 0)));
    for (int32_t i = 0; i < spec.num_objects; ++i) motions.push_back(sample_motion(rng));

    // Per-object center/size lanes, filled with the base model first.
    std::vector<std::vector<Vec2>> centers(motions.size(), std::vector<Vec2>(n));
    std::vector<std::vector<Vec2>> sizes(motions.size(), std::vector<Vec2>(n));
    for (size_t i = 0; i < motions.size(); ++i)
        for (int32_t t = 0; t < n; ++t) {
            centers[i][t] = motions[i].center(t, spec.fps, n);
            sizes[i][t] = {motions[i].width(t), motions[i].height(t)};
        }

    VideoRecord video;
    video.video_id = spec.video_id;
    video.fps = spec.fps;
    video.num_frames = n;
    video.frame_labels.assign(static_cast<size_t>(n), 0);
    video.category = spec.anomaly_kind;
    video.involvement = Involvement::none;

    if (spec.anomaly_kind != AnomalyKind::none) {
        int32_t t0 = static_cast<int32_t>(std::llround(spec.anomaly_start_frac * n));
        int32_t t1 = static_cast<int32_t>(std::llround(spec.anomaly_end_frac * n));
        t0 = std::clamp<int32_t>(t0, 0, n - 1);
        t1 = std::clamp<int32_t>(t1, t0 + 1, n);
        for (int32_t t = t0; t < t1; ++t) video.frame_labels[static_cast<size_t>(t)] = 1;
        video.involvement = spec.anomaly_kind == AnomalyKind::scene_only
                                ? Involvement::ego
                                : Involvement::non_ego;

        switch (spec.anomaly_kind) {
            case AnomalyKind::pair_collision: {
                // Contact early in the interval leaves most labeled frames in
                // the erratic post-contact phase, where reconstruction error
                // is largest.
                const int32_t tc = t0 + std::max<int32_t>(1, (t1 - t0) * 2 / 5);
                const Vec2 a0 = centers[0][tc], b0 = centers[1][tc];
                const Vec2 mid{0.5 * (a0.x + b0.x), 0.5 * (a0.y + b0.y)};
                std::uniform_real_distribution<double> jitter(-0.04, 0.04);
                for (int32_t t = t0; t < t1; ++t) {
                    if (t <= tc) {
                        const double beta = smoothstep(double(t - t0) / double(tc - t0));
                        for (size_t i : {size_t{0}, size_t{1}}) {
                            centers[i][t].x += beta * (mid.x - centers[i][t].x);
                            centers[i][t].y += beta * (mid.y - centers[i][t].y);
                        }
                    } else {
                        for (size_t i : {size_t{0}, size_t{1}}) {
                            centers[i][t] = {mid.x + jitter(rng), mid.y + jitter(rng)};
                        }
                    }
                }
                // After the event the two objects part at a normal speed.
                std::uniform_real_distribution<double> udir(0.0, 2.0 * std::numbers::pi);
                const double ang = udir(rng);
                const Vec2 sep{0.004 * std::cos(ang), 0.004 * std::sin(ang)};
                for (size_t i : {size_t{0}, size_t{1}}) {
                    const double s = i == 0 ? 1.0 : -1.0;
                    const Vec2 last = centers[i][t1 - 1];
                    for (int32_t t = t1; t < n; ++t) {
                        centers[i][t] = {last.x + s * sep.x * (t - (t1 - 1)),
                                         last.y + s * sep.y * (t - (t1 - 1))};
                    }
                }
                break;
            }
            case AnomalyKind::zigzag: {
                // Whole half-periods inside the interval: the weave starts
                // and ends on a zero crossing, so the path has no jump at the
                // interval edges, only the high-frequency kink inside.
                const int32_t len = t1 - t0;
                const double target_hz = 2.0;
                const int32_t half_periods = std::max<int32_t>(
                    1, static_cast<int32_t>(std::llround(2.0 * target_hz * len / spec.fps)));
                const double omega = std::numbers::pi * half_periods / len; // rad per frame
                std::uniform_real_distribution<double> uamp(0.04, 0.05);
                const double amp = uamp(rng);
                const Vec2 lat = motions[0].lateral;
                for (int32_t t = t0; t < t1; ++t) {
                    const double s = amp * std::sin(omega * (t - t0));
                    centers[0][t].x += s * lat.x;
                    centers[0][t].y += s * lat.y;
                }
                break;
            }
            case AnomalyKind::sudden_stop: {
                // Frozen through the end of the video; the labeled interval
                // covers only the onset where predictions disagree.
                const Vec2 hold = centers[0][t0];
                const Vec2 holdsz = sizes[0][t0];
                for (int32_t t = t0; t < n; ++t) {
                    centers[0][t] = hold;
                    sizes[0][t] = holdsz;
                }
                break;
            }
            case AnomalyKind::scene_only:
            case AnomalyKind::none:
                break;
        }
    }

    // Observation noise last, in fixed (object, frame) order.
    std::normal_distribution<double> noise(0.0, 1.0);
    for (size_t i = 0; i < motions.size(); ++i) {
        Track track;
        track.object_id = static_cast<int32_t>(i);
        track.first_frame = 0;
        track.boxes.resize(static_cast<size_t>(n));
        for (int32_t t = 0; t < n; ++t) {
            Box b{centers[i][t].x, centers[i][t].y, sizes[i][t].x, sizes[i][t].y};
            if (spec.noise_std > 0.0) {
                b.cx += spec.noise_std * noise(rng);
                b.cy += spec.noise_std * noise(rng);
                b.w += spec.noise_std * noise(rng);
                b.h += spec.noise_std * noise(rng);
            }
            b.w = std::max(b.w, 1e-4);
            b.h = std::max(b.h, 1e-4);
            track.boxes[static_cast<size_t>(t)] = b;
        }
        video.tracks.push_back(std::move(track));
    }
    return video;
}

std::pair<ScoreSeries, ScoreSeries> generate_scene_scores(const VideoRecord& video,
                                                          const SceneScoreSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    ScoreSeries ffp, str;
    ffp.video_id = str.video_id = video.video_id;
    ffp.valid_from = spec.t_ffp;
    str.valid_from = spec.t_ffp - 1;
    ffp.values.resize(static_cast<size_t>(video.num_frames));
    str.values.resize(static_cast<size_t>(video.num_frames));

    for (int32_t t = 0; t < video.num_frames; ++t) {
        const bool anomalous = video.frame_labels[static_cast<size_t>(t)] != 0;
        const double f = spec.ffp_mu + spec.ffp_sigma * unit(rng) +
                         (anomalous ? spec.ffp_delta : 0.0);
        const double s = spec.str_mu + spec.str_sigma * unit(rng) +
                         (anomalous ? spec.str_delta : 0.0);
        ffp.values[static_cast<size_t>(t)] = t < ffp.valid_from ? spec.ffp_mu : f;
        str.values[static_cast<size_t>(t)] = t < str.valid_from ? spec.str_mu : s;
    }
    return {std::move(ffp), std::move(str)};
}

Dataset make_dataset(const DatasetSpec& spec) {
    if (spec.train_count <= 0 || spec.test_count <= 0)
        throw std::invalid_argument("make_dataset: counts must be positive");
    double mix_total = 0.0;
    for (const auto& [kind, frac] : spec.anomaly_mix) {
        if (kind == AnomalyKind::none || frac < 0.0)
            throw std::invalid_argument("make_dataset: bad anomaly mix");
        mix_total += frac;
    }
    if (mix_total > 1.0 + 1e-12)
        throw std::invalid_argument("make_dataset: anomaly mix exceeds 1");

    std::mt19937_64 rng(spec.seed);

    // Largest-remainder rounding keeps each kind within one video of target.
    std::vector<AnomalyKind> assignment(static_cast<size_t>(spec.test_count),
                                        AnomalyKind::none);
    {
        std::vector<std::pair<AnomalyKind, double>> want(spec.anomaly_mix.begin(),
                                                         spec.anomaly_mix.end());
        std::vector<int32_t> counts(want.size(), 0);
        int32_t assigned = 0;
        std::vector<double> rema(want.size());
        double exact_total = 0.0;
        for (size_t k = 0; k < want.size(); ++k) {
            const double exact = want[k].second * spec.test_count;
            counts[k] = static_cast<int32_t>(std::floor(exact));
            rema[k] = exact - counts[k];
            assigned += counts[k];
            exact_total += exact;
        }
        const int32_t target_total = std::min<int32_t>(
            spec.test_count, static_cast<int32_t>(std::llround(exact_total)));
        std::vector<size_t> order(want.size());
        for (size_t k = 0; k < order.size(); ++k) order[k] = k;
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return rema[a] > rema[b]; });
        for (size_t k = 0; k < order.size() && assigned < target_total; ++k) {
            counts[order[k]] += 1;
            assigned += 1;
        }
        size_t pos = 0;
        for (size_t k = 0; k < want.size(); ++k)
            for (int32_t c = 0; c < counts[k]; ++c)
                assignment[pos++] = want[k].first;
        std::shuffle(assignment.begin(), assignment.end(), rng);
    }

    auto widen = [](const char* prefix, int32_t i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s_%04d", prefix, i);
        return std::string(buf);
    };

    std::uniform_real_distribution<double> ustart(0.3, 0.45);
    std::uniform_real_distribution<double> ulen(0.28, 0.35);

    Dataset ds;
    for (int32_t i = 0; i < spec.train_count; ++i) {
        ScenarioSpec vs;
        vs.seed = rng();
        vs.num_frames = spec.num_frames;
        vs.fps = spec.fps;
        vs.num_objects = spec.num_objects;
        vs.noise_std = spec.noise_std;
        vs.anomaly_kind = AnomalyKind::none;
        vs.video_id = widen("train", i);
        const uint64_t scene_seed = rng();
        ds.train.push_back(generate_video(vs));
        SceneScoreSpec ss;
        ss.seed = scene_seed;
        ds.train_scene.push_back(generate_scene_scores(ds.train.back(), ss));
    }
    for (int32_t i = 0; i < spec.test_count; ++i) {
        ScenarioSpec vs;
        vs.seed = rng();
        vs.num_frames = spec.num_frames;
        vs.fps = spec.fps;
        vs.num_objects = spec.num_objects;
        vs.noise_std = spec.noise_std;
        vs.anomaly_kind = assignment[static_cast<size_t>(i)];
        vs.video_id = widen("test", i);
        const double start = ustart(rng);
        const double len = ulen(rng);
        if (vs.anomaly_kind != AnomalyKind::none) {
            vs.anomaly_start_frac = start;
            vs.anomaly_end_frac =
                vs.anomaly_kind == AnomalyKind::sudden_stop
                    ? std::min(1.0, start + double(spec.sudden_stop_label_frames) /
                                                spec.num_frames)
                    : std::min(1.0, start + len);
        }
        const uint64_t scene_seed = rng();
        ds.test.push_back(generate_video(vs));
        SceneScoreSpec ss;
        ss.seed = scene_seed;
        if (vs.anomaly_kind == AnomalyKind::scene_only) {
            ss.ffp_delta = spec.scene_delta_ffp;
            ss.str_delta = spec.scene_delta_str;
        }
        ds.test_scene.push_back(generate_scene_scores(ds.test.back(), ss));
    }
    return ds;
}

Dataset generate_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir) {
    Dataset ds = make_dataset(spec);
    namespace fs = std::filesystem;
    const fs::path train_dir = out_dir / "train";
    const fs::path test_dir = out_dir / "test";
    fs::create_directories(train_dir);
    fs::create_directories(test_dir);
    for (size_t i = 0; i < ds.train.size(); ++i) {
        io::write_video(train_dir, ds.train[i]);
        io::write_scene_scores(train_dir / (ds.train[i].video_id + ".scene.csv"),
                               ds.train_scene[i].first, ds.train_scene[i].second);
    }
    for (size_t i = 0; i < ds.test.size(); ++i) {
        io::write_video(test_dir, ds.test[i]);
        io::write_scene_scores(test_dir / (ds.test[i].video_id + ".scene.csv"),
                               ds.test_scene[i].first, ds.test_scene[i].second);
    }
    return ds;
}

} // namespace oread::sim
