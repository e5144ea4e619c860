#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "oread/behavior.hpp"
#include "oread/nn.hpp"
#include "oread/types.hpp"

using namespace oread;
using namespace oread::experts;

namespace {

Box bx(double cx, double cy, double w, double h) { return {cx, cy, w, h}; }

Track linear_track(int32_t id, int32_t first, int32_t len, double x0, double y0,
                   double vx, double vy, double w, double h) {
    Track tr;
    tr.object_id = id;
    tr.first_frame = first;
    for (int32_t k = 0; k < len; ++k)
        tr.boxes.push_back(bx(x0 + vx * k, y0 + vy * k, w, h));
    return tr;
}

VideoRecord make_video(std::string id, int32_t num_frames, std::vector<Track> tracks) {
    VideoRecord v;
    v.video_id = std::move(id);
    v.num_frames = num_frames;
    v.tracks = std::move(tracks);
    v.frame_labels.assign(static_cast<size_t>(num_frames), 0);
    return v;
}

BehaviorConfig tiny_cfg() {
    BehaviorConfig cfg;
    cfg.delta = 3;
    cfg.box_encoder_mlp = {8, 6};
    cfg.hidden = 8;
    cfg.decoder_out_mlp = {6, 4};
    cfg.batch = 8;
    cfg.lr = 5e-3;
    cfg.epochs = 25;
    cfg.train_history = 4;
    cfg.train_stride = 2;
    return cfg;
}

Eigen::VectorXd encode_all(std::span<const Box> boxes, const nn::ParamStore& ps,
                           const BehaviorConfig& cfg) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(cfg.hidden);
    for (const Box& b : boxes) h = encode_step(b, h, ps, cfg);
    return h;
}

} // namespace

TEST_CASE("consistency_score hand values") {
    const std::vector<Box> pair{bx(0.5, 0.5, 0.2, 0.2), bx(0.52, 0.5, 0.2, 0.2)};
    // Only cx spreads: population STD 0.01, averaged over 4 coordinates is
    // 0.0025, divided by the mean height 0.2.
    CHECK(consistency_score(pair, true) == doctest::Approx(0.0125).epsilon(1e-13));
    CHECK(consistency_score(pair, false) == doctest::Approx(0.0005).epsilon(1e-13));

    CHECK(consistency_score({}, true) == 0.0);
    const std::vector<Box> one{bx(0.5, 0.5, 0.2, 0.2)};
    CHECK(consistency_score(one, true) == 0.0);

    const std::vector<Box> same{bx(0.5, 0.5, 0.2, 0.2), bx(0.5, 0.5, 0.2, 0.2)};
    CHECK(consistency_score(same, true) == 0.0);
}

TEST_CASE("consistency_score divides out the object scale") {
    // Same absolute spread at heights 0.1 and 0.4: scores must sit 4:1.
    const std::vector<Box> small{bx(0.5, 0.5, 0.1, 0.1), bx(0.52, 0.5, 0.1, 0.1)};
    const std::vector<Box> large{bx(0.5, 0.5, 0.1, 0.4), bx(0.52, 0.5, 0.1, 0.4)};
    const double s = consistency_score(small, true);
    const double l = consistency_score(large, true);
    CHECK(s == doctest::Approx(4.0 * l).epsilon(1e-12));

    // Scaling every coordinate by gamma scales spread and height alike, so
    // the divided score is invariant.
    const double gamma = 3.0;
    std::vector<Box> scaled;
    for (const Box& b : small)
        scaled.push_back(bx(gamma * b.cx, gamma * b.cy, gamma * b.w, gamma * b.h));
    CHECK(consistency_score(scaled, true) == doctest::Approx(s).epsilon(1e-12));

    // Multiply mode grows with scale instead.
    CHECK(consistency_score(scaled, false) ==
          doctest::Approx(gamma * gamma * consistency_score(small, false)).epsilon(1e-12));
}

TEST_CASE("PredictionBuffer serves ascending origins and expires old ones") {
    PredictionBuffer buf(3);
    // Origin o predicts frames o+1 .. o+3; tag boxes by cx = origin + 0.1*step.
    auto preds = [](int32_t origin, int32_t count) {
        std::vector<Box> out;
        for (int32_t k = 1; k <= count; ++k)
            out.push_back({static_cast<double>(origin) + 0.1 * k, 0.5, 0.1, 0.1});
        return out;
    };
    buf.add(0, preds(0, 3));
    buf.add(1, preds(1, 3));
    buf.add(2, preds(2, 1)); // short rollout stops at frame 3

    const std::vector<Box> at1 = buf.for_frame(1);
    REQUIRE(at1.size() == 1);
    CHECK(at1[0].cx == doctest::Approx(0.1));

    const std::vector<Box> at3 = buf.for_frame(3);
    REQUIRE(at3.size() == 3);
    CHECK(at3[0].cx == doctest::Approx(0.3));  // origin 0, step 3
    CHECK(at3[1].cx == doctest::Approx(1.2));  // origin 1, step 2
    CHECK(at3[2].cx == doctest::Approx(2.1));  // origin 2, step 1

    // Origin 2 predicted a single frame, so frame 4 only reaches origin 1.
    const std::vector<Box> at4 = buf.for_frame(4);
    REQUIRE(at4.size() == 1);
    CHECK(at4[0].cx == doctest::Approx(1.3));

    CHECK(buf.for_frame(7).empty()); // every origin out of range

    CHECK(buf.origins() == 3);
    buf.expire_before(4); // origin 0 can no longer serve any frame >= 4
    CHECK(buf.origins() == 2);
    REQUIRE(buf.for_frame(4).size() == 1); // unchanged view after expiry
    buf.expire_before(6);
    CHECK(buf.origins() == 0);
}

TEST_CASE("PredictionBuffer mirrors tracking loss decay") {
    PredictionBuffer buf(4);
    for (int32_t o = 0; o < 6; ++o)
        buf.add(o, std::vector<Box>(4, bx(0.5, 0.5, 0.1, 0.1)));
    // The object vanishes after frame 5: counts decay one per frame.
    CHECK(buf.for_frame(6).size() == 4);
    CHECK(buf.for_frame(7).size() == 3);
    CHECK(buf.for_frame(8).size() == 2);
    CHECK(buf.for_frame(9).size() == 1);
    CHECK(buf.for_frame(10).empty());
}

TEST_CASE("encode_step with zero weights keeps a zero state") {
    const BehaviorConfig cfg = tiny_cfg();
    nn::ParamStore ps;
    declare_behavior(ps, cfg); // declared arrays start at zero
    const Eigen::VectorXd h =
        encode_step(bx(0.4, 0.5, 0.1, 0.2), Eigen::VectorXd::Zero(cfg.hidden), ps, cfg);
    REQUIRE(h.size() == cfg.hidden);
    CHECK(h.cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_WITH_AS(
        encode_step(bx(0.4, 0.5, 0.1, 0.2), Eigen::VectorXd::Zero(3), ps, cfg),
        doctest::Contains("state size"), std::invalid_argument);
}

TEST_CASE("zeroed output layer predicts the anchor box") {
    const BehaviorConfig cfg = tiny_cfg();
    nn::ParamStore ps;
    declare_behavior(ps, cfg);
    ps.init_uniform(5);
    ps.at("beh.out_mlp.1.w").setZero();
    ps.at("beh.out_mlp.1.b").setZero();

    const Box anchor = bx(0.37, 0.58, 0.12, 0.23);
    const Eigen::VectorXd state =
        encode_all(std::vector<Box>{bx(0.3, 0.5, 0.1, 0.2), anchor}, ps, cfg);
    const std::vector<Box> preds = predict_future(state, anchor, ps, cfg);
    REQUIRE(preds.size() == static_cast<size_t>(cfg.delta));
    for (const Box& p : preds) CHECK(p == anchor);

    CHECK_THROWS_WITH_AS(predict_future(Eigen::VectorXd::Zero(2), anchor, ps, cfg),
                         doctest::Contains("state size"), std::invalid_argument);
}

TEST_CASE("predict_future is deterministic") {
    const BehaviorConfig cfg = tiny_cfg();
    nn::ParamStore ps;
    declare_behavior(ps, cfg);
    ps.init_uniform(9);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 0.5);
    Eigen::VectorXd state(cfg.hidden);
    for (Eigen::Index i = 0; i < state.size(); ++i) state(i) = nd(rng);

    const Box anchor = bx(0.5, 0.5, 0.2, 0.3);
    const std::vector<Box> a = predict_future(state, anchor, ps, cfg);
    const std::vector<Box> b = predict_future(state, anchor, ps, cfg);
    REQUIRE(a.size() == b.size());
    for (size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
    for (const Box& p : a) {
        CHECK(p.w > 0.0); // exp keeps extents positive whatever the offsets
        CHECK(p.h > 0.0);
    }
}

TEST_CASE("future_loss_graph matches the eager prediction error") {
    const BehaviorConfig cfg = tiny_cfg();
    nn::ParamStore ps;
    declare_behavior(ps, cfg);
    ps.init_uniform(21);

    const std::vector<Box> history{bx(0.3, 0.4, 0.1, 0.2), bx(0.32, 0.41, 0.1, 0.2),
                                   bx(0.34, 0.42, 0.11, 0.21)};
    const std::vector<Box> targets{bx(0.36, 0.43, 0.11, 0.21),
                                   bx(0.38, 0.44, 0.12, 0.22),
                                   bx(0.40, 0.45, 0.12, 0.22)};

    // Same number of targets as cfg.delta, so predict_future runs the exact
    // rollout the graph encodes.
    const std::vector<Box> preds =
        predict_future(encode_all(history, ps, cfg), history.back(), ps, cfg);
    REQUIRE(preds.size() == targets.size());
    double sq = 0.0;
    for (size_t k = 0; k < targets.size(); ++k) {
        const double dx = preds[k].cx - targets[k].cx;
        const double dy = preds[k].cy - targets[k].cy;
        const double dw = preds[k].w - targets[k].w;
        const double dh = preds[k].h - targets[k].h;
        sq += dx * dx + dy * dy + dw * dw + dh * dh;
    }
    const double eager = sq / (4.0 * static_cast<double>(targets.size()));

    nn::Tape t(&ps);
    const double graph = t.value(future_loss_graph(t, history, targets, cfg))(0);
    CHECK(graph == doctest::Approx(eager).epsilon(1e-10));

    nn::Tape t2(&ps);
    CHECK_THROWS_WITH_AS(future_loss_graph(t2, {}, targets, cfg),
                         doctest::Contains("empty"), std::invalid_argument);
}

TEST_CASE("future_loss_graph gradients pass finite differences") {
    BehaviorConfig cfg = tiny_cfg();
    cfg.hidden = 6;
    cfg.box_encoder_mlp = {5, 4};
    cfg.decoder_out_mlp = {5, 4};
    nn::ParamStore ps;
    declare_behavior(ps, cfg);
    ps.init_uniform(7);

    const std::vector<Box> history{bx(0.3, 0.4, 0.1, 0.2), bx(0.32, 0.41, 0.1, 0.2),
                                   bx(0.34, 0.42, 0.11, 0.21)};
    const std::vector<Box> targets{bx(0.36, 0.43, 0.11, 0.21),
                                   bx(0.38, 0.44, 0.12, 0.22)};

    const double err = nn::finite_diff_check(
        [&](nn::Tape& t) { return future_loss_graph(t, history, targets, cfg); }, ps,
        1e-5, 64, 1);
    CHECK(err < 1e-4);
}

TEST_CASE("score_behavior zeros, warm start, and determinism") {
    const BehaviorConfig cfg = tiny_cfg();
    nn::ParamStore ps;
    declare_behavior(ps, cfg);
    ps.init_uniform(11);

    const ScoreSeries none = score_behavior(make_video("empty", 10, {}), ps, cfg);
    CHECK(none.video_id == "empty");
    CHECK(none.valid_from == 2);
    REQUIRE(none.values.size() == 10);
    for (double v : none.values) CHECK(v == 0.0);

    std::vector<Track> tracks;
    tracks.push_back(linear_track(1, 0, 20, 0.2, 0.3, 0.01, 0.0, 0.1, 0.12));
    tracks.push_back(linear_track(2, 0, 20, 0.6, 0.5, -0.008, 0.004, 0.12, 0.15));
    const VideoRecord v = make_video("v", 20, tracks);

    const ScoreSeries s = score_behavior(v, ps, cfg);
    CHECK(s.valid_from == 2);
    // Frames 0 and 1 cannot hold two predictions per object yet.
    CHECK(s.values[0] == 0.0);
    CHECK(s.values[1] == 0.0);
    double peak = 0.0;
    for (double x : s.values) peak = std::max(peak, std::abs(x));
    CHECK(peak > 0.0); // untrained predictions disagree somewhere

    const ScoreSeries again = score_behavior(v, ps, cfg);
    for (size_t t = 0; t < s.values.size(); ++t) CHECK(s.values[t] == again.values[t]);
}

TEST_CASE("score_behavior is causal") {
    const BehaviorConfig cfg = tiny_cfg();
    nn::ParamStore ps;
    declare_behavior(ps, cfg);
    ps.init_uniform(13);

    std::vector<Track> tracks;
    tracks.push_back(linear_track(1, 0, 30, 0.2, 0.3, 0.01, 0.0, 0.1, 0.12));
    tracks.push_back(linear_track(2, 0, 30, 0.5, 0.5, -0.005, 0.002, 0.12, 0.14));
    VideoRecord base = make_video("v", 30, tracks);

    VideoRecord edited = base;
    for (size_t k = 20; k < 30; ++k) edited.tracks[0].boxes[k].cy += 0.25;

    const ScoreSeries sa = score_behavior(base, ps, cfg);
    const ScoreSeries sb = score_behavior(edited, ps, cfg);
    // The first edited observation is frame 20; it reaches scores from 21 on.
    for (size_t t = 0; t <= 20; ++t) CHECK(sa.values[t] == sb.values[t]);
    double max_after = 0.0;
    for (size_t t = 21; t < 30; ++t)
        max_after = std::max(max_after, std::abs(sa.values[t] - sb.values[t]));
    CHECK(max_after > 0.0);
}

TEST_CASE("train_behavior fits constant tracks and is deterministic") {
    BehaviorConfig cfg = tiny_cfg();
    cfg.val_fraction = 0.3; // 4 videos -> 1 held out

    std::vector<VideoRecord> videos;
    for (int32_t vi = 0; vi < 4; ++vi) {
        std::vector<Track> tracks;
        for (int32_t m = 0; m < 2; ++m)
            tracks.push_back(linear_track(m + 1, 0, 20, 0.2 + 0.3 * m + 0.02 * vi,
                                          0.4 + 0.1 * m, 0.0, 0.0, 0.1 + 0.02 * m,
                                          0.15 + 0.02 * m));
        videos.push_back(make_video("train_" + std::to_string(vi), 20, tracks));
    }

    nn::ParamStore ps;
    std::ostringstream log;
    const TrainLog tl = train_behavior(videos, ps, cfg, 42, &log);
    REQUIRE(tl.train_loss.size() == static_cast<size_t>(cfg.epochs));
    REQUIRE(!tl.val_loss.empty());
    CHECK(tl.train_loss.back() < tl.train_loss.front());
    CHECK(log.str().find("expert=behavior epoch=1/25") != std::string::npos);

    // Constant motion means the true future equals the anchor; after
    // training the one-step prediction should sit close to it.
    const Track probe = linear_track(9, 0, 8, 0.35, 0.45, 0.0, 0.0, 0.11, 0.16);
    const Eigen::VectorXd state = encode_all(probe.boxes, ps, cfg);
    const std::vector<Box> preds = predict_future(state, probe.boxes.back(), ps, cfg);
    CHECK(std::abs(preds[0].cx - 0.35) < 0.01);
    CHECK(std::abs(preds[0].cy - 0.45) < 0.01);
    CHECK(std::abs(preds[0].w - 0.11) < 0.01);
    CHECK(std::abs(preds[0].h - 0.16) < 0.01);

    nn::ParamStore ps2;
    train_behavior(videos, ps2, cfg, 42);
    CHECK(ps2.checksum() == ps.checksum());

    nn::ParamStore ps3;
    train_behavior(videos, ps3, cfg, 43);
    CHECK(ps3.checksum() != ps.checksum());
}

TEST_CASE("train_behavior input validation") {
    const BehaviorConfig cfg = tiny_cfg();

    std::vector<Track> tracks{linear_track(1, 0, 12, 0.2, 0.5, 0.01, 0.0, 0.1, 0.1)};
    std::vector<VideoRecord> labeled{make_video("bad_video", 12, tracks)};
    labeled[0].frame_labels[3] = 1;
    nn::ParamStore ps;
    CHECK_THROWS_WITH_AS(train_behavior(labeled, ps, cfg, 1),
                         doctest::Contains("bad_video"), std::invalid_argument);

    // Length-1 tracks leave no frame after any origin.
    std::vector<Track> stubs;
    stubs.push_back(linear_track(1, 0, 1, 0.2, 0.5, 0.0, 0.0, 0.1, 0.1));
    stubs.push_back(linear_track(2, 4, 1, 0.6, 0.5, 0.0, 0.0, 0.1, 0.1));
    std::vector<VideoRecord> sparse{make_video("v", 6, stubs)};
    CHECK_THROWS_WITH_AS(train_behavior(sparse, ps, cfg, 1),
                         doctest::Contains("no track reaches"), std::invalid_argument);
}

TEST_CASE("behavior config validation") {
    nn::ParamStore ps;
    BehaviorConfig cfg = tiny_cfg();
    cfg.delta = 0;
    CHECK_THROWS_WITH_AS(declare_behavior(ps, cfg), doctest::Contains("delta"),
                         std::invalid_argument);
    cfg = tiny_cfg();
    cfg.train_history = 0;
    CHECK_THROWS_AS(declare_behavior(ps, cfg), std::invalid_argument);
    cfg = tiny_cfg();
    cfg.decoder_out_mlp[1] = 5;
    CHECK_THROWS_WITH_AS(declare_behavior(ps, cfg), doctest::Contains("4 offsets"),
                         std::invalid_argument);
}
