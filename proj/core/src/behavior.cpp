#include "oread/behavior.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <stdexcept>

#include "oread/lowpass.hpp"

namespace oread::experts {

namespace {

nn::MlpSpec box_mlp_spec(const BehaviorConfig& cfg) {
    return {"beh.box_mlp", {4, cfg.box_encoder_mlp[0], cfg.box_encoder_mlp[1]}, true};
}

nn::GruSpec encoder_gru_spec(const BehaviorConfig& cfg) {
    return {"beh.enc_gru", cfg.box_encoder_mlp[1], cfg.hidden};
}

// Seeds the decoder hidden state from the encoder state; plain affine, no
// activation on this hand-off.
nn::MlpSpec fuse_spec(const BehaviorConfig& cfg) {
    return {"beh.fuse", {cfg.hidden, cfg.hidden}, false};
}

// The decoder GRU consumes the raw 4-dim offsets, no embedding.
nn::GruSpec decoder_gru_spec(const BehaviorConfig& cfg) {
    return {"beh.dec_gru", 4, cfg.hidden};
}

nn::MlpSpec out_mlp_spec(const BehaviorConfig& cfg) {
    return {"beh.out_mlp", {cfg.hidden, cfg.decoder_out_mlp[0], cfg.decoder_out_mlp[1]},
            false};
}

void validate(const BehaviorConfig& cfg) {
    if (cfg.delta < 1) throw std::invalid_argument("behavior: delta must be >= 1");
    if (cfg.train_history < 1)
        throw std::invalid_argument("behavior: train_history must be >= 1");
    if (cfg.decoder_out_mlp[1] != 4)
        throw std::invalid_argument("behavior: output layer must emit 4 offsets");
}

Eigen::VectorXd box_vec(const Box& b) {
    Eigen::VectorXd v(4);
    v << b.cx, b.cy, b.w, b.h;
    return v;
}

nn::Tape::Id encode_step_node(nn::Tape& t, const BehaviorConfig& cfg, const Box& box,
                              nn::Tape::Id h) {
    const nn::Tape::Id e = nn::mlp_apply(t, box_mlp_spec(cfg), t.input(box_vec(box)));
    return nn::gru_step(t, encoder_gru_spec(cfg), e, h);
}

// Decoder rollout emitting `steps` offset nodes. The offsets feed back as
// the next input, matching scoring-time use exactly.
std::vector<nn::Tape::Id> rollout(nn::Tape& t, const BehaviorConfig& cfg,
                                  nn::Tape::Id enc_state, int32_t steps) {
    nn::Tape::Id hd = nn::mlp_apply(t, fuse_spec(cfg), enc_state);
    nn::Tape::Id prev = t.zeros(4);
    std::vector<nn::Tape::Id> offsets;
    offsets.reserve(static_cast<size_t>(steps));
    for (int32_t k = 0; k < steps; ++k) {
        hd = nn::gru_step(t, decoder_gru_spec(cfg), prev, hd);
        const nn::Tape::Id p = nn::mlp_apply(t, out_mlp_spec(cfg), hd);
        offsets.push_back(p);
        prev = p;
    }
    return offsets;
}

// Anchor-relative box node: [anchor.cx + px, anchor.cy + py,
// anchor.w * e^pw, anchor.h * e^ph].
nn::Tape::Id offset_to_box(nn::Tape& t, nn::Tape::Id p, const Box& anchor) {
    const nn::Tape::Id centers =
        t.add_const(t.slice(p, 0, 2), Eigen::Vector2d(anchor.cx, anchor.cy));
    const nn::Tape::Id extents =
        t.mul_const(t.exp(t.slice(p, 2, 2)), Eigen::Vector2d(anchor.w, anchor.h));
    return t.concat({centers, extents});
}

} // namespace

void PredictionBuffer::add(int32_t origin, std::vector<Box> predicted) {
    by_origin_[origin] = std::move(predicted);
}

std::vector<Box> PredictionBuffer::for_frame(int32_t t) const {
    std::vector<Box> out;
    const auto lo = by_origin_.lower_bound(t - delta_);
    for (auto it = lo; it != by_origin_.end() && it->first <= t - 1; ++it) {
        const size_t idx = static_cast<size_t>(t - it->first - 1);
        if (idx < it->second.size()) out.push_back(it->second[idx]);
    }
    return out;
}

void PredictionBuffer::expire_before(int32_t t) {
    // An origin o serves frames up to o + delta.
    by_origin_.erase(by_origin_.begin(), by_origin_.lower_bound(t - delta_));
}

void declare_behavior(nn::ParamStore& ps, const BehaviorConfig& cfg) {
    validate(cfg);
    nn::declare_mlp(ps, box_mlp_spec(cfg));
    nn::declare_gru(ps, encoder_gru_spec(cfg));
    nn::declare_mlp(ps, fuse_spec(cfg));
    nn::declare_gru(ps, decoder_gru_spec(cfg));
    nn::declare_mlp(ps, out_mlp_spec(cfg));
}

Eigen::VectorXd encode_step(const Box& box, const Eigen::VectorXd& state,
                            const nn::ParamStore& ps, const BehaviorConfig& cfg) {
    validate(cfg);
    if (state.size() != cfg.hidden)
        throw std::invalid_argument("encode_step: state size differs from hidden");
    nn::Tape t(&ps);
    return t.value(encode_step_node(t, cfg, box, t.input(state)));
}

std::vector<Box> predict_future(const Eigen::VectorXd& state, const Box& anchor,
                                const nn::ParamStore& ps, const BehaviorConfig& cfg) {
    validate(cfg);
    if (state.size() != cfg.hidden)
        throw std::invalid_argument("predict_future: state size differs from hidden");
    nn::Tape t(&ps);
    const auto offsets = rollout(t, cfg, t.input(state), cfg.delta);
    std::vector<Box> out;
    out.reserve(offsets.size());
    for (const nn::Tape::Id p : offsets) {
        const Eigen::VectorXd& v = t.value(offset_to_box(t, p, anchor));
        out.push_back({v(0), v(1), v(2), v(3)});
    }
    return out;
}

double consistency_score(std::span<const Box> predictions, bool divide_by_height) {
    const size_t n = predictions.size();
    if (n < 2) return 0.0;

    auto coord_std = [&](double Box::* m) {
        double mean = 0.0;
        for (const Box& b : predictions) mean += b.*m;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (const Box& b : predictions) var += (b.*m - mean) * (b.*m - mean);
        return std::sqrt(var / static_cast<double>(n));
    };
    double spread = 0.0;
    for (double Box::* m : {&Box::cx, &Box::cy, &Box::w, &Box::h}) spread += coord_std(m);
    spread /= 4.0;

    double mean_h = 0.0;
    for (const Box& b : predictions) mean_h += b.h;
    mean_h /= static_cast<double>(n);
    return divide_by_height ? spread / mean_h : spread * mean_h;
}

nn::Tape::Id future_loss_graph(nn::Tape& t, std::span<const Box> history,
                               std::span<const Box> targets,
                               const BehaviorConfig& cfg) {
    validate(cfg);
    if (history.empty() || targets.empty())
        throw std::invalid_argument("future_loss_graph: empty history or targets");

    nn::Tape::Id h = t.zeros(cfg.hidden);
    for (const Box& b : history) h = encode_step_node(t, cfg, b, h);

    const Box& anchor = history.back();
    const auto K = static_cast<int32_t>(targets.size());
    const auto offsets = rollout(t, cfg, h, K);

    nn::Tape::Id sum = t.zeros(1);
    for (int32_t k = 0; k < K; ++k) {
        const nn::Tape::Id box = offset_to_box(t, offsets[static_cast<size_t>(k)], anchor);
        const Box& tgt = targets[static_cast<size_t>(k)];
        const nn::Tape::Id diff =
            t.add_const(box, -Eigen::Vector4d(tgt.cx, tgt.cy, tgt.w, tgt.h));
        sum = t.add(sum, t.sum_squares(diff));
    }
    return t.scale(sum, 1.0 / (4.0 * static_cast<double>(K)));
}

namespace {

// One training sample: observed history ending at the origin frame, then up
// to delta future boxes as targets.
struct Sample {
    std::vector<Box> history; // last entry is the anchor
    std::vector<Box> targets;
};

std::vector<Sample> mine_samples(const VideoRecord& video, const BehaviorConfig& cfg) {
    std::vector<Sample> out;
    for (const Track& tr : video.tracks) {
        for (int32_t t = tr.first_frame; t < tr.last_frame(); t += cfg.train_stride) {
            const int32_t h0 = std::max(tr.first_frame, t - cfg.train_history + 1);
            const int32_t K = std::min(cfg.delta, tr.last_frame() - t);
            Sample s;
            for (int32_t f = h0; f <= t; ++f) s.history.push_back(tr.at(f));
            for (int32_t k = 1; k <= K; ++k) s.targets.push_back(tr.at(t + k));
            out.push_back(std::move(s));
        }
    }
    return out;
}

double mean_batch_loss_and_grads(const std::vector<const Sample*>& batch,
                                 const nn::ParamStore& ps, const BehaviorConfig& cfg,
                                 nn::GradStore* grads) {
    double total = 0.0;
    nn::Tape tape(&ps);
    for (const Sample* s : batch) {
        tape.clear();
        const nn::Tape::Id root = future_loss_graph(tape, s->history, s->targets, cfg);
        total += tape.value(root)(0);
        if (grads) tape.backward(root, *grads);
    }
    if (grads) grads->scale(1.0 / static_cast<double>(batch.size()));
    return total / static_cast<double>(batch.size());
}

} // namespace

TrainLog train_behavior(std::span<const VideoRecord> videos, nn::ParamStore& ps,
                        const BehaviorConfig& cfg, uint64_t seed, std::ostream* log) {
    validate(cfg);
    for (const VideoRecord& v : videos)
        for (uint8_t l : v.frame_labels)
            if (l != 0)
                throw std::invalid_argument("train_behavior: video " + v.video_id +
                                            " contains labeled anomalous frames");

    const size_t n_val =
        videos.size() >= 2
            ? std::min(videos.size() - 1,
                       static_cast<size_t>(std::floor(
                           cfg.val_fraction * static_cast<double>(videos.size()))))
            : 0;
    const size_t n_train = videos.size() - n_val;

    std::vector<Sample> train_samples, val_samples;
    for (size_t i = 0; i < videos.size(); ++i) {
        auto mined = mine_samples(videos[i], cfg);
        auto& dst = i < n_train ? train_samples : val_samples;
        std::move(mined.begin(), mined.end(), std::back_inserter(dst));
    }
    if (train_samples.empty())
        throw std::invalid_argument(
            "train_behavior: no track reaches one frame past an origin; nothing to fit");

    ps = nn::ParamStore();
    declare_behavior(ps, cfg);
    ps.init_uniform(seed);

    nn::AdamState adam;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<const Sample*> order(train_samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = &train_samples[i];

    TrainLog tlog;
    for (int32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_sum = 0.0;
        size_t seen = 0;
        for (size_t begin = 0; begin < order.size();
             begin += static_cast<size_t>(cfg.batch)) {
            const size_t end =
                std::min(order.size(), begin + static_cast<size_t>(cfg.batch));
            std::vector<const Sample*> batch(order.begin() + static_cast<long>(begin),
                                             order.begin() + static_cast<long>(end));
            nn::GradStore grads;
            const double mean_loss = mean_batch_loss_and_grads(batch, ps, cfg, &grads);
            nn::adam_step(ps, grads, adam, cfg.lr);
            epoch_sum += mean_loss * static_cast<double>(batch.size());
            seen += batch.size();
        }
        tlog.train_loss.push_back(epoch_sum / static_cast<double>(seen));

        if (!val_samples.empty()) {
            std::vector<const Sample*> vb(val_samples.size());
            for (size_t i = 0; i < vb.size(); ++i) vb[i] = &val_samples[i];
            tlog.val_loss.push_back(mean_batch_loss_and_grads(vb, ps, cfg, nullptr));
        }
        if (log) {
            *log << "expert=behavior epoch=" << epoch + 1 << "/" << cfg.epochs
                 << " train_loss=" << tlog.train_loss.back();
            if (!tlog.val_loss.empty()) *log << " val_loss=" << tlog.val_loss.back();
            *log << '\n';
        }
    }
    return tlog;
}

ScoreSeries score_behavior(const VideoRecord& video, const nn::ParamStore& ps,
                           const BehaviorConfig& cfg) {
    validate(cfg);
    ScoreSeries raw;
    raw.video_id = video.video_id;
    raw.valid_from = 2;
    raw.values.assign(static_cast<size_t>(video.num_frames), 0.0);

    struct ObjectState {
        const Track* track;
        Eigen::VectorXd hidden;
        PredictionBuffer buffer;
    };
    std::vector<ObjectState> objects;
    objects.reserve(video.tracks.size());
    for (const Track& tr : video.tracks)
        objects.push_back(
            {&tr, Eigen::VectorXd::Zero(cfg.hidden), PredictionBuffer(cfg.delta)});

    for (int32_t t = 0; t < video.num_frames; ++t) {
        // Score first: only predictions from frames before t may be used.
        double sum = 0.0;
        int32_t tracked = 0;
        for (ObjectState& o : objects) {
            if (!o.track->covers(t)) continue;
            ++tracked;
            sum += consistency_score(o.buffer.for_frame(t), cfg.divide_by_height);
        }
        if (tracked > 0) raw.values[static_cast<size_t>(t)] = sum / tracked;

        for (ObjectState& o : objects) {
            if (!o.track->covers(t)) continue;
            const Box& box = o.track->at(t);
            o.hidden = encode_step(box, o.hidden, ps, cfg);
            o.buffer.add(t, predict_future(o.hidden, box, ps, cfg));
            o.buffer.expire_before(t + 1);
        }
    }
    return lowpass_filter(raw, video.fps, cfg.lowpass_cutoff_hz);
}

} // namespace oread::experts
