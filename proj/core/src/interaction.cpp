#include "oread/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

#include "oread/geometry.hpp"
#include "oread/lowpass.hpp"

namespace oread::experts {

namespace {

// Gradient guard inside sqrt on the training graph. Perturbs a zero loss by
// 1e-13, far below every tolerance used against pair_loss.
constexpr double kSqrtShift = 1e-26;

nn::MlpSpec encoder_mlp_spec(const InteractionConfig& cfg) {
    return {"int.enc_mlp", {8, cfg.encoder_mlp[0], cfg.encoder_mlp[1]}, true};
}

nn::MlpSpec bottleneck_spec(const InteractionConfig& cfg) {
    return {"int.z", {cfg.hidden, cfg.latent_dim}, true};
}

nn::MlpSpec decoder_mlp_spec(const InteractionConfig& cfg) {
    return {"int.dec_mlp",
            {8 + cfg.latent_dim, cfg.encoder_mlp[0], cfg.encoder_mlp[1]},
            true};
}

nn::MlpSpec output_mlp_spec(const InteractionConfig& cfg) {
    return {"int.out_mlp", {cfg.hidden, cfg.decoder_out_mlp[0], cfg.decoder_out_mlp[1]},
            false};
}

nn::GruSpec encoder_gru_spec(const InteractionConfig& cfg) {
    return {"int.enc_gru", cfg.encoder_mlp[1], cfg.hidden};
}

nn::GruSpec decoder_gru_spec(const InteractionConfig& cfg) {
    return {"int.dec_gru", cfg.encoder_mlp[1], cfg.hidden};
}

void validate(const InteractionConfig& cfg) {
    if (cfg.t_int < 2) throw std::invalid_argument("interaction: t_int must be >= 2");
    if (cfg.n_max < 1) throw std::invalid_argument("interaction: n_max must be >= 1");
    if (cfg.tau_std <= 0.0)
        throw std::invalid_argument("interaction: tau_std must be positive");
    if (cfg.decoder_out_mlp[1] != 8)
        throw std::invalid_argument("interaction: output layer must emit 8 offsets");
}

Eigen::VectorXd flatten_pair(const Box& a, const Box& b) {
    Eigen::VectorXd v(8);
    v << a.cx, a.cy, a.w, a.h, b.cx, b.cy, b.w, b.h;
    return v;
}

// Loss weights from the original window. Population STD per coordinate.
void loss_weights(const PairWindow& pair, double tau_std, double& lambda_h,
                  double& lambda_std) {
    const size_t T = pair.boxes_i.size();
    double hsum = 0.0;
    for (const Box& b : pair.boxes_i) hsum += b.h;
    for (const Box& b : pair.boxes_j) hsum += b.h;
    lambda_h = hsum / (2.0 * static_cast<double>(T));

    auto coord_std = [T](const std::vector<Box>& boxes, double Box::* m) {
        double mean = 0.0;
        for (const Box& b : boxes) mean += b.*m;
        mean /= static_cast<double>(T);
        double var = 0.0;
        for (const Box& b : boxes) var += (b.*m - mean) * (b.*m - mean);
        return std::sqrt(var / static_cast<double>(T));
    };
    double ssum = 0.0;
    for (const std::vector<Box>* boxes : {&pair.boxes_i, &pair.boxes_j})
        for (double Box::* m : {&Box::cx, &Box::cy, &Box::w, &Box::h})
            ssum += coord_std(*boxes, m);
    lambda_std = std::max(ssum / 8.0, tau_std);
}

void check_window(const PairWindow& pair, const InteractionConfig& cfg) {
    if (pair.boxes_i.size() != static_cast<size_t>(cfg.t_int) ||
        pair.boxes_j.size() != static_cast<size_t>(cfg.t_int))
        throw std::invalid_argument("interaction: window length differs from t_int");
}

// Forward pass shared by scoring and training: encodes the pair, decodes the
// per-frame offsets, and converts them to boxes against the first original
// pair as anchors. Returns the 4-dim reconstructed box node per frame and
// object.
struct ForwardOut {
    std::vector<nn::Tape::Id> recon_i;
    std::vector<nn::Tape::Id> recon_j;
};

ForwardOut forward_pair(nn::Tape& t, const PairWindow& pair,
                        const InteractionConfig& cfg) {
    const auto enc_mlp = encoder_mlp_spec(cfg);
    const auto enc_gru = encoder_gru_spec(cfg);
    const auto dec_mlp = decoder_mlp_spec(cfg);
    const auto dec_gru = decoder_gru_spec(cfg);
    const auto out_mlp = output_mlp_spec(cfg);
    const auto zspec = bottleneck_spec(cfg);
    const auto T = static_cast<size_t>(cfg.t_int);

    nn::Tape::Id h = t.zeros(cfg.hidden);
    for (size_t k = 0; k < T; ++k) {
        const nn::Tape::Id x = t.input(flatten_pair(pair.boxes_i[k], pair.boxes_j[k]));
        h = nn::gru_step(t, enc_gru, nn::mlp_apply(t, enc_mlp, x), h);
    }
    const nn::Tape::Id z = nn::mlp_apply(t, zspec, h);

    ForwardOut out;
    nn::Tape::Id hd = t.zeros(cfg.hidden);
    nn::Tape::Id prev = t.param("int.sos");
    for (size_t k = 0; k < T; ++k) {
        const nn::Tape::Id emb = nn::mlp_apply(t, dec_mlp, t.concat({prev, z}));
        hd = nn::gru_step(t, dec_gru, emb, hd);
        const nn::Tape::Id p = nn::mlp_apply(t, out_mlp, hd);
        prev = p;

        const Box& ai = pair.boxes_i.front();
        const Box& aj = pair.boxes_j.front();
        for (int obj = 0; obj < 2; ++obj) {
            const Box& a = obj == 0 ? ai : aj;
            const nn::Tape::Id centers =
                t.add_const(t.slice(p, obj * 4, 2), Eigen::Vector2d(a.cx, a.cy));
            const nn::Tape::Id extents =
                t.mul_const(t.exp(t.slice(p, obj * 4 + 2, 2)), Eigen::Vector2d(a.w, a.h));
            const nn::Tape::Id box = t.concat({centers, extents});
            (obj == 0 ? out.recon_i : out.recon_j).push_back(box);
        }
    }
    return out;
}

} // namespace

void declare_interaction(nn::ParamStore& ps, const InteractionConfig& cfg) {
    validate(cfg);
    nn::declare_mlp(ps, encoder_mlp_spec(cfg));
    nn::declare_gru(ps, encoder_gru_spec(cfg));
    nn::declare_mlp(ps, bottleneck_spec(cfg));
    nn::declare_mlp(ps, decoder_mlp_spec(cfg));
    nn::declare_gru(ps, decoder_gru_spec(cfg));
    nn::declare_mlp(ps, output_mlp_spec(cfg));
    ps.declare("int.sos", 8, 1, 8);
}

std::vector<PairWindow> select_pairs(const VideoRecord& video, int32_t t,
                                     const InteractionConfig& cfg) {
    validate(cfg);
    const int32_t t0 = t - cfg.t_int + 1;
    if (t0 < 0 || t >= video.num_frames) return {};

    struct Cand {
        double ds;
        const Track* a;
        const Track* b;
    };
    std::vector<const Track*> present;
    for (const Track& tr : video.tracks)
        if (tr.covers(t0) && tr.covers(t)) present.push_back(&tr);
    std::sort(present.begin(), present.end(),
              [](const Track* a, const Track* b) { return a->object_id < b->object_id; });

    auto window = [&](const Track* tr) {
        return std::span<const Box>(tr->boxes)
            .subspan(static_cast<size_t>(t0 - tr->first_frame),
                     static_cast<size_t>(cfg.t_int));
    };

    std::vector<Cand> cands;
    for (size_t a = 0; a < present.size(); ++a)
        for (size_t b = a + 1; b < present.size(); ++b)
            cands.push_back(
                {distance_score(window(present[a]), window(present[b])), present[a],
                 present[b]});

    auto key_less = [](const Cand& x, const Cand& y) {
        return std::tie(x.ds, x.a->object_id, x.b->object_id) <
               std::tie(y.ds, y.a->object_id, y.b->object_id);
    };
    const size_t keep = std::min(cands.size(), static_cast<size_t>(cfg.n_max));
    std::partial_sort(cands.begin(), cands.begin() + static_cast<long>(keep),
                      cands.end(), key_less);
    cands.resize(keep);

    std::vector<PairWindow> out;
    out.reserve(keep);
    for (const Cand& c : cands) {
        PairWindow w;
        w.id_i = c.a->object_id;
        w.id_j = c.b->object_id;
        w.t_begin = t0;
        const auto wa = window(c.a);
        const auto wb = window(c.b);
        w.boxes_i.assign(wa.begin(), wa.end());
        w.boxes_j.assign(wb.begin(), wb.end());
        out.push_back(std::move(w));
    }
    return out;
}

PairReconstruction reconstruct_pair(const PairWindow& pair, const nn::ParamStore& ps,
                                    const InteractionConfig& cfg) {
    validate(cfg);
    check_window(pair, cfg);
    nn::Tape t(&ps);
    const ForwardOut fw = forward_pair(t, pair, cfg);
    PairReconstruction rec;
    for (size_t k = 0; k < fw.recon_i.size(); ++k) {
        const Eigen::VectorXd& vi = t.value(fw.recon_i[k]);
        const Eigen::VectorXd& vj = t.value(fw.recon_j[k]);
        rec.boxes_i.push_back({vi(0), vi(1), vi(2), vi(3)});
        rec.boxes_j.push_back({vj(0), vj(1), vj(2), vj(3)});
    }
    return rec;
}

double pair_loss(const PairWindow& original, const PairReconstruction& recon,
                 double tau_std) {
    const size_t T = original.boxes_i.size();
    if (original.boxes_j.size() != T || recon.boxes_i.size() != T ||
        recon.boxes_j.size() != T)
        throw std::invalid_argument("pair_loss: shape mismatch");
    double lambda_h = 0.0, lambda_std = 0.0;
    loss_weights(original, tau_std, lambda_h, lambda_std);

    auto term = [&](const Box& orig, const Box& rec) {
        const double dx = rec.cx - orig.cx;
        const double dy = rec.cy - orig.cy;
        const double dw = rec.w - orig.w;
        const double dh = rec.h - orig.h;
        const double sq = dx * dx + dy * dy + dw * dw + dh * dh;
        return std::sqrt(sq / (lambda_h * lambda_std));
    };
    double loss = 0.0;
    for (size_t k = 0; k < T; ++k)
        loss += term(original.boxes_i[k], recon.boxes_i[k]) +
                term(original.boxes_j[k], recon.boxes_j[k]);
    return loss;
}

nn::Tape::Id pair_loss_graph(nn::Tape& t, const PairWindow& pair,
                             const InteractionConfig& cfg) {
    validate(cfg);
    check_window(pair, cfg);
    double lambda_h = 0.0, lambda_std = 0.0;
    loss_weights(pair, cfg.tau_std, lambda_h, lambda_std);
    const double inv = 1.0 / (lambda_h * lambda_std);

    const ForwardOut fw = forward_pair(t, pair, cfg);
    nn::Tape::Id loss = t.zeros(1);
    for (size_t k = 0; k < fw.recon_i.size(); ++k) {
        for (int obj = 0; obj < 2; ++obj) {
            const Box& orig =
                obj == 0 ? pair.boxes_i[k] : pair.boxes_j[k];
            const nn::Tape::Id rec = obj == 0 ? fw.recon_i[k] : fw.recon_j[k];
            const nn::Tape::Id diff =
                t.add_const(rec, -Eigen::Vector4d(orig.cx, orig.cy, orig.w, orig.h));
            const nn::Tape::Id scaled = t.scale(t.sum_squares(diff), inv);
            loss = t.add(loss, t.sqrt(scaled, kSqrtShift));
        }
    }
    return loss;
}

namespace {

std::vector<PairWindow> mine_windows(const VideoRecord& video,
                                     const InteractionConfig& cfg) {
    std::vector<PairWindow> out;
    for (int32_t t = cfg.t_int - 1; t < video.num_frames; t += cfg.train_stride) {
        auto pairs = select_pairs(video, t, cfg);
        std::move(pairs.begin(), pairs.end(), std::back_inserter(out));
    }
    return out;
}

double mean_batch_loss_and_grads(const std::vector<const PairWindow*>& batch,
                                 const nn::ParamStore& ps, const InteractionConfig& cfg,
                                 nn::GradStore* grads) {
    double total = 0.0;
    nn::Tape tape(&ps);
    for (const PairWindow* w : batch) {
        tape.clear();
        const nn::Tape::Id root = pair_loss_graph(tape, *w, cfg);
        total += tape.value(root)(0);
        if (grads) tape.backward(root, *grads);
    }
    if (grads) grads->scale(1.0 / static_cast<double>(batch.size()));
    return total / static_cast<double>(batch.size());
}

} // namespace

TrainLog train_interaction(std::span<const VideoRecord> videos, nn::ParamStore& ps,
                           const InteractionConfig& cfg, uint64_t seed,
                           std::ostream* log) {
    validate(cfg);
    for (const VideoRecord& v : videos)
        for (uint8_t l : v.frame_labels)
            if (l != 0)
                throw std::invalid_argument("train_interaction: video " + v.video_id +
                                            " contains labeled anomalous frames");

    const size_t n_val =
        videos.size() >= 2
            ? std::min(videos.size() - 1,
                       static_cast<size_t>(std::floor(
                           cfg.val_fraction * static_cast<double>(videos.size()))))
            : 0;
    const size_t n_train = videos.size() - n_val;

    std::vector<PairWindow> train_pairs, val_pairs;
    for (size_t i = 0; i < videos.size(); ++i) {
        auto mined = mine_windows(videos[i], cfg);
        auto& dst = i < n_train ? train_pairs : val_pairs;
        std::move(mined.begin(), mined.end(), std::back_inserter(dst));
    }
    if (train_pairs.empty())
        throw std::invalid_argument(
            "train_interaction: no co-present track pairs in the training videos");

    ps = nn::ParamStore();
    declare_interaction(ps, cfg);
    ps.init_uniform(seed);

    nn::AdamState adam;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<const PairWindow*> order(train_pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = &train_pairs[i];

    TrainLog tlog;
    for (int32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_sum = 0.0;
        size_t seen = 0;
        for (size_t begin = 0; begin < order.size();
             begin += static_cast<size_t>(cfg.batch)) {
            const size_t end =
                std::min(order.size(), begin + static_cast<size_t>(cfg.batch));
            std::vector<const PairWindow*> batch(order.begin() + static_cast<long>(begin),
                                                 order.begin() + static_cast<long>(end));
            nn::GradStore grads;
            const double mean_loss = mean_batch_loss_and_grads(batch, ps, cfg, &grads);
            nn::adam_step(ps, grads, adam, cfg.lr);
            epoch_sum += mean_loss * static_cast<double>(batch.size());
            seen += batch.size();
        }
        tlog.train_loss.push_back(epoch_sum / static_cast<double>(seen));

        if (!val_pairs.empty()) {
            std::vector<const PairWindow*> vb(val_pairs.size());
            for (size_t i = 0; i < vb.size(); ++i) vb[i] = &val_pairs[i];
            tlog.val_loss.push_back(mean_batch_loss_and_grads(vb, ps, cfg, nullptr));
        }
        if (log) {
            *log << "expert=interaction epoch=" << epoch + 1 << "/" << cfg.epochs
                 << " train_loss=" << tlog.train_loss.back();
            if (!tlog.val_loss.empty()) *log << " val_loss=" << tlog.val_loss.back();
            *log << '\n';
        }
    }
    return tlog;
}

ScoreSeries score_interaction(const VideoRecord& video, const nn::ParamStore& ps,
                              const InteractionConfig& cfg) {
    validate(cfg);
    ScoreSeries raw;
    raw.video_id = video.video_id;
    raw.valid_from = cfg.t_int - 1;
    raw.values.assign(static_cast<size_t>(video.num_frames), 0.0);

    nn::Tape tape(&ps);
    for (int32_t t = cfg.t_int - 1; t < video.num_frames; ++t) {
        const auto pairs = select_pairs(video, t, cfg);
        if (pairs.empty()) continue;
        double sum = 0.0;
        for (const PairWindow& w : pairs) {
            tape.clear();
            const ForwardOut fw = forward_pair(tape, w, cfg);
            PairReconstruction rec;
            for (size_t k = 0; k < fw.recon_i.size(); ++k) {
                const Eigen::VectorXd& vi = tape.value(fw.recon_i[k]);
                const Eigen::VectorXd& vj = tape.value(fw.recon_j[k]);
                rec.boxes_i.push_back({vi(0), vi(1), vi(2), vi(3)});
                rec.boxes_j.push_back({vj(0), vj(1), vj(2), vj(3)});
            }
            sum += pair_loss(w, rec, cfg.tau_std);
        }
        raw.values[static_cast<size_t>(t)] = sum / static_cast<double>(pairs.size());
    }
    return lowpass_filter(raw, video.fps, cfg.lowpass_cutoff_hz);
}

} // namespace oread::experts
