// Hot paths measured at the sizes the pipeline actually runs them:
// training-step graphs for both experts, per-video scoring, pair selection
// on a crowded frame, the fusion filter, and the evaluation primitives.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <vector>

#include "oread/behavior.hpp"
#include "oread/fusion.hpp"
#include "oread/interaction.hpp"
#include "oread/lowpass.hpp"
#include "oread/metrics.hpp"
#include "oread/nn.hpp"
#include "oread/sim.hpp"
#include "oread/types.hpp"

namespace {

using namespace oread;

experts::InteractionConfig interaction_config() {
    experts::InteractionConfig cfg;
    cfg.t_int = 3;
    cfg.hidden = 64;
    cfg.encoder_mlp = {32, 32};
    cfg.decoder_out_mlp = {32, 8};
    return cfg;
}

experts::BehaviorConfig behavior_config() {
    experts::BehaviorConfig cfg;
    cfg.delta = 3;
    cfg.hidden = 32;
    cfg.box_encoder_mlp = {16, 16};
    cfg.decoder_out_mlp = {16, 4};
    return cfg;
}

experts::PairWindow sample_pair(const experts::InteractionConfig& cfg) {
    experts::PairWindow pw;
    pw.id_i = 1;
    pw.id_j = 2;
    for (int32_t k = 0; k < cfg.t_int; ++k) {
        const double f = 0.01 * k;
        pw.boxes_i.push_back(Box{0.30 + f, 0.40 + f, 0.08, 0.12});
        pw.boxes_j.push_back(Box{0.60 - f, 0.50 + f, 0.10, 0.09});
    }
    return pw;
}

// One busy 8-object video; scoring-path benchmarks share it.
VideoRecord sample_video() {
    sim::DatasetSpec spec;
    spec.train_count = 1;
    spec.test_count = 1;
    spec.num_frames = 112;
    spec.num_objects = 8;
    spec.fps = 15.0;
    spec.noise_std = 0.0005;
    spec.seed = 97;
    return sim::make_dataset(spec).train[0];
}

void BM_PairGraphForward(benchmark::State& state) {
    const experts::InteractionConfig cfg = interaction_config();
    const experts::PairWindow pw = sample_pair(cfg);
    nn::ParamStore ps;
    experts::declare_interaction(ps, cfg);
    ps.init_uniform(1);
    nn::Tape tape(&ps);
    for (auto _ : state) {
        tape.clear();
        const nn::Tape::Id loss = experts::pair_loss_graph(tape, pw, cfg);
        benchmark::DoNotOptimize(tape.value(loss)(0));
    }
}
BENCHMARK(BM_PairGraphForward);

void BM_PairGraphBackward(benchmark::State& state) {
    const experts::InteractionConfig cfg = interaction_config();
    const experts::PairWindow pw = sample_pair(cfg);
    nn::ParamStore ps;
    experts::declare_interaction(ps, cfg);
    ps.init_uniform(1);
    nn::Tape tape(&ps);
    nn::GradStore grads;
    for (auto _ : state) {
        tape.clear();
        grads.clear();
        const nn::Tape::Id loss = experts::pair_loss_graph(tape, pw, cfg);
        tape.backward(loss, grads);
        benchmark::DoNotOptimize(grads.entries().size());
    }
}
BENCHMARK(BM_PairGraphBackward);

void BM_FutureGraphBackward(benchmark::State& state) {
    const experts::BehaviorConfig cfg = behavior_config();
    std::vector<Box> hist, tgt;
    for (int k = 0; k < 8; ++k)
        hist.push_back(Box{0.40 + 0.004 * k, 0.50 + 0.002 * k, 0.10, 0.15});
    for (int k = 0; k < cfg.delta; ++k)
        tgt.push_back(Box{0.44 + 0.004 * k, 0.52, 0.10, 0.15});
    nn::ParamStore ps;
    experts::declare_behavior(ps, cfg);
    ps.init_uniform(2);
    nn::Tape tape(&ps);
    nn::GradStore grads;
    for (auto _ : state) {
        tape.clear();
        grads.clear();
        const nn::Tape::Id loss = experts::future_loss_graph(tape, hist, tgt, cfg);
        tape.backward(loss, grads);
        benchmark::DoNotOptimize(grads.entries().size());
    }
}
BENCHMARK(BM_FutureGraphBackward);

void BM_SelectPairs(benchmark::State& state) {
    const VideoRecord video = sample_video();
    experts::InteractionConfig cfg = interaction_config();
    for (auto _ : state) {
        const auto pairs = experts::select_pairs(video, 60, cfg);
        benchmark::DoNotOptimize(pairs.size());
    }
}
BENCHMARK(BM_SelectPairs);

void BM_ScoreInteractionVideo(benchmark::State& state) {
    const VideoRecord video = sample_video();
    const experts::InteractionConfig cfg = interaction_config();
    nn::ParamStore ps;
    experts::declare_interaction(ps, cfg);
    ps.init_uniform(1);
    for (auto _ : state) {
        const ScoreSeries s = experts::score_interaction(video, ps, cfg);
        benchmark::DoNotOptimize(s.values.back());
    }
}
BENCHMARK(BM_ScoreInteractionVideo);

void BM_ScoreBehaviorVideo(benchmark::State& state) {
    const VideoRecord video = sample_video();
    const experts::BehaviorConfig cfg = behavior_config();
    nn::ParamStore ps;
    experts::declare_behavior(ps, cfg);
    ps.init_uniform(2);
    for (auto _ : state) {
        const ScoreSeries s = experts::score_behavior(video, ps, cfg);
        benchmark::DoNotOptimize(s.values.back());
    }
}
BENCHMARK(BM_ScoreBehaviorVideo);

void BM_KalmanStep(benchmark::State& state) {
    fusion::KalmanState st = fusion::kalman_init(Eigen::Vector4d(0.1, -0.2, 0.3, 0.0));
    const Eigen::Vector4d obs(0.4, 0.1, -0.3, 0.2);
    for (auto _ : state) {
        st = fusion::kalman_step(st, obs);
        benchmark::DoNotOptimize(st.x(4));
    }
}
BENCHMARK(BM_KalmanStep);

void BM_FitNormalizer10k(benchmark::State& state) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 0.25);
    std::vector<double> samples(10000);
    for (double& v : samples) v = std::exp(g(rng));
    for (auto _ : state) {
        const fusion::NormalizationStats st = fusion::fit_normalizer(samples, 0.95);
        benchmark::DoNotOptimize(st.tau);
    }
}
BENCHMARK(BM_FitNormalizer10k);

void BM_FuseVideo(benchmark::State& state) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g(1.0, 0.1);
    std::array<fusion::NormalizationStats, 4> stats;
    std::array<ScoreSeries, 4> lanes;
    for (size_t e = 0; e < 4; ++e) {
        std::vector<double> calib(2000);
        for (double& v : calib) v = g(rng);
        stats[e] = fusion::fit_normalizer(calib, 0.95);
        lanes[e].video_id = "bench";
        lanes[e].valid_from = 2;
        lanes[e].values.resize(112);
        for (double& v : lanes[e].values) v = g(rng);
    }
    const std::array<const ScoreSeries*, 4> per = {&lanes[0], &lanes[1], &lanes[2],
                                                   &lanes[3]};
    for (auto _ : state) {
        const fusion::FusedVideo f =
            fusion::fuse(per, stats, fusion::FilterMode::immediate);
        benchmark::DoNotOptimize(f.fused.values.back());
    }
}
BENCHMARK(BM_FuseVideo);

void BM_Auc10k(benchmark::State& state) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<double> s(10000);
    std::vector<uint8_t> l(10000);
    for (size_t i = 0; i < s.size(); ++i) {
        s[i] = U(rng);
        l[i] = U(rng) < 0.3 ? 1 : 0;
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval::auc(s, l));
    }
}
BENCHMARK(BM_Auc10k);

void BM_Lowpass10k(benchmark::State& state) {
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g(0.0, 1.0);
    ScoreSeries s;
    s.video_id = "bench";
    s.valid_from = 0;
    s.values.resize(10000);
    for (double& v : s.values) v = g(rng);
    for (auto _ : state) {
        const ScoreSeries f = lowpass_filter(s, 30.0, 3.0);
        benchmark::DoNotOptimize(f.values.back());
    }
}
BENCHMARK(BM_Lowpass10k);

} // namespace

BENCHMARK_MAIN();
