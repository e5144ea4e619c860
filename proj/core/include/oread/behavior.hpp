#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "oread/nn.hpp"
#include "oread/train_log.hpp"
#include "oread/types.hpp"

namespace oread::experts {

// Future-box prediction per object: a GRU encoder summarizes the observed
// boxes, a GRU decoder rolls the next delta boxes out autoregressively, and
// the spread of the predictions aimed at the same frame is the anomaly
// signal. Erratic motion makes predictions from different origins disagree.
struct BehaviorConfig {
    int32_t delta = 10; // prediction horizon in frames, >= 1
    std::array<int32_t, 2> box_encoder_mlp{512, 64};
    int32_t hidden = 512;
    std::array<int32_t, 2> decoder_out_mlp{32, 4};
    double lowpass_cutoff_hz = 0.2;
    int32_t batch = 16;
    double lr = 5e-4;
    int32_t epochs = 20;
    int32_t train_history = 8; // encoder frames per training sample
    int32_t train_stride = 2;  // origin stride when mining training samples
    double val_fraction = 0.1;
    // The prediction spread scales with box height; dividing by the mean
    // predicted height removes that dependence so distant objects are not
    // under-scored. false multiplies instead, kept for comparison.
    bool divide_by_height = true;
};

// Predicted trajectories indexed by their origin frame. A prediction made
// at origin o covers frames o+1 .. o+delta; entries outlive tracking loss
// and are dropped once no frame can use them.
class PredictionBuffer {
public:
    explicit PredictionBuffer(int32_t delta) : delta_(delta) {}

    // Registers the predictions made at `origin` for origin+1 onward.
    void add(int32_t origin, std::vector<Box> predicted);
    // Predictions aimed at frame t, origin ascending: one box per origin in
    // [t - delta, t - 1] that predicted far enough ahead.
    std::vector<Box> for_frame(int32_t t) const;
    // Drops origins too old to serve any frame >= t.
    void expire_before(int32_t t);
    size_t origins() const { return by_origin_.size(); }

private:
    int32_t delta_;
    std::map<int32_t, std::vector<Box>> by_origin_;
};

// Declares every parameter array under the "beh." prefix: the box embedding
// MLP, encoder GRU, the affine map seeding the decoder hidden state, the
// decoder GRU, and the offset output MLP.
void declare_behavior(nn::ParamStore& ps, const BehaviorConfig& cfg);

// One encoder update: embeds the box and advances the hidden state. state
// must be zero at the object's first frame and have size cfg.hidden.
Eigen::VectorXd encode_step(const Box& box, const Eigen::VectorXd& state,
                            const nn::ParamStore& ps, const BehaviorConfig& cfg);

// Rolls out cfg.delta boxes after the encoder state. The decoder hidden
// starts from an affine map of the state, the first decoder input is the
// zero offset, and every emitted offset is applied to the anchor (the last
// observed box) to produce the prediction.
std::vector<Box> predict_future(const Eigen::VectorXd& state, const Box& anchor,
                                const nn::ParamStore& ps, const BehaviorConfig& cfg);

// Differentiable training objective for one track sample: encodes the
// history, rolls out one step per target, and returns the squared error
// against the targets averaged over coordinates (the last history box is
// the anchor). Both spans must be non-empty.
nn::Tape::Id future_loss_graph(nn::Tape& t, std::span<const Box> history,
                               std::span<const Box> targets,
                               const BehaviorConfig& cfg);

// Spread of the predictions aimed at one frame: per-coordinate population
// STD across the boxes, averaged over the 4 coordinates, then divided (or
// multiplied) by the mean predicted height. Fewer than 2 boxes give 0.
double consistency_score(std::span<const Box> predictions, bool divide_by_height);

// Initializes params from the seed and Adam-minimizes the mean squared
// error between predicted and observed future boxes over samples mined from
// the tracks (origin stride cfg.train_stride, encoder truncated to
// cfg.train_history frames, up to cfg.delta targets per sample with short
// track tails using what remains). The tail cfg.val_fraction of videos is
// held out. Videos must be all-normal; no mineable sample throws.
TrainLog train_behavior(std::span<const VideoRecord> videos, nn::ParamStore& ps,
                        const BehaviorConfig& cfg, uint64_t seed,
                        std::ostream* log = nullptr);

// Per-frame mean consistency_score over the objects tracked at that frame
// (objects with under 2 buffered predictions contribute 0 but still count),
// then the low-pass filter. Scores at frame t use only observations up to
// t - 1, so valid_from = 2, the first frame two prediction origins can
// precede.
ScoreSeries score_behavior(const VideoRecord& video, const nn::ParamStore& ps,
                           const BehaviorConfig& cfg);

} // namespace oread::experts
