#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "oread/nn.hpp"
#include "oread/train_log.hpp"
#include "oread/types.hpp"

namespace oread::experts {

// Pairwise trajectory reconstruction: a GRU autoencoder consumes the joint
// boxes of two nearby objects over a short window and rebuilds them from a
// low-dimensional code. Poorly reconstructed pairs score high.
struct InteractionConfig {
    int32_t t_int = 3;   // window length in frames, >= 2
    int32_t n_max = 20;  // pair queue capacity per window
    int32_t latent_dim = 4;
    int32_t hidden = 128;
    std::array<int32_t, 2> encoder_mlp{32, 64};
    std::array<int32_t, 2> decoder_out_mlp{64, 8};
    double tau_std = 1e-3;          // lower clip for the STD loss weight
    double lowpass_cutoff_hz = 0.2; // second order Butterworth on raw scores
    int32_t batch = 64;
    double lr = 2e-4;
    int32_t epochs = 20;
    int32_t train_stride = 1;  // window-end stride when mining training pairs
    double val_fraction = 0.1; // tail share of videos held out per epoch
};

// Two tracks over the same frames [t_begin, t_begin + boxes size). Box
// vectors have equal length t_int and id_i < id_j.
struct PairWindow {
    int32_t id_i = 0;
    int32_t id_j = 0;
    int32_t t_begin = 0;
    std::vector<Box> boxes_i;
    std::vector<Box> boxes_j;
};

struct PairReconstruction {
    std::vector<Box> boxes_i;
    std::vector<Box> boxes_j;
};

// Declares every parameter array under the "int." prefix: the box-pair
// embedding MLP, encoder GRU, bottleneck layer, decoder embedding MLP,
// decoder GRU, output MLP, and the learned start-of-sequence vector.
void declare_interaction(nn::ParamStore& ps, const InteractionConfig& cfg);

// Pairs whose tracks fully cover the window ending at frame t, keeping the
// cfg.n_max smallest distance_score values. Ties break on ascending id pair,
// and the result is sorted the same way, so the selection is deterministic.
// Fewer than two covering tracks yield an empty list.
std::vector<PairWindow> select_pairs(const VideoRecord& video, int32_t t,
                                     const InteractionConfig& cfg);

// Runs the autoencoder on one pair. The first original boxes act as anchors;
// the decoder emits per-frame offsets that carry the anchors onto the
// reconstructed boxes.
PairReconstruction reconstruct_pair(const PairWindow& pair, const nn::ParamStore& ps,
                                    const InteractionConfig& cfg);

// Scaled reconstruction error: sum over both objects and all frames of
//   sqrt(||recon - original||^2 / (lambda_h * lambda_std)),
// lambda_h the mean original height over both objects and the window,
// lambda_std the mean per-coordinate STD of the original boxes (population
// form), clipped below at tau_std. Zero iff the reconstruction is exact.
double pair_loss(const PairWindow& original, const PairReconstruction& recon,
                 double tau_std);

// Differentiable form of reconstruct_pair + pair_loss on one tape; returns
// the scalar root. Loss weights come from the original boxes, so they are
// constants under differentiation. The square root is guarded by a tiny
// shift so the gradient stays finite at exact reconstruction.
nn::Tape::Id pair_loss_graph(nn::Tape& t, const PairWindow& pair,
                             const InteractionConfig& cfg);

// Initializes params from the seed and minimizes the mean pair loss over
// windows mined from the videos (stride cfg.train_stride) with Adam. The
// tail cfg.val_fraction of videos is held out for the validation curve.
// Videos must be all-normal; labeled frames or an empty pair set throw.
// Deterministic for a fixed (videos, cfg, seed).
TrainLog train_interaction(std::span<const VideoRecord> videos, nn::ParamStore& ps,
                           const InteractionConfig& cfg, uint64_t seed,
                           std::ostream* log = nullptr);

// Per-frame mean pair loss over the selected pairs (zero when the window is
// incomplete or no pair exists), then the low-pass filter. valid_from is
// the first frame with a full window, t_int - 1.
ScoreSeries score_interaction(const VideoRecord& video, const nn::ParamStore& ps,
                              const InteractionConfig& cfg);

} // namespace oread::experts
