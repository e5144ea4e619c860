#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "oread/types.hpp"

namespace oread::fusion {

// Expert stream order used everywhere in this module.
enum ExpertIndex : size_t { kFfp = 0, kStr = 1, kInt = 2, kBeh = 3 };
inline constexpr std::array<const char*, 4> kExpertNames{"ffp", "str", "int", "beh"};

struct NormalizationStats {
    double mu = 0.0;        // mean of the fitted normal-score density
    double sigma = 1.0;     // its standard deviation, > 0
    double tau = 0.0;       // raw-score threshold at the alpha quantile
    double shift = 0.0;     // offset that made the samples positive
    double bandwidth = 0.0; // kernel bandwidth on the log scale
    double alpha = 0.95;
};

// Density fit of one expert's raw scores on normal data. The samples are
// shifted positive if needed, log-transformed (restricting the density's
// support to positive scores), smoothed with a Gaussian kernel (Silverman
// bandwidth), and the moments of the back-transformed density are taken by
// trapezoidal quadrature. tau is the alpha quantile mapped back to raw
// units. Requires >= 30 samples; all-equal samples floor sigma at 1e-6 with
// a warning on stderr.
NormalizationStats fit_normalizer(std::span<const double> normal_scores,
                                  double alpha = 0.95);

inline double normalize(double score, const NormalizationStats& s) {
    return (score - s.mu) / s.sigma;
}

// Quarter-weighted sum of the four normalized thresholds, matching the state
// transition's fusion weights.
double ensemble_threshold(const std::array<NormalizationStats, 4>& stats);

// Constant-velocity-free fusion filter: the state is the four expert scores
// plus their quarter-sum, observations are the four normalized scores.
struct KalmanState {
    Eigen::Matrix<double, 5, 1> x = Eigen::Matrix<double, 5, 1>::Zero();
    Eigen::Matrix<double, 5, 5> P = Eigen::Matrix<double, 5, 5>::Zero();
};

// Posterior used at the first filtered frame and, in deferred mode, at every
// frame until all experts are live: state = [obs; quarter-sum], P = 0.1 I.
KalmanState kalman_init(const Eigen::Vector4d& obs);

// One predict+update cycle with A = [I4 0; quarter-row 0], H = [I4 | 0],
// Q = 0.1 I5, R = I4. Rejects non-finite observations.
KalmanState kalman_step(const KalmanState& prev, const Eigen::Vector4d& obs);

enum class FilterMode { deferred, immediate };

FilterMode filter_mode_from_string(const std::string& s);
std::string to_string(FilterMode m);

struct FusedVideo {
    ScoreSeries fused;                            // state element 5 per frame
    std::array<std::vector<double>, 4> states;    // state elements 1..4
};

// Normalizes the four raw streams (frames before each expert's valid_from
// observe 0, the normalized assigned-normal score) and runs the filter.
// Deferred mode re-initializes until the last expert is live, so the fused
// score equals the quarter-sum of the observations exactly on that prefix;
// immediate mode initializes at frame 0 only. The fused series' valid_from
// records where genuine filtering began.
FusedVideo fuse(const std::array<const ScoreSeries*, 4>& series,
                const std::array<NormalizationStats, 4>& stats, FilterMode mode);

// Ego involvement when the top-decile means of the scene states outweigh
// those of the trajectory states; ties resolve to non_ego.
Involvement classify_video(const FusedVideo& video);

void write_stats(const std::filesystem::path& path,
                 const std::array<NormalizationStats, 4>& stats);
std::array<NormalizationStats, 4> read_stats(const std::filesystem::path& path);

void write_fused_csv(const std::filesystem::path& path,
                     std::span<const FusedVideo> videos);
std::vector<FusedVideo> read_fused_csv(const std::filesystem::path& path);

} // namespace oread::fusion
