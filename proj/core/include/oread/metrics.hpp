#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "oread/types.hpp"

namespace oread::eval {

// Probability that a random anomalous frame outranks a random normal one,
// ties credited one half: the rank-sum form of the pairwise statistic.
// Requires both classes present.
double auc(std::span<const double> scores, std::span<const uint8_t> labels);

// The same quantity computed as trapezoidal area under the ROC curve with
// tied scores collapsed into single sweep steps. Kept as an independent
// route for cross-checking auc().
double auc_trapezoid(std::span<const double> scores, std::span<const uint8_t> labels);

// ROC sweep points as (fpr, tpr, threshold), threshold descending, including
// the (0,0) and (1,1) endpoints.
std::vector<std::array<double, 3>> roc_points(std::span<const double> scores,
                                              std::span<const uint8_t> labels);

struct F1Result {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Predictions are score > tau. Precision is 0 when nothing is predicted;
// f1 is 0 when precision + recall is 0.
F1Result f1_at(std::span<const double> scores, std::span<const uint8_t> labels,
               double tau);

// raw concatenates per-video scores unchanged; legacy_minmax rescales each
// video to [0,1] first (constant videos map to 0), reproducing the older
// evaluation convention this protocol replaces.
enum class Protocol { raw, legacy_minmax };

std::string to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

struct LabeledSeries {
    ScoreSeries scores;
    std::vector<uint8_t> labels;
    std::string category;    // anomaly-kind tag, "none" for normal videos
    std::string involvement; // ego | non_ego | none
};

LabeledSeries labeled_series(const ScoreSeries& scores, const VideoRecord& video);

struct EvalResult {
    double auc = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double threshold = 0.0;
    size_t frames = 0;
    size_t positives = 0;
    // tag -> (auc, f1); tags are the categories and involvement values
    // present. Entries appear only when the tagged subset has both classes.
    std::map<std::string, std::pair<double, double>> per_class;
};

// Concatenates all videos under the chosen protocol and measures AUC and F1
// at tau. Per-class entries restrict to the videos carrying each tag and
// concatenate within the subset. Throws when a video's labels are missing
// or sized wrong, naming the video.
EvalResult evaluate(std::span<const LabeledSeries> videos, Protocol protocol, double tau);

void write_report(const EvalResult& r, Protocol protocol,
                  const std::filesystem::path& txt_path,
                  const std::filesystem::path& kv_path);

void write_roc_csv(const std::filesystem::path& path, std::span<const double> scores,
                   std::span<const uint8_t> labels);

} // namespace oread::eval
