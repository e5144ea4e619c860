#pragma once

#include <iosfwd>
#include <string>

#include "config.hpp"

namespace oread::cli {

// Pipeline stages. Each logs line-oriented progress (stage=, video_id=,
// wall_ms= fields) to `log` and throws on failure; main() maps exceptions
// to a nonzero exit code. Stages communicate only through the files under
// the configured directories:
//   data_dir/{train,test}/          simulate outputs (tracks, meta, scene)
//   weights_dir/<expert>.weights.json
//   scores_dir/{train,test}/<expert>.csv
//   scores_dir/stats.txt            fitted normalization statistics
//   scores_dir/test/fused.csv       fused score + filter state lanes
//   reports_dir/                    eval reports, ROC dumps, classifications

void cmd_simulate(const RunConfig& cfg, std::ostream& log);

// expert is "interaction" or "behavior".
void cmd_train(const RunConfig& cfg, const std::string& expert, std::ostream& log);

// split is "train" or "test"; jobs bounds the scoring fan-out over videos.
void cmd_score(const RunConfig& cfg, const std::string& expert,
               const std::string& split, int jobs, std::ostream& log);

// Fits the per-expert normalizers on the training scores (frames from each
// stream's valid_from on), persists them, and runs the fusion filter over
// the test split.
void cmd_fuse(const RunConfig& cfg, std::ostream& log);

// input selects the stream: "fused", "interaction", "behavior", "ffp", or
// "str". The threshold defaults to the fitted one for the stream (ensemble
// threshold for fused) unless cfg carries an override.
void cmd_eval(const RunConfig& cfg, const std::string& input, std::ostream& log);

void cmd_classify(const RunConfig& cfg, std::ostream& log);

} // namespace oread::cli
