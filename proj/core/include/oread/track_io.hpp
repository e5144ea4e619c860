#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oread/types.hpp"

namespace oread::io {

// Formats, all plain text, all frame indices 0-based:
//
// <id>.tracks.csv   header video_id,frame,object_id,cx,cy,w,h; one box per
//                   line, grouped by object, frames ascending and contiguous
//                   within each object.
// <id>.meta         key=value lines: video_id, fps, num_frames, frame_labels
//                   (digit string, one 0/1 per frame), category, involvement.
// <id>.scene.csv    first line "# ffp_valid_from=<k> str_valid_from=<k>",
//                   then header video_id,frame,s_ffp,s_str; frames contiguous.
// scores CSV        first line "# valid_from=<k>", then header
//                   video_id,frame,score; one contiguous frame block per
//                   video; valid_from applies to every video in the file.
//
// Numeric fields are written with round-trip precision ("%.17g"); readers
// report the offending file and line on malformed input.

void write_video(const std::filesystem::path& dir, const VideoRecord& video);
VideoRecord read_video(const std::filesystem::path& dir, const std::string& video_id);
// Every *.meta in dir, sorted by video_id.
std::vector<VideoRecord> read_video_dir(const std::filesystem::path& dir);

void write_scene_scores(const std::filesystem::path& path, const ScoreSeries& ffp,
                        const ScoreSeries& str);
std::pair<ScoreSeries, ScoreSeries> read_scene_scores(const std::filesystem::path& path);

void write_score_csv(const std::filesystem::path& path,
                     std::span<const ScoreSeries> series);
std::vector<ScoreSeries> read_score_csv(const std::filesystem::path& path);

std::string format_double(double v);

} // namespace oread::io
