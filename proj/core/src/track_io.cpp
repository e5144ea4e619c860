#include "oread/track_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace oread::io {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, size_t line, const std::string& what) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const std::filesystem::path& path, size_t line) {
    try {
        size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) fail(path, line, "trailing junk in number '" + s + "'");
        return v;
    } catch (const std::invalid_argument&) {
        fail(path, line, "non-numeric field '" + s + "'");
    } catch (const std::out_of_range&) {
        fail(path, line, "number out of range '" + s + "'");
    }
}

int64_t parse_int(const std::string& s, const std::filesystem::path& path, size_t line) {
    try {
        size_t used = 0;
        const int64_t v = std::stoll(s, &used);
        if (used != s.size()) fail(path, line, "trailing junk in integer '" + s + "'");
        return v;
    } catch (const std::exception&) {
        fail(path, line, "non-integer field '" + s + "'");
    }
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    return in;
}

} // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_video(const std::filesystem::path& dir, const VideoRecord& video) {
    {
        std::ofstream out = open_out(dir / (video.video_id + ".tracks.csv"));
        out << "video_id,frame,object_id,cx,cy,w,h\n";
        for (const Track& tr : video.tracks) {
            for (size_t k = 0; k < tr.boxes.size(); ++k) {
                const Box& b = tr.boxes[k];
                out << video.video_id << ',' << (tr.first_frame + static_cast<int32_t>(k))
                    << ',' << tr.object_id << ',' << format_double(b.cx) << ','
                    << format_double(b.cy) << ',' << format_double(b.w) << ','
                    << format_double(b.h) << '\n';
            }
        }
        if (!out) throw std::runtime_error("write failed: " + (dir / video.video_id).string());
    }
    {
        std::ofstream out = open_out(dir / (video.video_id + ".meta"));
        out << "video_id=" << video.video_id << '\n';
        out << "fps=" << format_double(video.fps) << '\n';
        out << "num_frames=" << video.num_frames << '\n';
        out << "frame_labels=";
        for (uint8_t l : video.frame_labels) out << (l ? '1' : '0');
        out << '\n';
        out << "category=" << to_string(video.category) << '\n';
        out << "involvement=" << to_string(video.involvement) << '\n';
        if (!out) throw std::runtime_error("write failed: " + (dir / video.video_id).string());
    }
}

VideoRecord read_video(const std::filesystem::path& dir, const std::string& video_id) {
    VideoRecord video;
    const std::filesystem::path meta_path = dir / (video_id + ".meta");
    {
        std::ifstream in = open_in(meta_path);
        std::string line;
        size_t lineno = 0;
        std::map<std::string, std::string> kv;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const size_t eq = line.find('=');
            if (eq == std::string::npos) fail(meta_path, lineno, "expected key=value");
            kv[line.substr(0, eq)] = line.substr(eq + 1);
        }
        for (const char* key :
             {"video_id", "fps", "num_frames", "frame_labels", "category", "involvement"})
            if (!kv.count(key))
                throw std::runtime_error(meta_path.string() + ": missing key " +
                                         std::string(key));
        video.video_id = kv["video_id"];
        video.fps = parse_double(kv["fps"], meta_path, 0);
        video.num_frames = static_cast<int32_t>(parse_int(kv["num_frames"], meta_path, 0));
        const std::string& labels = kv["frame_labels"];
        if (static_cast<int32_t>(labels.size()) != video.num_frames)
            throw std::runtime_error(meta_path.string() + ": frame_labels length " +
                                     std::to_string(labels.size()) + " != num_frames");
        video.frame_labels.reserve(labels.size());
        for (char c : labels) {
            if (c != '0' && c != '1')
                throw std::runtime_error(meta_path.string() + ": frame_labels must be 0/1");
            video.frame_labels.push_back(c == '1' ? 1 : 0);
        }
        video.category = anomaly_kind_from_string(kv["category"]);
        video.involvement = involvement_from_string(kv["involvement"]);
    }

    const std::filesystem::path tracks_path = dir / (video_id + ".tracks.csv");
    {
        std::ifstream in = open_in(tracks_path);
        std::string line;
        size_t lineno = 0;
        if (!std::getline(in, line)) fail(tracks_path, 1, "missing header");
        ++lineno;
        if (line != "video_id,frame,object_id,cx,cy,w,h")
            fail(tracks_path, 1, "unexpected header '" + line + "'");
        std::map<int32_t, Track> tracks;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            const auto f = split_csv(line);
            if (f.size() != 7) fail(tracks_path, lineno, "expected 7 fields");
            if (f[0] != video.video_id) fail(tracks_path, lineno, "video_id mismatch");
            const auto frame = static_cast<int32_t>(parse_int(f[1], tracks_path, lineno));
            const auto oid = static_cast<int32_t>(parse_int(f[2], tracks_path, lineno));
            Box b{parse_double(f[3], tracks_path, lineno),
                  parse_double(f[4], tracks_path, lineno),
                  parse_double(f[5], tracks_path, lineno),
                  parse_double(f[6], tracks_path, lineno)};
            auto [it, fresh] = tracks.try_emplace(oid);
            Track& tr = it->second;
            if (fresh) {
                tr.object_id = oid;
                tr.first_frame = frame;
            } else if (frame != tr.first_frame + static_cast<int32_t>(tr.boxes.size())) {
                fail(tracks_path, lineno,
                     "non-contiguous frames for object " + std::to_string(oid));
            }
            if (frame < 0 || frame >= video.num_frames)
                fail(tracks_path, lineno, "frame outside [0, num_frames)");
            tr.boxes.push_back(b);
        }
        video.tracks.reserve(tracks.size());
        for (auto& [oid, tr] : tracks) video.tracks.push_back(std::move(tr));
    }
    return video;
}

std::vector<VideoRecord> read_video_dir(const std::filesystem::path& dir) {
    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".meta")
            ids.push_back(entry.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    std::vector<VideoRecord> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) out.push_back(read_video(dir, id));
    return out;
}

void write_scene_scores(const std::filesystem::path& path, const ScoreSeries& ffp,
                        const ScoreSeries& str) {
    if (ffp.values.size() != str.values.size() || ffp.video_id != str.video_id)
        throw std::invalid_argument("write_scene_scores: series mismatch");
    std::ofstream out = open_out(path);
    out << "# ffp_valid_from=" << ffp.valid_from << " str_valid_from=" << str.valid_from
        << '\n';
    out << "video_id,frame,s_ffp,s_str\n";
    for (size_t t = 0; t < ffp.values.size(); ++t)
        out << ffp.video_id << ',' << t << ',' << format_double(ffp.values[t]) << ','
            << format_double(str.values[t]) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::pair<ScoreSeries, ScoreSeries> read_scene_scores(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    size_t lineno = 0;

    if (!std::getline(in, line)) fail(path, 1, "empty file");
    ++lineno;
    ScoreSeries ffp, str;
    if (std::sscanf(line.c_str(), "# ffp_valid_from=%d str_valid_from=%d", &ffp.valid_from,
                    &str.valid_from) != 2)
        fail(path, 1, "expected '# ffp_valid_from=<k> str_valid_from=<k>'");
    if (!std::getline(in, line)) fail(path, 2, "missing header");
    ++lineno;
    if (line != "video_id,frame,s_ffp,s_str") fail(path, 2, "unexpected header");

    int32_t expected_frame = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 4) fail(path, lineno, "expected 4 fields");
        if (ffp.video_id.empty()) {
            ffp.video_id = str.video_id = f[0];
        } else if (f[0] != ffp.video_id) {
            fail(path, lineno, "multiple video_ids in one scene file");
        }
        const auto frame = static_cast<int32_t>(parse_int(f[1], path, lineno));
        if (frame != expected_frame)
            fail(path, lineno,
                 "missing frame " + std::to_string(expected_frame) + " (got " +
                     std::to_string(frame) + ")");
        ++expected_frame;
        ffp.values.push_back(parse_double(f[2], path, lineno));
        str.values.push_back(parse_double(f[3], path, lineno));
    }
    if (ffp.values.empty()) fail(path, lineno, "no data rows");
    return {std::move(ffp), std::move(str)};
}

void write_score_csv(const std::filesystem::path& path,
                     std::span<const ScoreSeries> series) {
    if (series.empty()) throw std::invalid_argument("write_score_csv: no series");
    std::ofstream out = open_out(path);
    out << "# valid_from=" << series[0].valid_from << '\n';
    out << "video_id,frame,score\n";
    for (const ScoreSeries& s : series) {
        if (s.valid_from != series[0].valid_from)
            throw std::invalid_argument("write_score_csv: mixed valid_from values");
        for (size_t t = 0; t < s.values.size(); ++t)
            out << s.video_id << ',' << t << ',' << format_double(s.values[t]) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<ScoreSeries> read_score_csv(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    size_t lineno = 0;

    if (!std::getline(in, line)) fail(path, 1, "empty file");
    ++lineno;
    int32_t valid_from = 0;
    if (std::sscanf(line.c_str(), "# valid_from=%d", &valid_from) != 1)
        fail(path, 1, "expected '# valid_from=<k>'");
    if (!std::getline(in, line)) fail(path, 2, "missing header");
    ++lineno;
    if (line != "video_id,frame,score") fail(path, 2, "unexpected header");

    std::vector<ScoreSeries> out;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 3) fail(path, lineno, "expected 3 fields");
        const auto frame = static_cast<int32_t>(parse_int(f[1], path, lineno));
        if (out.empty() || out.back().video_id != f[0]) {
            if (frame != 0) fail(path, lineno, "video block must start at frame 0");
            ScoreSeries s;
            s.video_id = f[0];
            s.valid_from = valid_from;
            out.push_back(std::move(s));
        } else if (frame != out.back().size()) {
            fail(path, lineno, "missing frame " + std::to_string(out.back().size()));
        }
        out.back().values.push_back(parse_double(f[2], path, lineno));
    }
    if (out.empty()) fail(path, lineno, "no data rows");
    return out;
}

} // namespace oread::io
