#include "oread/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "oread/track_io.hpp"

namespace oread::eval {

namespace {

void require_two_classes(std::span<const uint8_t> labels, const char* where) {
    size_t pos = 0;
    for (uint8_t l : labels) pos += l ? 1 : 0;
    if (pos == 0 || pos == labels.size())
        throw std::invalid_argument(std::string(where) + ": both classes required");
}

void require_sizes(std::span<const double> scores, std::span<const uint8_t> labels,
                   const char* where) {
    if (scores.size() != labels.size() || scores.empty())
        throw std::invalid_argument(std::string(where) + ": scores/labels size mismatch");
}

} // namespace

double auc(std::span<const double> scores, std::span<const uint8_t> labels) {
    require_sizes(scores, labels, "auc");
    require_two_classes(labels, "auc");

    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Average ranks across tie groups, 1-based.
    double rank_sum_pos = 0.0;
    size_t n_pos = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k) {
            if (labels[order[k]]) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        }
        i = j + 1;
    }
    const size_t n_neg = n - n_pos;
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::vector<std::array<double, 3>> roc_points(std::span<const double> scores,
                                              std::span<const uint8_t> labels) {
    require_sizes(scores, labels, "roc_points");
    require_two_classes(labels, "roc_points");

    const size_t n = scores.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    double n_pos = 0, n_neg = 0;
    for (uint8_t l : labels) (l ? n_pos : n_neg) += 1;

    std::vector<std::array<double, 3>> pts;
    pts.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    double tp = 0, fp = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        for (size_t k = i; k <= j; ++k) (labels[order[k]] ? tp : fp) += 1;
        pts.push_back({fp / n_neg, tp / n_pos, scores[order[i]]});
        i = j + 1;
    }
    return pts;
}

double auc_trapezoid(std::span<const double> scores, std::span<const uint8_t> labels) {
    const auto pts = roc_points(scores, labels);
    double area = 0.0;
    for (size_t k = 1; k < pts.size(); ++k)
        area += 0.5 * (pts[k][0] - pts[k - 1][0]) * (pts[k][1] + pts[k - 1][1]);
    return area;
}

F1Result f1_at(std::span<const double> scores, std::span<const uint8_t> labels,
               double tau) {
    require_sizes(scores, labels, "f1_at");
    require_two_classes(labels, "f1_at");

    size_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] > tau;
        const bool truth = labels[i] != 0;
        if (pred && truth) ++tp;
        else if (pred && !truth) ++fp;
        else if (!pred && truth) ++fn;
    }
    F1Result r;
    r.precision = (tp + fp) == 0 ? 0.0 : double(tp) / double(tp + fp);
    r.recall = (tp + fn) == 0 ? 0.0 : double(tp) / double(tp + fn);
    r.f1 = (r.precision + r.recall) == 0.0
               ? 0.0
               : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

std::string to_string(Protocol p) {
    return p == Protocol::raw ? "raw" : "legacy_minmax";
}

Protocol protocol_from_string(const std::string& s) {
    if (s == "raw") return Protocol::raw;
    if (s == "legacy_minmax") return Protocol::legacy_minmax;
    throw std::invalid_argument("unknown protocol: " + s);
}

LabeledSeries labeled_series(const ScoreSeries& scores, const VideoRecord& video) {
    if (scores.video_id != video.video_id)
        throw std::invalid_argument("labeled_series: video_id mismatch (" +
                                    scores.video_id + " vs " + video.video_id + ")");
    LabeledSeries out;
    out.scores = scores;
    out.labels = video.frame_labels;
    out.category = oread::to_string(video.category);
    out.involvement = oread::to_string(video.involvement);
    return out;
}

EvalResult evaluate(std::span<const LabeledSeries> videos, Protocol protocol, double tau) {
    if (videos.empty()) throw std::invalid_argument("evaluate: no videos");

    // Per-video transformed score lanes under the protocol.
    std::vector<std::vector<double>> lanes;
    lanes.reserve(videos.size());
    for (const LabeledSeries& v : videos) {
        if (v.labels.size() != v.scores.values.size() || v.labels.empty())
            throw std::invalid_argument("evaluate: missing or mis-sized labels for video " +
                                        v.scores.video_id);
        std::vector<double> lane = v.scores.values;
        if (protocol == Protocol::legacy_minmax) {
            const auto [mn, mx] = std::minmax_element(lane.begin(), lane.end());
            const double lo = *mn, hi = *mx;
            if (hi > lo)
                for (double& s : lane) s = (s - lo) / (hi - lo);
            else
                std::fill(lane.begin(), lane.end(), 0.0);
        }
        lanes.push_back(std::move(lane));
    }

    auto concat = [&](const std::vector<size_t>& subset, std::vector<double>& s,
                      std::vector<uint8_t>& l) {
        for (size_t idx : subset) {
            s.insert(s.end(), lanes[idx].begin(), lanes[idx].end());
            l.insert(l.end(), videos[idx].labels.begin(), videos[idx].labels.end());
        }
    };

    std::vector<size_t> all(videos.size());
    std::iota(all.begin(), all.end(), size_t{0});
    std::vector<double> scores;
    std::vector<uint8_t> labels;
    concat(all, scores, labels);

    EvalResult r;
    r.auc = auc(scores, labels);
    const F1Result f = f1_at(scores, labels, tau);
    r.precision = f.precision;
    r.recall = f.recall;
    r.f1 = f.f1;
    r.threshold = tau;
    r.frames = scores.size();
    for (uint8_t l : labels) r.positives += l ? 1 : 0;

    // Tag subsets: anomaly categories and involvement values present.
    std::map<std::string, std::vector<size_t>> tags;
    for (size_t i = 0; i < videos.size(); ++i) {
        if (videos[i].category != "none") tags[videos[i].category].push_back(i);
        if (videos[i].involvement != "none") tags[videos[i].involvement].push_back(i);
    }
    for (const auto& [tag, subset] : tags) {
        std::vector<double> s;
        std::vector<uint8_t> l;
        concat(subset, s, l);
        size_t pos = 0;
        for (uint8_t x : l) pos += x ? 1 : 0;
        if (pos == 0 || pos == l.size()) continue; // single class, not measurable
        r.per_class[tag] = {auc(s, l), f1_at(s, l, tau).f1};
    }
    return r;
}

void write_report(const EvalResult& r, Protocol protocol,
                  const std::filesystem::path& txt_path,
                  const std::filesystem::path& kv_path) {
    {
        std::ofstream out(txt_path);
        if (!out) throw std::runtime_error("write_report: cannot open " + txt_path.string());
        out << "protocol: " << to_string(protocol) << "\n";
        out << "frames: " << r.frames << " (" << r.positives << " anomalous)\n";
        out << "auc: " << io::format_double(r.auc) << "\n";
        out << "f1: " << io::format_double(r.f1) << " at threshold "
            << io::format_double(r.threshold) << " (precision "
            << io::format_double(r.precision) << ", recall " << io::format_double(r.recall)
            << ")\n";
        if (!r.per_class.empty()) {
            out << "per-class:\n";
            for (const auto& [tag, af] : r.per_class)
                out << "  " << tag << ": auc " << io::format_double(af.first) << ", f1 "
                    << io::format_double(af.second) << "\n";
        }
    }
    {
        std::ofstream out(kv_path);
        if (!out) throw std::runtime_error("write_report: cannot open " + kv_path.string());
        out << "protocol=" << to_string(protocol) << "\n";
        out << "frames=" << r.frames << "\n";
        out << "positives=" << r.positives << "\n";
        out << "auc=" << io::format_double(r.auc) << "\n";
        out << "precision=" << io::format_double(r.precision) << "\n";
        out << "recall=" << io::format_double(r.recall) << "\n";
        out << "f1=" << io::format_double(r.f1) << "\n";
        out << "threshold=" << io::format_double(r.threshold) << "\n";
        for (const auto& [tag, af] : r.per_class) {
            out << "per_class." << tag << ".auc=" << io::format_double(af.first) << "\n";
            out << "per_class." << tag << ".f1=" << io::format_double(af.second) << "\n";
        }
    }
}

void write_roc_csv(const std::filesystem::path& path, std::span<const double> scores,
                   std::span<const uint8_t> labels) {
    const auto pts = roc_points(scores, labels);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_roc_csv: cannot open " + path.string());
    out << "fpr,tpr,threshold\n";
    for (const auto& p : pts)
        out << io::format_double(p[0]) << ',' << io::format_double(p[1]) << ','
            << io::format_double(p[2]) << '\n';
}

} // namespace oread::eval
