#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "oread/track_io.hpp"

namespace oread::cli {

namespace {

class Timer {
public:
    Timer() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

std::string canonical_expert(const std::string& expert) {
    if (expert == "interaction" || expert == "int") return "interaction";
    if (expert == "behavior" || expert == "beh") return "behavior";
    throw std::invalid_argument("unknown expert '" + expert +
                                "' (expected interaction or behavior)");
}

std::filesystem::path weights_path(const RunConfig& cfg, const std::string& expert) {
    return cfg.weights_dir / (expert + ".weights.json");
}

std::filesystem::path scores_path(const RunConfig& cfg, const std::string& split,
                                  const std::string& expert) {
    return cfg.scores_dir / split / (expert + ".csv");
}

void check_split(const std::string& split) {
    if (split != "train" && split != "test")
        throw std::invalid_argument("unknown split '" + split +
                                    "' (expected train or test)");
}

std::vector<VideoRecord> load_split(const RunConfig& cfg, const std::string& split) {
    const auto dir = cfg.data_dir / split;
    auto videos = io::read_video_dir(dir);
    if (videos.empty())
        throw std::runtime_error("no videos under " + dir.string() +
                                 "; run `simulate` first");
    return videos;
}

nn::ParamStore load_expert_weights(const RunConfig& cfg, const std::string& expert) {
    nn::ParamStore ps;
    if (expert == "interaction")
        experts::declare_interaction(ps, cfg.interaction);
    else
        experts::declare_behavior(ps, cfg.behavior);
    const auto path = weights_path(cfg, expert);
    if (!std::filesystem::exists(path))
        throw std::runtime_error("weights file " + path.string() +
                                 " missing; run `train --expert " + expert + "` first");
    nn::load_weights(path, ps);
    return ps;
}

// Scene score streams for every video of a split, keyed by video id.
std::map<std::string, std::pair<ScoreSeries, ScoreSeries>> load_scene_split(
    const RunConfig& cfg, const std::string& split,
    const std::vector<VideoRecord>& videos) {
    std::map<std::string, std::pair<ScoreSeries, ScoreSeries>> out;
    for (const VideoRecord& v : videos)
        out[v.video_id] =
            io::read_scene_scores(cfg.data_dir / split / (v.video_id + ".scene.csv"));
    return out;
}

std::map<std::string, ScoreSeries> load_expert_split(const RunConfig& cfg,
                                                     const std::string& split,
                                                     const std::string& expert) {
    const auto path = scores_path(cfg, split, expert);
    if (!std::filesystem::exists(path))
        throw std::runtime_error("score file " + path.string() + " missing; run `score" +
                                 " --expert " + expert + " --split " + split +
                                 "` first");
    std::map<std::string, ScoreSeries> out;
    for (ScoreSeries& s : io::read_score_csv(path)) out[s.video_id] = std::move(s);
    return out;
}

// Samples a stream contributes to its normalizer: frames it actually
// scored. The placeholder frames before valid_from would otherwise pile
// mass on the assigned normal value.
void append_valid(const ScoreSeries& s, std::vector<double>& out) {
    for (int32_t t = s.valid_from; t < s.size(); ++t)
        out.push_back(s.values[static_cast<size_t>(t)]);
}

const ScoreSeries& series_for(const std::map<std::string, ScoreSeries>& by_id,
                              const std::string& video_id, const std::string& what) {
    const auto it = by_id.find(video_id);
    if (it == by_id.end())
        throw std::runtime_error("video " + video_id + " missing from the " + what +
                                 " scores");
    return it->second;
}

} // namespace

void cmd_simulate(const RunConfig& cfg, std::ostream& log) {
    Timer timer;
    const sim::Dataset ds = sim::generate_dataset(cfg.dataset, cfg.data_dir);
    log << "stage=simulate train=" << ds.train.size() << " test=" << ds.test.size()
        << " data_dir=" << cfg.data_dir.string() << " wall_ms=" << timer.ms()
        << " status=done\n";
}

void cmd_train(const RunConfig& cfg, const std::string& expert_in, std::ostream& log) {
    const std::string expert = canonical_expert(expert_in);
    Timer timer;
    const auto videos = load_split(cfg, "train");

    nn::ParamStore ps;
    if (expert == "interaction")
        experts::train_interaction(videos, ps, cfg.interaction, cfg.interaction_seed,
                                   &log);
    else
        experts::train_behavior(videos, ps, cfg.behavior, cfg.behavior_seed, &log);

    std::filesystem::create_directories(cfg.weights_dir);
    const auto path = weights_path(cfg, expert);
    nn::save_weights(ps, path);
    log << "stage=train expert=" << expert << " videos=" << videos.size()
        << " weights=" << path.string() << " checksum=" << std::hex << ps.checksum()
        << std::dec << " wall_ms=" << timer.ms() << " status=done\n";
}

void cmd_score(const RunConfig& cfg, const std::string& expert_in,
               const std::string& split, int jobs, std::ostream& log) {
    const std::string expert = canonical_expert(expert_in);
    check_split(split);
    Timer timer;
    const auto videos = load_split(cfg, split);
    const nn::ParamStore ps = load_expert_weights(cfg, expert);

    std::vector<ScoreSeries> series(videos.size());
    std::vector<double> wall(videos.size(), 0.0);
    const auto score_one = [&](size_t i) {
        Timer t;
        series[i] = expert == "interaction"
                        ? experts::score_interaction(videos[i], ps, cfg.interaction)
                        : experts::score_behavior(videos[i], ps, cfg.behavior);
        wall[i] = t.ms();
    };

    const int workers = std::clamp(jobs, 1, static_cast<int>(videos.size()));
    if (workers <= 1) {
        for (size_t i = 0; i < videos.size(); ++i) score_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (size_t i; (i = next.fetch_add(1)) < videos.size();) score_one(i);
            });
        for (std::thread& t : pool) t.join();
    }

    for (size_t i = 0; i < videos.size(); ++i)
        log << "stage=score expert=" << expert << " split=" << split
            << " video_id=" << videos[i].video_id << " wall_ms=" << wall[i] << '\n';

    const auto path = scores_path(cfg, split, expert);
    std::filesystem::create_directories(path.parent_path());
    io::write_score_csv(path, series);
    log << "stage=score expert=" << expert << " split=" << split
        << " videos=" << videos.size() << " jobs=" << workers
        << " out=" << path.string() << " wall_ms=" << timer.ms() << " status=done\n";
}

void cmd_fuse(const RunConfig& cfg, std::ostream& log) {
    Timer timer;
    const auto train_videos = load_split(cfg, "train");
    const auto train_scene = load_scene_split(cfg, "train", train_videos);
    const auto train_int = load_expert_split(cfg, "train", "interaction");
    const auto train_beh = load_expert_split(cfg, "train", "behavior");

    std::array<std::vector<double>, 4> samples;
    for (const VideoRecord& v : train_videos) {
        const auto& scene = train_scene.at(v.video_id);
        append_valid(scene.first, samples[fusion::kFfp]);
        append_valid(scene.second, samples[fusion::kStr]);
        append_valid(series_for(train_int, v.video_id, "train interaction"),
                     samples[fusion::kInt]);
        append_valid(series_for(train_beh, v.video_id, "train behavior"),
                     samples[fusion::kBeh]);
    }

    std::array<fusion::NormalizationStats, 4> stats;
    for (size_t e = 0; e < 4; ++e) {
        stats[e] = fusion::fit_normalizer(samples[e], cfg.alpha);
        log << "stage=fuse expert=" << fusion::kExpertNames[e]
            << " samples=" << samples[e].size()
            << " mu=" << io::format_double(stats[e].mu)
            << " sigma=" << io::format_double(stats[e].sigma)
            << " tau=" << io::format_double(stats[e].tau) << '\n';
    }
    std::filesystem::create_directories(cfg.scores_dir);
    fusion::write_stats(cfg.scores_dir / "stats.txt", stats);
    log << "stage=fuse ensemble_tau="
        << io::format_double(fusion::ensemble_threshold(stats)) << '\n';

    const auto test_videos = load_split(cfg, "test");
    const auto test_scene = load_scene_split(cfg, "test", test_videos);
    const auto test_int = load_expert_split(cfg, "test", "interaction");
    const auto test_beh = load_expert_split(cfg, "test", "behavior");

    std::vector<fusion::FusedVideo> fused;
    fused.reserve(test_videos.size());
    for (const VideoRecord& v : test_videos) {
        const auto& scene = test_scene.at(v.video_id);
        const std::array<const ScoreSeries*, 4> streams{
            &scene.first, &scene.second,
            &series_for(test_int, v.video_id, "test interaction"),
            &series_for(test_beh, v.video_id, "test behavior")};
        fused.push_back(fusion::fuse(streams, stats, cfg.mode));
    }

    const auto out = cfg.scores_dir / "test" / "fused.csv";
    std::filesystem::create_directories(out.parent_path());
    fusion::write_fused_csv(out, fused);
    log << "stage=fuse mode=" << fusion::to_string(cfg.mode)
        << " videos=" << fused.size() << " out=" << out.string()
        << " wall_ms=" << timer.ms() << " status=done\n";
}

void cmd_eval(const RunConfig& cfg, const std::string& input, std::ostream& log) {
    Timer timer;
    const auto test_videos = load_split(cfg, "test");

    std::map<std::string, ScoreSeries> by_id;
    if (input == "fused") {
        for (fusion::FusedVideo& f :
             fusion::read_fused_csv(cfg.scores_dir / "test" / "fused.csv"))
            by_id[f.fused.video_id] = std::move(f.fused);
    } else if (input == "interaction" || input == "behavior") {
        by_id = load_expert_split(cfg, "test", input);
    } else if (input == "ffp" || input == "str") {
        const auto scene = load_scene_split(cfg, "test", test_videos);
        for (const auto& [id, pair] : scene)
            by_id[id] = input == "ffp" ? pair.first : pair.second;
    } else {
        throw std::invalid_argument(
            "unknown eval input '" + input +
            "' (expected fused, interaction, behavior, ffp, or str)");
    }

    double tau = cfg.tau_override;
    if (!cfg.has_tau_override()) {
        const auto stats = fusion::read_stats(cfg.scores_dir / "stats.txt");
        if (input == "fused") {
            tau = fusion::ensemble_threshold(stats);
        } else {
            const std::string name = input == "interaction" ? "int"
                                     : input == "behavior"  ? "beh"
                                                            : input;
            size_t idx = 0;
            while (idx < stats.size() && name != fusion::kExpertNames[idx]) ++idx;
            tau = stats.at(idx).tau;
        }
    }

    std::vector<eval::LabeledSeries> labeled;
    labeled.reserve(test_videos.size());
    std::vector<double> all_scores;
    std::vector<uint8_t> all_labels;
    for (const VideoRecord& v : test_videos) {
        labeled.push_back(
            eval::labeled_series(series_for(by_id, v.video_id, input), v));
        all_scores.insert(all_scores.end(), labeled.back().scores.values.begin(),
                          labeled.back().scores.values.end());
        all_labels.insert(all_labels.end(), labeled.back().labels.begin(),
                          labeled.back().labels.end());
    }

    const eval::EvalResult result = eval::evaluate(labeled, cfg.protocol, tau);

    std::filesystem::create_directories(cfg.reports_dir);
    const std::string stem = input + "_" + eval::to_string(cfg.protocol);
    eval::write_report(result, cfg.protocol, cfg.reports_dir / (stem + ".txt"),
                       cfg.reports_dir / (stem + ".kv"));
    eval::write_roc_csv(cfg.reports_dir / (stem + "_roc.csv"), all_scores, all_labels);

    log << "stage=eval input=" << input << " protocol=" << eval::to_string(cfg.protocol)
        << " auc=" << io::format_double(result.auc)
        << " f1=" << io::format_double(result.f1)
        << " tau=" << io::format_double(result.threshold) << " frames=" << result.frames
        << " wall_ms=" << timer.ms() << " status=done\n";
    for (const auto& [tag, af] : result.per_class)
        log << "stage=eval input=" << input << " class=" << tag
            << " auc=" << io::format_double(af.first)
            << " f1=" << io::format_double(af.second) << '\n';
}

void cmd_classify(const RunConfig& cfg, std::ostream& log) {
    Timer timer;
    const auto test_videos = load_split(cfg, "test");
    std::map<std::string, Involvement> actual;
    for (const VideoRecord& v : test_videos) actual[v.video_id] = v.involvement;

    const auto fused = fusion::read_fused_csv(cfg.scores_dir / "test" / "fused.csv");

    std::filesystem::create_directories(cfg.reports_dir);
    const auto path = cfg.reports_dir / "classification.csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "video_id,predicted,actual\n";

    std::map<std::string, std::pair<int, int>> per_class; // actual -> (hits, total)
    for (const fusion::FusedVideo& f : fused) {
        const auto it = actual.find(f.fused.video_id);
        if (it == actual.end())
            throw std::runtime_error("video " + f.fused.video_id +
                                     " in fused.csv has no metadata");
        const Involvement pred = fusion::classify_video(f);
        out << f.fused.video_id << ',' << to_string(pred) << ','
            << to_string(it->second) << '\n';
        if (it->second != Involvement::none) {
            auto& [hits, total] = per_class[to_string(it->second)];
            ++total;
            if (pred == it->second) ++hits;
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());

    int hits = 0, total = 0;
    for (const auto& [tag, ht] : per_class) {
        log << "stage=classify class=" << tag << " correct=" << ht.first
            << " total=" << ht.second << " accuracy="
            << io::format_double(static_cast<double>(ht.first) /
                                 static_cast<double>(ht.second))
            << '\n';
        hits += ht.first;
        total += ht.second;
    }
    log << "stage=classify videos=" << fused.size() << " labeled=" << total
        << " accuracy="
        << io::format_double(total > 0 ? static_cast<double>(hits) / total : 0.0)
        << " out=" << path.string() << " wall_ms=" << timer.ms() << " status=done\n";
}

} // namespace oread::cli
