#include "config.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "oread/track_io.hpp"

namespace oread::cli {

namespace {

std::string trim(const std::string& s) {
    const size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(size_t lineno, const std::string& msg) {
    throw std::runtime_error("config line " + std::to_string(lineno) + ": " + msg);
}

double to_double(const std::string& v, size_t lineno) {
    try {
        size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) fail(lineno, "trailing characters in number '" + v + "'");
        return d;
    } catch (const std::logic_error&) {
        fail(lineno, "expected a number, got '" + v + "'");
    }
}

int32_t to_int(const std::string& v, size_t lineno) {
    try {
        size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) fail(lineno, "trailing characters in integer '" + v + "'");
        return static_cast<int32_t>(d);
    } catch (const std::logic_error&) {
        fail(lineno, "expected an integer, got '" + v + "'");
    }
}

uint64_t to_u64(const std::string& v, size_t lineno) {
    try {
        size_t pos = 0;
        const unsigned long long d = std::stoull(v, &pos);
        if (pos != v.size()) fail(lineno, "trailing characters in integer '" + v + "'");
        return d;
    } catch (const std::logic_error&) {
        fail(lineno, "expected an unsigned integer, got '" + v + "'");
    }
}

bool to_bool(const std::string& v, size_t lineno) {
    if (v == "true") return true;
    if (v == "false") return false;
    fail(lineno, "expected true or false, got '" + v + "'");
}

std::array<int32_t, 2> to_int_pair(const std::string& v, size_t lineno) {
    const size_t comma = v.find(',');
    if (comma == std::string::npos) fail(lineno, "expected 'a,b', got '" + v + "'");
    return {to_int(trim(v.substr(0, comma)), lineno),
            to_int(trim(v.substr(comma + 1)), lineno)};
}

std::map<AnomalyKind, double> to_mix(const std::string& v, size_t lineno) {
    std::map<AnomalyKind, double> mix;
    if (v.empty()) return mix;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        const size_t colon = item.find(':');
        if (colon == std::string::npos)
            fail(lineno, "expected 'kind:fraction', got '" + item + "'");
        AnomalyKind kind;
        try {
            kind = anomaly_kind_from_string(trim(item.substr(0, colon)));
        } catch (const std::invalid_argument& e) {
            fail(lineno, e.what());
        }
        mix[kind] = to_double(trim(item.substr(colon + 1)), lineno);
    }
    return mix;
}

void apply(RunConfig& cfg, const std::string& section, const std::string& key,
           const std::string& value, size_t lineno) {
    auto unknown = [&]() {
        fail(lineno, "unknown key '" + key + "' in section [" + section + "]");
    };
    if (section == "paths") {
        if (key == "data_dir") cfg.data_dir = value;
        else if (key == "weights_dir") cfg.weights_dir = value;
        else if (key == "scores_dir") cfg.scores_dir = value;
        else if (key == "reports_dir") cfg.reports_dir = value;
        else unknown();
    } else if (section == "simulate") {
        sim::DatasetSpec& d = cfg.dataset;
        if (key == "seed") d.seed = to_u64(value, lineno);
        else if (key == "train_count") d.train_count = to_int(value, lineno);
        else if (key == "test_count") d.test_count = to_int(value, lineno);
        else if (key == "anomaly_mix") d.anomaly_mix = to_mix(value, lineno);
        else if (key == "num_frames") d.num_frames = to_int(value, lineno);
        else if (key == "num_objects") d.num_objects = to_int(value, lineno);
        else if (key == "fps") d.fps = to_double(value, lineno);
        else if (key == "noise_std") d.noise_std = to_double(value, lineno);
        else if (key == "sudden_stop_label_frames")
            d.sudden_stop_label_frames = to_int(value, lineno);
        else if (key == "scene_delta_ffp") d.scene_delta_ffp = to_double(value, lineno);
        else if (key == "scene_delta_str") d.scene_delta_str = to_double(value, lineno);
        else unknown();
    } else if (section == "interaction") {
        experts::InteractionConfig& c = cfg.interaction;
        if (key == "seed") cfg.interaction_seed = to_u64(value, lineno);
        else if (key == "t_int") c.t_int = to_int(value, lineno);
        else if (key == "n_max") c.n_max = to_int(value, lineno);
        else if (key == "latent_dim") c.latent_dim = to_int(value, lineno);
        else if (key == "hidden") c.hidden = to_int(value, lineno);
        else if (key == "encoder_mlp") c.encoder_mlp = to_int_pair(value, lineno);
        else if (key == "decoder_out_mlp") c.decoder_out_mlp = to_int_pair(value, lineno);
        else if (key == "tau_std") c.tau_std = to_double(value, lineno);
        else if (key == "lowpass_cutoff_hz") c.lowpass_cutoff_hz = to_double(value, lineno);
        else if (key == "batch") c.batch = to_int(value, lineno);
        else if (key == "lr") c.lr = to_double(value, lineno);
        else if (key == "epochs") c.epochs = to_int(value, lineno);
        else if (key == "train_stride") c.train_stride = to_int(value, lineno);
        else if (key == "val_fraction") c.val_fraction = to_double(value, lineno);
        else unknown();
    } else if (section == "behavior") {
        experts::BehaviorConfig& c = cfg.behavior;
        if (key == "seed") cfg.behavior_seed = to_u64(value, lineno);
        else if (key == "delta") c.delta = to_int(value, lineno);
        else if (key == "box_encoder_mlp") c.box_encoder_mlp = to_int_pair(value, lineno);
        else if (key == "hidden") c.hidden = to_int(value, lineno);
        else if (key == "decoder_out_mlp") c.decoder_out_mlp = to_int_pair(value, lineno);
        else if (key == "lowpass_cutoff_hz") c.lowpass_cutoff_hz = to_double(value, lineno);
        else if (key == "batch") c.batch = to_int(value, lineno);
        else if (key == "lr") c.lr = to_double(value, lineno);
        else if (key == "epochs") c.epochs = to_int(value, lineno);
        else if (key == "train_history") c.train_history = to_int(value, lineno);
        else if (key == "train_stride") c.train_stride = to_int(value, lineno);
        else if (key == "val_fraction") c.val_fraction = to_double(value, lineno);
        else if (key == "divide_by_height") c.divide_by_height = to_bool(value, lineno);
        else unknown();
    } else if (section == "fusion") {
        if (key == "alpha") cfg.alpha = to_double(value, lineno);
        else if (key == "mode") {
            try {
                cfg.mode = fusion::filter_mode_from_string(value);
            } catch (const std::invalid_argument& e) {
                fail(lineno, e.what());
            }
        } else unknown();
    } else if (section == "eval") {
        if (key == "protocol") {
            try {
                cfg.protocol = eval::protocol_from_string(value);
            } catch (const std::invalid_argument& e) {
                fail(lineno, e.what());
            }
        } else if (key == "tau") cfg.tau_override = to_double(value, lineno);
        else unknown();
    } else {
        fail(lineno, "unknown section [" + section + "]");
    }
}

} // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(lineno, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) fail(lineno, "expected key = value");
        if (section.empty()) fail(lineno, "key before any [section]");
        apply(cfg, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno);
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    const auto d = [](double v) { return io::format_double(v); };

    out << "[paths]\n";
    out << "data_dir = " << cfg.data_dir.string() << '\n';
    out << "weights_dir = " << cfg.weights_dir.string() << '\n';
    out << "scores_dir = " << cfg.scores_dir.string() << '\n';
    out << "reports_dir = " << cfg.reports_dir.string() << '\n';

    const sim::DatasetSpec& ds = cfg.dataset;
    out << "\n[simulate]\n";
    out << "seed = " << ds.seed << '\n';
    out << "train_count = " << ds.train_count << '\n';
    out << "test_count = " << ds.test_count << '\n';
    out << "anomaly_mix = ";
    bool first = true;
    for (const auto& [kind, frac] : ds.anomaly_mix) {
        if (!first) out << ',';
        out << to_string(kind) << ':' << d(frac);
        first = false;
    }
    out << '\n';
    out << "num_frames = " << ds.num_frames << '\n';
    out << "num_objects = " << ds.num_objects << '\n';
    out << "fps = " << d(ds.fps) << '\n';
    out << "noise_std = " << d(ds.noise_std) << '\n';
    out << "sudden_stop_label_frames = " << ds.sudden_stop_label_frames << '\n';
    out << "scene_delta_ffp = " << d(ds.scene_delta_ffp) << '\n';
    out << "scene_delta_str = " << d(ds.scene_delta_str) << '\n';

    const experts::InteractionConfig& ic = cfg.interaction;
    out << "\n[interaction]\n";
    out << "seed = " << cfg.interaction_seed << '\n';
    out << "t_int = " << ic.t_int << '\n';
    out << "n_max = " << ic.n_max << '\n';
    out << "latent_dim = " << ic.latent_dim << '\n';
    out << "hidden = " << ic.hidden << '\n';
    out << "encoder_mlp = " << ic.encoder_mlp[0] << ',' << ic.encoder_mlp[1] << '\n';
    out << "decoder_out_mlp = " << ic.decoder_out_mlp[0] << ',' << ic.decoder_out_mlp[1]
        << '\n';
    out << "tau_std = " << d(ic.tau_std) << '\n';
    out << "lowpass_cutoff_hz = " << d(ic.lowpass_cutoff_hz) << '\n';
    out << "batch = " << ic.batch << '\n';
    out << "lr = " << d(ic.lr) << '\n';
    out << "epochs = " << ic.epochs << '\n';
    out << "train_stride = " << ic.train_stride << '\n';
    out << "val_fraction = " << d(ic.val_fraction) << '\n';

    const experts::BehaviorConfig& bc = cfg.behavior;
    out << "\n[behavior]\n";
    out << "seed = " << cfg.behavior_seed << '\n';
    out << "delta = " << bc.delta << '\n';
    out << "box_encoder_mlp = " << bc.box_encoder_mlp[0] << ',' << bc.box_encoder_mlp[1]
        << '\n';
    out << "decoder_out_mlp = " << bc.decoder_out_mlp[0] << ',' << bc.decoder_out_mlp[1]
        << '\n';
    out << "hidden = " << bc.hidden << '\n';
    out << "lowpass_cutoff_hz = " << d(bc.lowpass_cutoff_hz) << '\n';
    out << "batch = " << bc.batch << '\n';
    out << "lr = " << d(bc.lr) << '\n';
    out << "epochs = " << bc.epochs << '\n';
    out << "train_history = " << bc.train_history << '\n';
    out << "train_stride = " << bc.train_stride << '\n';
    out << "val_fraction = " << d(bc.val_fraction) << '\n';
    out << "divide_by_height = " << (bc.divide_by_height ? "true" : "false") << '\n';

    out << "\n[fusion]\n";
    out << "alpha = " << d(cfg.alpha) << '\n';
    out << "mode = " << fusion::to_string(cfg.mode) << '\n';

    out << "\n[eval]\n";
    out << "protocol = " << eval::to_string(cfg.protocol) << '\n';
    if (cfg.has_tau_override()) out << "tau = " << d(cfg.tau_override) << '\n';

    return out.str();
}

} // namespace oread::cli
