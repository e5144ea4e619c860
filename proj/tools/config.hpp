#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>

#include "oread/behavior.hpp"
#include "oread/fusion.hpp"
#include "oread/interaction.hpp"
#include "oread/metrics.hpp"
#include "oread/sim.hpp"

namespace oread::cli {

// Everything the pipeline commands need, loadable from a sectioned key-value
// file. Defaults reproduce the reference hyperparameters; the simulate
// section describes the synthetic dataset.
struct RunConfig {
    // [paths]
    std::filesystem::path data_dir = "data";
    std::filesystem::path weights_dir = "weights";
    std::filesystem::path scores_dir = "scores";
    std::filesystem::path reports_dir = "reports";

    // [simulate]
    sim::DatasetSpec dataset;

    // [interaction] / [behavior]
    experts::InteractionConfig interaction;
    uint64_t interaction_seed = 1;
    experts::BehaviorConfig behavior;
    uint64_t behavior_seed = 2;

    // [fusion]
    double alpha = 0.95;
    fusion::FilterMode mode = fusion::FilterMode::deferred;

    // [eval]
    eval::Protocol protocol = eval::Protocol::raw;
    // Negative infinity means "use the fitted ensemble threshold".
    double tau_override = -std::numeric_limits<double>::infinity();

    bool has_tau_override() const { return std::isfinite(tau_override); }
};

// Parses the sectioned key-value format produced by serialize_config.
// Unknown sections or keys and malformed values raise std::runtime_error
// naming the line. parse(serialize(parse(text))) == parse(text).
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Canonical text form: every key in a fixed order, full precision numbers.
std::string serialize_config(const RunConfig& cfg);

} // namespace oread::cli
