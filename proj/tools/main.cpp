#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Trajectory anomaly detection pipeline: simulate data, train the "
                 "interaction and behavior experts, score, fuse, evaluate, classify."};
    app.require_subcommand(1);

    std::string config_path = "oread.ini";
    app.add_option("-c,--config", config_path,
                   "sectioned key=value config file (defaults apply when the default "
                   "path is absent)");

    std::string expert;
    std::string split = "test";
    std::string input = "fused";
    std::string protocol;
    std::string mode;
    int jobs = 1;
    int epochs = -1;
    double tau = 0.0;

    CLI::App* c_sim = app.add_subcommand("simulate", "generate the synthetic dataset");
    CLI::App* c_train = app.add_subcommand("train", "train one expert from scratch");
    c_train->add_option("--expert", expert, "interaction | behavior")
        ->required()
        ->check(CLI::IsMember({"interaction", "behavior", "int", "beh"}));
    c_train->add_option("--epochs", epochs, "override the configured epoch count");

    CLI::App* c_score = app.add_subcommand("score", "score a split with one expert");
    c_score->add_option("--expert", expert, "interaction | behavior")
        ->required()
        ->check(CLI::IsMember({"interaction", "behavior", "int", "beh"}));
    c_score->add_option("--split", split, "train | test")
        ->check(CLI::IsMember({"train", "test"}));
    c_score->add_option("--jobs", jobs, "parallel scoring workers")
        ->check(CLI::PositiveNumber);

    CLI::App* c_fuse =
        app.add_subcommand("fuse", "fit normalizers on train scores, fuse the test split");
    c_fuse->add_option("--mode", mode, "deferred | immediate")
        ->check(CLI::IsMember({"deferred", "immediate"}));

    CLI::App* c_eval = app.add_subcommand("eval", "evaluate one score stream");
    c_eval->add_option("--input", input, "fused | interaction | behavior | ffp | str")
        ->check(CLI::IsMember({"fused", "interaction", "behavior", "ffp", "str"}));
    c_eval->add_option("--protocol", protocol, "raw | legacy_minmax")
        ->check(CLI::IsMember({"raw", "legacy_minmax"}));
    CLI::Option* tau_opt =
        c_eval->add_option("--tau", tau, "decision threshold override");

    CLI::App* c_classify =
        app.add_subcommand("classify", "label each fused test video ego or non-ego");

    CLI11_PARSE(app, argc, argv);

    try {
        oread::cli::RunConfig cfg;
        const bool config_given = app.count("--config") > 0;
        if (std::filesystem::exists(config_path)) {
            cfg = oread::cli::load_config(config_path);
        } else if (config_given) {
            throw std::runtime_error("config file " + config_path + " does not exist");
        }

        if (epochs > 0) {
            cfg.interaction.epochs = epochs;
            cfg.behavior.epochs = epochs;
        }
        if (!mode.empty()) cfg.mode = oread::fusion::filter_mode_from_string(mode);
        if (!protocol.empty()) cfg.protocol = oread::eval::protocol_from_string(protocol);
        if (tau_opt->count() > 0) cfg.tau_override = tau;

        if (c_sim->parsed()) oread::cli::cmd_simulate(cfg, std::cout);
        if (c_train->parsed()) oread::cli::cmd_train(cfg, expert, std::cout);
        if (c_score->parsed()) oread::cli::cmd_score(cfg, expert, split, jobs, std::cout);
        if (c_fuse->parsed()) oread::cli::cmd_fuse(cfg, std::cout);
        if (c_eval->parsed()) oread::cli::cmd_eval(cfg, input, std::cout);
        if (c_classify->parsed()) oread::cli::cmd_classify(cfg, std::cout);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
