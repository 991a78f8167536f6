#include "chatpcg/cli.hpp"

#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

using namespace chatpcg;
using namespace chatpcg::cli;

int main(int argc, char** argv) {
    CLI::App app{"chatpcg: reward design, generator training and evaluation for the boss-raid simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    bool verbose = false;
    app.add_option("--config", config_path, "run config JSON")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "master seed (overrides the config)");
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_flag("-v,--verbose", verbose, "debug logging");

    auto* collect = app.add_subcommand("collect-logs", "simulate heuristic playtests into a JSONL dataset");
    std::optional<int> rows;
    collect->add_option("--rows", rows, "number of rows (default from config)");

    auto* design = app.add_subcommand("design-reward", "run the reward design pipeline");
    std::string mode;
    std::string backend;
    std::string replay_file;
    std::string record_file;
    std::string dataset;
    design->add_option("--mode", mode, "io or cot")->check(CLI::IsMember({"io", "cot"}));
    design->add_option("--backend", backend, "http, replay or scripted")->check(CLI::IsMember({"http", "replay", "scripted"}));
    design->add_option("--replay-file", replay_file, "recorded responses for --backend replay");
    design->add_option("--record", record_file, "write every backend response to this replay file");
    design->add_option("--dataset", dataset, "playtest JSONL (default: the run's collected logs)");

    auto* train_cmd = app.add_subcommand("train", "train content-generator policies");
    std::string reward = "winrate";
    std::string program;
    std::optional<long> steps;
    std::optional<int> runs;
    std::string pe;
    train_cmd->add_option("--reward", reward, "winrate, llm or hybrid")->check(CLI::IsMember({"winrate", "llm", "hybrid"}));
    train_cmd->add_option("--program", program, "reward program (.rwd), required for llm and hybrid");
    train_cmd->add_option("--steps", steps, "environment steps per run (default 20000)");
    train_cmd->add_option("--runs", runs, "independent seeded runs (default 3)");
    train_cmd->add_option("--pe", pe, "PE mode label for the program (default from its transcript)");

    auto* evaluate = app.add_subcommand("evaluate", "sample a generator and compute Ctr, Div and Tbs");
    std::string agent = "random";
    std::vector<std::string> checkpoints;
    std::optional<int> samples;
    int eval_runs = 1;
    evaluate->add_option("--agent", agent, "checkpoint, random or heuristic")
        ->check(CLI::IsMember({"checkpoint", "random", "heuristic"}));
    evaluate->add_option("--checkpoint", checkpoints, "policy checkpoint(s), one report each");
    evaluate->add_option("--samples", samples, "generated samples per report");
    evaluate->add_option("--runs", eval_runs, "seeded repetitions for the random and heuristic baselines");

    auto* report = app.add_subcommand("report", "aggregate eval reports into a table");
    std::string runs_dir;
    std::string curves_dir;
    bool no_plots = false;
    report->add_option("--runs", runs_dir, "directory of eval report JSON files (default: the run's eval dir)");
    report->add_option("--curves", curves_dir, "training directory for curve plots (default: the run's train dir)");
    report->add_flag("--no-plots", no_plots, "skip SVG curve plots");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

    try {
        RunConfig config = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed) config.seed = *seed;
        if (!out_dir.empty()) config.output_dir = out_dir;

        if (collect->parsed()) {
            cmd_collect_logs(config, rows.value_or(config.log_rows), std::cout);
        } else if (design->parsed()) {
            DesignRewardOptions o;
            if (!mode.empty()) o.mode = pipeline_mode_from_string(mode);
            if (!backend.empty()) o.backend = backend;
            o.replay_file = replay_file;
            o.record_file = record_file;
            o.dataset = dataset;
            cmd_design_reward(config, o, std::cout);
        } else if (train_cmd->parsed()) {
            TrainOptions o;
            o.reward = reward_kind_from_string(reward);
            o.program = program;
            o.steps = steps;
            o.runs = runs;
            if (!pe.empty()) o.pe_mode = pe;
            cmd_train(config, o, std::cout);
        } else if (evaluate->parsed()) {
            EvaluateOptions o;
            o.agent = agent_kind_from_string(agent);
            o.checkpoints.assign(checkpoints.begin(), checkpoints.end());
            o.samples = samples;
            o.runs = eval_runs;
            cmd_evaluate(config, o, std::cout);
        } else if (report->parsed()) {
            ReportOptions o;
            o.runs_dir = runs_dir;
            o.curves_dir = curves_dir;
            o.plots = !no_plots;
            cmd_report(config, o, std::cout);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
