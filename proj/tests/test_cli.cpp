#include "doctest.h"

#include "chatpcg/cli.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace chatpcg;
using namespace chatpcg::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = CHATPCG_SOURCE_DIR;

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("chatpcg_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunConfig small_config(const fs::path& out) {
    RunConfig c;
    c.output_dir = out;
    c.seed = 5;
    c.env.n_episodes = 2;
    c.trainer.hidden = {16};
    c.trainer.curve_interval = 20;
    c.eval.measure_episodes = 4;
    return c;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += !line.empty();
    return n;
}

EvalReport report_with_ctr(double ctr) {
    EvalReport r;
    r.generator = "policy";
    r.reward = "winrate";
    r.pe_mode = "none";
    r.ctr = ctr;
    return r;
}

}  // namespace

TEST_CASE("run config loading") {
    const RunConfig def = load_run_config(kSource / "configs" / "default.json");
    CHECK(def.game_config_path == kSource / "configs" / "game_default.json");
    CHECK(def.train_steps == 20000);
    CHECK(def.train_runs == 3);
    CHECK(def.env.goal_winrate == 0.7);
    CHECK(def.pipeline.mode == PipelineMode::Cot);
    CHECK(def.pipeline.n_align == 5);
    CHECK(def.eval.threshold == 0.4);
    CHECK(def.heuristic.goal == 0.7);

    const auto dir = scratch("config");
    nlohmann::json j = {{"game_config", "missing.json"}};
    CHECK_THROWS_AS(run_config_from_json(j, dir), ConfigError);
    j = {{"pipeline", {{"backend", "carrier-pigeon"}}}};
    CHECK_THROWS_AS(run_config_from_json(j, dir), ConfigError);
    j = {{"env", {{"goal_winrate", 0.5}}}, {"seed", 9}, {"train", {{"hyperparams", {{"gamma", 0.5}}}}}};
    const RunConfig c = run_config_from_json(j, dir);
    CHECK(c.seed == 9);
    CHECK(c.heuristic.goal == 0.5);
    CHECK(c.trainer.gamma == 0.5);
    const RunConfig again = run_config_from_json(to_json(c), dir);
    CHECK(to_json(again) == to_json(c));
    fs::remove_all(dir);
}

TEST_CASE("manifest hashes") {
    const auto dir = scratch("manifest");
    { std::ofstream(dir / "a.txt", std::ios::binary) << "abc"; }
    fs::create_directories(dir / "sub");
    { std::ofstream(dir / "sub" / "empty.txt", std::ios::binary); }
    CHECK(sha256_hex(dir / "a.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    write_manifest(dir);
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    REQUIRE(m.at("files").size() == 2);
    CHECK(m["files"][0]["path"] == "a.txt");
    CHECK(m["files"][0]["bytes"] == 3);
    CHECK(m["files"][1]["path"] == "sub/empty.txt");
    CHECK(m["files"][1]["sha256"] == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    fs::remove_all(dir);
}

TEST_CASE("collect-logs") {
    const auto dir = scratch("collect");
    std::ostringstream out;
    RunConfig c = small_config(dir / "a");
    CHECK(line_count(cmd_collect_logs(c, 1, out).dataset_path) == 1);
    const auto big = cmd_collect_logs(c, 1500, out);
    CHECK(line_count(big.dataset_path) == 1500);
    const std::string hash = sha256_hex(big.dataset_path);
    c.output_dir = dir / "b";
    CHECK(sha256_hex(cmd_collect_logs(c, 1500, out).dataset_path) == hash);
    CHECK(fs::exists(dir / "b" / "manifest.json"));
    CHECK_THROWS_AS(cmd_collect_logs(c, 0, out), UsageError);
    fs::remove_all(dir);
}

TEST_CASE("design-reward modes and backends") {
    const auto dir = scratch("design");
    std::ostringstream out;
    const RunConfig c = small_config(dir);
    CHECK_THROWS_AS(cmd_design_reward(c, {}, out), UsageError);
    cmd_collect_logs(c, 200, out);

    DesignRewardOptions cot;
    cot.mode = PipelineMode::Cot;
    cot.backend = "scripted";
    const auto r = cmd_design_reward(c, cot, out);
    CHECK(r.transcript.iterations.size() == 5);
    CHECK(fs::exists(r.program_path));
    CHECK(fs::exists(r.transcript_path));

    DesignRewardOptions io = cot;
    io.mode = PipelineMode::Io;
    CHECK(cmd_design_reward(c, io, out).transcript.iterations.empty());

    DesignRewardOptions replay;
    replay.backend = "replay";
    CHECK_THROWS_AS(cmd_design_reward(c, replay, out), UsageError);
    replay.replay_file = kSource / "tests" / "fixtures" / "replay_cot_session.json";
    const std::string first = slurp(cmd_design_reward(c, replay, out).program_path);
    const std::string second = slurp(cmd_design_reward(c, replay, out).program_path);
    CHECK(first == second);
    CHECK(first.find("module tank") != std::string::npos);

    DesignRewardOptions recorded = cot;
    recorded.record_file = dir / "session.json";
    const auto rec = cmd_design_reward(c, recorded, out);
    CHECK(read_replay_file(recorded.record_file).size() == rec.transcript.backend_call_log.size());
    fs::remove_all(dir);
}

TEST_CASE("train") {
    const auto dir = scratch("train");
    std::ostringstream out;
    const RunConfig c = small_config(dir);
    TrainOptions hybrid;
    hybrid.reward = RewardKind::Hybrid;
    CHECK_THROWS_AS(cmd_train(c, hybrid, out), UsageError);

    TrainOptions o;
    o.steps = 60;
    const auto r = cmd_train(c, o, out);
    CHECK(r.label == "winrate");
    REQUIRE(r.runs.size() == 3);
    for (const auto& run : r.runs) {
        CHECK(fs::exists(run.checkpoint));
        CHECK(read_training_curve(run.curve).back().step == 60);
        CHECK(load_checkpoint(run.checkpoint).step_count == 60);
    }
    CHECK(r.runs[0].seed != r.runs[1].seed);

    cmd_collect_logs(c, 50, out);
    DesignRewardOptions d;
    d.backend = "scripted";
    d.mode = PipelineMode::Io;
    const auto designed = cmd_design_reward(c, d, out);
    hybrid.program = designed.program_path;
    hybrid.steps = 30;
    hybrid.runs = 1;
    const auto h = cmd_train(c, hybrid, out);
    CHECK(h.label == "hybrid_io");
    const auto meta = nlohmann::json::parse(slurp(h.runs[0].dir / "train_meta.json"));
    CHECK(meta["pe_mode"] == "io");
    CHECK(meta["reward"] == "hybrid");

    { std::ofstream(dir / "bad.rwd") << "module a weight 1: not_a_variable"; }
    hybrid.program = dir / "bad.rwd";
    CHECK_THROWS_AS(cmd_train(c, hybrid, out), UsageError);
    fs::remove_all(dir);
}

TEST_CASE("evaluate") {
    const auto dir = scratch("evaluate");
    std::ostringstream out;
    RunConfig c = small_config(dir);
    c.eval.measure_episodes = 16;

    EvaluateOptions rd;
    rd.agent = AgentKind::Random;
    rd.samples = 200;
    const EvalReport got = cmd_evaluate(c, rd, out).at(0).report;
    CHECK(got.n_samples == 200);

    // Brute-force oracle: E|goal - W| over many independent random teams.
    const Simulator sim(c.game);
    Rng rng(123456);
    double oracle = 0.0;
    const int n = 3000;
    for (int i = 0; i < n; ++i) {
        const TeamConfig team = sim.random_team(rng);
        oracle += std::fabs(0.7 - sim.estimate_winrate(team, 16, rng.next_u64()).winrate);
    }
    oracle /= n;
    CHECK(std::fabs(got.ctr - oracle) < 0.07);

    const EvalReport again = cmd_evaluate(c, rd, out).at(0).report;
    CHECK(nlohmann::json(to_json(again)) == nlohmann::json(to_json(got)));

    rd.samples = 1;
    CHECK(cmd_evaluate(c, rd, out).at(0).report.n_samples == 1);

    EvaluateOptions ck;
    ck.agent = AgentKind::Checkpoint;
    CHECK_THROWS_AS(cmd_evaluate(c, ck, out), UsageError);
    ck.checkpoints = {dir / "nope.json"};
    CHECK_THROWS_AS(cmd_evaluate(c, ck, out), UsageError);

    TrainOptions t;
    t.steps = 24;
    t.runs = 1;
    const auto trained = cmd_train(c, t, out);
    ck.checkpoints = {trained.runs[0].checkpoint};
    ck.samples = 5;
    const auto rec = cmd_evaluate(c, ck, out).at(0);
    CHECK(rec.report.generator == "policy");
    CHECK(rec.report.reward == "winrate");
    CHECK(fs::exists(rec.report_path));
    CHECK(read_content_samples(rec.samples_path).size() == 5);
    CHECK(line_count(dir / "eval" / "reports.csv") == 5);
    CHECK_THROWS_AS(agent_kind_from_string("oracle"), UsageError);
    fs::remove_all(dir);
}

TEST_CASE("report aggregation") {
    const double ctr[] = {0.1, 0.2, 0.3};
    const MeanSd s = mean_sd(ctr);
    CHECK(std::fabs(s.mean - 0.2) <= 1e-12);
    CHECK(std::fabs(s.sd - 0.1) <= 1e-12);
    const double one[] = {0.4};
    CHECK(mean_sd(one).sd == 0.0);

    std::vector<EvalReport> reports{report_with_ctr(0.1), report_with_ctr(0.2), report_with_ctr(0.3)};
    EvalReport rd;
    rd.generator = "random";
    rd.ctr = 0.44;
    reports.push_back(rd);
    const auto rows = summarize_reports(reports);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].generator == "policy");
    CHECK(rows[0].runs == 3);
    CHECK(std::fabs(rows[0].ctr.sd - 0.1) <= 1e-12);
    CHECK(rows[1].ctr.sd == 0.0);
    const std::string table = format_report_table(rows);
    CHECK(table.find("0.200 ± 0.100") != std::string::npos);
    CHECK(table.find("PE mode") != std::string::npos);

    const auto dir = scratch("report");
    std::ostringstream out;
    RunConfig c = small_config(dir);
    CHECK_THROWS_WITH_AS(cmd_report(c, {}, out), doctest::Contains("no reports found"), UsageError);
    fs::create_directories(dir / "eval");
    for (std::size_t i = 0; i < reports.size(); ++i) {
        std::ofstream(dir / "eval" / ("r" + std::to_string(i) + ".json")) << to_json(reports[i]).dump();
    }
    std::ofstream(dir / "eval" / "unrelated.json") << "{\"something\": 1}";
    TrainingCurve curve{{10, 0.0, 0.4, 1.0}, {20, 0.0, 0.3, 1.0}};
    write_training_curve(curve, dir / "train" / "winrate" / "run_0" / "curve.csv");
    const ReportResult r = cmd_report(c, {}, out);
    CHECK(r.rows.size() == 2);
    CHECK(line_count(r.table_csv) == 3);
    REQUIRE(r.plots.size() == 1);
    const std::string svg = slurp(r.plots[0]);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(fs::exists(dir / "manifest.json"));
    fs::remove_all(dir);
}
