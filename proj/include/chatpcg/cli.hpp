#pragma once

#include "chatpcg/gen_env.hpp"
#include "chatpcg/metrics.hpp"
#include "chatpcg/pipeline.hpp"
#include "chatpcg/trainer.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace chatpcg::cli {

// Bad flag combination or missing input; the tool exits with status 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PipelineSettings {
    PipelineMode mode = PipelineMode::Cot;
    int n_align = 5;
    int m_rows = 20;
    int retry_limit = 3;
    std::string backend = "scripted";  // http, replay or scripted
    HttpBackendConfig http;
    std::filesystem::path replay_file;
    std::filesystem::path record_file;  // http only; empty: no recording
};

struct EvalSettings {
    double threshold = 0.4;
    int samples = 100;
    int measure_episodes = 16;
};

struct RunConfig {
    std::filesystem::path game_config_path;  // empty: built-in defaults
    GameConfig game = GameConfig::defaults();
    GenEnvConfig env;
    PipelineSettings pipeline;
    TrainHyperparams trainer;
    long train_steps = 20000;
    int train_runs = 3;
    HeuristicConfig heuristic;
    EvalSettings eval;
    int log_rows = 1500;
    std::filesystem::path output_dir = "runs/default";
    std::uint64_t seed = 0;

    void validate() const;
};

// Relative game_config and replay paths resolve against base_dir; output_dir
// is left as written. Throws ConfigError on bad values or missing files.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

// Artifact locations under a run's output directory.
struct RunLayout {
    std::filesystem::path root;

    std::filesystem::path dataset() const { return root / "logs" / "dataset.jsonl"; }
    std::filesystem::path transcript() const { return root / "reward" / "transcript.json"; }
    std::filesystem::path program() const { return root / "reward" / "program.rwd"; }
    std::filesystem::path train_dir() const { return root / "train"; }
    std::filesystem::path eval_dir() const { return root / "eval"; }
    std::filesystem::path report_dir() const { return root / "report"; }
    std::filesystem::path manifest() const { return root / "manifest.json"; }
};

std::string sha256_hex(const std::filesystem::path& file);
// Lists every file under root except the manifest itself, sorted by path.
nlohmann::json build_manifest(const std::filesystem::path& root);
void write_manifest(const std::filesystem::path& root);

// ---------------------------------------------------------------------------

struct CollectLogsResult {
    std::filesystem::path dataset_path;
    PlaytestSummary summary;
};

CollectLogsResult cmd_collect_logs(const RunConfig& config, int rows, std::ostream& out);

struct DesignRewardOptions {
    std::optional<PipelineMode> mode;
    std::optional<std::string> backend;
    std::filesystem::path replay_file;  // overrides the config
    std::filesystem::path record_file;
    std::filesystem::path dataset;  // default: the run's collected logs
};

struct DesignRewardResult {
    PipelineTranscript transcript;
    std::filesystem::path transcript_path;
    std::filesystem::path program_path;
};

DesignRewardResult cmd_design_reward(const RunConfig& config, const DesignRewardOptions& options, std::ostream& out);

struct TrainOptions {
    RewardKind reward = RewardKind::Winrate;
    std::filesystem::path program;  // required for llm and hybrid
    std::optional<long> steps;
    std::optional<int> runs;
    std::optional<std::string> pe_mode;  // label only; default from the program's transcript or the config
};

struct TrainRunArtifacts {
    int run = 0;
    std::uint64_t seed = 0;
    std::filesystem::path dir;
    std::filesystem::path checkpoint;
    std::filesystem::path curve;
    TrainingCurve curve_points;
};

struct TrainCommandResult {
    std::string label;
    std::vector<TrainRunArtifacts> runs;
};

TrainCommandResult cmd_train(const RunConfig& config, const TrainOptions& options, std::ostream& out);

enum class AgentKind { Checkpoint, Random, Heuristic };
AgentKind agent_kind_from_string(std::string_view s);

struct EvaluateOptions {
    AgentKind agent = AgentKind::Random;
    std::vector<std::filesystem::path> checkpoints;
    std::optional<int> samples;
    int runs = 1;  // baselines only; each checkpoint is one run
};

struct EvaluationRecord {
    EvalReport report;
    int run = 0;
    std::string source;
    std::filesystem::path report_path;
    std::filesystem::path samples_path;
};

std::vector<EvaluationRecord> cmd_evaluate(const RunConfig& config, const EvaluateOptions& options, std::ostream& out);

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation, 0 for a single run
};

MeanSd mean_sd(std::span<const double> values);

struct ReportRow {
    std::string generator;
    std::string pe_mode;
    std::string reward;
    int runs = 0;
    MeanSd ctr;
    MeanSd div;
    MeanSd tbs;
};

struct ReportOptions {
    std::filesystem::path runs_dir;    // default: the run's eval directory
    std::filesystem::path curves_dir;  // default: the run's train directory
    bool plots = true;
};

struct ReportResult {
    std::vector<ReportRow> rows;
    std::filesystem::path table_text;
    std::filesystem::path table_csv;
    std::vector<std::filesystem::path> plots;
};

// Groups eval reports by (generator, pe_mode, reward).
std::vector<ReportRow> summarize_reports(const std::vector<EvalReport>& reports);
std::string format_report_table(const std::vector<ReportRow>& rows);
std::string report_csv_header();
std::string report_csv_row(const ReportRow& row);

ReportResult cmd_report(const RunConfig& config, const ReportOptions& options, std::ostream& out);

// Line plot of mean_winrate_error against step, one polyline per curve.
std::string curves_svg(const std::string& title, const std::vector<std::pair<std::string, TrainingCurve>>& curves);

}  // namespace chatpcg::cli
