#include "chatpcg/cli.hpp"

#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <spdlog/spdlog.h>

namespace chatpcg::cli {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::string fixed(double v, int digits = 3) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

std::string run_label(const std::string& reward, const std::string& pe_mode) {
    if (pe_mode.empty() || pe_mode == "none") return reward;
    return reward + "_" + pe_mode;
}

std::uint64_t evaluation_seed(const RunConfig& config, int run) {
    return derive_seed(derive_seed(config.seed, "evaluate"), static_cast<std::uint64_t>(run));
}

}  // namespace

CollectLogsResult cmd_collect_logs(const RunConfig& config, int rows, std::ostream& out) {
    if (rows < 1) throw UsageError("--rows must be ≥ 1");
    const RunLayout layout{config.output_dir};
    const Simulator sim(config.game);
    LogSamplingConfig sampling;
    sampling.seed = derive_seed(config.seed, "collect_logs");
    const std::vector<PlaytestRow> data = collect_log_dataset(sim, rows, sampling);
    CollectLogsResult result;
    result.dataset_path = layout.dataset();
    fs::create_directories(result.dataset_path.parent_path());
    write_playtest_jsonl(data, result.dataset_path);
    result.summary = summarize(data);
    out << "wrote " << data.size() << " rows to " << result.dataset_path.string() << '\n'
        << "winrate " << fixed(result.summary.winrate) << ", mean episode ticks "
        << fixed(result.summary.mean_episode_ticks, 1) << '\n';
    write_manifest(layout.root);
    return result;
}

DesignRewardResult cmd_design_reward(const RunConfig& config, const DesignRewardOptions& options, std::ostream& out) {
    const RunLayout layout{config.output_dir};
    const fs::path dataset = options.dataset.empty() ? layout.dataset() : options.dataset;
    if (!fs::exists(dataset)) throw UsageError("dataset not found: " + dataset.string() + " (run collect-logs first)");

    PipelineConfig pc = PipelineConfig::defaults(config.game);
    pc.mode = options.mode.value_or(config.pipeline.mode);
    pc.n_align = config.pipeline.n_align;
    pc.m_rows = config.pipeline.m_rows;
    pc.retry_limit = config.pipeline.retry_limit;
    pc.rng_seed = derive_seed(config.seed, "design_reward");
    pc.log_dataset_path = dataset;

    const std::string kind = options.backend.value_or(config.pipeline.backend);
    std::unique_ptr<LlmBackend> backend;
    if (kind == "scripted") {
        backend = std::make_unique<ScriptedBackend>(canned_designer());
    } else if (kind == "replay") {
        const fs::path replay = options.replay_file.empty() ? config.pipeline.replay_file : options.replay_file;
        if (replay.empty()) throw UsageError("--backend replay needs --replay-file");
        if (!fs::exists(replay)) throw UsageError("replay file not found: " + replay.string());
        backend = std::make_unique<ReplayBackend>(ReplayBackend::from_file(replay));
    } else if (kind == "http") {
        backend = std::make_unique<HttpBackend>(config.pipeline.http);
    } else {
        throw UsageError("unknown backend '" + kind + "' (expected http, replay or scripted)");
    }
    const fs::path record = options.record_file.empty() ? config.pipeline.record_file : options.record_file;
    std::unique_ptr<RecordingBackend> recorder;
    LlmBackend* active = backend.get();
    if (!record.empty()) {
        recorder = std::make_unique<RecordingBackend>(*backend, record);
        active = recorder.get();
    }

    DesignRewardResult result;
    result.transcript_path = layout.transcript();
    result.program_path = layout.program();
    fs::remove(result.program_path);
    try {
        result.transcript = run_pipeline(*active, pc, {result.transcript_path, result.program_path});
    } catch (...) {
        write_manifest(layout.root);
        throw;
    }
    const auto& t = result.transcript;
    out << "mode " << to_string(t.mode) << ": " << t.insights.size() << " insights, " << t.iterations.size()
        << " alignment iterations, " << t.backend_call_log.size() << " backend calls\n";
    for (const auto& m : t.final_program.modules) out << "  module " << m.name << " weight " << m.weight << '\n';
    out << "wrote " << result.program_path.string() << " and " << result.transcript_path.string() << '\n';
    write_manifest(layout.root);
    return result;
}

TrainCommandResult cmd_train(const RunConfig& config, const TrainOptions& options, std::ostream& out) {
    const RunLayout layout{config.output_dir};
    const long steps = options.steps.value_or(config.train_steps);
    const int runs = options.runs.value_or(config.train_runs);
    if (steps < 1) throw UsageError("--steps must be ≥ 1");
    if (runs < 1) throw UsageError("--runs must be ≥ 1");

    RewardSpec spec;
    spec.kind = options.reward;
    std::string pe_mode = "none";
    std::string program_source;
    if (options.reward != RewardKind::Winrate) {
        if (options.program.empty()) {
            throw UsageError("--reward " + std::string(to_string(options.reward)) + " requires --program");
        }
        program_source = read_text(options.program);
        dsl::RewardProgram program = dsl::parse_program(program_source, options.program.stem().string());
        const auto diagnostics = dsl::validate(program, dsl::playtest_catalog(config.game));
        if (!diagnostics.empty()) {
            throw UsageError(options.program.string() + " does not validate:\n" + dsl::format_diagnostics(diagnostics));
        }
        spec.program = std::move(program);
        pe_mode = std::string(to_string(config.pipeline.mode));
        const fs::path transcript = options.program.parent_path() / "transcript.json";
        if (fs::exists(transcript)) {
            pe_mode = nlohmann::json::parse(read_text(transcript)).value("mode", pe_mode);
        }
        if (options.pe_mode) pe_mode = *options.pe_mode;
    } else if (!options.program.empty()) {
        spdlog::warn("--program is ignored for --reward winrate");
    }

    TrainCommandResult result;
    result.label = run_label(std::string(to_string(options.reward)), pe_mode);
    const std::uint64_t train_seeds = derive_seed(config.seed, "train");
    for (int k = 0; k < runs; ++k) {
        TrainRunArtifacts run;
        run.run = k;
        run.seed = derive_seed(train_seeds, static_cast<std::uint64_t>(k));
        run.dir = layout.train_dir() / result.label / ("run_" + std::to_string(k));
        run.checkpoint = run.dir / "policy.json";
        run.curve = run.dir / "curve.csv";
        GenEnv env(config.game, config.env, spec);
        const TrainResult trained = train(env, steps, config.trainer, run.seed, {run.checkpoint, run.curve});
        run.curve_points = trained.curve;
        write_json(run.dir / "train_meta.json", {{"reward", to_string(options.reward)},
                                                 {"pe_mode", pe_mode},
                                                 {"run", k},
                                                 {"seed", run.seed},
                                                 {"steps", steps},
                                                 {"program", program_source},
                                                 {"env", config.env},
                                                 {"hyperparams", config.trainer}});
        const CurvePoint last = trained.curve.empty() ? CurvePoint{} : trained.curve.back();
        out << result.label << " run " << k << ": " << steps << " steps, final |goal - winrate| "
            << fixed(last.mean_winrate_error) << ", entropy " << fixed(last.entropy) << " -> "
            << run.checkpoint.string() << '\n';
        result.runs.push_back(std::move(run));
    }
    write_manifest(layout.root);
    return result;
}

AgentKind agent_kind_from_string(std::string_view s) {
    if (s == "checkpoint") return AgentKind::Checkpoint;
    if (s == "random") return AgentKind::Random;
    if (s == "heuristic") return AgentKind::Heuristic;
    throw UsageError("unknown agent '" + std::string(s) + "' (expected checkpoint, random or heuristic)");
}

std::vector<EvaluationRecord> cmd_evaluate(const RunConfig& config, const EvaluateOptions& options, std::ostream& out) {
    const RunLayout layout{config.output_dir};
    const int samples = options.samples.value_or(config.eval.samples);
    if (samples < 1) throw UsageError("--samples must be ≥ 1");
    if (options.agent == AgentKind::Checkpoint && options.checkpoints.empty()) {
        throw UsageError("--agent checkpoint requires --checkpoint");
    }
    if (options.agent != AgentKind::Checkpoint && options.runs < 1) throw UsageError("--runs must be ≥ 1");

    const Simulator sim(config.game);
    const double goal = config.env.goal_winrate;
    struct Job {
        std::unique_ptr<ContentGenerator> generator;
        std::string reward;
        std::string pe_mode;
        int run = 0;
        std::string source;
    };
    std::vector<Job> jobs;
    if (options.agent == AgentKind::Checkpoint) {
        for (const auto& path : options.checkpoints) {
            if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path.string());
            Job job;
            job.generator = std::make_unique<PolicyAgent>(load_checkpoint(path), config.game, config.env, true);
            job.source = path.string();
            const fs::path meta_path = path.parent_path() / "train_meta.json";
            if (fs::exists(meta_path)) {
                const auto meta = nlohmann::json::parse(read_text(meta_path));
                job.reward = meta.value("reward", "");
                job.pe_mode = meta.value("pe_mode", "");
                job.run = meta.value("run", 0);
            }
            jobs.push_back(std::move(job));
        }
    } else {
        for (int k = 0; k < options.runs; ++k) {
            Job job;
            if (options.agent == AgentKind::Random) {
                job.generator = std::make_unique<RandomAgent>(config.game);
            } else {
                HeuristicConfig h = config.heuristic;
                h.goal = goal;
                job.generator = std::make_unique<HeuristicAgent>(config.game, h);
            }
            job.run = k;
            job.source = job.generator->name();
            jobs.push_back(std::move(job));
        }
    }

    const fs::path csv_path = layout.eval_dir() / "reports.csv";
    fs::create_directories(layout.eval_dir() / "samples");
    const bool new_csv = !fs::exists(csv_path);
    std::ofstream csv(csv_path, std::ios::binary | std::ios::app);
    if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
    if (new_csv) csv << eval_report_csv_header() << '\n';

    std::vector<EvaluationRecord> records;
    for (auto& job : jobs) {
        const std::vector<ContentSample> drawn = sample_contents(*job.generator, sim, samples,
                                                                 config.eval.measure_episodes,
                                                                 evaluation_seed(config, job.run));
        EvaluationRecord rec;
        rec.report = evaluate_generator(drawn, goal, config.eval.threshold, config.game);
        rec.report.generator = job.generator->name();
        rec.report.reward = job.reward;
        rec.report.pe_mode = job.pe_mode;
        rec.run = job.run;
        rec.source = job.source;
        std::string stem = rec.report.generator;
        if (!job.reward.empty()) stem += "_" + run_label(job.reward, job.pe_mode);
        stem += "_run" + std::to_string(job.run);
        rec.report_path = layout.eval_dir() / (stem + ".json");
        rec.samples_path = layout.eval_dir() / "samples" / (stem + ".jsonl");
        nlohmann::json j = to_json(rec.report);
        j["run"] = rec.run;
        j["source"] = rec.source;
        j["seed"] = evaluation_seed(config, job.run);
        write_json(rec.report_path, j);
        write_content_samples(drawn, rec.samples_path);
        csv << eval_report_csv_row(rec.report) << '\n';
        out << stem << ": Ctr " << fixed(rec.report.ctr) << "  Div " << fixed(rec.report.div) << "  Tbs "
            << fixed(rec.report.tbs) << "  valid " << rec.report.n_valid << "/" << rec.report.n_samples << '\n';
        records.push_back(std::move(rec));
    }
    csv.close();
    write_manifest(layout.root);
    return records;
}

}  // namespace chatpcg::cli
