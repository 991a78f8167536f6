#include "chatpcg/pipeline.hpp"

#include <charconv>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

#include <spdlog/spdlog.h>

namespace chatpcg {

namespace {

std::string num(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string catalog_text(const dsl::VariableCatalog& catalog) {
    std::string out;
    for (const auto& e : catalog.entries()) {
        if (e.constant) {
            out += "- " + e.name + " = " + num(*e.constant) + " (constant): " + e.description + "\n";
        } else {
            out += "- " + e.name + ": " + e.description + ", range [" + num(e.lo) + ", " +
                   (e.hi ? num(*e.hi) : std::string("unbounded")) + "]\n";
        }
    }
    return out;
}

std::string stats_text(const dsl::Stats& s) {
    return "min " + num(s.min) + ", max " + num(s.max) + ", mean " + num(s.mean) + ", std " + num(s.std);
}

std::string report_text(const dsl::RewardProgram& program, const dsl::ModuleEvalReport& report,
                        const PipelineConfig& config) {
    std::string out;
    out += "rows evaluated: " + std::to_string(report.evaluated_rows()) + " of " + std::to_string(report.n_rows) +
           "\n";
    for (std::size_t i = 0; i < report.modules.size(); ++i) {
        const auto& m = report.modules[i];
        const double w = i < program.modules.size() ? program.modules[i].weight : 0.0;
        out += "module " + m.name + " (weight " + num(w) + "): " + stats_text(m.stats) + "\n";
    }
    out += "total reward: " + stats_text(report.total) + "\n";
    out += "rows with total outside [" + num(config.constraints.lo) + ", " + num(config.constraints.hi) +
           "]: " + std::to_string(report.range_violations) + "\n";
    out += "rows with evaluation errors: " + std::to_string(report.error_rows) + "\n";
    if (!report.first_error.empty()) out += "first evaluation error: " + report.first_error + "\n";
    return out;
}

Conversation start(const std::string& stage, std::string prompt) {
    return {stage, {{"system", prompt_template("system")}, {"user", std::move(prompt)}}};
}

std::string clip(std::string s, std::size_t cap) {
    if (s.size() <= cap) return s;
    auto cut = s.rfind(' ', cap);
    if (cut == std::string::npos || cut < cap / 2) cut = cap;
    s.resize(cut);
    return trim(s);
}

// Asks until the reply parses and validates, sending diagnostics back each time.
dsl::RewardProgram synthesize(LlmBackend& backend, Conversation conversation, const PipelineConfig& config) {
    std::string diagnostics;
    const int attempts = config.retry_limit + 1;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        const std::string response = backend.complete(conversation);
        const std::string text = extract_program_text(response);
        try {
            dsl::RewardProgram program = dsl::parse_program(text);
            const auto problems = dsl::validate(program, config.constraints);
            if (problems.empty()) return program;
            diagnostics = dsl::format_diagnostics(problems);
        } catch (const dsl::ParseError& e) {
            diagnostics = e.what();
        }
        spdlog::warn("{} attempt {} of {} rejected: {}", conversation.stage, attempt, attempts, trim(diagnostics));
        conversation.messages.push_back({"assistant", response});
        conversation.messages.push_back({"user", render_template(prompt_template("repair"),
                                                                 {{"diagnostics", trim(diagnostics)}})});
    }
    throw SynthesisError(conversation.stage, attempts, diagnostics);
}

nlohmann::json call_to_json(const CallRecord& c) {
    return {{"role", c.role},
            {"prompt_chars", c.prompt_chars},
            {"response_chars", c.response_chars},
            {"timestamp", c.timestamp}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw PipelineError("cannot write " + path.string());
    out << text;
    if (!out) throw PipelineError("failed writing " + path.string());
}

}  // namespace

std::string_view to_string(PipelineMode mode) { return mode == PipelineMode::Io ? "io" : "cot"; }

PipelineMode pipeline_mode_from_string(std::string_view s) {
    if (s == "io") return PipelineMode::Io;
    if (s == "cot") return PipelineMode::Cot;
    throw std::invalid_argument("unknown pipeline mode '" + std::string(s) + "' (expected io or cot)");
}

SynthesisError::SynthesisError(const std::string& stage, int attempts, std::string diagnostics)
    : PipelineError(stage + ": no valid program after " + std::to_string(attempts) + " attempts:\n" + diagnostics),
      diagnostics_(std::move(diagnostics)),
      attempts_(attempts) {}

PipelineConfig PipelineConfig::defaults(const GameConfig& game) {
    PipelineConfig c;
    c.env_description = render_template(prompt_template("env_description"),
                                        {{"max_ticks", std::to_string(game.max_ticks)}});
    c.design_principle = prompt_template("design_principle");
    c.constraints.catalog = dsl::playtest_catalog(game);
    return c;
}

void PipelineConfig::validate() const {
    if (n_align < 0) throw ConfigError("n_align", "n_align must be ≥ 0");
    if (m_rows < 1) throw ConfigError("m_rows", "m_rows must be ≥ 1");
    if (retry_limit < 0) throw ConfigError("retry_limit", "retry_limit must be ≥ 0");
    if (max_insights < 1) throw ConfigError("max_insights", "max_insights must be ≥ 1");
    if (insight_max_chars < 1) throw ConfigError("insight_max_chars", "insight_max_chars must be ≥ 1");
    if (!(constraints.lo < constraints.hi)) throw ConfigError("output_range", "output range must satisfy lo < hi");
    if (constraints.catalog.size() == 0) throw ConfigError("catalog", "variable catalog is empty");
}

std::string build_insight_prompt(const PipelineConfig& config) {
    return render_template(prompt_template("insights"), {{"env_description", trim(config.env_description)},
                                                         {"design_principle", trim(config.design_principle)},
                                                         {"catalog", catalog_text(config.constraints.catalog)},
                                                         {"range_lo", num(config.constraints.lo)},
                                                         {"range_hi", num(config.constraints.hi)},
                                                         {"max_insights", std::to_string(config.max_insights)}});
}

std::string build_program_prompt(const InsightSet& insights, const PipelineConfig& config) {
    std::string list;
    for (std::size_t i = 0; i < insights.items.size(); ++i) {
        list += std::to_string(i + 1) + ". " + insights.items[i] + "\n";
    }
    return render_template(prompt_template("program"), {{"insights", list},
                                                        {"catalog", catalog_text(config.constraints.catalog)},
                                                        {"grammar", trim(prompt_template("grammar"))},
                                                        {"range_lo", num(config.constraints.lo)},
                                                        {"range_hi", num(config.constraints.hi)}});
}

std::string build_feedback_prompt(const dsl::RewardProgram& program, const dsl::ModuleEvalReport& report,
                                  const PipelineConfig& config) {
    return render_template(prompt_template("feedback"), {{"program", trim(dsl::print_program(program))},
                                                         {"n_rows", std::to_string(report.n_rows)},
                                                         {"report", report_text(program, report, config)},
                                                         {"range_lo", num(config.constraints.lo)},
                                                         {"range_hi", num(config.constraints.hi)}});
}

std::string build_revise_prompt(const dsl::RewardProgram& program, const std::string& feedback,
                                const PipelineConfig& config) {
    return render_template(prompt_template("revise"), {{"program", trim(dsl::print_program(program))},
                                                       {"feedback", trim(feedback)},
                                                       {"catalog", catalog_text(config.constraints.catalog)},
                                                       {"grammar", trim(prompt_template("grammar"))}});
}

std::vector<std::string> extract_numbered_list(const std::string& text) {
    static const std::regex item(R"(^\s*\**\s*(\d+)\s*[.)]\s*(.*)$)");
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    bool open = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::smatch m;
        if (std::regex_match(line, m, item) && !trim(m[2].str()).empty()) {
            out.push_back(trim(m[2].str()));
            open = true;
        } else if (open && !line.empty() && (line[0] == ' ' || line[0] == '\t') && !trim(line).empty()) {
            out.back() += " " + trim(line);
        } else {
            open = false;
        }
    }
    return out;
}

std::string extract_program_text(const std::string& text) {
    const auto fence = text.find("```");
    if (fence == std::string::npos) return text;
    const auto body = text.find('\n', fence);
    if (body == std::string::npos) return text;
    const auto end = text.find("```", body + 1);
    return text.substr(body + 1, end == std::string::npos ? std::string::npos : end - body - 1);
}

InsightSet generate_insights(LlmBackend& backend, const PipelineConfig& config) {
    Conversation conversation = start("insights", build_insight_prompt(config));
    for (int attempt = 0; attempt < 2; ++attempt) {
        const std::string response = backend.complete(conversation);
        auto items = extract_numbered_list(response);
        if (!items.empty()) {
            InsightSet set;
            for (auto& s : items) {
                if (static_cast<int>(set.items.size()) == config.max_insights) break;
                set.items.push_back(clip(std::move(s), config.insight_max_chars));
            }
            return set;
        }
        conversation.messages.push_back({"assistant", response});
        conversation.messages.push_back(
            {"user", "Your reply did not contain a numbered list. Reply only with lines of the form \"1. insight\"."});
    }
    throw PipelineError("insights: no numbered list in the response after one reprompt");
}

dsl::RewardProgram generate_initial_program(LlmBackend& backend, const InsightSet& insights,
                                            const PipelineConfig& config) {
    if (insights.items.empty()) throw PipelineError("program: insight set is empty");
    return synthesize(backend, start("program", build_program_prompt(insights, config)), config);
}

std::vector<PlaytestRow> sample_alignment_rows(const std::vector<PlaytestRow>& dataset, int m, std::uint64_t seed) {
    if (m < 1) throw PipelineError("alignment sample size must be ≥ 1");
    if (static_cast<std::size_t>(m) > dataset.size()) {
        throw PipelineError("log dataset has " + std::to_string(dataset.size()) + " rows, " + std::to_string(m) +
                            " requested");
    }
    std::vector<std::size_t> idx(dataset.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    std::vector<PlaytestRow> out;
    out.reserve(static_cast<std::size_t>(m));
    for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
        std::swap(idx[i], idx[j]);
        out.push_back(dataset[idx[i]]);
    }
    return out;
}

std::string generate_feedback(LlmBackend& backend, const dsl::RewardProgram& program,
                              const dsl::ModuleEvalReport& report, const PipelineConfig& config) {
    Conversation conversation = start("feedback", build_feedback_prompt(program, report, config));
    for (int attempt = 0; attempt <= config.retry_limit; ++attempt) {
        const std::string response = backend.complete(conversation);
        std::string text = trim(response);
        if (!text.empty()) return text;
        conversation.messages.push_back({"assistant", response});
        conversation.messages.push_back({"user", "The reply was empty. Give exactly one piece of feedback."});
    }
    throw PipelineError("feedback: empty response after " + std::to_string(config.retry_limit + 1) + " attempts");
}

dsl::RewardProgram revise_program(LlmBackend& backend, const dsl::RewardProgram& program,
                                  const std::string& feedback, const PipelineConfig& config) {
    return synthesize(backend, start("revise", build_revise_prompt(program, feedback, config)), config);
}

nlohmann::json to_json(const PipelineTranscript& t) {
    nlohmann::json iterations = nlohmann::json::array();
    for (const auto& it : t.iterations) {
        iterations.push_back(
            {{"program_source", it.program_source}, {"eval_report", dsl::to_json(it.eval_report)}, {"feedback", it.feedback}});
    }
    nlohmann::json modules = nlohmann::json::array();
    for (const auto& m : t.final_program.modules) {
        modules.push_back({{"name", m.name}, {"weight", m.weight}, {"insight_text", m.insight_text}});
    }
    nlohmann::json calls = nlohmann::json::array();
    for (const auto& c : t.backend_call_log) calls.push_back(call_to_json(c));
    return {{"prompt_template_version", kPromptTemplateVersion},
            {"status", t.status},
            {"error", t.error},
            {"mode", to_string(t.mode)},
            {"n_align", t.n_align},
            {"m_rows", t.m_rows},
            {"rng_seed", t.rng_seed},
            {"insights", t.insights},
            {"alignment_row_seeds", t.alignment_row_seeds},
            {"iterations", std::move(iterations)},
            {"final_program",
             {{"source", t.final_program.modules.empty() ? std::string() : dsl::print_program(t.final_program)},
              {"modules", std::move(modules)}}},
            {"backend_call_log", std::move(calls)}};
}

PipelineTranscript transcript_from_json(const nlohmann::json& j) {
    PipelineTranscript t;
    t.status = j.at("status").get<std::string>();
    t.error = j.value("error", "");
    t.mode = pipeline_mode_from_string(j.at("mode").get<std::string>());
    t.n_align = j.at("n_align").get<int>();
    t.m_rows = j.at("m_rows").get<int>();
    t.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    t.insights = j.at("insights").get<std::vector<std::string>>();
    t.alignment_row_seeds = j.at("alignment_row_seeds").get<std::vector<std::uint64_t>>();
    for (const auto& it : j.at("iterations")) {
        t.iterations.push_back({it.at("program_source").get<std::string>(), dsl::report_from_json(it.at("eval_report")),
                                it.at("feedback").get<std::string>()});
    }
    const std::string source = j.at("final_program").at("source").get<std::string>();
    if (!source.empty()) t.final_program = dsl::parse_program(source);
    for (const auto& c : j.at("backend_call_log")) {
        t.backend_call_log.push_back({c.at("role").get<std::string>(), c.at("prompt_chars").get<std::size_t>(),
                                      c.at("response_chars").get<std::size_t>(), c.at("timestamp").get<std::string>()});
    }
    return t;
}

PipelineTranscript run_pipeline(LlmBackend& backend, const PipelineConfig& config,
                                const std::vector<PlaytestRow>& dataset, const PipelineOutputs& outputs) {
    config.validate();
    PipelineTranscript t;
    t.mode = config.mode;
    t.n_align = config.effective_n_align();
    t.m_rows = config.m_rows;
    t.rng_seed = config.rng_seed;
    const std::size_t first_call = backend.call_log().size();

    auto flush = [&] {
        t.backend_call_log.assign(backend.call_log().begin() + static_cast<std::ptrdiff_t>(first_call),
                                  backend.call_log().end());
        if (!outputs.transcript_path.empty()) write_text(outputs.transcript_path, to_json(t).dump(2) + "\n");
    };

    try {
        const InsightSet insights = generate_insights(backend, config);
        t.insights = insights.items;
        dsl::RewardProgram current = generate_initial_program(backend, insights, config);
        t.final_program = current;

        if (t.n_align > 0) {
            const auto rows = sample_alignment_rows(dataset, config.m_rows, derive_seed(config.rng_seed, "alignment_rows"));
            for (const auto& r : rows) t.alignment_row_seeds.push_back(r.seed);
            for (int i = 0; i < t.n_align; ++i) {
                AlignmentIteration it;
                it.program_source = dsl::print_program(current);
                it.eval_report = dsl::evaluate_batch(current, rows, config.constraints);
                it.feedback = generate_feedback(backend, current, it.eval_report, config);
                t.iterations.push_back(it);
                current = revise_program(backend, current, it.feedback, config);
                t.final_program = current;
                spdlog::info("alignment iteration {}/{}: {} range violations, {} error rows", i + 1, t.n_align,
                             it.eval_report.range_violations, it.eval_report.error_rows);
            }
        }
    } catch (const std::exception& e) {
        t.status = "error";
        t.error = e.what();
        flush();
        throw;
    }
    flush();
    if (!outputs.program_path.empty()) write_text(outputs.program_path, dsl::print_program(t.final_program));
    return t;
}

PipelineTranscript run_pipeline(LlmBackend& backend, const PipelineConfig& config, const PipelineOutputs& outputs) {
    if (config.log_dataset_path.empty()) throw PipelineError("no log dataset path configured");
    if (!std::filesystem::exists(config.log_dataset_path)) {
        throw PipelineError("log dataset not found: " + config.log_dataset_path.string());
    }
    return run_pipeline(backend, config, read_playtest_jsonl(config.log_dataset_path), outputs);
}

}  // namespace chatpcg
