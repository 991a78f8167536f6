#pragma once

#include "chatpcg/reward_dsl.hpp"
#include "chatpcg/simulator.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace chatpcg {

// ---------------------------------------------------------------------------
// Language-model backends

struct ChatMessage {
    std::string role;  // "system", "user" or "assistant"
    std::string content;
};

struct Conversation {
    std::string stage;  // insights, program, feedback, revise; used for logging
    std::vector<ChatMessage> messages;

    std::size_t prompt_chars() const;
};

struct CallRecord {
    std::string role;  // the conversation stage
    std::size_t prompt_chars = 0;
    std::size_t response_chars = 0;
    std::string timestamp;  // UTC, ISO 8601
};

class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;

    // Exactly one response per call. Every call, failed or not, is counted.
    std::string complete(const Conversation& conversation);

    int call_count() const { return static_cast<int>(log_.size()); }
    const std::vector<CallRecord>& call_log() const { return log_; }

protected:
    virtual std::string do_complete(const Conversation& conversation) = 0;

private:
    std::vector<CallRecord> log_;
};

struct HttpBackendConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4-turbo-2024-04-09";
    double temperature = 0.7;
    double timeout_seconds = 120.0;
    int max_attempts = 3;
    double retry_backoff_seconds = 2.0;
    std::string api_key_env = "CHATPCG_API_KEY";
};

// POSTs {model, messages, temperature} to base_url + "/chat/completions".
class HttpBackend final : public LlmBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    const HttpBackendConfig& config() const { return config_; }

protected:
    std::string do_complete(const Conversation& conversation) override;

private:
    HttpBackendConfig config_;
    std::string api_key_;
};

nlohmann::json chat_request_body(const HttpBackendConfig& config, const Conversation& conversation);

// Plays back a JSON array of response strings in call order.
class ReplayBackend final : public LlmBackend {
public:
    explicit ReplayBackend(std::vector<std::string> responses);
    static ReplayBackend from_file(const std::filesystem::path& path);
    std::size_t remaining() const { return responses_.size() - next_; }

protected:
    std::string do_complete(const Conversation& conversation) override;

private:
    std::vector<std::string> responses_;
    std::size_t next_ = 0;
};

// Forwards to another backend and rewrites the replay file after every call.
class RecordingBackend final : public LlmBackend {
public:
    RecordingBackend(LlmBackend& inner, std::filesystem::path path);
    const std::vector<std::string>& recorded() const { return recorded_; }

protected:
    std::string do_complete(const Conversation& conversation) override;

private:
    LlmBackend& inner_;
    std::filesystem::path path_;
    std::vector<std::string> recorded_;
};

void write_replay_file(const std::filesystem::path& path, const std::vector<std::string>& responses);
std::vector<std::string> read_replay_file(const std::filesystem::path& path);

class ScriptedBackend final : public LlmBackend {
public:
    // Receives the conversation and the zero-based call index.
    using Responder = std::function<std::string(const Conversation&, int)>;

    explicit ScriptedBackend(Responder responder);
    // Returns the fixed responses in order, then fails.
    explicit ScriptedBackend(std::vector<std::string> responses);

protected:
    std::string do_complete(const Conversation& conversation) override;

private:
    Responder responder_;
    int calls_ = 0;
};

// Deterministic stand-in designer: three insights, a three-module program over
// the playtest catalog, and one weight adjustment per revision.
ScriptedBackend::Responder canned_designer();

// ---------------------------------------------------------------------------
// Prompt templates

inline constexpr int kPromptTemplateVersion = 1;

// Built-in template text by name (system, insights, program, feedback, revise,
// repair, grammar, env_description, design_principle).
const std::string& prompt_template(const std::string& name);

// Replaces every {{key}}; throws std::invalid_argument on a missing key.
std::string render_template(const std::string& text, const std::map<std::string, std::string>& values);

// ---------------------------------------------------------------------------
// Pipeline

enum class PipelineMode { Io, Cot };
std::string_view to_string(PipelineMode mode);
PipelineMode pipeline_mode_from_string(std::string_view s);

class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A generated program kept failing to parse or validate.
class SynthesisError : public PipelineError {
public:
    SynthesisError(const std::string& stage, int attempts, std::string diagnostics);
    const std::string& diagnostics() const noexcept { return diagnostics_; }
    int attempts() const noexcept { return attempts_; }

private:
    std::string diagnostics_;
    int attempts_;
};

struct PipelineConfig {
    std::string env_description;
    std::string design_principle;
    dsl::RewardConstraints constraints;
    int n_align = 5;
    int m_rows = 20;
    PipelineMode mode = PipelineMode::Cot;
    int retry_limit = 3;
    std::filesystem::path log_dataset_path;
    std::uint64_t rng_seed = 0;
    int max_insights = 8;
    std::size_t insight_max_chars = 400;

    // Built-in env description and design principle, the playtest catalog of
    // `game`, output range [-1, 1].
    static PipelineConfig defaults(const GameConfig& game);
    void validate() const;
    int effective_n_align() const { return mode == PipelineMode::Io ? 0 : n_align; }
};

struct InsightSet {
    std::vector<std::string> items;
};

struct AlignmentIteration {
    std::string program_source;
    dsl::ModuleEvalReport eval_report;
    std::string feedback;
};

struct PipelineTranscript {
    PipelineMode mode = PipelineMode::Cot;
    int n_align = 0;
    int m_rows = 0;
    std::uint64_t rng_seed = 0;
    std::vector<std::string> insights;
    std::vector<std::uint64_t> alignment_row_seeds;
    std::vector<AlignmentIteration> iterations;
    dsl::RewardProgram final_program;
    std::vector<CallRecord> backend_call_log;
    std::string status = "ok";
    std::string error;
};

nlohmann::json to_json(const PipelineTranscript& t);
// Restores everything except the parsed final program's positions.
PipelineTranscript transcript_from_json(const nlohmann::json& j);

std::string build_insight_prompt(const PipelineConfig& config);
std::string build_program_prompt(const InsightSet& insights, const PipelineConfig& config);
std::string build_feedback_prompt(const dsl::RewardProgram& program, const dsl::ModuleEvalReport& report,
                                  const PipelineConfig& config);
std::string build_revise_prompt(const dsl::RewardProgram& program, const std::string& feedback,
                                const PipelineConfig& config);

// Numbered-list items ("1. text" or "1) text"); wrapped lines join their item.
std::vector<std::string> extract_numbered_list(const std::string& text);
// The first fenced code block if present, otherwise the whole text.
std::string extract_program_text(const std::string& text);

InsightSet generate_insights(LlmBackend& backend, const PipelineConfig& config);
dsl::RewardProgram generate_initial_program(LlmBackend& backend, const InsightSet& insights,
                                            const PipelineConfig& config);
std::vector<PlaytestRow> sample_alignment_rows(const std::vector<PlaytestRow>& dataset, int m, std::uint64_t seed);
std::string generate_feedback(LlmBackend& backend, const dsl::RewardProgram& program,
                              const dsl::ModuleEvalReport& report, const PipelineConfig& config);
dsl::RewardProgram revise_program(LlmBackend& backend, const dsl::RewardProgram& program,
                                  const std::string& feedback, const PipelineConfig& config);

struct PipelineOutputs {
    std::filesystem::path transcript_path;  // empty: not written
    std::filesystem::path program_path;
};

// Uses `dataset` for alignment rows. On any stage error the partial transcript
// is written with status "error" before the exception propagates.
PipelineTranscript run_pipeline(LlmBackend& backend, const PipelineConfig& config,
                                const std::vector<PlaytestRow>& dataset, const PipelineOutputs& outputs = {});
// Reads the dataset from config.log_dataset_path.
PipelineTranscript run_pipeline(LlmBackend& backend, const PipelineConfig& config,
                                const PipelineOutputs& outputs = {});

}  // namespace chatpcg
