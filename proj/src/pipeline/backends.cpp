#include "chatpcg/pipeline.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

namespace chatpcg {

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

}  // namespace

std::size_t Conversation::prompt_chars() const {
    std::size_t n = 0;
    for (const auto& m : messages) n += m.content.size();
    return n;
}

std::string LlmBackend::complete(const Conversation& conversation) {
    CallRecord record{conversation.stage, conversation.prompt_chars(), 0, utc_timestamp()};
    try {
        std::string response = do_complete(conversation);
        record.response_chars = response.size();
        log_.push_back(std::move(record));
        return response;
    } catch (...) {
        log_.push_back(std::move(record));
        throw;
    }
}

void write_replay_file(const std::filesystem::path& path, const std::vector<std::string>& responses) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw BackendError("cannot write replay file " + path.string());
    out << nlohmann::json(responses).dump(2) << '\n';
}

std::vector<std::string> read_replay_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw BackendError("cannot open replay file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw BackendError("replay file " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!j.is_array()) throw BackendError("replay file " + path.string() + " must hold a JSON array of strings");
    std::vector<std::string> out;
    for (const auto& item : j) {
        if (!item.is_string()) throw BackendError("replay file " + path.string() + " must hold only strings");
        out.push_back(item.get<std::string>());
    }
    return out;
}

ReplayBackend::ReplayBackend(std::vector<std::string> responses) : responses_(std::move(responses)) {}

ReplayBackend ReplayBackend::from_file(const std::filesystem::path& path) {
    return ReplayBackend(read_replay_file(path));
}

std::string ReplayBackend::do_complete(const Conversation& conversation) {
    if (next_ >= responses_.size()) {
        throw BackendError("replay exhausted after " + std::to_string(responses_.size()) + " responses (stage " +
                           conversation.stage + ")");
    }
    return responses_[next_++];
}

RecordingBackend::RecordingBackend(LlmBackend& inner, std::filesystem::path path)
    : inner_(inner), path_(std::move(path)) {}

std::string RecordingBackend::do_complete(const Conversation& conversation) {
    std::string response = inner_.complete(conversation);
    recorded_.push_back(response);
    write_replay_file(path_, recorded_);
    return response;
}

ScriptedBackend::ScriptedBackend(Responder responder) : responder_(std::move(responder)) {}

ScriptedBackend::ScriptedBackend(std::vector<std::string> responses)
    : responder_([responses = std::move(responses)](const Conversation&, int call) -> std::string {
          if (call >= static_cast<int>(responses.size())) throw BackendError("scripted responses exhausted");
          return responses[static_cast<std::size_t>(call)];
      }) {}

std::string ScriptedBackend::do_complete(const Conversation& conversation) {
    return responder_(conversation, calls_++);
}

}  // namespace chatpcg
