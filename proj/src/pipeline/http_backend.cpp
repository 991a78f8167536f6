#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "chatpcg/pipeline.hpp"

#include <cmath>
#include <cstdlib>
#include <thread>

#include <spdlog/spdlog.h>

namespace chatpcg {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;    // without trailing slash
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw BackendError("base_url must include a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    SplitUrl out;
    out.origin = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    return out;
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

nlohmann::json chat_request_body(const HttpBackendConfig& config, const Conversation& conversation) {
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : conversation.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    return {{"model", config.model}, {"messages", std::move(messages)}, {"temperature", config.temperature}};
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
    if (config_.max_attempts < 1) throw BackendError("max_attempts must be ≥ 1");
    if (!(config_.timeout_seconds > 0.0)) throw BackendError("timeout_seconds must be positive");
    split_url(config_.base_url);
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
}

std::string HttpBackend::do_complete(const Conversation& conversation) {
    const SplitUrl url = split_url(config_.base_url);
    httplib::Client client(url.origin);
    const auto seconds = static_cast<time_t>(config_.timeout_seconds);
    const auto usec = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, usec);
    client.set_read_timeout(seconds, usec);
    client.set_write_timeout(seconds, usec);

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    const std::string body = chat_request_body(config_, conversation).dump();
    const std::string path = url.path + "/chat/completions";

    std::string last_error;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        if (attempt > 1) {
            const double wait = config_.retry_backoff_seconds * std::pow(2.0, attempt - 2);
            spdlog::warn("llm request failed ({}); retry {} of {} in {:.1f}s", last_error, attempt - 1,
                         config_.max_attempts - 1, wait);
            std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        }
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            if (retryable_status(res->status)) continue;
            throw BackendError(last_error + ": " + res->body.substr(0, 500));
        }
        try {
            const auto j = nlohmann::json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed chat completion response: ") + e.what());
        }
    }
    throw BackendError("llm request failed after " + std::to_string(config_.max_attempts) +
                       " attempts: " + last_error);
}

}  // namespace chatpcg
