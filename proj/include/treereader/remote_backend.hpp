#pragma once

// Chat-completions backend over HTTP(S). Speaks the widely used
// {"model", "messages"} request shape and reads choices[0].message.content.

#include <chrono>
#include <cstdlib>
#include <optional>
#include <regex>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "backend.hpp"
#include "error.hpp"

namespace treereader {

struct RemoteBackendConfig {
    std::string id = "remote";
    std::string endpoint; // e.g. https://api.openai.com/v1/chat/completions
    std::string model;
    std::string api_key_env = "TREEREADER_API_KEY";
    double temperature = 0.0;
    int timeout_seconds = 60;
    int max_retries = 3;
    int backoff_ms = 500; // doubles after each failed attempt
    bool json_mode = true;
};

struct ParsedEndpoint {
    std::string origin; // scheme://host[:port]
    std::string path;
};

inline ParsedEndpoint parse_endpoint(const std::string& url) {
    static const std::regex pattern(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, pattern)) throw Error(ErrorCode::ConfigError, "bad endpoint URL: " + url);
    return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

class ChatCompletionBackend final : public SummarizerBackend {
public:
    explicit ChatCompletionBackend(RemoteBackendConfig config)
        : config_(std::move(config)), endpoint_(parse_endpoint(config_.endpoint)) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) api_key_ = key;
    }

    [[nodiscard]] std::string id() const override { return config_.id; }
    [[nodiscard]] bool available() const override { return api_key_.has_value(); }
    [[nodiscard]] const RemoteBackendConfig& config() const noexcept { return config_; }

    std::string complete(const SummaryRequest& /*request*/, const std::string& prompt) override {
        if (!api_key_) throw Error(ErrorCode::BackendUnavailable, config_.id + ": " + config_.api_key_env + " is not set");

        nlohmann::json body = {{"model", config_.model},
                               {"temperature", config_.temperature},
                               {"messages", {{{"role", "user"}, {"content", prompt}}}}};
        if (config_.json_mode) body["response_format"] = {{"type", "json_object"}};
        const std::string payload = body.dump();
        const httplib::Headers headers{{"Authorization", "Bearer " + *api_key_}};

        std::string last_error;
        int delay = config_.backoff_ms;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(delay));
                delay *= 2;
            }
            httplib::Client client(endpoint_.origin);
            client.set_connection_timeout(config_.timeout_seconds, 0);
            client.set_read_timeout(config_.timeout_seconds, 0);
            client.set_write_timeout(config_.timeout_seconds, 0);
            const auto res = client.Post(endpoint_.path, headers, payload, "application/json");
            if (!res) {
                last_error = httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200) {
                throw Error(ErrorCode::BackendUnavailable, config_.id + ": HTTP " + std::to_string(res->status));
            }
            return extract_content(res->body);
        }
        throw Error(ErrorCode::BackendUnavailable, config_.id + ": " + last_error);
    }

    /// choices[0].message.content of a completion reply.
    static std::string extract_content(const std::string& body) {
        const auto j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::MalformedResponse, "completion reply is not JSON");
        const auto* content = j.is_object() && j.contains("choices") && j["choices"].is_array() && !j["choices"].empty() &&
                                      j["choices"][0].contains("message") && j["choices"][0]["message"].contains("content")
                                  ? &j["choices"][0]["message"]["content"]
                                  : nullptr;
        if (!content || !content->is_string()) throw Error(ErrorCode::MalformedResponse, "completion reply has no content");
        return content->get<std::string>();
    }

private:
    RemoteBackendConfig config_;
    ParsedEndpoint endpoint_;
    std::optional<std::string> api_key_;
};

} // namespace treereader
