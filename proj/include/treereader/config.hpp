#pragma once

// Runtime configuration (a JSON file) and the backend registry built from it.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "backend.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "remote_backend.hpp"
#include "store.hpp"

namespace treereader {

struct Config {
    std::vector<RemoteBackendConfig> backends;
    std::string default_backend = std::string(ExtractiveBackend::backend_id);
    std::size_t max_source_bytes = 10 * 1024 * 1024;
    double fuzzy_threshold = default_fuzzy_threshold;
    std::size_t max_concurrency = 4;
    std::filesystem::path data_dir = "treereader-data";
    std::optional<std::filesystem::path> prompt_dir; // leaf_prompt.txt, section_prompt.txt
};

/// Example:
///   {"backends": [{"id": "gpt", "endpoint": "https://.../chat/completions",
///                  "model": "gpt-4o", "api_key_env": "OPENAI_API_KEY"}],
///    "default_backend": "gpt", "max_source_bytes": 10485760,
///    "fuzzy_threshold": 0.85, "max_concurrency": 4, "data_dir": "data"}
inline Config config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    Config c;
    try {
        c.default_backend = j.value("default_backend", c.default_backend);
        c.max_source_bytes = j.value("max_source_bytes", c.max_source_bytes);
        c.fuzzy_threshold = j.value("fuzzy_threshold", c.fuzzy_threshold);
        c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
        if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
        if (j.contains("prompt_dir") && !j.at("prompt_dir").is_null()) c.prompt_dir = j.at("prompt_dir").get<std::string>();
        for (const auto& b : j.value("backends", nlohmann::json::array())) {
            RemoteBackendConfig r;
            r.id = b.at("id").get<std::string>();
            r.endpoint = b.at("endpoint").get<std::string>();
            r.model = b.at("model").get<std::string>();
            r.api_key_env = b.value("api_key_env", r.api_key_env);
            r.temperature = b.value("temperature", r.temperature);
            r.timeout_seconds = b.value("timeout_seconds", r.timeout_seconds);
            r.max_retries = b.value("max_retries", r.max_retries);
            r.backoff_ms = b.value("backoff_ms", r.backoff_ms);
            r.json_mode = b.value("json_mode", r.json_mode);
            if (r.id == ExtractiveBackend::backend_id) throw Error(ErrorCode::ConfigError, "backend id 'extractive' is reserved");
            c.backends.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ConfigError, e.what());
    }
    if (!(c.fuzzy_threshold > 0.0 && c.fuzzy_threshold <= 1.0)) {
        throw Error(ErrorCode::ConfigError, "fuzzy_threshold must be in (0, 1]");
    }
    if (c.max_concurrency == 0) c.max_concurrency = 1;
    return c;
}

inline Config load_config(const std::filesystem::path& path) {
    const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::ConfigError, path.string() + " is not valid JSON");
    return config_from_json(j);
}

/// Templates from `prompt_dir` when set, else the built-in ones.
inline PromptSet load_prompts(const Config& c) {
    PromptSet set;
    if (!c.prompt_dir) return set;
    PromptTemplate leaf(read_file(*c.prompt_dir / "leaf_prompt.txt"));
    PromptTemplate section(read_file(*c.prompt_dir / "section_prompt.txt"));
    for (const auto* t : {&leaf, &section}) {
        if (!t->has_abstract_slot() || !t->has_content_slot()) {
            throw Error(ErrorCode::MissingSlot, "prompt template in " + c.prompt_dir->string() + " lacks a slot");
        }
    }
    set.leaf = std::move(leaf);
    set.section = std::move(section);
    return set;
}

inline EngineOptions engine_options(const Config& c) {
    EngineOptions o;
    o.prompts = load_prompts(c);
    o.fuzzy_threshold = c.fuzzy_threshold;
    o.max_concurrency = c.max_concurrency;
    return o;
}

/// Backends by id. The extractive backend is always registered.
class BackendRegistry {
public:
    BackendRegistry() { add(std::make_shared<ExtractiveBackend>()); }

    explicit BackendRegistry(const Config& c) : BackendRegistry() {
        for (const auto& b : c.backends) add(std::make_shared<ChatCompletionBackend>(b));
    }

    void add(std::shared_ptr<SummarizerBackend> backend) {
        const std::string id = backend->id();
        backends_[id] = std::move(backend);
    }

    [[nodiscard]] std::shared_ptr<SummarizerBackend> get(const std::string& id) const {
        const auto it = backends_.find(id);
        if (it == backends_.end()) throw Error(ErrorCode::UnknownBackend, id);
        return it->second;
    }

    [[nodiscard]] bool contains(const std::string& id) const { return backends_.count(id) != 0; }

    [[nodiscard]] std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& [id, b] : backends_) out.push_back(id);
        return out;
    }

private:
    std::map<std::string, std::shared_ptr<SummarizerBackend>> backends_;
};

} // namespace treereader
