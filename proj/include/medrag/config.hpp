#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "medrag/lexical.hpp"
#include "medrag/ragen.hpp"
#include "medrag/rerank.hpp"

namespace medrag {

enum class RetrievalMode { lexical, semantic, hybrid };

std::string to_string(RetrievalMode mode);
RetrievalMode parse_retrieval_mode(std::string_view s);

struct EncoderConfig {
    std::string kind = "local_test";  // local_test | remote
    std::size_t dim = 256;
    std::string endpoint;
    std::string model;
    std::string api_key_env = "MEDRAG_EMBED_API_KEY";
    std::size_t batch_size = 32;
    std::size_t max_in_flight = 4;
    int timeout_ms = 30000;
    int max_retries = 3;
    std::optional<std::filesystem::path> cache_dir;
};

struct BackendConfig {
    std::string kind = "mock";  // mock | http
    std::optional<std::filesystem::path> script;
    std::optional<std::filesystem::path> request_log;
    std::string endpoint;
    std::string model;
    std::string api_key_env = "MEDRAG_LLM_API_KEY";
    bool supports_logprobs = true;
    int timeout_ms = 60000;
    int max_retries = 3;
};

struct GenerationConfig {
    Task task = Task::closed_ended;
    nlohmann::json profile_overrides = nlohmann::json::object();
    std::size_t context_budget = kDefaultContextBudget;
    double confidence_threshold = kDefaultConfidenceThreshold;
    bool refine = true;
    std::size_t max_in_flight = 4;

    [[nodiscard]] GenerationProfile profile() const { return builtin_profile(task).with_overrides(profile_overrides); }
};

/// Experiment manifest. Loaded from JSON; `${VAR}` / `${VAR:-default}` in any
/// string value is replaced from the environment; relative paths resolve
/// against the config file's directory; unknown keys are rejected.
struct RunConfig {
    std::optional<std::filesystem::path> corpus;
    std::optional<std::filesystem::path> queries;
    std::optional<std::filesystem::path> qrels;
    std::optional<std::filesystem::path> lexical_index;
    std::optional<std::filesystem::path> vector_index;
    Bm25Params bm25;
    EncoderConfig encoder;
    std::string fusion_kind = "weighted";
    double fusion_alpha = 0.7;
    double rrf_k = 60.0;
    RetrievalMode mode = RetrievalMode::hybrid;
    std::size_t k = 10;
    GenerationConfig generation;
    BackendConfig backend;

    [[nodiscard]] FusionStrategy fusion() const;

    static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static RunConfig load(const std::filesystem::path& path);
};

/// Replaces `${VAR}` and `${VAR:-default}`; unset variables without a default
/// throw ConfigError.
std::string interpolate_env(const std::string& value);

}  // namespace medrag
