#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "medrag/corpus.hpp"
#include "medrag/http.hpp"

namespace medrag {

enum class Task { closed_ended, long_form, short_form };

std::string to_string(Task task);
Task parse_task(std::string_view s);

/// Task-specific system message and decoding parameters.
struct GenerationProfile {
    Task task = Task::closed_ended;
    std::string system_message;
    int max_tokens = 1;
    double temperature = 0.0;
    double top_p = 1.0;
    double frequency_penalty = 0.0;
    double presence_penalty = 0.0;
    std::optional<std::vector<std::string>> stop;

    /// Throws InputError on max_tokens <= 0, temperature < 0 or top_p outside (0, 1].
    void validate() const;

    /// Applies the keys present in `overrides` (same names as the fields);
    /// unknown keys throw ConfigError.
    [[nodiscard]] GenerationProfile with_overrides(const nlohmann::json& overrides) const;

    friend bool operator==(const GenerationProfile&, const GenerationProfile&) = default;
};

/// The three tuned profiles for closed-ended, long-form and short-form QA.
const GenerationProfile& builtin_profile(Task task);

struct AnswerOption {
    std::string label;  // "A", "B", ... or "yes"/"no"/"maybe"
    std::string text;
};

/// A retrieved passage resolved to its document text.
struct Passage {
    std::string doc_id;
    std::string text;
};

inline constexpr std::size_t kDefaultContextBudget = 8000;
inline constexpr std::string_view kTruncationMarker = " [truncated]";

struct PromptBundle {
    std::string system;
    std::string user;
    std::size_t context_budget = kDefaultContextBudget;
    std::vector<std::string> cited_doc_ids;
    std::size_t context_chars = 0;  // code points in the packed passage block

    friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

/// Packs passages greedily in rank order into a block of at most `budget`
/// code points. Each passage is one line prefixed `[doc:<id>]`; a first
/// passage longer than the budget is cut and marked, later ones that do not
/// fit end the block.
PromptBundle build_prompt(const GenerationProfile& profile, const Query& query, std::span<const AnswerOption> options,
                          std::span<const Passage> contexts, std::size_t budget = kDefaultContextBudget);

/// Chat-style request sent to a generation backend.
struct ChatRequest {
    std::string system;
    std::string user;
    int max_tokens = 1;
    double temperature = 0.0;
    double top_p = 1.0;
    double frequency_penalty = 0.0;
    double presence_penalty = 0.0;
    std::optional<std::vector<std::string>> stop;
    bool logprobs = true;
    std::string tag;  // caller correlation id, not part of the wire format

    /// Wire body: {model, system, user, max_tokens, temperature, top_p,
    /// frequency_penalty, presence_penalty, stop?, logprobs}.
    [[nodiscard]] nlohmann::ordered_json to_json(std::string_view model) const;
};

struct BackendReply {
    std::string text;
    std::optional<std::vector<double>> token_logprobs;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    /// Throws TransportError when the backend cannot be reached.
    virtual BackendReply complete(const ChatRequest& request) = 0;
    [[nodiscard]] virtual bool supports_logprobs() const = 0;
};

struct HttpBackendSettings {
    std::string endpoint;
    std::string model;
    std::string api_key;
    bool supports_logprobs = true;
    std::chrono::milliseconds timeout{60000};
    RetryPolicy retry;
};

/// JSON-over-HTTP backend: request per ChatRequest::to_json, response
/// {text, logprobs?: [real]}.
class HttpLlmBackend final : public LlmBackend {
public:
    explicit HttpLlmBackend(HttpBackendSettings settings);
    BackendReply complete(const ChatRequest& request) override;
    [[nodiscard]] bool supports_logprobs() const override { return settings_.supports_logprobs; }
    HttpJsonClient& client() { return client_; }

private:
    HttpBackendSettings settings_;
    HttpJsonClient client_;
};

/// Deterministic scripted backend. Script format:
///
///   {"supports_logprobs": true,
///    "default": {"text": "A", "logprobs": [0.0]},
///    "rules": [{"when_contains": ["..."], "unless_contains": ["..."],
///               "replies": [{"text": "...", "logprobs": [...]}, ...],
///               "error": "transport" | "empty"}]}
///
/// The first rule whose substrings all occur in the user message (and none of
/// its `unless_contains`) answers. Successive calls with the same request tag
/// walk through `replies`, repeating the last one. Every request is recorded.
class MockLlmBackend final : public LlmBackend {
public:
    explicit MockLlmBackend(const nlohmann::json& script);
    static std::unique_ptr<MockLlmBackend> from_file(const std::string& path);

    BackendReply complete(const ChatRequest& request) override;
    [[nodiscard]] bool supports_logprobs() const override { return supports_logprobs_; }

    /// Recorded request bodies ordered by (tag, call number).
    [[nodiscard]] std::vector<nlohmann::ordered_json> request_log() const;
    [[nodiscard]] std::size_t call_count() const;

private:
    struct Rule {
        std::vector<std::string> when_contains;
        std::vector<std::string> unless_contains;
        std::vector<BackendReply> replies;
        std::string error;
    };

    bool supports_logprobs_ = true;
    BackendReply default_reply_;
    std::vector<Rule> rules_;

    mutable std::mutex mu_;
    std::map<std::pair<std::size_t, std::string>, std::size_t> cursor_;
    std::map<std::pair<std::string, std::size_t>, nlohmann::ordered_json> log_;
    std::map<std::string, std::size_t> calls_per_tag_;
};

struct GeneratedAnswer {
    std::string text;
    std::optional<std::vector<double>> token_logprobs;
    std::optional<double> confidence;
    bool refined = false;
};

/// exp(mean(logprobs)): the geometric-mean token probability.
double sequence_confidence(std::span<const double> logprobs);

/// Sends the bundle with the profile's decoding parameters. Throws
/// EmptyAnswerError when the backend returns no text.
GeneratedAnswer generate(const PromptBundle& bundle, const GenerationProfile& profile, LlmBackend& backend,
                         std::string tag = {});

inline constexpr double kDefaultConfidenceThreshold = 0.1;

/// Below-threshold answers get at most one regeneration. The retry is kept if
/// it clears the threshold (or carries no confidence); otherwise the more
/// confident candidate is returned. Anything that went through refinement is
/// flagged `refined`.
GeneratedAnswer confidence_filter(GeneratedAnswer answer, double threshold,
                                  const std::function<GeneratedAnswer()>& regenerate = {});

enum class OptionSet { abcd, yes_no, yes_no_maybe };

std::string to_string(OptionSet set);
OptionSet parse_option_set(std::string_view s);

/// First token of the answer matched case-insensitively against the option
/// set. Returns "A".."D" or "yes"/"no"/"maybe"; nullopt when unparsable.
std::optional<std::string> parse_closed_answer(std::string_view text, OptionSet set);
inline std::optional<std::string> parse_closed_answer(const GeneratedAnswer& ans, OptionSet set) {
    return parse_closed_answer(ans.text, set);
}

struct GenerationJob {
    std::string tag;
    PromptBundle bundle;
};

struct GenerationOutcome {
    std::optional<GeneratedAnswer> answer;
    std::string error;  // set when answer is empty
};

struct BatchOptions {
    double confidence_threshold = kDefaultConfidenceThreshold;
    bool refine = true;
    std::size_t max_in_flight = 4;
};

/// Runs generate + confidence_filter for every job with at most
/// `max_in_flight` concurrent requests. Outcomes are in job order.
std::vector<GenerationOutcome> generate_all(std::span<const GenerationJob> jobs, const GenerationProfile& profile,
                                            LlmBackend& backend, const BatchOptions& options = {});

/// One fine-tuning configuration row.
struct FineTuneRecord {
    std::string task;
    std::string train_dataset;
    std::size_t train_samples = 0;
    std::string training_duration;
    int epochs = 0;
    int batch_size = 0;
    std::string base_model;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

const std::vector<FineTuneRecord>& builtin_finetune_records();

/// One manifest line: {"x": prompt text, "y": target text}.
std::string finetune_manifest_line(const PromptBundle& bundle, std::string_view target);

}  // namespace medrag
