#include "medrag/ragen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "medrag/errors.hpp"
#include "medrag/fileio.hpp"

namespace medrag {

namespace {

std::string single_line(std::string_view text) {
    std::string out(text);
    std::replace_if(out.begin(), out.end(), [](char c) { return c == '\n' || c == '\r'; }, ' ');
    return out;
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

BackendReply reply_from_json(const nlohmann::json& j) {
    BackendReply r;
    r.text = j.value("text", std::string{});
    if (auto it = j.find("logprobs"); it != j.end() && !it->is_null()) {
        r.token_logprobs = it->get<std::vector<double>>();
    }
    return r;
}

std::vector<std::string> string_list(const nlohmann::json& j, const char* key) {
    if (auto it = j.find(key); it != j.end()) return it->get<std::vector<std::string>>();
    return {};
}

}  // namespace

std::string to_string(Task task) {
    switch (task) {
        case Task::closed_ended: return "closed_ended";
        case Task::long_form: return "long_form";
        case Task::short_form: return "short_form";
    }
    return "unknown";
}

Task parse_task(std::string_view s) {
    if (s == "closed_ended") return Task::closed_ended;
    if (s == "long_form") return Task::long_form;
    if (s == "short_form") return Task::short_form;
    throw ConfigError("unknown task '" + std::string(s) + "' (expected closed_ended, long_form or short_form)");
}

void GenerationProfile::validate() const {
    if (max_tokens <= 0) throw InputError("max_tokens must be positive");
    if (!(temperature >= 0.0)) throw InputError("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw InputError("top_p must lie in (0, 1]");
}

GenerationProfile GenerationProfile::with_overrides(const nlohmann::json& overrides) const {
    GenerationProfile p = *this;
    if (overrides.is_null()) return p;
    if (!overrides.is_object()) throw ConfigError("profile overrides must be an object");
    try {
        for (const auto& [key, value] : overrides.items()) {
            if (key == "system_message") {
                p.system_message = value.get<std::string>();
            } else if (key == "max_tokens") {
                p.max_tokens = value.get<int>();
            } else if (key == "temperature") {
                p.temperature = value.get<double>();
            } else if (key == "top_p") {
                p.top_p = value.get<double>();
            } else if (key == "frequency_penalty") {
                p.frequency_penalty = value.get<double>();
            } else if (key == "presence_penalty") {
                p.presence_penalty = value.get<double>();
            } else if (key == "stop") {
                if (value.is_null()) {
                    p.stop.reset();
                } else {
                    p.stop = value.get<std::vector<std::string>>();
                }
            } else {
                throw ConfigError("unknown profile override '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad profile override: ") + e.what());
    }
    p.validate();
    return p;
}

const GenerationProfile& builtin_profile(Task task) {
    static const GenerationProfile closed{
        Task::closed_ended,
        "You are an expert medical AI assistant. Answer the following question using only one letter: A, B, C, or D.",
        2, 0.1, 0.7, 0.5, 0.1, std::vector<std::string>{"\n"}};
    static const GenerationProfile long_form{
        Task::long_form, "You are a biomedical research expert. Generate precise and well-structured answers.",
        300, 0.2, 0.8, 0.0, 0.0, std::nullopt};
    static const GenerationProfile short_form{
        Task::short_form, "You are an expert medical AI assistant. Provide concise and accurate answers.",
        50, 0.2, 0.85, 0.2, 0.0, std::nullopt};
    switch (task) {
        case Task::closed_ended: return closed;
        case Task::long_form: return long_form;
        case Task::short_form: return short_form;
    }
    throw InputError("unknown task");
}

PromptBundle build_prompt(const GenerationProfile& profile, const Query& query, std::span<const AnswerOption> options,
                          std::span<const Passage> contexts, std::size_t budget) {
    if (budget == 0) throw InputError("context budget must be positive");
    PromptBundle bundle;
    bundle.system = profile.system_message;
    bundle.context_budget = budget;

    std::string block;
    std::size_t used = 0;
    for (const auto& passage : contexts) {
        const std::string prefix = "[doc:" + passage.doc_id + "] ";
        const std::string line = prefix + single_line(passage.text);
        const std::size_t sep = block.empty() ? 0 : 1;
        const std::size_t len = utf8::length(line);
        if (used + sep + len <= budget) {
            if (sep) block.push_back('\n');
            block += line;
            used += sep + len;
            bundle.cited_doc_ids.push_back(passage.doc_id);
            continue;
        }
        if (block.empty()) {
            const std::size_t overhead = utf8::length(prefix) + kTruncationMarker.size();
            if (budget > overhead) {
                const auto flat = single_line(passage.text);
                const auto body = utf8::prefix(flat, budget - overhead);
                block = prefix + std::string(body) + std::string(kTruncationMarker);
                used = utf8::length(block);
                bundle.cited_doc_ids.push_back(passage.doc_id);
            }
        }
        break;
    }
    bundle.context_chars = used;

    std::string user = "Question: " + single_line(query.text) + "\n";
    if (!options.empty()) {
        user += "\nOptions:\n";
        for (const auto& opt : options) {
            user += opt.label;
            if (!opt.text.empty()) user += ". " + single_line(opt.text);
            user += '\n';
        }
    }
    if (!block.empty()) {
        user += "\nContext:\n" + block + "\n";
    }
    user += "\nAnswer:";
    bundle.user = std::move(user);
    return bundle;
}

nlohmann::ordered_json ChatRequest::to_json(std::string_view model) const {
    nlohmann::ordered_json j;
    j["model"] = model;
    j["system"] = system;
    j["user"] = user;
    j["max_tokens"] = max_tokens;
    j["temperature"] = temperature;
    j["top_p"] = top_p;
    j["frequency_penalty"] = frequency_penalty;
    j["presence_penalty"] = presence_penalty;
    if (stop) j["stop"] = *stop;
    j["logprobs"] = logprobs;
    return j;
}

HttpLlmBackend::HttpLlmBackend(HttpBackendSettings settings)
    : settings_(std::move(settings)), client_(settings_.endpoint, settings_.timeout, settings_.retry) {}

BackendReply HttpLlmBackend::complete(const ChatRequest& request) {
    std::map<std::string, std::string> headers;
    if (!settings_.api_key.empty()) headers["Authorization"] = "Bearer " + settings_.api_key;
    auto res = client_.post(request.to_json(settings_.model).dump(), headers);
    if (res.status < 200 || res.status >= 300) {
        throw TransportError("generation endpoint returned HTTP " + std::to_string(res.status));
    }
    try {
        return reply_from_json(nlohmann::json::parse(res.body));
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed generation response: ") + e.what());
    }
}

MockLlmBackend::MockLlmBackend(const nlohmann::json& script) {
    try {
        supports_logprobs_ = script.value("supports_logprobs", true);
        if (auto it = script.find("default"); it != script.end()) default_reply_ = reply_from_json(*it);
        if (auto it = script.find("rules"); it != script.end()) {
            for (const auto& r : *it) {
                Rule rule;
                rule.when_contains = string_list(r, "when_contains");
                rule.unless_contains = string_list(r, "unless_contains");
                if (auto rep = r.find("replies"); rep != r.end()) {
                    for (const auto& x : *rep) rule.replies.push_back(reply_from_json(x));
                }
                rule.error = r.value("error", std::string{});
                if (rule.replies.empty() && rule.error.empty()) {
                    throw ConfigError("mock rule needs replies or an error");
                }
                if (!rule.error.empty() && rule.error != "transport" && rule.error != "empty") {
                    throw ConfigError("mock rule error must be 'transport' or 'empty'");
                }
                rules_.push_back(std::move(rule));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad mock script: ") + e.what());
    }
}

std::unique_ptr<MockLlmBackend> MockLlmBackend::from_file(const std::string& path) {
    try {
        return std::make_unique<MockLlmBackend>(nlohmann::json::parse(read_text_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("mock script " + path + ": " + e.what());
    }
}

BackendReply MockLlmBackend::complete(const ChatRequest& request) {
    std::lock_guard lock(mu_);
    const std::size_t call = calls_per_tag_[request.tag]++;
    log_.emplace(std::make_pair(request.tag, call), request.to_json("mock"));

    auto matches = [&](const Rule& r) {
        for (const auto& s : r.when_contains) {
            if (request.user.find(s) == std::string::npos) return false;
        }
        for (const auto& s : r.unless_contains) {
            if (request.user.find(s) != std::string::npos) return false;
        }
        return true;
    };
    BackendReply reply = default_reply_;
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        if (!matches(rules_[i])) continue;
        const auto& rule = rules_[i];
        if (rule.error == "transport") throw TransportError("mock backend: scripted transport failure");
        if (rule.error == "empty") {
            reply = BackendReply{};
            break;
        }
        auto& pos = cursor_[{i, request.tag}];
        reply = rule.replies[std::min(pos, rule.replies.size() - 1)];
        ++pos;
        break;
    }
    if (!supports_logprobs_ || !request.logprobs) reply.token_logprobs.reset();
    return reply;
}

std::vector<nlohmann::ordered_json> MockLlmBackend::request_log() const {
    std::lock_guard lock(mu_);
    std::vector<nlohmann::ordered_json> out;
    for (const auto& [key, req] : log_) {
        nlohmann::ordered_json entry;
        entry["tag"] = key.first;
        entry["call"] = key.second;
        entry["request"] = req;
        out.push_back(std::move(entry));
    }
    return out;
}

std::size_t MockLlmBackend::call_count() const {
    std::lock_guard lock(mu_);
    return log_.size();
}

double sequence_confidence(std::span<const double> logprobs) {
    if (logprobs.empty()) throw InputError("confidence needs at least one token logprob");
    double sum = 0.0;
    for (double lp : logprobs) sum += lp;
    return std::exp(sum / static_cast<double>(logprobs.size()));
}

GeneratedAnswer generate(const PromptBundle& bundle, const GenerationProfile& profile, LlmBackend& backend,
                         std::string tag) {
    ChatRequest req;
    req.system = bundle.system;
    req.user = bundle.user;
    req.max_tokens = profile.max_tokens;
    req.temperature = profile.temperature;
    req.top_p = profile.top_p;
    req.frequency_penalty = profile.frequency_penalty;
    req.presence_penalty = profile.presence_penalty;
    req.stop = profile.stop;
    req.logprobs = backend.supports_logprobs();
    req.tag = std::move(tag);

    auto reply = backend.complete(req);
    GeneratedAnswer ans;
    ans.text = trim(reply.text);
    if (ans.text.empty()) {
        throw EmptyAnswerError("backend returned an empty answer");
    }
    if (reply.token_logprobs && !reply.token_logprobs->empty()) {
        for (double& lp : *reply.token_logprobs) {
            if (std::isnan(lp)) throw IntegrityError("backend returned a NaN logprob");
            lp = std::min(lp, 0.0);
        }
        ans.confidence = sequence_confidence(*reply.token_logprobs);
        ans.token_logprobs = std::move(reply.token_logprobs);
    }
    return ans;
}

GeneratedAnswer confidence_filter(GeneratedAnswer answer, double threshold,
                                  const std::function<GeneratedAnswer()>& regenerate) {
    if (!answer.confidence || *answer.confidence >= threshold) return answer;
    answer.refined = true;
    if (!regenerate) return answer;
    GeneratedAnswer retry;
    try {
        retry = regenerate();
    } catch (const Error&) {
        return answer;
    }
    retry.refined = true;
    if (!retry.confidence || *retry.confidence >= threshold) return retry;
    return *retry.confidence > *answer.confidence ? retry : answer;
}

std::string to_string(OptionSet set) {
    switch (set) {
        case OptionSet::abcd: return "abcd";
        case OptionSet::yes_no: return "yes_no";
        case OptionSet::yes_no_maybe: return "yes_no_maybe";
    }
    return "unknown";
}

OptionSet parse_option_set(std::string_view s) {
    if (s == "abcd") return OptionSet::abcd;
    if (s == "yes_no") return OptionSet::yes_no;
    if (s == "yes_no_maybe") return OptionSet::yes_no_maybe;
    throw ConfigError("unknown option set '" + std::string(s) + "'");
}

std::optional<std::string> parse_closed_answer(std::string_view text, OptionSet set) {
    const auto tokens = tokenize(text);
    if (tokens.empty()) return std::nullopt;
    const auto& first = tokens.front();
    switch (set) {
        case OptionSet::abcd:
            if (first.size() == 1 && first[0] >= 'a' && first[0] <= 'd') {
                return std::string(1, static_cast<char>(first[0] - 'a' + 'A'));
            }
            return std::nullopt;
        case OptionSet::yes_no_maybe:
            if (first == "maybe") return first;
            [[fallthrough]];
        case OptionSet::yes_no:
            if (first == "yes" || first == "no") return first;
            return std::nullopt;
    }
    return std::nullopt;
}

std::vector<GenerationOutcome> generate_all(std::span<const GenerationJob> jobs, const GenerationProfile& profile,
                                            LlmBackend& backend, const BatchOptions& options) {
    std::vector<GenerationOutcome> out(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const auto& job = jobs[i];
            try {
                auto ans = generate(job.bundle, profile, backend, job.tag);
                if (options.refine) {
                    ans = confidence_filter(std::move(ans), options.confidence_threshold,
                                            [&] { return generate(job.bundle, profile, backend, job.tag); });
                }
                out[i].answer = std::move(ans);
            } catch (const Error& e) {
                out[i].error = e.what();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(options.max_in_flight, jobs.size()));
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();
    return out;
}

nlohmann::ordered_json FineTuneRecord::to_json() const {
    nlohmann::ordered_json j;
    j["task"] = task;
    j["train_dataset"] = train_dataset;
    j["train_samples"] = train_samples;
    j["training_duration"] = training_duration;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["base_model"] = base_model;
    return j;
}

const std::vector<FineTuneRecord>& builtin_finetune_records() {
    static const std::vector<FineTuneRecord> records{
        {"closed_ended", "MedQA", 10178, "3h 25m 33s", 2, 13, "gpt-4o"},
        {"closed_ended", "PubMedQA (PQA-L)", 552, "7h 46m 44s", 3, 1, "gpt-4o"},
        {"closed_ended", "BioASQ", 5049, "3h 10m 7s", 3, 2, "gpt-4o"},
        {"long_form", "PubMedQA (PQA-A)", 196144, "1d 6h 29m 20s", 1, 64, "gpt-4o"},
        {"long_form", "MedicationQA", 551, "1h 44m 18s", 3, 1, "gpt-4o"},
        {"long_form", "LiveQA", 500, "1h 46m 17s", 3, 1, "gpt-4o"},
        {"long_form", "BioASQ", 5049, "2h 36m 49s", 3, 10, "gpt-4o"},
        {"long_form", "Combined Custom Dataset", 6652, "2h 6m 1s", 3, 13, "gpt-4o"},
        {"short_form", "MedQA", 10178, "1h 49m 44s", 2, 13, "gpt-4o"},
    };
    return records;
}

std::string finetune_manifest_line(const PromptBundle& bundle, std::string_view target) {
    nlohmann::ordered_json j;
    j["x"] = bundle.system + "\n\n" + bundle.user;
    j["y"] = target;
    return j.dump();
}

}  // namespace medrag
