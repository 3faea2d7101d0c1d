#include "medrag/config.hpp"

#include <cstdlib>
#include <set>

#include "medrag/errors.hpp"
#include "medrag/fileio.hpp"

namespace medrag {

namespace {

void check_keys(const nlohmann::json& obj, const std::string& section, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : obj.items()) {
        if (!ok.contains(key)) {
            throw ConfigError("unknown config key '" + (section.empty() ? key : section + "." + key) + "'");
        }
    }
}

nlohmann::json interpolate_all(const nlohmann::json& j) {
    if (j.is_string()) return interpolate_env(j.get<std::string>());
    if (j.is_object()) {
        nlohmann::json out = nlohmann::json::object();
        for (const auto& [k, v] : j.items()) out[k] = interpolate_all(v);
        return out;
    }
    if (j.is_array()) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& v : j) out.push_back(interpolate_all(v));
        return out;
    }
    return j;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) return base / path;
    return path;
}

}  // namespace

std::string to_string(RetrievalMode mode) {
    switch (mode) {
        case RetrievalMode::lexical: return "lexical";
        case RetrievalMode::semantic: return "semantic";
        case RetrievalMode::hybrid: return "hybrid";
    }
    return "unknown";
}

RetrievalMode parse_retrieval_mode(std::string_view s) {
    if (s == "lexical") return RetrievalMode::lexical;
    if (s == "semantic") return RetrievalMode::semantic;
    if (s == "hybrid") return RetrievalMode::hybrid;
    throw ConfigError("unknown retrieval mode '" + std::string(s) + "'");
}

std::string interpolate_env(const std::string& value) {
    std::string out;
    std::size_t i = 0;
    while (i < value.size()) {
        auto start = value.find("${", i);
        if (start == std::string::npos) {
            out.append(value, i, std::string::npos);
            break;
        }
        out.append(value, i, start - i);
        auto end = value.find('}', start);
        if (end == std::string::npos) throw ConfigError("unterminated ${ in config value '" + value + "'");
        std::string expr = value.substr(start + 2, end - start - 2);
        std::optional<std::string> fallback;
        if (auto sep = expr.find(":-"); sep != std::string::npos) {
            fallback = expr.substr(sep + 2);
            expr = expr.substr(0, sep);
        }
        if (const char* env = std::getenv(expr.c_str())) {
            out += env;
        } else if (fallback) {
            out += *fallback;
        } else {
            throw ConfigError("environment variable " + expr + " is not set");
        }
        i = end + 1;
    }
    return out;
}

FusionStrategy RunConfig::fusion() const {
    switch (parse_fusion_kind(fusion_kind)) {
        case FusionKind::semantic_only: return FusionStrategy::semantic_only();
        case FusionKind::lexical_only: return FusionStrategy::lexical_only();
        case FusionKind::weighted: return FusionStrategy::weighted(fusion_alpha);
        case FusionKind::rrf: return FusionStrategy::rrf(rrf_k);
    }
    throw ConfigError("unknown fusion kind");
}

RunConfig RunConfig::from_json(const nlohmann::json& raw, const std::filesystem::path& base_dir) {
    RunConfig c;
    try {
        const auto j = interpolate_all(raw);
        check_keys(j, "", {"corpus", "index", "bm25", "encoder", "fusion", "retrieval", "generation", "backend"});
        if (auto it = j.find("corpus"); it != j.end()) {
            check_keys(*it, "corpus", {"documents", "queries", "qrels"});
            if (it->contains("documents")) c.corpus = resolve(base_dir, it->at("documents"));
            if (it->contains("queries")) c.queries = resolve(base_dir, it->at("queries"));
            if (it->contains("qrels")) c.qrels = resolve(base_dir, it->at("qrels"));
        }
        if (auto it = j.find("index"); it != j.end()) {
            check_keys(*it, "index", {"lexical", "vector"});
            if (it->contains("lexical")) c.lexical_index = resolve(base_dir, it->at("lexical"));
            if (it->contains("vector")) c.vector_index = resolve(base_dir, it->at("vector"));
        }
        if (auto it = j.find("bm25"); it != j.end()) {
            check_keys(*it, "bm25", {"k1", "b", "query_terms"});
            c.bm25.k1 = it->value("k1", c.bm25.k1);
            c.bm25.b = it->value("b", c.bm25.b);
            const auto qt = it->value("query_terms", std::string("multiset"));
            if (qt != "multiset" && qt != "set") throw ConfigError("bm25.query_terms must be multiset or set");
            c.bm25.query_terms = qt == "set" ? QueryTermMode::set : QueryTermMode::multiset;
            c.bm25.validate();
        }
        if (auto it = j.find("encoder"); it != j.end()) {
            check_keys(*it, "encoder",
                       {"kind", "dim", "endpoint", "model", "api_key_env", "batch_size", "max_in_flight", "timeout_ms",
                        "max_retries", "cache_dir"});
            auto& e = c.encoder;
            e.kind = it->value("kind", e.kind);
            if (e.kind != "local_test" && e.kind != "remote") throw ConfigError("encoder.kind must be local_test or remote");
            e.dim = it->value("dim", e.dim);
            e.endpoint = it->value("endpoint", e.endpoint);
            e.model = it->value("model", e.model);
            e.api_key_env = it->value("api_key_env", e.api_key_env);
            e.batch_size = it->value("batch_size", e.batch_size);
            e.max_in_flight = it->value("max_in_flight", e.max_in_flight);
            e.timeout_ms = it->value("timeout_ms", e.timeout_ms);
            e.max_retries = it->value("max_retries", e.max_retries);
            if (it->contains("cache_dir")) e.cache_dir = resolve(base_dir, it->at("cache_dir"));
        }
        if (auto it = j.find("fusion"); it != j.end()) {
            check_keys(*it, "fusion", {"kind", "alpha", "rrf_k"});
            c.fusion_kind = it->value("kind", c.fusion_kind);
            c.fusion_alpha = it->value("alpha", c.fusion_alpha);
            c.rrf_k = it->value("rrf_k", c.rrf_k);
        }
        if (auto it = j.find("retrieval"); it != j.end()) {
            check_keys(*it, "retrieval", {"mode", "k"});
            c.mode = parse_retrieval_mode(it->value("mode", to_string(c.mode)));
            c.k = it->value("k", c.k);
        }
        if (auto it = j.find("generation"); it != j.end()) {
            check_keys(*it, "generation",
                       {"task", "profile", "context_budget", "confidence_threshold", "refine", "max_in_flight"});
            auto& g = c.generation;
            g.task = parse_task(it->value("task", to_string(g.task)));
            if (it->contains("profile")) g.profile_overrides = it->at("profile");
            g.context_budget = it->value("context_budget", g.context_budget);
            g.confidence_threshold = it->value("confidence_threshold", g.confidence_threshold);
            g.refine = it->value("refine", g.refine);
            g.max_in_flight = it->value("max_in_flight", g.max_in_flight);
        }
        if (auto it = j.find("backend"); it != j.end()) {
            check_keys(*it, "backend",
                       {"kind", "script", "request_log", "endpoint", "model", "api_key_env", "supports_logprobs",
                        "timeout_ms", "max_retries"});
            auto& b = c.backend;
            b.kind = it->value("kind", b.kind);
            if (b.kind != "mock" && b.kind != "http") throw ConfigError("backend.kind must be mock or http");
            if (it->contains("script")) b.script = resolve(base_dir, it->at("script"));
            if (it->contains("request_log")) b.request_log = resolve(base_dir, it->at("request_log"));
            b.endpoint = it->value("endpoint", b.endpoint);
            b.model = it->value("model", b.model);
            b.api_key_env = it->value("api_key_env", b.api_key_env);
            b.supports_logprobs = it->value("supports_logprobs", b.supports_logprobs);
            b.timeout_ms = it->value("timeout_ms", b.timeout_ms);
            b.max_retries = it->value("max_retries", b.max_retries);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    if (c.k == 0) throw ConfigError("retrieval.k must be >= 1");
    (void)c.fusion();
    (void)c.generation.profile();
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

}  // namespace medrag
