#include "medrag/pipeline.hpp"

#include <set>

#include "medrag/errors.hpp"
#include "medrag/fileio.hpp"

namespace medrag {

namespace {

template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
    const auto text = read_text_file(path);
    std::size_t line_no = 0, pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            fn(j, line_no);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
}

std::string id_field(const nlohmann::json& j) {
    const auto& id = j.at("id");
    return id.is_string() ? id.get<std::string>() : id.dump();
}

}  // namespace

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config) {
    if (config.kind == "local_test") return std::make_unique<LocalTestEncoder>(config.dim);
    if (config.kind == "remote") {
        if (config.endpoint.empty()) throw ConfigError("encoder.endpoint is required for a remote encoder");
        RemoteEncoderSettings s;
        s.endpoint = config.endpoint;
        s.model = config.model;
        s.dim = config.dim;
        s.api_key = env_or_empty(config.api_key_env);
        s.batch_size = config.batch_size;
        s.max_in_flight = config.max_in_flight;
        s.timeout = std::chrono::milliseconds(config.timeout_ms);
        s.retry.max_retries = config.max_retries;
        s.cache_dir = config.cache_dir;
        return std::make_unique<RemoteEncoder>(std::move(s));
    }
    throw ConfigError("unknown encoder kind '" + config.kind + "'");
}

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& config) {
    if (config.kind == "mock") {
        if (!config.script) throw ConfigError("backend.script is required for the mock backend");
        if (!std::filesystem::exists(*config.script)) {
            throw ConfigError("mock script not found: " + config.script->string());
        }
        return MockLlmBackend::from_file(config.script->string());
    }
    if (config.kind == "http") {
        if (config.endpoint.empty()) throw ConfigError("backend.endpoint is required for the http backend");
        HttpBackendSettings s;
        s.endpoint = config.endpoint;
        s.model = config.model;
        s.api_key = env_or_empty(config.api_key_env);
        s.supports_logprobs = config.supports_logprobs;
        s.timeout = std::chrono::milliseconds(config.timeout_ms);
        s.retry.max_retries = config.max_retries;
        return std::make_unique<HttpLlmBackend>(std::move(s));
    }
    throw ConfigError("unknown backend kind '" + config.kind + "'");
}

Retriever::Retriever(std::optional<InvertedIndex> lexical, std::optional<VectorIndex> vectors,
                     std::unique_ptr<Encoder> encoder, Bm25Params bm25, FusionStrategy fusion)
    : lexical_(std::move(lexical)), vectors_(std::move(vectors)), encoder_(std::move(encoder)), bm25_(bm25),
      fusion_(fusion) {
    if (vectors_ && encoder_ && vectors_->dim() != encoder_->dim()) {
        throw ConfigError("vector index dimension " + std::to_string(vectors_->dim()) + " != encoder dimension " +
                          std::to_string(encoder_->dim()));
    }
}

RankedList Retriever::semantic(const Query& query, std::size_t k) {
    if (!vectors_ || !encoder_) throw ConfigError("semantic retrieval needs a vector index and an encoder");
    const auto vec = encoder_->encode(query.text);
    if (vec.norm() == 0.0) return RankedList{query.id, {}};
    return semantic_search(*vectors_, vec, k, query.id);
}

RankedList Retriever::retrieve(const Query& query, RetrievalMode mode, std::size_t k) {
    switch (mode) {
        case RetrievalMode::lexical:
            if (!lexical_) throw ConfigError("lexical retrieval needs a lexical index");
            return lexical_search(*lexical_, bm25_, query, k);
        case RetrievalMode::semantic:
            return semantic(query, k);
        case RetrievalMode::hybrid: {
            if (!lexical_) throw ConfigError("hybrid retrieval needs a lexical index");
            auto lex = lexical_search(*lexical_, bm25_, query, k);
            auto sem = semantic(query, k);
            return fuse(lex, sem, fusion_, k);
        }
    }
    throw ConfigError("unknown retrieval mode");
}

std::vector<Question> load_questions(const std::filesystem::path& path) {
    std::vector<Question> out;
    std::set<std::string> seen;
    for_each_json_line(path, [&](const nlohmann::json& j, std::size_t line_no) {
        Question q;
        q.id = id_field(j);
        q.text = j.at("question").get<std::string>();
        if (auto it = j.find("options"); it != j.end() && !it->is_null()) {
            if (it->is_object()) {
                for (const auto& [label, text] : it->items()) q.options.push_back({label, text.get<std::string>()});
            } else {
                char label = 'A';
                for (const auto& text : *it) q.options.push_back({std::string(1, label++), text.get<std::string>()});
            }
        }
        if (auto it = j.find("option_set"); it != j.end()) q.option_set = parse_option_set(it->get<std::string>());
        if (!seen.insert(q.id).second) {
            throw IntegrityError(path.string() + " line " + std::to_string(line_no) + ": duplicate id " + q.id);
        }
        out.push_back(std::move(q));
    });
    return out;
}

std::map<std::string, std::string> load_gold(const std::filesystem::path& path) {
    std::map<std::string, std::string> out;
    for_each_json_line(path, [&](const nlohmann::json& j, std::size_t line_no) {
        auto id = id_field(j);
        if (!out.emplace(id, j.at("answer").get<std::string>()).second) {
            throw IntegrityError(path.string() + " line " + std::to_string(line_no) + ": duplicate id " + id);
        }
    });
    return out;
}

std::vector<GenPair> load_gen_pairs(const std::filesystem::path& path) {
    std::vector<GenPair> out;
    std::set<std::string> seen;
    for_each_json_line(path, [&](const nlohmann::json& j, std::size_t line_no) {
        GenPair p{id_field(j), j.at("candidate").get<std::string>(), j.at("reference").get<std::string>()};
        if (!seen.insert(p.id).second) {
            throw IntegrityError(path.string() + " line " + std::to_string(line_no) + ": duplicate id " + p.id);
        }
        out.push_back(std::move(p));
    });
    return out;
}

nlohmann::ordered_json AnswerRecord::to_json(Task task) const {
    nlohmann::ordered_json j;
    j["id"] = id;
    if (answer) {
        j["text"] = answer->text;
        j["confidence"] = answer->confidence ? nlohmann::ordered_json(*answer->confidence) : nlohmann::ordered_json();
        j["refined"] = answer->refined;
        if (task == Task::closed_ended) {
            auto label = parse_closed_answer(*answer, option_set);
            j["label"] = label ? nlohmann::ordered_json(*label) : nlohmann::ordered_json();
        }
    } else {
        j["text"] = nullptr;
        j["error"] = error;
    }
    j["cited"] = cited;
    if (task == Task::closed_ended) j["option_set"] = to_string(option_set);
    return j;
}

DocumentStore make_store(const std::vector<Document>& docs) {
    DocumentStore store;
    for (const auto& d : docs) store.emplace(d.id, d);
    return store;
}

std::vector<Passage> resolve_passages(const RankedList& ranked, const DocumentStore& store) {
    std::vector<Passage> out;
    for (const auto& e : ranked.entries) {
        auto it = store.find(e.doc_id);
        if (it == store.end()) throw IntegrityError("retrieved doc " + e.doc_id + " is not in the corpus");
        out.push_back({e.doc_id, it->second.indexable_text()});
    }
    return out;
}

std::vector<AnswerRecord> answer_questions(const std::vector<Question>& questions, Retriever& retriever,
                                           RetrievalMode mode, std::size_t k, const DocumentStore& store,
                                           const GenerationConfig& generation, LlmBackend& backend) {
    const auto profile = generation.profile();
    std::vector<GenerationJob> jobs;
    std::vector<AnswerRecord> records;
    for (const auto& q : questions) {
        const auto ranked = retriever.retrieve(Query{q.id, q.text}, mode, k);
        const auto passages = resolve_passages(ranked, store);
        auto bundle = build_prompt(profile, Query{q.id, q.text}, q.options, passages, generation.context_budget);
        AnswerRecord rec;
        rec.id = q.id;
        rec.cited = bundle.cited_doc_ids;
        rec.option_set = q.effective_option_set();
        records.push_back(std::move(rec));
        jobs.push_back({q.id, std::move(bundle)});
    }
    BatchOptions opts;
    opts.confidence_threshold = generation.confidence_threshold;
    opts.refine = generation.refine;
    opts.max_in_flight = generation.max_in_flight;
    auto outcomes = generate_all(jobs, profile, backend, opts);
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].answer = std::move(outcomes[i].answer);
        records[i].error = std::move(outcomes[i].error);
    }
    return records;
}

}  // namespace medrag
