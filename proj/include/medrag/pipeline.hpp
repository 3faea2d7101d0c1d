#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "medrag/config.hpp"
#include "medrag/corpus.hpp"
#include "medrag/lexical.hpp"
#include "medrag/ragen.hpp"
#include "medrag/rerank.hpp"
#include "medrag/evalkit.hpp"
#include "medrag/semantic.hpp"

namespace medrag {

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config);
std::unique_ptr<LlmBackend> make_backend(const BackendConfig& config);

/// Runs lexical, semantic or fused retrieval over loaded indexes.
class Retriever {
public:
    Retriever(std::optional<InvertedIndex> lexical, std::optional<VectorIndex> vectors,
              std::unique_ptr<Encoder> encoder, Bm25Params bm25, FusionStrategy fusion);

    /// Hybrid retrieves k from each source and fuses down to k. Queries that
    /// encode to a zero vector get an empty semantic list.
    RankedList retrieve(const Query& query, RetrievalMode mode, std::size_t k);

    [[nodiscard]] bool has_lexical() const { return lexical_.has_value(); }
    [[nodiscard]] bool has_vectors() const { return vectors_.has_value(); }

private:
    std::optional<InvertedIndex> lexical_;
    std::optional<VectorIndex> vectors_;
    std::unique_ptr<Encoder> encoder_;
    Bm25Params bm25_;
    FusionStrategy fusion_;

    RankedList semantic(const Query& query, std::size_t k);
};

/// A QA item. `options` is empty for yes/no style questions.
struct Question {
    std::string id;
    std::string text;
    std::vector<AnswerOption> options;
    std::optional<OptionSet> option_set;

    [[nodiscard]] OptionSet effective_option_set() const {
        return option_set ? *option_set : (options.empty() ? OptionSet::yes_no_maybe : OptionSet::abcd);
    }
};

/// JSONL of {id, question, options?: {"A": text, ...} | [text, ...], option_set?}.
std::vector<Question> load_questions(const std::filesystem::path& path);

/// JSONL of {id, answer}.
std::map<std::string, std::string> load_gold(const std::filesystem::path& path);

/// JSONL of {id, candidate, reference} for generation scoring.
std::vector<GenPair> load_gen_pairs(const std::filesystem::path& path);

struct AnswerRecord {
    std::string id;
    std::optional<GeneratedAnswer> answer;
    std::string error;
    std::vector<std::string> cited;
    OptionSet option_set = OptionSet::abcd;

    [[nodiscard]] nlohmann::ordered_json to_json(Task task) const;
};

/// Document text by id for passage resolution.
using DocumentStore = std::map<std::string, Document>;
DocumentStore make_store(const std::vector<Document>& docs);

std::vector<Passage> resolve_passages(const RankedList& ranked, const DocumentStore& store);

/// retrieve -> build_prompt -> generate -> confidence filter for every
/// question. Records come back in question order.
std::vector<AnswerRecord> answer_questions(const std::vector<Question>& questions, Retriever& retriever,
                                           RetrievalMode mode, std::size_t k, const DocumentStore& store,
                                           const GenerationConfig& generation, LlmBackend& backend);

}  // namespace medrag
