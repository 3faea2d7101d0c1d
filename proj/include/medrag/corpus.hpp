#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace medrag {

struct Document {
    std::string id;
    std::string title;
    std::string body;

    /// Text fed to the indexers: `title + " " + body` (title omitted when empty).
    [[nodiscard]] std::string indexable_text() const;

    friend bool operator==(const Document&, const Document&) = default;
};

struct Query {
    std::string id;
    std::string text;

    friend bool operator==(const Query&, const Query&) = default;
};

/// query id -> (doc id -> grade). Grades are non-negative.
class RelevanceJudgments {
public:
    using Grades = std::map<std::string, int>;

    /// Throws IntegrityError on negative grades or a repeated (query, doc) pair.
    void add(const std::string& query_id, const std::string& doc_id, int grade);

    /// Grade of `doc_id` for `query_id`, 0 when unjudged.
    [[nodiscard]] int grade(const std::string& query_id, const std::string& doc_id) const;

    /// All judgments for a query, or nullptr when the query has none.
    [[nodiscard]] const Grades* find(const std::string& query_id) const;

    /// Number of docs with grade >= 1 for the query.
    [[nodiscard]] std::size_t relevant_count(const std::string& query_id) const;

    [[nodiscard]] const std::map<std::string, Grades>& entries() const { return entries_; }
    [[nodiscard]] bool contains(const std::string& query_id) const { return entries_.contains(query_id); }

private:
    std::map<std::string, Grades> entries_;
};

/// Ordered normalized terms. Every token is non-empty and lowercase.
using TokenStream = std::vector<std::string>;

enum class CorpusFormat { beir_jsonl };

/// Reads a BEIR `corpus.jsonl` (`_id`, `title`, `text`) in file order.
std::vector<Document> load_corpus(const std::filesystem::path& path,
                                  CorpusFormat format = CorpusFormat::beir_jsonl);

/// Reads a BEIR `queries.jsonl` (`_id`, `text`).
std::vector<Query> load_queries(const std::filesystem::path& path);

/// Reads a BEIR qrels TSV (query-id, corpus-id, score). A header row is skipped
/// and the TREC 4-column layout (query-id, Q0, corpus-id, score) is detected.
RelevanceJudgments load_qrels(const std::filesystem::path& path);

/// Parsers over in-memory text; the file loaders delegate to these.
std::vector<Document> parse_corpus(std::string_view jsonl);
std::vector<Query> parse_queries(std::string_view jsonl);
RelevanceJudgments parse_qrels(std::string_view tsv);

/// Serializes documents back to BEIR JSONL, one object per line.
std::string serialize_corpus(const std::vector<Document>& docs);

/// Unicode word segmentation: maximal runs of letters/digits/marks form words,
/// everything else separates. Output is lowercased. No stemming, no stopwords.
TokenStream tokenize(std::string_view text);

namespace utf8 {

/// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view text);

/// Number of code points.
std::size_t length(std::string_view text);

/// Longest prefix holding at most `max_chars` code points.
std::string_view prefix(std::string_view text, std::size_t max_chars);

}  // namespace utf8

}  // namespace medrag
