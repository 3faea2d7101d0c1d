#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medrag/corpus.hpp"
#include "medrag/ranked_list.hpp"

namespace medrag {

/// How repeated query tokens are counted: once per occurrence (multiset) or
/// once per distinct term (set).
enum class QueryTermMode { multiset, set };

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
    QueryTermMode query_terms = QueryTermMode::multiset;

    /// Throws InputError unless k1 >= 0 and 0 <= b <= 1.
    void validate() const;

    friend bool operator==(const Bm25Params&, const Bm25Params&) = default;
};

struct Posting {
    std::uint32_t doc;  // ordinal into the index's sorted doc-id table
    std::uint32_t tf;

    friend bool operator==(const Posting&, const Posting&) = default;
};

/// Immutable term -> postings map plus the collection statistics BM25 needs.
/// Documents are stored in ascending id order, so the index is independent of
/// the order documents were supplied in.
class InvertedIndex {
public:
    /// Throws InputError on an empty corpus, IntegrityError on duplicate ids.
    static InvertedIndex build(std::span<const Document> docs, const Bm25Params& params = {});

    [[nodiscard]] const Bm25Params& params() const { return params_; }
    [[nodiscard]] std::size_t total_docs() const { return doc_ids_.size(); }
    [[nodiscard]] double avg_doc_length() const { return avg_doc_length_; }
    [[nodiscard]] std::size_t term_count() const { return postings_.size(); }

    /// n_t; 0 for unseen terms.
    [[nodiscard]] std::size_t doc_freq(std::string_view term) const;
    [[nodiscard]] std::span<const Posting> postings(std::string_view term) const;

    [[nodiscard]] std::optional<std::uint32_t> ordinal(std::string_view doc_id) const;
    [[nodiscard]] const std::string& doc_id(std::uint32_t ordinal) const { return doc_ids_[ordinal]; }
    [[nodiscard]] std::uint32_t doc_length(std::uint32_t ordinal) const { return doc_lengths_[ordinal]; }
    [[nodiscard]] std::uint32_t term_frequency(std::string_view term, std::uint32_t ordinal) const;

    [[nodiscard]] const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    [[nodiscard]] const std::map<std::string, std::vector<Posting>, std::less<>>& all_postings() const {
        return postings_;
    }

    /// Throws IntegrityError if any structural invariant is broken.
    void validate() const;

    /// Versioned JSON serialization; round trips exactly.
    [[nodiscard]] std::string serialize() const;
    static InvertedIndex deserialize(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static InvertedIndex load(const std::filesystem::path& path);

    friend bool operator==(const InvertedIndex&, const InvertedIndex&) = default;

private:
    Bm25Params params_;
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    std::map<std::string, std::vector<Posting>, std::less<>> postings_;
    double avg_doc_length_ = 0.0;

    void finalize();
};

/// ln((N - n_t + 0.5) / (n_t + 0.5) + 1).
double idf(const InvertedIndex& index, std::string_view term);

/// Saturated, length-normalized term frequency for one (term, doc) pair.
double bm25_tf(const Bm25Params& params, std::uint32_t tf, std::uint32_t doc_length, double avg_doc_length);

/// Sum over query tokens of idf * tf. Throws InputError on an unknown doc id.
double bm25_score(const InvertedIndex& index, const Bm25Params& params, const TokenStream& query,
                  std::string_view doc_id);

/// Top-k documents sharing at least one term with the query, by score
/// descending then doc id ascending.
RankedList lexical_search(const InvertedIndex& index, const Bm25Params& params, const Query& query, std::size_t k);

}  // namespace medrag
