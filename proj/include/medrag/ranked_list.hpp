#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace medrag {

struct RankedEntry {
    std::string doc_id;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based

    friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

/// Per-query ordered results shared by retrieval, fusion and evaluation.
/// Ranks are 1..n, scores non-increasing, doc ids unique.
struct RankedList {
    std::string query_id;
    std::vector<RankedEntry> entries;

    [[nodiscard]] std::size_t size() const { return entries.size(); }
    [[nodiscard]] bool empty() const { return entries.empty(); }

    /// Sorts (doc id, score) pairs by score descending, doc id ascending,
    /// truncates to k and assigns ranks.
    static RankedList from_scores(std::string query_id, std::vector<std::pair<std::string, double>> scored,
                                  std::size_t k);

    /// Throws IntegrityError describing the first violated invariant.
    void validate() const;

    friend bool operator==(const RankedList&, const RankedList&) = default;
};

/// One `qid Q0 docid rank score tag` line per entry. Scores are written in
/// shortest round-trip form.
void write_trec_run(std::ostream& out, const std::vector<RankedList>& runs, std::string_view tag);
std::string format_trec_run(const std::vector<RankedList>& runs, std::string_view tag);

/// Parses a TREC run. Lists are keyed by query id and ordered by the rank
/// column; ties in rank fall back to score descending, then doc id.
std::map<std::string, RankedList> parse_trec_run(std::string_view text);

}  // namespace medrag
