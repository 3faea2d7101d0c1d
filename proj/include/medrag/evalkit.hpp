#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "medrag/corpus.hpp"
#include "medrag/ranked_list.hpp"

namespace medrag {

/// Gain applied to a graded judgment inside DCG.
enum class DcgGain {
    linear,      // rel
    exponential  // 2^rel - 1
};

// Single-query retrieval metrics. "Relevant" means grade >= 1; unjudged docs
// have grade 0.

double dcg_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k,
                DcgGain gain = DcgGain::linear);

/// nullopt when the query has no judged-relevant document.
std::optional<double> ndcg_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k,
                                DcgGain gain = DcgGain::linear);

double mrr_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k);

struct PrecisionRecallF1 {
    double precision = 0.0;
    std::optional<double> recall;  // nullopt without judged-relevant docs
    std::optional<double> f1;
};

PrecisionRecallF1 precision_recall_f1_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k);

/// Average precision at k, normalized by min(|relevant|, k). nullopt without
/// judged-relevant docs.
std::optional<double> map_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k);

struct QueryMetrics {
    std::string query_id;
    double dcg = 0.0;
    std::optional<double> ndcg;
    double mrr = 0.0;
    double precision = 0.0;
    std::optional<double> recall;
    std::optional<double> f1;
    std::optional<double> map;
};

/// Macro-averaged metrics at one cutoff. Rate metrics are stored in [0, 1];
/// `scaled()` multiplies them by 100 for table display. DCG is never scaled.
struct RetrievalMetricsReport {
    std::size_t k = 10;
    std::size_t query_count = 0;
    std::size_t excluded_no_relevant = 0;  // dropped from NDCG/Recall/F1/MAP
    std::vector<std::string> unknown_queries;  // in the run but not in qrels
    double dcg = 0.0;
    double ndcg = 0.0;
    double mrr = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double map = 0.0;
    std::vector<QueryMetrics> per_query;

    /// Aligned two-column table, one metric per row, rate metrics x100.
    [[nodiscard]] std::string to_table() const;
    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

/// Evaluates every run query that has judgments; run queries without any
/// judgments are listed in `unknown_queries` and skipped. Queries are visited
/// in ascending id order so the averages are summed in a fixed order.
RetrievalMetricsReport evaluate_run(const std::map<std::string, RankedList>& run, const RelevanceJudgments& qrels,
                                    std::size_t k, DcgGain gain = DcgGain::linear);

/// Fraction of predictions equal to gold; nullopt predictions count as wrong.
/// Throws InputError on empty or mismatched inputs.
double accuracy(std::span<const std::optional<std::string>> predictions, std::span<const std::string> gold);

struct OverlapScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Clipped n-gram overlap over tokenized text.
OverlapScore rouge_n(std::string_view candidate, std::string_view reference, std::size_t n);
OverlapScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, std::size_t n);

/// Longest-common-subsequence overlap.
OverlapScore rouge_l(std::string_view candidate, std::string_view reference);
OverlapScore rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);

/// Sentence BLEU: geometric mean of clipped n-gram precisions for
/// n = 1..min(max_n, |candidate|) times the brevity penalty. Orders n >= 2 use
/// add-one smoothing; unigram precision is unsmoothed.
double bleu(std::string_view candidate, std::string_view reference, std::size_t max_n = 4);
double bleu(std::span<const std::string> candidate, std::span<const std::string> reference, std::size_t max_n = 4);

struct GenItemScores {
    std::string id;
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    double bleu = 0.0;
};

/// Macro-averaged F-measures and BLEU, scaled x100.
struct GenMetricsReport {
    std::size_t item_count = 0;
    double rouge1 = 0.0;
    double rouge2 = 0.0;
    double rougeL = 0.0;
    double bleu = 0.0;
    std::vector<GenItemScores> per_item;

    [[nodiscard]] std::string to_table() const;
    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

struct GenPair {
    std::string id;
    std::string candidate;
    std::string reference;
};

GenMetricsReport evaluate_generation(std::span<const GenPair> pairs);

}  // namespace medrag
