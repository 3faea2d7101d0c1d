#include "medrag/evalkit.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "medrag/errors.hpp"

namespace medrag {

namespace {

double gain_of(int grade, DcgGain gain) {
    return gain == DcgGain::linear ? static_cast<double>(grade) : std::exp2(static_cast<double>(grade)) - 1.0;
}

double discount(std::size_t rank) { return std::log2(static_cast<double>(rank) + 1.0); }

std::size_t cutoff(const RankedList& ranked, std::size_t k) {
    if (k == 0) throw InputError("cutoff k must be >= 1");
    return std::min(k, ranked.size());
}

double harmonic(double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

using NgramCounts = std::map<std::vector<std::string_view>, std::size_t>;

NgramCounts ngrams(std::span<const std::string> tokens, std::size_t n) {
    NgramCounts out;
    if (n == 0 || tokens.size() < n) return out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::vector<std::string_view> key(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                          tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
        ++out[std::move(key)];
    }
    return out;
}

std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
    std::size_t overlap = 0;
    for (const auto& [gram, count] : cand) {
        if (auto it = ref.find(gram); it != ref.end()) overlap += std::min(count, it->second);
    }
    return overlap;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

template <typename T>
double mean_of(const std::vector<T>& xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

}  // namespace

double dcg_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k, DcgGain gain) {
    const std::size_t n = cutoff(ranked, k);
    double dcg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dcg += gain_of(qrels.grade(ranked.query_id, ranked.entries[i].doc_id), gain) / discount(i + 1);
    }
    return dcg;
}

std::optional<double> ndcg_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k,
                                DcgGain gain) {
    if (k == 0) throw InputError("cutoff k must be >= 1");
    if (qrels.relevant_count(ranked.query_id) == 0) return std::nullopt;
    std::vector<int> grades;
    for (const auto& [doc, g] : *qrels.find(ranked.query_id)) grades.push_back(g);
    std::sort(grades.begin(), grades.end(), std::greater<>());
    double ideal = 0.0;
    for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) ideal += gain_of(grades[i], gain) / discount(i + 1);
    return dcg_at_k(ranked, qrels, k, gain) / ideal;
}

double mrr_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k) {
    const std::size_t n = cutoff(ranked, k);
    for (std::size_t i = 0; i < n; ++i) {
        if (qrels.grade(ranked.query_id, ranked.entries[i].doc_id) >= 1) return 1.0 / static_cast<double>(i + 1);
    }
    return 0.0;
}

PrecisionRecallF1 precision_recall_f1_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k) {
    const std::size_t n = cutoff(ranked, k);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (qrels.grade(ranked.query_id, ranked.entries[i].doc_id) >= 1) ++hits;
    }
    PrecisionRecallF1 out;
    out.precision = static_cast<double>(hits) / static_cast<double>(k);
    const std::size_t relevant = qrels.relevant_count(ranked.query_id);
    if (relevant > 0) {
        out.recall = static_cast<double>(hits) / static_cast<double>(relevant);
        out.f1 = harmonic(out.precision, *out.recall);
    }
    return out;
}

std::optional<double> map_at_k(const RankedList& ranked, const RelevanceJudgments& qrels, std::size_t k) {
    const std::size_t n = cutoff(ranked, k);
    const std::size_t relevant = qrels.relevant_count(ranked.query_id);
    if (relevant == 0) return std::nullopt;
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (qrels.grade(ranked.query_id, ranked.entries[i].doc_id) >= 1) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    return sum / static_cast<double>(std::min(relevant, k));
}

RetrievalMetricsReport evaluate_run(const std::map<std::string, RankedList>& run, const RelevanceJudgments& qrels,
                                    std::size_t k, DcgGain gain) {
    if (k == 0) throw InputError("cutoff k must be >= 1");
    RetrievalMetricsReport report;
    report.k = k;
    std::vector<double> dcg, ndcg, mrr, precision, recall, f1, map;
    for (const auto& [qid, list] : run) {
        if (!qrels.contains(qid)) {
            report.unknown_queries.push_back(qid);
            continue;
        }
        QueryMetrics m;
        m.query_id = qid;
        m.dcg = dcg_at_k(list, qrels, k, gain);
        m.ndcg = ndcg_at_k(list, qrels, k, gain);
        m.mrr = mrr_at_k(list, qrels, k);
        const auto prf = precision_recall_f1_at_k(list, qrels, k);
        m.precision = prf.precision;
        m.recall = prf.recall;
        m.f1 = prf.f1;
        m.map = map_at_k(list, qrels, k);

        dcg.push_back(m.dcg);
        mrr.push_back(m.mrr);
        precision.push_back(m.precision);
        if (m.ndcg) {
            ndcg.push_back(*m.ndcg);
            recall.push_back(*m.recall);
            f1.push_back(*m.f1);
            map.push_back(*m.map);
        } else {
            ++report.excluded_no_relevant;
        }
        report.per_query.push_back(std::move(m));
    }
    report.query_count = report.per_query.size();
    report.dcg = mean_of(dcg);
    report.ndcg = mean_of(ndcg);
    report.mrr = mean_of(mrr);
    report.precision = mean_of(precision);
    report.recall = mean_of(recall);
    report.f1 = mean_of(f1);
    report.map = mean_of(map);
    return report;
}

std::string RetrievalMetricsReport::to_table() const {
    std::string out = fmt::format("{:<16}{:>10}\n", "Metric", "Value");
    auto row = [&](std::string_view name, double v) { out += fmt::format("{:<16}{:>10.2f}\n", name, v); };
    row(fmt::format("DCG@{}", k), dcg);
    row(fmt::format("NDCG@{}", k), ndcg * 100.0);
    row(fmt::format("MRR@{}", k), mrr * 100.0);
    row(fmt::format("Precision@{}", k), precision * 100.0);
    row(fmt::format("Recall@{}", k), recall * 100.0);
    row(fmt::format("F1-score@{}", k), f1 * 100.0);
    row(fmt::format("MAP@{}", k), map * 100.0);
    out += fmt::format("{:<16}{:>10}\n", "queries", query_count);
    if (excluded_no_relevant > 0) {
        out += fmt::format("{:<16}{:>10}\n", "no-relevant", excluded_no_relevant);
    }
    return out;
}

nlohmann::ordered_json RetrievalMetricsReport::to_json() const {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
    nlohmann::ordered_json j;
    j["k"] = k;
    j["query_count"] = query_count;
    j["excluded_no_relevant"] = excluded_no_relevant;
    j["unknown_queries"] = unknown_queries;
    j["scale"] = "rate metrics x100; dcg raw";
    j["metrics"] = {{"dcg", dcg},           {"ndcg", ndcg * 100.0},   {"mrr", mrr * 100.0},
                    {"precision", precision * 100.0}, {"recall", recall * 100.0}, {"f1", f1 * 100.0},
                    {"map", map * 100.0}};
    auto per = nlohmann::ordered_json::array();
    for (const auto& m : per_query) {
        per.push_back({{"query_id", m.query_id},
                       {"dcg", m.dcg},
                       {"ndcg", opt(m.ndcg)},
                       {"mrr", m.mrr},
                       {"precision", m.precision},
                       {"recall", opt(m.recall)},
                       {"f1", opt(m.f1)},
                       {"map", opt(m.map)}});
    }
    j["per_query"] = std::move(per);
    return j;
}

double accuracy(std::span<const std::optional<std::string>> predictions, std::span<const std::string> gold) {
    if (predictions.empty()) throw InputError("accuracy of an empty prediction set is undefined");
    if (predictions.size() != gold.size()) throw InputError("predictions and gold differ in length");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] && *predictions[i] == gold[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

OverlapScore rouge_n(std::span<const std::string> candidate, std::span<const std::string> reference, std::size_t n) {
    if (n == 0) throw InputError("rouge n must be >= 1");
    const auto c = ngrams(candidate, n);
    const auto r = ngrams(reference, n);
    const std::size_t c_total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
    const std::size_t r_total = reference.size() >= n ? reference.size() - n + 1 : 0;
    if (c_total == 0 || r_total == 0) return {};
    const auto overlap = static_cast<double>(clipped_overlap(c, r));
    OverlapScore s;
    s.precision = overlap / static_cast<double>(c_total);
    s.recall = overlap / static_cast<double>(r_total);
    s.f1 = harmonic(s.precision, s.recall);
    return s;
}

OverlapScore rouge_n(std::string_view candidate, std::string_view reference, std::size_t n) {
    const auto c = tokenize(candidate);
    const auto r = tokenize(reference);
    return rouge_n(std::span<const std::string>(c), std::span<const std::string>(r), n);
}

OverlapScore rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
    if (candidate.empty() || reference.empty()) return {};
    const auto lcs = static_cast<double>(lcs_length(candidate, reference));
    OverlapScore s;
    s.precision = lcs / static_cast<double>(candidate.size());
    s.recall = lcs / static_cast<double>(reference.size());
    s.f1 = harmonic(s.precision, s.recall);
    return s;
}

OverlapScore rouge_l(std::string_view candidate, std::string_view reference) {
    const auto c = tokenize(candidate);
    const auto r = tokenize(reference);
    return rouge_l(std::span<const std::string>(c), std::span<const std::string>(r));
}

double bleu(std::span<const std::string> candidate, std::span<const std::string> reference, std::size_t max_n) {
    if (max_n == 0) throw InputError("bleu max_n must be >= 1");
    if (candidate.empty() || reference.empty()) return 0.0;
    const std::size_t orders = std::min(max_n, candidate.size());
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= orders; ++n) {
        const auto matched = static_cast<double>(clipped_overlap(ngrams(candidate, n), ngrams(reference, n)));
        const auto total = static_cast<double>(candidate.size() - n + 1);
        double p;
        if (n == 1) {
            if (matched == 0.0) return 0.0;
            p = matched / total;
        } else {
            p = (matched + 1.0) / (total + 1.0);
        }
        log_sum += std::log(p);
    }
    const auto c = static_cast<double>(candidate.size());
    const auto r = static_cast<double>(reference.size());
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
    return bp * std::exp(log_sum / static_cast<double>(orders));
}

double bleu(std::string_view candidate, std::string_view reference, std::size_t max_n) {
    const auto c = tokenize(candidate);
    const auto r = tokenize(reference);
    return bleu(std::span<const std::string>(c), std::span<const std::string>(r), max_n);
}

GenMetricsReport evaluate_generation(std::span<const GenPair> pairs) {
    if (pairs.empty()) throw InputError("no generation pairs to score");
    GenMetricsReport report;
    std::vector<double> r1, r2, rl, bl;
    for (const auto& p : pairs) {
        const auto c = tokenize(p.candidate);
        const auto r = tokenize(p.reference);
        GenItemScores s;
        s.id = p.id;
        s.rouge1 = rouge_n(std::span<const std::string>(c), std::span<const std::string>(r), 1).f1;
        s.rouge2 = rouge_n(std::span<const std::string>(c), std::span<const std::string>(r), 2).f1;
        s.rougeL = rouge_l(std::span<const std::string>(c), std::span<const std::string>(r)).f1;
        s.bleu = bleu(std::span<const std::string>(c), std::span<const std::string>(r));
        r1.push_back(s.rouge1);
        r2.push_back(s.rouge2);
        rl.push_back(s.rougeL);
        bl.push_back(s.bleu);
        report.per_item.push_back(std::move(s));
    }
    report.item_count = pairs.size();
    report.rouge1 = mean_of(r1) * 100.0;
    report.rouge2 = mean_of(r2) * 100.0;
    report.rougeL = mean_of(rl) * 100.0;
    report.bleu = mean_of(bl) * 100.0;
    return report;
}

std::string GenMetricsReport::to_table() const {
    std::string out = fmt::format("{:<16}{:>10}\n", "Metric", "Value");
    out += fmt::format("{:<16}{:>10.2f}\n", "ROUGE-1", rouge1);
    out += fmt::format("{:<16}{:>10.2f}\n", "ROUGE-2", rouge2);
    out += fmt::format("{:<16}{:>10.2f}\n", "ROUGE-L", rougeL);
    out += fmt::format("{:<16}{:>10.2f}\n", "BLEU", bleu);
    out += fmt::format("{:<16}{:>10}\n", "items", item_count);
    return out;
}

nlohmann::ordered_json GenMetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["item_count"] = item_count;
    j["scale"] = "x100";
    j["metrics"] = {{"rouge1", rouge1}, {"rouge2", rouge2}, {"rougeL", rougeL}, {"bleu", bleu}};
    auto per = nlohmann::ordered_json::array();
    for (const auto& s : per_item) {
        per.push_back({{"id", s.id}, {"rouge1", s.rouge1}, {"rouge2", s.rouge2}, {"rougeL", s.rougeL}, {"bleu", s.bleu}});
    }
    j["per_item"] = std::move(per);
    return j;
}

}  // namespace medrag
