#include "medrag/lexical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <json.hpp>

#include "medrag/errors.hpp"
#include "medrag/fileio.hpp"

namespace medrag {

namespace {

constexpr std::string_view kFormat = "medrag-lexical-index";
constexpr int kVersion = 1;

// Query tokens that contribute summands, in query order.
TokenStream scoring_terms(const TokenStream& query, QueryTermMode mode) {
    if (mode == QueryTermMode::multiset) return query;
    TokenStream out;
    std::unordered_set<std::string_view> seen;
    for (const auto& t : query) {
        if (seen.insert(t).second) out.push_back(t);
    }
    return out;
}

}  // namespace

void Bm25Params::validate() const {
    if (!(k1 >= 0.0) || !std::isfinite(k1)) {
        throw InputError("bm25 k1 must be finite and >= 0");
    }
    if (!(b >= 0.0 && b <= 1.0)) {
        throw InputError("bm25 b must lie in [0, 1]");
    }
}

InvertedIndex InvertedIndex::build(std::span<const Document> docs, const Bm25Params& params) {
    params.validate();
    if (docs.empty()) {
        throw InputError("cannot index an empty corpus");
    }
    std::vector<const Document*> order;
    order.reserve(docs.size());
    for (const auto& d : docs) order.push_back(&d);
    std::sort(order.begin(), order.end(), [](const Document* a, const Document* b) { return a->id < b->id; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (order[i]->id == order[i - 1]->id) {
            throw IntegrityError("duplicate document id " + order[i]->id);
        }
    }

    InvertedIndex index;
    index.params_ = params;
    index.doc_ids_.reserve(order.size());
    index.doc_lengths_.reserve(order.size());
    for (std::uint32_t ord = 0; ord < order.size(); ++ord) {
        const auto tokens = tokenize(order[ord]->indexable_text());
        std::map<std::string_view, std::uint32_t> counts;
        for (const auto& t : tokens) ++counts[t];
        for (const auto& [term, tf] : counts) {
            auto it = index.postings_.find(term);
            if (it == index.postings_.end()) {
                it = index.postings_.emplace(std::string(term), std::vector<Posting>{}).first;
            }
            it->second.push_back({ord, tf});
        }
        index.doc_ids_.push_back(order[ord]->id);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    }
    index.finalize();
    return index;
}

void InvertedIndex::finalize() {
    std::uint64_t total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), std::uint64_t{0});
    avg_doc_length_ = doc_ids_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(doc_ids_.size());
}

std::size_t InvertedIndex::doc_freq(std::string_view term) const { return postings(term).size(); }

std::span<const Posting> InvertedIndex::postings(std::string_view term) const {
    auto it = postings_.find(term);
    if (it == postings_.end()) return {};
    return it->second;
}

std::optional<std::uint32_t> InvertedIndex::ordinal(std::string_view doc_id) const {
    auto it = std::lower_bound(doc_ids_.begin(), doc_ids_.end(), doc_id,
                               [](const std::string& a, std::string_view b) { return a < b; });
    if (it == doc_ids_.end() || *it != doc_id) return std::nullopt;
    return static_cast<std::uint32_t>(it - doc_ids_.begin());
}

std::uint32_t InvertedIndex::term_frequency(std::string_view term, std::uint32_t ord) const {
    auto list = postings(term);
    auto it = std::lower_bound(list.begin(), list.end(), ord, [](const Posting& p, std::uint32_t d) { return p.doc < d; });
    return (it != list.end() && it->doc == ord) ? it->tf : 0;
}

void InvertedIndex::validate() const {
    if (doc_ids_.size() != doc_lengths_.size()) {
        throw IntegrityError("doc id table and length table differ in size");
    }
    for (std::size_t i = 1; i < doc_ids_.size(); ++i) {
        if (!(doc_ids_[i - 1] < doc_ids_[i])) {
            throw IntegrityError("doc ids not strictly ascending at " + doc_ids_[i]);
        }
    }
    std::uint64_t total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), std::uint64_t{0});
    double mean = doc_ids_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(doc_ids_.size());
    if (std::abs(mean - avg_doc_length_) > 1e-12) {
        throw IntegrityError("avg_doc_length does not match document lengths");
    }
    std::vector<std::uint64_t> length_check(doc_ids_.size(), 0);
    for (const auto& [term, list] : postings_) {
        if (term.empty() || list.empty()) {
            throw IntegrityError("empty term or postings list");
        }
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (list[i].doc >= doc_ids_.size()) {
                throw IntegrityError("posting for term '" + term + "' points past the doc table");
            }
            if (i > 0 && list[i - 1].doc >= list[i].doc) {
                throw IntegrityError("postings for term '" + term + "' not sorted by doc");
            }
            if (list[i].tf == 0) {
                throw IntegrityError("zero term frequency in postings for '" + term + "'");
            }
            length_check[list[i].doc] += list[i].tf;
        }
    }
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        if (length_check[i] != doc_lengths_[i]) {
            throw IntegrityError("term frequencies of doc " + doc_ids_[i] + " do not sum to its length");
        }
    }
}

std::string InvertedIndex::serialize() const {
    nlohmann::ordered_json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["params"] = {{"k1", params_.k1},
                   {"b", params_.b},
                   {"query_terms", params_.query_terms == QueryTermMode::set ? "set" : "multiset"}};
    auto docs = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        docs.push_back({doc_ids_[i], doc_lengths_[i]});
    }
    j["docs"] = std::move(docs);
    auto postings = nlohmann::ordered_json::object();
    for (const auto& [term, list] : postings_) {
        auto flat = nlohmann::ordered_json::array();
        for (const auto& p : list) {
            flat.push_back(p.doc);
            flat.push_back(p.tf);
        }
        postings[term] = std::move(flat);
    }
    j["postings"] = std::move(postings);
    return j.dump() + "\n";
}

InvertedIndex InvertedIndex::deserialize(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("lexical index: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kFormat) {
            throw ParseError("not a lexical index file");
        }
        if (j.at("version").get<int>() != kVersion) {
            throw ParseError("unsupported lexical index version " + j.at("version").dump());
        }
        InvertedIndex index;
        const auto& p = j.at("params");
        index.params_.k1 = p.at("k1").get<double>();
        index.params_.b = p.at("b").get<double>();
        index.params_.query_terms =
            p.at("query_terms").get<std::string>() == "set" ? QueryTermMode::set : QueryTermMode::multiset;
        for (const auto& d : j.at("docs")) {
            index.doc_ids_.push_back(d.at(0).get<std::string>());
            index.doc_lengths_.push_back(d.at(1).get<std::uint32_t>());
        }
        for (const auto& [term, flat] : j.at("postings").items()) {
            if (flat.size() % 2 != 0) {
                throw ParseError("odd-length postings for term '" + term + "'");
            }
            std::vector<Posting> list;
            list.reserve(flat.size() / 2);
            for (std::size_t i = 0; i < flat.size(); i += 2) {
                list.push_back({flat[i].get<std::uint32_t>(), flat[i + 1].get<std::uint32_t>()});
            }
            index.postings_.emplace(term, std::move(list));
        }
        index.finalize();
        index.params_.validate();
        index.validate();
        return index;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("lexical index: ") + e.what());
    }
}

void InvertedIndex::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) { return deserialize(read_text_file(path)); }

double idf(const InvertedIndex& index, std::string_view term) {
    const auto n = static_cast<double>(index.total_docs());
    const auto nt = static_cast<double>(index.doc_freq(term));
    return std::log((n - nt + 0.5) / (nt + 0.5) + 1.0);
}

double bm25_tf(const Bm25Params& params, std::uint32_t tf, std::uint32_t doc_length, double avg_doc_length) {
    if (tf == 0) return 0.0;
    const double f = tf;
    const double norm = 1.0 - params.b + params.b * (static_cast<double>(doc_length) / avg_doc_length);
    return ((params.k1 + 1.0) * f) / (params.k1 * norm + f);
}

double bm25_score(const InvertedIndex& index, const Bm25Params& params, const TokenStream& query,
                  std::string_view doc_id) {
    auto ord = index.ordinal(doc_id);
    if (!ord) {
        throw InputError("unknown document id " + std::string(doc_id));
    }
    double score = 0.0;
    for (const auto& term : scoring_terms(query, params.query_terms)) {
        const auto tf = index.term_frequency(term, *ord);
        if (tf == 0) continue;
        score += idf(index, term) * bm25_tf(params, tf, index.doc_length(*ord), index.avg_doc_length());
    }
    return score;
}

RankedList lexical_search(const InvertedIndex& index, const Bm25Params& params, const Query& query, std::size_t k) {
    if (k == 0) {
        throw InputError("k must be >= 1");
    }
    const auto terms = scoring_terms(tokenize(query.text), params.query_terms);
    std::vector<double> acc(index.total_docs(), 0.0);
    std::vector<bool> matched(index.total_docs(), false);
    // Summation follows query token order, the same order bm25_score uses.
    for (const auto& term : terms) {
        const auto list = index.postings(term);
        if (list.empty()) continue;
        const double w = idf(index, term);
        for (const auto& p : list) {
            acc[p.doc] += w * bm25_tf(params, p.tf, index.doc_length(p.doc), index.avg_doc_length());
            matched[p.doc] = true;
        }
    }
    std::vector<std::pair<std::string, double>> scored;
    for (std::uint32_t d = 0; d < acc.size(); ++d) {
        if (matched[d]) scored.emplace_back(index.doc_id(d), acc[d]);
    }
    return RankedList::from_scores(query.id, std::move(scored), k);
}

}  // namespace medrag
