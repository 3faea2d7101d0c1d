#include "medrag/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "medrag/errors.hpp"

namespace medrag {

namespace {

// Min-max scaling to [0, 1]; a constant list maps to all 1.
std::map<std::string, double> normalized(const RankedList& list) {
    std::map<std::string, double> out;
    if (list.empty()) return out;
    auto [lo_it, hi_it] = std::minmax_element(list.entries.begin(), list.entries.end(),
                                              [](const auto& a, const auto& b) { return a.score < b.score; });
    const double lo = lo_it->score;
    const double span = hi_it->score - lo;
    for (const auto& e : list.entries) {
        out[e.doc_id] = span > 0.0 ? (e.score - lo) / span : 1.0;
    }
    return out;
}

RankedList truncated(const RankedList& list, std::size_t k) {
    RankedList out;
    out.query_id = list.query_id;
    out.entries.assign(list.entries.begin(), list.entries.begin() + static_cast<std::ptrdiff_t>(std::min(k, list.size())));
    return out;
}

}  // namespace

FusionStrategy FusionStrategy::weighted(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw InputError("fusion alpha must lie in [0, 1]");
    }
    return FusionStrategy(FusionKind::weighted, alpha, 0.0);
}

FusionStrategy FusionStrategy::rrf(double rrf_k) {
    if (!(rrf_k > 0.0) || !std::isfinite(rrf_k)) {
        throw InputError("rrf_k must be a positive number");
    }
    return FusionStrategy(FusionKind::rrf, 0.0, rrf_k);
}

double FusionStrategy::alpha() const {
    if (kind_ != FusionKind::weighted) throw InputError("alpha is only defined for weighted fusion");
    return alpha_;
}

double FusionStrategy::rrf_k() const {
    if (kind_ != FusionKind::rrf) throw InputError("rrf_k is only defined for rrf fusion");
    return rrf_k_;
}

std::string to_string(FusionKind kind) {
    switch (kind) {
        case FusionKind::semantic_only: return "semantic_only";
        case FusionKind::lexical_only: return "lexical_only";
        case FusionKind::weighted: return "weighted";
        case FusionKind::rrf: return "rrf";
    }
    return "unknown";
}

FusionKind parse_fusion_kind(const std::string& s) {
    if (s == "semantic_only") return FusionKind::semantic_only;
    if (s == "lexical_only") return FusionKind::lexical_only;
    if (s == "weighted") return FusionKind::weighted;
    if (s == "rrf") return FusionKind::rrf;
    throw ConfigError("unknown fusion kind '" + s + "'");
}

RankedList fuse(const RankedList& lex, const RankedList& sem, const FusionStrategy& strategy, std::size_t k) {
    if (lex.query_id != sem.query_id) {
        throw InputError("fuse: query id mismatch (" + lex.query_id + " vs " + sem.query_id + ")");
    }
    if (k == 0) throw InputError("k must be >= 1");

    switch (strategy.kind()) {
        case FusionKind::semantic_only:
            return truncated(sem, k);
        case FusionKind::lexical_only:
            return truncated(lex, k);
        case FusionKind::weighted: {
            const double alpha = strategy.alpha();
            const auto lex_norm = normalized(lex);
            const auto sem_norm = normalized(sem);
            struct Candidate {
                std::string id;
                double score = 0.0;
                double presence = 0.0;
            };
            std::map<std::string, Candidate> fused;
            for (const auto& [id, s] : sem_norm) {
                auto& c = fused[id];
                c.score += alpha * s;
                c.presence += alpha;
            }
            for (const auto& [id, s] : lex_norm) {
                auto& c = fused[id];
                c.score += (1.0 - alpha) * s;
                c.presence += 1.0 - alpha;
            }
            // A doc normalized to 0 in a source still outranks docs the source
            // never returned, so equal scores fall back to weighted presence.
            std::vector<Candidate> ordered;
            for (auto& [id, c] : fused) {
                c.id = id;
                ordered.push_back(std::move(c));
            }
            std::sort(ordered.begin(), ordered.end(), [](const Candidate& a, const Candidate& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.presence != b.presence) return a.presence > b.presence;
                return a.id < b.id;
            });
            RankedList out;
            out.query_id = lex.query_id;
            for (std::size_t i = 0; i < std::min(k, ordered.size()); ++i) {
                out.entries.push_back({std::move(ordered[i].id), ordered[i].score, i + 1});
            }
            return out;
        }
        case FusionKind::rrf: {
            const double c = strategy.rrf_k();
            std::map<std::string, double> fused;
            for (const auto& e : lex.entries) fused[e.doc_id] += 1.0 / (c + static_cast<double>(e.rank));
            for (const auto& e : sem.entries) fused[e.doc_id] += 1.0 / (c + static_cast<double>(e.rank));
            return RankedList::from_scores(lex.query_id, {fused.begin(), fused.end()}, k);
        }
    }
    throw InputError("unknown fusion strategy");
}

}  // namespace medrag
