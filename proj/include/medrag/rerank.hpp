#pragma once

#include <cstddef>
#include <string>

#include "medrag/ranked_list.hpp"

namespace medrag {

enum class FusionKind { semantic_only, lexical_only, weighted, rrf };

/// How lexical and semantic lists are merged. `alpha` is the semantic weight
/// (weighted only); `rrf_k` is the reciprocal-rank offset (rrf only).
class FusionStrategy {
public:
    static FusionStrategy semantic_only() { return FusionStrategy(FusionKind::semantic_only, 0.0, 0.0); }
    static FusionStrategy lexical_only() { return FusionStrategy(FusionKind::lexical_only, 0.0, 0.0); }
    /// Throws InputError unless alpha lies in [0, 1].
    static FusionStrategy weighted(double alpha = 0.7);
    /// Throws InputError unless rrf_k > 0.
    static FusionStrategy rrf(double rrf_k = 60.0);

    [[nodiscard]] FusionKind kind() const { return kind_; }
    [[nodiscard]] double alpha() const;
    [[nodiscard]] double rrf_k() const;

private:
    FusionStrategy(FusionKind kind, double alpha, double rrf_k) : kind_(kind), alpha_(alpha), rrf_k_(rrf_k) {}

    FusionKind kind_;
    double alpha_;
    double rrf_k_;
};

std::string to_string(FusionKind kind);
FusionKind parse_fusion_kind(const std::string& s);

/// Merges the two retrievers' lists for one query and truncates to k.
/// Throws InputError if the lists belong to different queries or k == 0.
RankedList fuse(const RankedList& lex, const RankedList& sem, const FusionStrategy& strategy, std::size_t k);

}  // namespace medrag
