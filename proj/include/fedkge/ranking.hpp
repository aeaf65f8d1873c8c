#pragma once
// Filtered link-prediction evaluation. Every query is ranked in both
// replacement directions against all local entities; candidates that form a
// known triple (other than the query itself) are skipped. Tied scores
// receive the mean rank of the tied block, so ranks may be half-integers.

#include <span>
#include <utility>
#include <vector>

#include "fedkge/embedding.hpp"
#include "fedkge/kg.hpp"

namespace fedkge {

struct RankingResult {
  double mrr = 0.0;
  double hits_at_10 = 0.0;
  std::vector<double> ranks;  // 2 * |queries| entries: tail then head per query
};

RankingResult evaluate_ranking(const EmbeddingTable& table,
                               std::span<const Triple> queries,
                               const TripleSet& filter);

// Weighted arithmetic mean of (mrr, hits@10); weights are evaluated-split
// triple counts.
std::pair<double, double> weighted_metrics(
    std::span<const RankingResult> results,
    std::span<const std::size_t> weights);

}  // namespace fedkge
