#include "fedkge/ranking.hpp"

#include <stdexcept>

#include "fedkge/methods.hpp"

namespace fedkge {

namespace {

double rank_of(std::span<const double> scores, std::int32_t answer,
               const TripleSet& filter, const Triple& query,
               bool replace_tail) {
  const double target = scores[answer];
  std::size_t better = 0, tied_others = 0;
  for (std::int32_t e = 0; e < static_cast<std::int32_t>(scores.size()); ++e) {
    if (e == answer) continue;
    const std::uint64_t key = replace_tail
                                  ? triple_key(query.head, query.relation, e)
                                  : triple_key(e, query.relation, query.tail);
    if (filter.contains(key)) continue;
    if (scores[e] > target) {
      ++better;
    } else if (scores[e] == target) {
      ++tied_others;
    }
  }
  // mean rank of the tied block [better+1, better+tied_others+1]
  return static_cast<double>(better) +
         (static_cast<double>(tied_others) + 2.0) / 2.0;
}

}  // namespace

RankingResult evaluate_ranking(const EmbeddingTable& table,
                               std::span<const Triple> queries,
                               const TripleSet& filter) {
  if (queries.empty()) throw std::invalid_argument("no queries to rank");
  if (!all_finite(table.entities.data()) ||
      !all_finite(table.relations.data())) {
    throw std::runtime_error("embedding table contains non-finite values");
  }

  RankingResult res;
  res.ranks.reserve(queries.size() * 2);
  std::vector<double> scores(table.entities.rows());

  for (const Triple& q : queries) {
    score_all_candidates(table.method, table.dim, table.entities,
                         table.entities.row(q.head),
                         table.relations.row(q.relation),
                         /*replace_tail=*/true, scores);
    res.ranks.push_back(rank_of(scores, q.tail, filter, q, true));

    score_all_candidates(table.method, table.dim, table.entities,
                         table.entities.row(q.tail),
                         table.relations.row(q.relation),
                         /*replace_tail=*/false, scores);
    res.ranks.push_back(rank_of(scores, q.head, filter, q, false));
  }

  double rr = 0.0, hits = 0.0;
  for (double rank : res.ranks) {
    rr += 1.0 / rank;
    if (rank <= 10.0) hits += 1.0;
  }
  res.mrr = rr / static_cast<double>(res.ranks.size());
  res.hits_at_10 = hits / static_cast<double>(res.ranks.size());
  return res;
}

std::pair<double, double> weighted_metrics(
    std::span<const RankingResult> results,
    std::span<const std::size_t> weights) {
  if (results.size() != weights.size()) {
    throw std::invalid_argument("one weight per client result required");
  }
  std::size_t total = 0;
  for (auto w : weights) total += w;
  if (total == 0) throw std::invalid_argument("zero total weight");
  double mrr = 0.0, hits = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const double w = static_cast<double>(weights[i]) /
                     static_cast<double>(total);
    mrr += w * results[i].mrr;
    hits += w * results[i].hits_at_10;
  }
  return {mrr, hits};
}

}  // namespace fedkge
