#include "helpers.hpp"

#include <numbers>

#include "fedkge/methods.hpp"

namespace testutil {

namespace {

double oracle_rank(const fedkge::EmbeddingTable& table, const fedkge::Triple& q,
                   bool replace_tail, const fedkge::TripleSet& filter) {
  const auto n = static_cast<std::int32_t>(table.entities.rows());
  const std::int32_t answer = replace_tail ? q.tail : q.head;
  auto candidate_score = [&](std::int32_t e) {
    const auto h = replace_tail ? table.entities.row(q.head)
                                : table.entities.row(e);
    const auto t = replace_tail ? table.entities.row(e)
                                : table.entities.row(q.tail);
    return fedkge::score(table.method, table.dim, h,
                         table.relations.row(q.relation), t);
  };
  const double target = candidate_score(answer);
  int better = 0, tied = 0;
  for (std::int32_t e = 0; e < n; ++e) {
    if (e == answer) continue;
    const auto key = replace_tail
                         ? fedkge::triple_key(q.head, q.relation, e)
                         : fedkge::triple_key(e, q.relation, q.tail);
    if (filter.contains(key)) continue;
    const double s = candidate_score(e);
    if (s > target) ++better;
    if (s == target) ++tied;
  }
  // tied block occupies ranks better+1 .. better+tied+1
  double sum = 0.0;
  for (int k = 0; k <= tied; ++k) sum += better + 1 + k;
  return sum / (tied + 1);
}

}  // namespace

fedkge::RankingResult brute_force_ranking(const fedkge::EmbeddingTable& table,
                                          std::span<const fedkge::Triple> queries,
                                          const fedkge::TripleSet& filter) {
  fedkge::RankingResult res;
  for (const auto& q : queries) {
    res.ranks.push_back(oracle_rank(table, q, true, filter));
    res.ranks.push_back(oracle_rank(table, q, false, filter));
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

void randomize_table(fedkge::EmbeddingTable& table, std::uint64_t seed) {
  fedkge::Rng rng(seed);
  for (auto& v : table.entities.data()) v = rng.uniform(-1.0, 1.0);
  if (table.method == fedkge::KgeMethod::RotatE) {
    for (auto& v : table.relations.data()) {
      v = rng.uniform(-std::numbers::pi, std::numbers::pi);
    }
  } else {
    for (auto& v : table.relations.data()) v = rng.uniform(-1.0, 1.0);
  }
}

fedkge::FederationSpec manual_fed(
    int num_clients, const std::vector<std::vector<int>>& ownership) {
  fedkge::FederationSpec fed;
  fed.existence = ownership;
  fed.clients.resize(num_clients);
  for (int c = 0; c < num_clients; ++c) fed.clients[c].client_id = c;
  for (std::size_t g = 0; g < ownership.size(); ++g) {
    fed.entities.get_or_add("e" + std::to_string(g));
    for (int c : ownership[g]) {
      fed.clients[c].local_to_global.push_back(static_cast<std::int32_t>(g));
    }
  }
  fedkge::compute_shared_entities(fed);
  return fed;
}

fedkge::EmbeddingTable table_for_shard(const fedkge::ClientShard& shard,
                                       fedkge::KgeMethod method, int dim,
                                       std::uint64_t seed) {
  fedkge::EmbeddingTable t;
  t.method = method;
  t.dim = dim;
  t.entities = fedkge::Mat(shard.num_entities(),
                           fedkge::entity_width(method, dim));
  t.relations = fedkge::Mat(1, fedkge::relation_width(method, dim));
  randomize_table(t, seed);
  t.history = fedkge::Mat(shard.num_shared(), t.entities.cols());
  for (std::size_t i = 0; i < shard.num_shared(); ++i) {
    fedkge::copy_into(t.entities.row(shard.shared_entities[i]),
                      t.history.row(i));
  }
  return t;
}

}  // namespace testutil
