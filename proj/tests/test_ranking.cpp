#include <doctest.h>

#include "fedkge/ranking.hpp"
#include "helpers.hpp"

using namespace fedkge;

namespace {

EmbeddingTable table_for(KgeMethod m, int dim, int entities, int relations,
                         std::uint64_t seed) {
  EmbeddingTable t;
  t.method = m;
  t.dim = dim;
  t.entities = Mat(entities, entity_width(m, dim));
  t.relations = Mat(relations, relation_width(m, dim));
  testutil::randomize_table(t, seed);
  return t;
}

}  // namespace

TEST_CASE("dominant answer ranks first") {
  // TransE with t = h + r exactly: the true tail has distance 0
  EmbeddingTable t = table_for(KgeMethod::TransE, 3, 6, 1, 2);
  auto h = t.entities.row(0);
  auto r = t.relations.row(0);
  auto tail = t.entities.row(1);
  for (int k = 0; k < 3; ++k) tail[k] = h[k] + r[k];

  TripleSet filter;
  filter.insert(triple_key(0, 0, 1));
  const std::vector<Triple> queries{Triple{0, 0, 1}};
  const RankingResult res = evaluate_ranking(t, queries, filter);
  CHECK(res.ranks[0] == 1.0);  // tail direction
}

TEST_CASE("all-tied scores give the mean rank") {
  // all-zero embeddings -> every candidate ties
  EmbeddingTable t;
  t.method = KgeMethod::TransE;
  t.dim = 2;
  t.entities = Mat(7, 2);
  t.relations = Mat(1, 2);
  TripleSet filter;
  filter.insert(triple_key(0, 0, 1));
  const std::vector<Triple> queries{Triple{0, 0, 1}};
  const RankingResult res = evaluate_ranking(t, queries, filter);
  CHECK(res.ranks[0] == 4.0);  // (7+1)/2
  CHECK(res.ranks[1] == 4.0);
}

TEST_CASE("empty queries are rejected") {
  EmbeddingTable t = table_for(KgeMethod::TransE, 2, 3, 1, 1);
  TripleSet filter;
  CHECK_THROWS_AS(evaluate_ranking(t, {}, filter), std::invalid_argument);
}

TEST_CASE("filtered ranking matches the exhaustive oracle") {
  for (auto m : {KgeMethod::TransE, KgeMethod::RotatE, KgeMethod::ComplEx}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const TripleStore kg = testutil::random_kg(20, 4, 60, 300 + seed);
      EmbeddingTable t = table_for(m, 4, 20, 4, 400 + seed);

      TripleSet filter;
      for (const auto& tr : kg.triples) {
        filter.insert(triple_key(tr.head, tr.relation, tr.tail));
      }
      const std::span<const Triple> queries{kg.triples.data(), 20};
      const RankingResult fast = evaluate_ranking(t, queries, filter);
      const RankingResult oracle = testutil::brute_force_ranking(t, queries, filter);
      REQUIRE(fast.ranks.size() == oracle.ranks.size());
      for (std::size_t i = 0; i < fast.ranks.size(); ++i) {
        CHECK(fast.ranks[i] == oracle.ranks[i]);
      }
      CHECK(fast.mrr == oracle.mrr);
      CHECK(fast.hits_at_10 == oracle.hits_at_10);
    }
  }
}

TEST_CASE("weighted metrics") {
  RankingResult a, b;
  a.mrr = 0.2; a.hits_at_10 = 0.5;
  b.mrr = 0.4; b.hits_at_10 = 0.7;
  const std::vector<RankingResult> results{a, b};

  SUBCASE("weighted mean") {
    const std::vector<std::size_t> w{10, 30};
    const auto [mrr, hits] = weighted_metrics(results, w);
    CHECK(mrr == doctest::Approx(0.35));
    CHECK(hits == doctest::Approx(0.65));
  }
  SUBCASE("equal values collapse to the value") {
    const std::vector<RankingResult> same{a, a};
    const std::vector<std::size_t> w{3, 11};
    CHECK(weighted_metrics(same, w).first == doctest::Approx(0.2));
  }
  SUBCASE("single client") {
    const std::vector<RankingResult> one{b};
    const std::vector<std::size_t> w{5};
    CHECK(weighted_metrics(one, w).first == 0.4);
  }
  SUBCASE("zero total weight errors") {
    const std::vector<std::size_t> w{0, 0};
    CHECK_THROWS_AS(weighted_metrics(results, w), std::invalid_argument);
  }
}
