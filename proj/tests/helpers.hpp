#pragma once
// Shared test utilities: independent oracles and small dataset builders.
// Everything here recomputes results from first principles so the checks
// stay independent of the library's internal shortcuts.

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "fedkge/embedding.hpp"
#include "fedkge/kg.hpp"
#include "fedkge/ranking.hpp"
#include "fedkge/rng.hpp"

namespace testutil {

inline fedkge::TripleStore store_from(
    const std::vector<std::array<std::string, 3>>& rows) {
  fedkge::TripleStore store;
  for (const auto& row : rows) {
    fedkge::Triple t;
    t.head = store.entities.get_or_add(row[0]);
    t.relation = store.relations.get_or_add(row[1]);
    t.tail = store.entities.get_or_add(row[2]);
    store.triples.push_back(t);
  }
  return store;
}

// relative error with an absolute floor
inline bool close_rel(double a, double b, double rel = 1e-4,
                      double abs_floor = 1e-6) {
  const double diff = std::abs(a - b);
  if (diff <= abs_floor) return true;
  return diff <= rel * std::max(std::abs(a), std::abs(b));
}

// Central finite differences d f / d params[i], step 1e-5.
inline std::vector<double> fd_gradient(
    std::vector<double>& params, const std::function<double()>& f,
    double step = 1e-5) {
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + step;
    const double hi = f();
    params[i] = keep - step;
    const double lo = f();
    params[i] = keep;
    grad[i] = (hi - lo) / (2.0 * step);
  }
  return grad;
}

// A random KG over n entities / r relations with m distinct triples.
inline fedkge::TripleStore random_kg(int n, int r, int m, std::uint64_t seed) {
  fedkge::Rng rng(seed);
  std::vector<std::array<std::string, 3>> rows;
  fedkge::TripleSet seen;
  while (static_cast<int>(rows.size()) < m) {
    const auto h = static_cast<std::int32_t>(rng.below(n));
    const auto rel = static_cast<std::int32_t>(rng.below(r));
    const auto t = static_cast<std::int32_t>(rng.below(n));
    if (!seen.insert(fedkge::triple_key(h, rel, t)).second) continue;
    rows.push_back({"e" + std::to_string(h), "r" + std::to_string(rel),
                    "e" + std::to_string(t)});
  }
  return store_from(rows);
}

// Exhaustive filtered-ranking oracle: per query and direction, scores every
// candidate with score(), skips filtered candidates, and assigns the mean
// rank of the tied block. Independent of evaluate_ranking's internals.
fedkge::RankingResult brute_force_ranking(const fedkge::EmbeddingTable& table,
                                          std::span<const fedkge::Triple> queries,
                                          const fedkge::TripleSet& filter);

// Fills a table with uniform random values in [-1, 1] (RotatE phases in
// [-pi, pi]) without the init derivation, for oracle tests.
void randomize_table(fedkge::EmbeddingTable& table, std::uint64_t seed);

// Federation with explicit ownership: ownership[g] lists the clients owning
// global entity g. Shards carry no triples; protocol tests drive the tables
// directly.
fedkge::FederationSpec manual_fed(int num_clients,
                                  const std::vector<std::vector<int>>& ownership);

// Entity table of the given width for one shard, entries from the seed.
fedkge::EmbeddingTable table_for_shard(const fedkge::ClientShard& shard,
                                       fedkge::KgeMethod method, int dim,
                                       std::uint64_t seed);

}  // namespace testutil
