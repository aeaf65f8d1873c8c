#include "fedkge/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "fedkge/rng.hpp"

namespace fedkge {

namespace {

constexpr int kLatentDim = 8;

// Box-Muller on the portable uniform; good enough for synthesis.
double gaussian(Rng& rng) {
  const double u1 = 1.0 - rng.unit();  // (0, 1]
  const double u2 = rng.unit();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

TripleStore generate_synthetic_kg(const SynthSpec& spec) {
  if (spec.entities < 10 || spec.relations < 1 || spec.triples < 1 ||
      spec.clusters < 1 || spec.clusters > spec.entities) {
    throw std::invalid_argument("bad synthetic KG parameters");
  }
  Rng rng(substream(spec.seed, "synth"));

  // cluster centers, then entity positions jittered around them
  std::vector<std::vector<double>> centers(spec.clusters,
                                           std::vector<double>(kLatentDim));
  for (auto& c : centers)
    for (auto& x : c) x = 4.0 * gaussian(rng);

  std::vector<int> cluster(spec.entities);
  std::vector<std::vector<double>> pos(spec.entities,
                                       std::vector<double>(kLatentDim));
  for (int e = 0; e < spec.entities; ++e) {
    cluster[e] = e % spec.clusters;
    for (int d = 0; d < kLatentDim; ++d) {
      pos[e][d] = centers[cluster[e]][d] + gaussian(rng);
    }
  }

  // relation j translates its source cluster onto its target cluster
  std::vector<int> rel_src(spec.relations), rel_dst(spec.relations);
  std::vector<std::vector<double>> rel_vec(spec.relations,
                                           std::vector<double>(kLatentDim));
  for (int r = 0; r < spec.relations; ++r) {
    rel_src[r] = static_cast<int>(rng.below(spec.clusters));
    rel_dst[r] = static_cast<int>(rng.below(spec.clusters));
    for (int d = 0; d < kLatentDim; ++d) {
      rel_vec[r][d] = centers[rel_dst[r]][d] - centers[rel_src[r]][d] +
                      0.25 * gaussian(rng);
    }
  }

  // nearest entity to q other than `exclude` (a relation must relate two
  // distinct entities; otherwise self-loops dominate and rank trivially)
  auto nearest_entity = [&](const std::vector<double>& q, int exclude) {
    int best = exclude == 0 ? 1 : 0;
    double best_d = HUGE_VAL;
    for (int e = 0; e < spec.entities; ++e) {
      if (e == exclude) continue;
      double d = 0.0;
      for (int k = 0; k < kLatentDim; ++k) {
        const double diff = q[k] - pos[e][k];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = e;
      }
    }
    return best;
  };

  // members per cluster for head sampling
  std::vector<std::vector<int>> members(spec.clusters);
  for (int e = 0; e < spec.entities; ++e) members[cluster[e]].push_back(e);

  // Every triple uses a distinct (head, relation) pair, so held-out queries
  // are never answerable by memorizing a train duplicate; ranking quality
  // has to come from the learned geometry.
  std::vector<std::pair<int, int>> pairs;  // (relation, head)
  for (int r = 0; r < spec.relations; ++r) {
    for (int h : members[rel_src[r]]) pairs.emplace_back(r, h);
  }
  if (static_cast<int>(pairs.size()) < spec.triples) {
    throw std::invalid_argument(
        "not enough distinct (head, relation) pairs; lower triples or raise "
        "entities/relations");
  }
  rng.shuffle(pairs);

  TripleStore store;
  std::vector<double> q(kLatentDim);
  for (int i = 0; i < spec.triples; ++i) {
    const auto [r, h] = pairs[i];
    int t;
    if (rng.unit() < spec.noise) {
      do {
        t = static_cast<int>(rng.below(spec.entities));
      } while (t == h);
    } else {
      for (int k = 0; k < kLatentDim; ++k) q[k] = pos[h][k] + rel_vec[r][k];
      t = nearest_entity(q, h);
    }
    Triple triple;
    triple.head = store.entities.get_or_add("e" + std::to_string(h));
    triple.relation = store.relations.get_or_add("r" + std::to_string(r));
    triple.tail = store.entities.get_or_add("e" + std::to_string(t));
    store.triples.push_back(triple);
  }
  return store;
}

void write_triples_tsv(const TripleStore& store,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const Triple& t : store.triples) {
    out << store.entities.name(t.head) << '\t' << store.relations.name(t.relation)
        << '\t' << store.entities.name(t.tail) << '\n';
  }
}

}  // namespace fedkge
