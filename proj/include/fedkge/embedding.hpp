#pragma once
// Embedding storage and initialization for the three KGE methods.
//
// Complex-space methods (RotatE, ComplEx) store rows as [re_0..re_{D-1},
// im_0..im_{D-1}], so their entity width is 2D. RotatE relations are D phase
// angles; the unit-modulus rotation is materialized inside the scorers.

#include <cstdint>
#include <string>

#include "fedkge/kg.hpp"
#include "fedkge/mat.hpp"

namespace fedkge {

enum class KgeMethod { TransE, RotatE, ComplEx };

KgeMethod parse_kge_method(const std::string& name);
const char* kge_method_name(KgeMethod m);

inline bool complex_space(KgeMethod m) { return m != KgeMethod::TransE; }

inline int entity_width(KgeMethod m, int dim) {
  return complex_space(m) ? 2 * dim : dim;
}

inline int relation_width(KgeMethod m, int dim) {
  return m == KgeMethod::ComplEx ? 2 * dim : dim;
}

struct Hyperparams {
  double gamma = 8.0;        // margin
  double epsilon = 2.0;      // init-width term
  double adv_temperature = 1.0;
  double lr = 1e-4;
  int batch_size = 512;
  int local_epochs = 3;
  int negatives = 16;
};

struct EmbeddingTable {
  KgeMethod method = KgeMethod::TransE;
  int dim = 0;     // model dimension D
  Mat entities;    // num local entities x entity_width
  Mat relations;   // num local relations x relation_width
  // History upload copy: one row per shared entity, aligned with the
  // shard's shared_entities order. Tracks the last value sent upstream.
  Mat history;

  int entity_cols() const { return static_cast<int>(entities.cols()); }
};

// Entries uniform in +-(gamma+epsilon)/D; RotatE phases uniform in [-pi, pi].
// Each row's stream is derived from (seed, kind, global id, D), so a given
// global entity initializes identically on every client that owns it and a
// D-dimensional table is reproducible independently of shard layout.
EmbeddingTable init_embeddings(const ClientShard& shard, const Hyperparams& hp,
                               KgeMethod method, int dim, std::uint64_t seed);

}  // namespace fedkge
