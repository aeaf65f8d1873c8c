#include "fedkge/embedding.hpp"

#include <numbers>
#include <stdexcept>

#include "fedkge/rng.hpp"

namespace fedkge {

KgeMethod parse_kge_method(const std::string& name) {
  if (name == "transe") return KgeMethod::TransE;
  if (name == "rotate") return KgeMethod::RotatE;
  if (name == "complex") return KgeMethod::ComplEx;
  throw std::invalid_argument("unknown kge_method: " + name);
}

const char* kge_method_name(KgeMethod m) {
  switch (m) {
    case KgeMethod::TransE: return "transe";
    case KgeMethod::RotatE: return "rotate";
    case KgeMethod::ComplEx: return "complex";
  }
  return "?";
}

EmbeddingTable init_embeddings(const ClientShard& shard, const Hyperparams& hp,
                               KgeMethod method, int dim, std::uint64_t seed) {
  if (dim < 2) throw std::invalid_argument("embedding dimension must be >= 2");

  EmbeddingTable table;
  table.method = method;
  table.dim = dim;
  const double bound = (hp.gamma + hp.epsilon) / static_cast<double>(dim);
  const auto ew = static_cast<std::size_t>(entity_width(method, dim));
  const auto rw = static_cast<std::size_t>(relation_width(method, dim));

  table.entities = Mat(shard.num_entities(), ew);
  for (std::size_t local = 0; local < shard.num_entities(); ++local) {
    const auto g = static_cast<std::uint64_t>(shard.local_to_global[local]);
    Rng rng(substream(seed, "entity", g, static_cast<std::uint64_t>(dim)));
    auto row = table.entities.row(local);
    for (auto& v : row) v = rng.uniform(-bound, bound);
  }

  table.relations = Mat(shard.num_relations(), rw);
  for (std::size_t local = 0; local < shard.num_relations(); ++local) {
    const auto g = static_cast<std::uint64_t>(shard.rel_local_to_global[local]);
    Rng rng(substream(seed, "relation", g, static_cast<std::uint64_t>(dim)));
    auto row = table.relations.row(local);
    if (method == KgeMethod::RotatE) {
      for (auto& v : row) v = rng.uniform(-std::numbers::pi, std::numbers::pi);
    } else {
      for (auto& v : row) v = rng.uniform(-bound, bound);
    }
  }

  table.history = Mat(shard.num_shared(), ew);
  for (std::size_t i = 0; i < shard.num_shared(); ++i) {
    copy_into(table.entities.row(shard.shared_entities[i]),
              table.history.row(i));
  }
  return table;
}

}  // namespace fedkge
