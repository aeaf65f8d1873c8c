#pragma once
// Local training: seeded epoch shuffles, uniform head/tail corruption, loss,
// sparse Adam steps. Batch construction consumes the client RNG in a fixed
// order that does not depend on which tables are being trained, so dual-table
// trainers see the same sample stream as single-table ones.

#include "fedkge/adam.hpp"
#include "fedkge/embedding.hpp"
#include "fedkge/kg.hpp"
#include "fedkge/loss.hpp"
#include "fedkge/rng.hpp"

namespace fedkge {

// Negatives for positions [begin, end) of `order`: per positive, n_neg draws
// of (direction coin, uniform entity).
TrainBatch sample_batch(std::span<const Triple> train,
                        std::span<const std::size_t> order, std::size_t begin,
                        std::size_t end, int n_neg, std::size_t num_entities,
                        Rng& rng);

// hp.local_epochs full passes over shard.train. Throws on an empty train set.
void local_train(const ClientShard& shard, EmbeddingTable& table,
                 AdamState& adam_entities, AdamState& adam_relations,
                 const Hyperparams& hp, Rng& rng);

}  // namespace fedkge
