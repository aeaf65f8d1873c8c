#pragma once
// Dual-embedding co-distillation: each client trains a low-dimensional table
// (the one that travels) and a high-dimensional table (local only) on the
// same batches. Per example, softmax-normalized score vectors over
// {positive, negatives} distill into each other through symmetric KL, scaled
// by 1 / (L_low + L_high) so distillation strengthens as the supervised
// losses shrink.

#include "fedkge/adam.hpp"
#include "fedkge/embedding.hpp"
#include "fedkge/loss.hpp"
#include "fedkge/rng.hpp"

namespace fedkge {

struct DualEmbeddingTable {
  EmbeddingTable low;   // exchanged with the server
  EmbeddingTable high;  // never transmitted
};

struct KdLossResult {
  double loss = 0.0;       // full objective, mean over the batch
  double base_low = 0.0;   // mean self-adversarial loss of the low table
  double base_high = 0.0;
  GradBuffer low_entities, low_relations;
  GradBuffer high_entities, high_relations;
};

// kd_weight scales the co-distillation term; 0 reduces each table's
// gradients to its plain self-adversarial loss. Throws if some example has
// L_low + L_high == 0 while distilling.
KdLossResult kd_local_loss(const DualEmbeddingTable& tables,
                           const TrainBatch& batch, const Hyperparams& hp,
                           double kd_weight);

// hp.local_epochs passes over shard.train, stepping both tables per batch.
void kd_local_train(const ClientShard& shard, DualEmbeddingTable& tables,
                    AdamState& low_e, AdamState& low_r, AdamState& high_e,
                    AdamState& high_r, const Hyperparams& hp, double kd_weight,
                    Rng& rng);

}  // namespace fedkge
