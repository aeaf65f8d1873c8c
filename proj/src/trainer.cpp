#include "fedkge/trainer.hpp"

#include <numeric>
#include <stdexcept>

namespace fedkge {

TrainBatch sample_batch(std::span<const Triple> train,
                        std::span<const std::size_t> order, std::size_t begin,
                        std::size_t end, int n_neg, std::size_t num_entities,
                        Rng& rng) {
  TrainBatch batch;
  batch.n_neg = n_neg;
  batch.positives.reserve(end - begin);
  batch.negatives.reserve((end - begin) * static_cast<std::size_t>(n_neg));
  for (std::size_t i = begin; i < end; ++i) {
    batch.positives.push_back(train[order[i]]);
    for (int j = 0; j < n_neg; ++j) {
      NegSample neg;
      neg.corrupt_head = rng.coin();
      neg.entity = static_cast<std::int32_t>(rng.below(num_entities));
      batch.negatives.push_back(neg);
    }
  }
  return batch;
}

void local_train(const ClientShard& shard, EmbeddingTable& table,
                 AdamState& adam_entities, AdamState& adam_relations,
                 const Hyperparams& hp, Rng& rng) {
  if (shard.train.empty()) {
    throw std::runtime_error("client " + std::to_string(shard.client_id) +
                             " has an empty train set");
  }
  const std::size_t n = shard.train.size();
  std::vector<std::size_t> order(n);
  const AdamParams ap{hp.lr};

  for (int epoch = 0; epoch < hp.local_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t begin = 0; begin < n;
         begin += static_cast<std::size_t>(hp.batch_size)) {
      const std::size_t end =
          std::min(n, begin + static_cast<std::size_t>(hp.batch_size));
      const TrainBatch batch = sample_batch(shard.train, order, begin, end,
                                            hp.negatives,
                                            shard.num_entities(), rng);
      const LossResult res = self_adversarial_loss(table, batch, hp);
      adam_entities.step(table.entities, res.entity_grads, ap);
      adam_relations.step(table.relations, res.relation_grads, ap);
    }
  }
}

}  // namespace fedkge
