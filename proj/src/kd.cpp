#include "fedkge/kd.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedkge/methods.hpp"
#include "fedkge/trainer.hpp"

namespace fedkge {

namespace {

// d/ds_p [ KL(P||Q) + KL(Q||P) ] where P = softmax(s_p), Q fixed:
//   p_j (log(p_j/q_j) - KL(P||Q)) + (p_j - q_j)
void symmetric_kl_score_grad(std::span<const double> p,
                             std::span<const double> q, double kl_pq,
                             double scale, std::span<double> out) {
  for (std::size_t j = 0; j < p.size(); ++j) {
    out[j] += scale * (p[j] * (std::log(p[j] / q[j]) - kl_pq) + (p[j] - q[j]));
  }
}

struct TableGrads {
  GradBuffer* entities;
  GradBuffer* relations;
};

// Accumulates coeffs through one table's score gradients in the same order
// the plain trainer uses: positive first, then negatives.
void accum_table(const EmbeddingTable& table, const Triple& pos,
                 std::span<const NegSample> negs, double coeff_pos,
                 std::span<const double> coeff_neg, TableGrads g) {
  auto h = table.entities.row(pos.head);
  auto r = table.relations.row(pos.relation);
  auto t = table.entities.row(pos.tail);
  accum_score_grad(table.method, table.dim, h, r, t, coeff_pos,
                   g.entities->row(pos.head), g.relations->row(pos.relation),
                   g.entities->row(pos.tail));
  for (std::size_t j = 0; j < negs.size(); ++j) {
    auto cand = table.entities.row(negs[j].entity);
    if (negs[j].corrupt_head) {
      accum_score_grad(table.method, table.dim, cand, r, t, coeff_neg[j],
                       g.entities->row(negs[j].entity),
                       g.relations->row(pos.relation),
                       g.entities->row(pos.tail));
    } else {
      accum_score_grad(table.method, table.dim, h, r, cand, coeff_neg[j],
                       g.entities->row(pos.head),
                       g.relations->row(pos.relation),
                       g.entities->row(negs[j].entity));
    }
  }
}

}  // namespace

KdLossResult kd_local_loss(const DualEmbeddingTable& tables,
                           const TrainBatch& batch, const Hyperparams& hp,
                           double kd_weight) {
  if (batch.positives.empty()) throw std::invalid_argument("empty batch");
  if (batch.n_neg < 1) throw std::invalid_argument("batch has no negatives");

  const auto& low = tables.low;
  const auto& high = tables.high;
  KdLossResult res{0.0,
                   0.0,
                   0.0,
                   GradBuffer(low.entities.cols()),
                   GradBuffer(low.relations.cols()),
                   GradBuffer(high.entities.cols()),
                   GradBuffer(high.relations.cols())};
  const double inv_b = 1.0 / static_cast<double>(batch.positives.size());

  const auto n_neg = static_cast<std::size_t>(batch.n_neg);
  std::vector<double> neg_low(n_neg), neg_high(n_neg);
  std::vector<double> all_low(n_neg + 1), all_high(n_neg + 1);
  std::vector<double> coeff_low(n_neg + 1), coeff_high(n_neg + 1);

  for (std::size_t i = 0; i < batch.positives.size(); ++i) {
    const Triple& pos = batch.positives[i];
    const std::span<const NegSample> negs{batch.negatives.data() + i * n_neg,
                                          n_neg};

    auto score_table = [&](const EmbeddingTable& tb, std::vector<double>& neg_out) {
      auto h = tb.entities.row(pos.head);
      auto r = tb.relations.row(pos.relation);
      auto t = tb.entities.row(pos.tail);
      const double ps = score(tb.method, tb.dim, h, r, t);
      for (std::size_t j = 0; j < n_neg; ++j) {
        auto cand = tb.entities.row(negs[j].entity);
        neg_out[j] = negs[j].corrupt_head
                         ? score(tb.method, tb.dim, cand, r, t)
                         : score(tb.method, tb.dim, h, r, cand);
      }
      return ps;
    };

    const double pos_low = score_table(low, neg_low);
    const double pos_high = score_table(high, neg_high);

    const ExampleLoss ex_low = self_adv_example(pos_low, neg_low, hp);
    const ExampleLoss ex_high = self_adv_example(pos_high, neg_high, hp);

    coeff_low[0] = ex_low.coeff_pos;
    coeff_high[0] = ex_high.coeff_pos;
    for (std::size_t j = 0; j < n_neg; ++j) {
      coeff_low[j + 1] = ex_low.coeff_neg[j];
      coeff_high[j + 1] = ex_high.coeff_neg[j];
    }

    double example_loss = ex_low.loss + ex_high.loss;
    if (kd_weight != 0.0) {
      all_low[0] = pos_low;
      all_high[0] = pos_high;
      for (std::size_t j = 0; j < n_neg; ++j) {
        all_low[j + 1] = neg_low[j];
        all_high[j + 1] = neg_high[j];
      }
      const auto s_l = softmax(all_low);
      const auto s_h = softmax(all_high);
      const double kl_lh = kl_divergence(s_l, s_h);
      const double kl_hl = kl_divergence(s_h, s_l);
      const double denom = ex_low.loss + ex_high.loss;
      if (denom <= 0.0) {
        throw std::runtime_error("degenerate co-distillation divisor");
      }
      const double scale = kd_weight / denom;  // denom held constant
      example_loss += kd_weight * (kl_lh + kl_hl) / denom;
      symmetric_kl_score_grad(s_l, s_h, kl_lh, scale, coeff_low);
      symmetric_kl_score_grad(s_h, s_l, kl_hl, scale, coeff_high);
    }

    res.loss += inv_b * example_loss;
    res.base_low += inv_b * ex_low.loss;
    res.base_high += inv_b * ex_high.loss;

    for (auto& c : coeff_low) c *= inv_b;
    for (auto& c : coeff_high) c *= inv_b;
    accum_table(low, pos, negs, coeff_low[0],
                {coeff_low.data() + 1, n_neg},
                {&res.low_entities, &res.low_relations});
    accum_table(high, pos, negs, coeff_high[0],
                {coeff_high.data() + 1, n_neg},
                {&res.high_entities, &res.high_relations});
  }

  if (!std::isfinite(res.loss)) {
    throw std::runtime_error("non-finite co-distillation loss");
  }
  return res;
}

void kd_local_train(const ClientShard& shard, DualEmbeddingTable& tables,
                    AdamState& low_e, AdamState& low_r, AdamState& high_e,
                    AdamState& high_r, const Hyperparams& hp, double kd_weight,
                    Rng& rng) {
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
      const KdLossResult res = kd_local_loss(tables, batch, hp, kd_weight);
      low_e.step(tables.low.entities, res.low_entities, ap);
      low_r.step(tables.low.relations, res.low_relations, ap);
      high_e.step(tables.high.entities, res.high_entities, ap);
      high_r.step(tables.high.relations, res.high_relations, ap);
    }
  }
}

}  // namespace fedkge
