#include "fedkge/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fedkge/methods.hpp"

namespace fedkge {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

std::vector<double> softmax(std::span<const double> scores, double temp) {
  double hi = -HUGE_VAL;
  for (double s : scores) hi = std::max(hi, temp * s);
  std::vector<double> w(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp(temp * scores[i] - hi);
    z += w[i];
  }
  for (auto& x : w) x /= z;
  return w;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("KL size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

ExampleLoss self_adv_example(double pos_score,
                             std::span<const double> neg_scores,
                             const Hyperparams& hp) {
  if (neg_scores.empty()) {
    throw std::invalid_argument("self-adversarial loss needs >= 1 negative");
  }
  ExampleLoss out;
  out.loss = softplus(-(hp.gamma + pos_score));
  out.coeff_pos = -stable_sigmoid(-(hp.gamma + pos_score));
  const auto w = softmax(neg_scores, hp.adv_temperature);
  out.coeff_neg.resize(neg_scores.size());
  for (std::size_t i = 0; i < neg_scores.size(); ++i) {
    out.loss += w[i] * softplus(hp.gamma + neg_scores[i]);
    out.coeff_neg[i] = w[i] * stable_sigmoid(hp.gamma + neg_scores[i]);
  }
  return out;
}

LossResult self_adversarial_loss(const EmbeddingTable& table,
                                 const TrainBatch& batch,
                                 const Hyperparams& hp) {
  if (batch.positives.empty()) {
    throw std::invalid_argument("empty batch");
  }
  if (batch.n_neg < 1 ||
      batch.negatives.size() != batch.positives.size() *
                                    static_cast<std::size_t>(batch.n_neg)) {
    throw std::invalid_argument("batch has no negatives per positive");
  }

  const int dim = table.dim;
  const KgeMethod m = table.method;
  LossResult res{0.0, GradBuffer(table.entities.cols()),
                 GradBuffer(table.relations.cols())};
  const double inv_b = 1.0 / static_cast<double>(batch.positives.size());

  std::vector<double> neg_scores(batch.n_neg);
  for (std::size_t i = 0; i < batch.positives.size(); ++i) {
    const Triple& pos = batch.positives[i];
    auto h = table.entities.row(pos.head);
    auto r = table.relations.row(pos.relation);
    auto t = table.entities.row(pos.tail);
    const double pos_score = score(m, dim, h, r, t);

    const std::size_t base = i * static_cast<std::size_t>(batch.n_neg);
    for (int j = 0; j < batch.n_neg; ++j) {
      const NegSample& neg = batch.negatives[base + j];
      auto cand = table.entities.row(neg.entity);
      neg_scores[j] = neg.corrupt_head ? score(m, dim, cand, r, t)
                                       : score(m, dim, h, r, cand);
    }

    const ExampleLoss ex = self_adv_example(pos_score, neg_scores, hp);
    res.loss += inv_b * ex.loss;

    accum_score_grad(m, dim, h, r, t, inv_b * ex.coeff_pos,
                     res.entity_grads.row(pos.head),
                     res.relation_grads.row(pos.relation),
                     res.entity_grads.row(pos.tail));
    for (int j = 0; j < batch.n_neg; ++j) {
      const NegSample& neg = batch.negatives[base + j];
      auto cand = table.entities.row(neg.entity);
      const double coeff = inv_b * ex.coeff_neg[j];
      if (neg.corrupt_head) {
        accum_score_grad(m, dim, cand, r, t, coeff,
                         res.entity_grads.row(neg.entity),
                         res.relation_grads.row(pos.relation),
                         res.entity_grads.row(pos.tail));
      } else {
        accum_score_grad(m, dim, h, r, cand, coeff,
                         res.entity_grads.row(pos.head),
                         res.relation_grads.row(pos.relation),
                         res.entity_grads.row(neg.entity));
      }
    }
  }

  if (!std::isfinite(res.loss)) {
    throw std::runtime_error("non-finite training loss");
  }
  return res;
}

}  // namespace fedkge
