#pragma once
// Self-adversarial negative-sampling loss:
//
//   L = -log sigma(gamma + s_pos) - sum_i w_i log sigma(-s_i - gamma),
//   w = softmax(alpha * s_neg), treated as constants under differentiation.
//
// Batch losses are means over examples. The per-example pieces are exposed
// so the co-distillation trainer can reuse the identical arithmetic.

#include <span>
#include <vector>

#include "fedkge/embedding.hpp"
#include "fedkge/gradbuf.hpp"
#include "fedkge/kg.hpp"

namespace fedkge {

struct NegSample {
  bool corrupt_head = false;
  std::int32_t entity = 0;
};

struct TrainBatch {
  std::vector<Triple> positives;
  // positives.size() * n_neg entries, grouped by positive
  std::vector<NegSample> negatives;
  int n_neg = 0;
};

double stable_sigmoid(double x);
double softplus(double x);

// softmax with max-subtraction; result sums to 1
std::vector<double> softmax(std::span<const double> scores, double temp = 1.0);

// KL(p || q) for strictly positive q entries; 0 log 0 taken as 0
double kl_divergence(std::span<const double> p, std::span<const double> q);

struct ExampleLoss {
  double loss = 0.0;
  double coeff_pos = 0.0;              // dL/ds_pos
  std::vector<double> coeff_neg;       // dL/ds_neg_i
};

ExampleLoss self_adv_example(double pos_score,
                             std::span<const double> neg_scores,
                             const Hyperparams& hp);

struct LossResult {
  double loss = 0.0;
  GradBuffer entity_grads;
  GradBuffer relation_grads;
};

// Mean per-example loss over the batch with analytic gradients for every
// touched entity/relation row. Throws on an empty negative set or a
// non-finite loss.
LossResult self_adversarial_loss(const EmbeddingTable& table,
                                 const TrainBatch& batch,
                                 const Hyperparams& hp);

}  // namespace fedkge
