#include <doctest.h>

#include <cmath>

#include "fedkge/adam.hpp"
#include "fedkge/loss.hpp"
#include "fedkge/methods.hpp"
#include "helpers.hpp"

using namespace fedkge;

namespace {

EmbeddingTable small_table(KgeMethod m, int dim, int entities, int relations,
                           std::uint64_t seed) {
  EmbeddingTable t;
  t.method = m;
  t.dim = dim;
  t.entities = Mat(entities, entity_width(m, dim));
  t.relations = Mat(relations, relation_width(m, dim));
  testutil::randomize_table(t, seed);
  return t;
}

TrainBatch tiny_batch(int n_pos, int n_neg, int entities, std::uint64_t seed) {
  Rng rng(seed);
  TrainBatch b;
  b.n_neg = n_neg;
  for (int i = 0; i < n_pos; ++i) {
    b.positives.push_back(Triple{static_cast<std::int32_t>(rng.below(entities)),
                                 0,
                                 static_cast<std::int32_t>(rng.below(entities))});
    for (int j = 0; j < n_neg; ++j) {
      b.negatives.push_back(NegSample{
          rng.coin(), static_cast<std::int32_t>(rng.below(entities))});
    }
  }
  return b;
}

}  // namespace

TEST_CASE("loss saturates to zero") {
  Hyperparams hp;
  // score(pos) -> +inf, score(neg) -> -inf
  const std::vector<double> negs{-1e6};
  const ExampleLoss ex = self_adv_example(1e6, negs, hp);
  CHECK(ex.loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("single negative gets softmax weight one") {
  Hyperparams hp;
  hp.adv_temperature = 7.3;  // irrelevant for a singleton
  const std::vector<double> negs{0.42};
  const ExampleLoss ex = self_adv_example(0.0, negs, hp);
  // with w == 1 the negative term is exactly softplus(gamma + s)
  CHECK(ex.loss ==
        doctest::Approx(softplus(-hp.gamma) + softplus(hp.gamma + 0.42)));
}

TEST_CASE("raising the positive score never raises the loss") {
  Hyperparams hp;
  const std::vector<double> negs{0.3, -0.2, 1.0};
  double prev = HUGE_VAL;
  for (double s = -20.0; s <= 20.0; s += 0.25) {
    const double loss = self_adv_example(s, negs, hp).loss;
    CHECK(loss <= prev + 1e-15);
    prev = loss;
  }
}

TEST_CASE("zero negatives is an error") {
  Hyperparams hp;
  CHECK_THROWS_AS(self_adv_example(0.0, {}, hp), std::invalid_argument);
}

namespace {

// FD oracle for the batch loss with the adversarial weights frozen at their
// unperturbed values — the loss is defined with w treated as constants under
// differentiation, so the oracle must hold them fixed too.
class FrozenLoss {
 public:
  FrozenLoss(const EmbeddingTable& table, const TrainBatch& batch,
             const Hyperparams& hp)
      : table_(table), batch_(batch), hp_(hp) {
    for (std::size_t i = 0; i < batch.positives.size(); ++i) {
      weights_.push_back(softmax(neg_scores(i), hp.adv_temperature));
    }
  }

  double operator()() const {
    double total = 0.0;
    for (std::size_t i = 0; i < batch_.positives.size(); ++i) {
      const Triple& pos = batch_.positives[i];
      const double sp = score(table_.method, table_.dim,
                              table_.entities.row(pos.head),
                              table_.relations.row(pos.relation),
                              table_.entities.row(pos.tail));
      double ex = softplus(-(hp_.gamma + sp));
      const auto negs = neg_scores(i);
      for (std::size_t j = 0; j < negs.size(); ++j) {
        ex += weights_[i][j] * softplus(hp_.gamma + negs[j]);
      }
      total += ex;
    }
    return total / static_cast<double>(batch_.positives.size());
  }

 private:
  std::vector<double> neg_scores(std::size_t i) const {
    const Triple& pos = batch_.positives[i];
    std::vector<double> out(batch_.n_neg);
    for (int j = 0; j < batch_.n_neg; ++j) {
      const NegSample& neg =
          batch_.negatives[i * static_cast<std::size_t>(batch_.n_neg) + j];
      out[j] = neg.corrupt_head
                   ? score(table_.method, table_.dim,
                           table_.entities.row(neg.entity),
                           table_.relations.row(pos.relation),
                           table_.entities.row(pos.tail))
                   : score(table_.method, table_.dim,
                           table_.entities.row(pos.head),
                           table_.relations.row(pos.relation),
                           table_.entities.row(neg.entity));
    }
    return out;
  }

  const EmbeddingTable& table_;
  const TrainBatch& batch_;
  const Hyperparams& hp_;
  std::vector<std::vector<double>> weights_;
};

}  // namespace

TEST_CASE("batch loss gradient matches finite differences") {
  for (auto m : {KgeMethod::TransE, KgeMethod::RotatE, KgeMethod::ComplEx}) {
    Hyperparams hp;
    hp.gamma = 2.0;
    hp.adv_temperature = 1.0;
    EmbeddingTable table = small_table(m, 4, 9, 2, 7 + static_cast<int>(m));
    TrainBatch batch = tiny_batch(3, 4, 9, 11);
    batch.positives[1].relation = 1;

    const LossResult res = self_adversarial_loss(table, batch, hp);
    const FrozenLoss loss_value(table, batch, hp);
    CHECK(loss_value() == doctest::Approx(res.loss).epsilon(1e-12));

    for (std::int32_t id : res.entity_grads.sorted_ids()) {
      // wiggle the whole entity row through the table storage
      auto row = table.entities.row(id);
      std::vector<double> params(row.begin(), row.end());
      std::vector<double> fd(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = row[i];
        row[i] = keep + 1e-5;
        const double hi = loss_value();
        row[i] = keep - 1e-5;
        const double lo = loss_value();
        row[i] = keep;
        fd[i] = (hi - lo) / 2e-5;
      }
      auto g = res.entity_grads.row(id);
      for (std::size_t i = 0; i < fd.size(); ++i) {
        CHECK(testutil::close_rel(g[i], fd[i]));
      }
    }
    for (std::int32_t id : res.relation_grads.sorted_ids()) {
      auto row = table.relations.row(id);
      std::vector<double> fd(row.size());
      for (std::size_t i = 0; i < row.size(); ++i) {
        const double keep = row[i];
        row[i] = keep + 1e-5;
        const double hi = loss_value();
        row[i] = keep - 1e-5;
        const double lo = loss_value();
        row[i] = keep;
        fd[i] = (hi - lo) / 2e-5;
      }
      auto g = res.relation_grads.row(id);
      for (std::size_t i = 0; i < fd.size(); ++i) {
        CHECK(testutil::close_rel(g[i], fd[i]));
      }
    }
  }
}

TEST_CASE("adam fixed point on zero gradient") {
  Mat params(3, 2, 1.5);
  const Mat before = params;
  AdamState adam(3, 2);
  GradBuffer grads(2);
  grads.row(1);  // touched but zero
  adam.step(params, grads, AdamParams{});
  CHECK(params == before);
}

TEST_CASE("adam first step has magnitude ~lr") {
  Mat params(1, 4, 0.0);
  AdamState adam(1, 4);
  GradBuffer grads(4);
  auto g = grads.row(0);
  g[0] = 0.5; g[1] = -2.0; g[2] = 1e-3; g[3] = 40.0;
  AdamParams ap;
  ap.lr = 1e-2;
  adam.step(params, grads, ap);
  for (std::size_t k = 0; k < 4; ++k) {
    // bias-corrected first step is lr * g / (|g| + eps') ~ lr * sign(g)
    CHECK(std::abs(std::abs(params.at(0, k)) - ap.lr) < 1e-5);
    CHECK(std::signbit(params.at(0, k)) == !std::signbit(g[k]));
  }
}

TEST_CASE("adam determinism and untouched rows") {
  auto run = [](std::uint64_t seed) {
    Mat params(5, 3, 0.1);
    AdamState adam(5, 3);
    Rng rng(seed);
    for (int i = 0; i < 20; ++i) {
      GradBuffer grads(3);
      auto g = grads.row(static_cast<std::int32_t>(rng.below(4)));
      for (auto& v : g) v = rng.uniform(-1, 1);
      adam.step(params, grads, AdamParams{});
    }
    return params;
  };
  CHECK(run(3).data() == run(3).data());
  // row 4 never touched
  const Mat out = run(3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(out.at(4, k) == 0.1);
}

TEST_CASE("adam shape mismatch is an error") {
  Mat params(2, 3);
  AdamState adam(2, 4);
  GradBuffer grads(3);
  grads.row(0);
  CHECK_THROWS_AS(adam.step(params, grads, AdamParams{}),
                  std::invalid_argument);
}
