#include "fedkge/svd_strategy.hpp"

#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "fedkge/loss.hpp"
#include "fedkge/svd.hpp"
#include "fedkge/trainer.hpp"

namespace fedkge {

void svd_exchange(const SvdRoundIO& io, int n_cols, int rank,
                  std::int64_t round, CommLedger* ledger) {
  const FederationSpec& spec = *io.spec;
  const int width = static_cast<int>(io.tables[0]->entities.cols());
  if (width % n_cols != 0) {
    throw std::invalid_argument("entity width not divisible by svd columns");
  }
  const int m = width / n_cols;
  const std::int64_t per_entity = svd_param_count(m, n_cols, rank);

  // Upstream: each client's per-entity update, compressed then restored on
  // the server side. restored[c] rows align with shared positions.
  std::vector<Mat> restored(spec.clients.size());
  std::vector<double> update(width);
  for (std::size_t c = 0; c < spec.clients.size(); ++c) {
    const auto& shard = spec.clients[c];
    restored[c] = Mat(shard.num_shared(), width);
    const Mat& start = *io.round_starts[c];
    const Mat& now = io.tables[c]->entities;
    for (std::size_t i = 0; i < shard.num_shared(); ++i) {
      const auto e = static_cast<std::size_t>(shard.shared_entities[i]);
      for (int k = 0; k < width; ++k) {
        update[k] = now.at(e, k) - start.at(e, k);
      }
      const SvdFactors f = svd_compress(update, m, n_cols, rank);
      const auto rec = svd_restore(f, m, n_cols);
      copy_into(rec, restored[c].row(i));
    }
    if (ledger) {
      ledger->record_raw(round, shard.client_id, Direction::up,
                         static_cast<std::int64_t>(shard.num_shared()) *
                             per_entity);
    }
  }

  std::vector<std::unordered_map<std::int32_t, std::int32_t>> pos_of_global(
      spec.clients.size());
  for (std::size_t c = 0; c < spec.clients.size(); ++c) {
    const auto& shard = spec.clients[c];
    for (std::int32_t pos = 0;
         pos < static_cast<std::int32_t>(shard.num_shared()); ++pos) {
      pos_of_global[c].emplace(
          shard.local_to_global[shard.shared_entities[pos]], pos);
    }
  }

  // Server: mean of restored updates per shared entity, re-compressed, then
  // added to each owner's round-start value.
  std::vector<std::int64_t> down_count(spec.clients.size(), 0);
  std::vector<double> acc(width);
  for (std::size_t g = 0; g < spec.existence.size(); ++g) {
    const auto& owners = spec.existence[g];
    if (owners.size() < 2) continue;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int owner : owners) {
      const auto pos = pos_of_global[owner].at(static_cast<std::int32_t>(g));
      axpy(1.0, restored[owner].row(pos), acc);
    }
    const double inv = 1.0 / static_cast<double>(owners.size());
    for (auto& v : acc) v *= inv;

    const SvdFactors f = svd_compress(acc, m, n_cols, rank);
    const auto rec = svd_restore(f, m, n_cols);
    for (int owner : owners) {
      const auto& shard = spec.clients[owner];
      const auto pos = pos_of_global[owner].at(static_cast<std::int32_t>(g));
      const auto e = static_cast<std::size_t>(shard.shared_entities[pos]);
      const Mat& start = *io.round_starts[owner];
      auto out = io.tables[owner]->entities.row(e);
      for (int k = 0; k < width; ++k) {
        out[k] = start.at(e, k) + rec[k];
      }
      ++down_count[owner];
    }
  }
  if (ledger) {
    for (std::size_t c = 0; c < spec.clients.size(); ++c) {
      ledger->record_raw(round, spec.clients[c].client_id, Direction::down,
                         down_count[c] * per_entity);
    }
  }
}

namespace {

// Factor row layout per entity: [U (m x n row-major) | s (n) | V (n x n)].
struct FactorLayout {
  int m = 0, n = 0;
  int u_size() const { return m * n; }
  int s_off() const { return m * n; }
  int v_off() const { return m * n + n; }
  int total() const { return m * n + n + n * n; }
};

void reconstruct_row(const FactorLayout& lay, std::span<const double> f,
                     std::span<const double> start, std::span<double> out) {
  for (int i = 0; i < lay.m; ++i) {
    for (int j = 0; j < lay.n; ++j) {
      double s = 0.0;
      for (int k = 0; k < lay.n; ++k) {
        s += f[i * lay.n + k] * f[lay.s_off() + k] *
             f[lay.v_off() + j * lay.n + k];
      }
      out[i * lay.n + j] = start[i * lay.n + j] + s;
    }
  }
}

}  // namespace

void svdplus_local_train(const ClientShard& shard, EmbeddingTable& table,
                         AdamState& adam_entities, AdamState& adam_relations,
                         const Hyperparams& hp, const Mat& round_start,
                         int n_cols, double alpha, Rng& rng) {
  if (hp.local_epochs < 2) {
    throw std::invalid_argument(
        "reparameterized final epoch needs >= 2 local epochs");
  }
  if (shard.train.empty()) {
    throw std::runtime_error("client " + std::to_string(shard.client_id) +
                             " has an empty train set");
  }
  const int width = static_cast<int>(table.entities.cols());
  if (width % n_cols != 0) {
    throw std::invalid_argument("entity width not divisible by svd columns");
  }
  const FactorLayout lay{width / n_cols, n_cols};
  const AdamParams ap{hp.lr};
  const std::size_t n = shard.train.size();
  std::vector<std::size_t> order(n);

  // plain epochs
  for (int epoch = 0; epoch + 1 < hp.local_epochs; ++epoch) {
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

  // decompose every entity's accumulated update into trainable factors
  Mat factors(shard.num_entities(), lay.total());
  std::vector<double> update(width);
  for (std::size_t e = 0; e < shard.num_entities(); ++e) {
    for (int k = 0; k < width; ++k) {
      update[k] = table.entities.at(e, k) - round_start.at(e, k);
    }
    const SvdFactors f = svd_compress(update, lay.m, lay.n, lay.n);
    auto row = factors.row(e);
    for (int i = 0; i < lay.m; ++i)
      for (int j = 0; j < lay.n; ++j) row[i * lay.n + j] = f.u.at(i, j);
    for (int j = 0; j < lay.n; ++j) row[lay.s_off() + j] = f.s[j];
    for (int i = 0; i < lay.n; ++i)
      for (int j = 0; j < lay.n; ++j)
        row[lay.v_off() + i * lay.n + j] = f.v.at(i, j);
    reconstruct_row(lay, row, round_start.row(e), table.entities.row(e));
  }

  // final epoch on (U, s, V) with the orthogonality term
  AdamState factor_adam(factors.rows(), factors.cols());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  for (std::size_t begin = 0; begin < n;
       begin += static_cast<std::size_t>(hp.batch_size)) {
    const std::size_t end =
        std::min(n, begin + static_cast<std::size_t>(hp.batch_size));
    const TrainBatch batch = sample_batch(shard.train, order, begin, end,
                                          hp.negatives, shard.num_entities(),
                                          rng);
    const LossResult res = self_adversarial_loss(table, batch, hp);

    GradBuffer factor_grads(lay.total());
    for (std::int32_t e : res.entity_grads.sorted_ids()) {
      auto g = res.entity_grads.row(e);   // dL/d(embedding row), m x n
      auto f = factors.row(e);
      auto fg = factor_grads.row(e);
      // dL/dU = G V S ; dL/ds_k = u_k^T G v_k ; dL/dV = G^T U S
      for (int i = 0; i < lay.m; ++i) {
        for (int k = 0; k < lay.n; ++k) {
          double gv = 0.0;
          for (int j = 0; j < lay.n; ++j) {
            gv += g[i * lay.n + j] * f[lay.v_off() + j * lay.n + k];
          }
          fg[i * lay.n + k] += gv * f[lay.s_off() + k];
        }
      }
      for (int k = 0; k < lay.n; ++k) {
        double s = 0.0;
        for (int i = 0; i < lay.m; ++i) {
          for (int j = 0; j < lay.n; ++j) {
            s += f[i * lay.n + k] * g[i * lay.n + j] *
                 f[lay.v_off() + j * lay.n + k];
          }
        }
        fg[lay.s_off() + k] += s;
      }
      for (int j = 0; j < lay.n; ++j) {
        for (int k = 0; k < lay.n; ++k) {
          double gu = 0.0;
          for (int i = 0; i < lay.m; ++i) {
            gu += g[i * lay.n + j] * f[i * lay.n + k];
          }
          fg[lay.v_off() + j * lay.n + k] += gu * f[lay.s_off() + k];
        }
      }
      if (alpha != 0.0) {
        Mat u(lay.m, lay.n), v(lay.n, lay.n);
        for (int i = 0; i < lay.m; ++i)
          for (int j = 0; j < lay.n; ++j) u.at(i, j) = f[i * lay.n + j];
        for (int i = 0; i < lay.n; ++i)
          for (int j = 0; j < lay.n; ++j)
            v.at(i, j) = f[lay.v_off() + i * lay.n + j];
        Mat gu(lay.m, lay.n), gvm(lay.n, lay.n);
        orthogonality_regularizer_grad(u, v, alpha, gu, gvm);
        for (int i = 0; i < lay.m; ++i)
          for (int j = 0; j < lay.n; ++j) fg[i * lay.n + j] += gu.at(i, j);
        for (int i = 0; i < lay.n; ++i)
          for (int j = 0; j < lay.n; ++j)
            fg[lay.v_off() + i * lay.n + j] += gvm.at(i, j);
      }
    }

    factor_adam.step(factors, factor_grads, ap);
    adam_relations.step(table.relations, res.relation_grads, ap);
    for (std::int32_t e : factor_grads.sorted_ids()) {
      reconstruct_row(lay, factors.row(e), round_start.row(e),
                      table.entities.row(e));
    }
  }
}

}  // namespace fedkge
