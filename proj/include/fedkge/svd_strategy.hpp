#pragma once
// Round machinery for the SVD compression baselines. Updates are measured
// against the round-start embeddings; the server means restored updates over
// owners, re-compresses, and every owner adds the restored aggregate back
// onto its own round-start values.

#include <cstdint>
#include <span>

#include "fedkge/adam.hpp"
#include "fedkge/embedding.hpp"
#include "fedkge/kg.hpp"
#include "fedkge/ledger.hpp"
#include "fedkge/rng.hpp"

namespace fedkge {

struct SvdRoundIO {
  const FederationSpec* spec = nullptr;
  std::span<EmbeddingTable* const> tables;
  std::span<const Mat* const> round_starts;  // entity matrices at round start
};

// Compress-aggregate-restore exchange over every shared entity. Ledger gets
// one up and one down record per client (N_c * (m r + r + n r) parameters).
void svd_exchange(const SvdRoundIO& io, int n_cols, int rank,
                  std::int64_t round, CommLedger* ledger);

// Local training where the final epoch reparameterizes each entity's update
// as U diag(s) V^T and optimizes the factors under loss + orthogonality
// regularizer. Earlier epochs train normally.
void svdplus_local_train(const ClientShard& shard, EmbeddingTable& table,
                         AdamState& adam_entities, AdamState& adam_relations,
                         const Hyperparams& hp, const Mat& round_start,
                         int n_cols, double alpha, Rng& rng);

}  // namespace fedkge
