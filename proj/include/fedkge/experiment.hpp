#pragma once
// Experiment orchestration: the round loop (train -> evaluate -> exchange),
// early stopping on validation MRR, best-checkpoint test metrics, run
// directory artifacts, and run-vs-baseline comparison.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedkge/adam.hpp"
#include "fedkge/config.hpp"
#include "fedkge/embedding.hpp"
#include "fedkge/kd.hpp"
#include "fedkge/kg.hpp"
#include "fedkge/ledger.hpp"
#include "fedkge/rng.hpp"

namespace fedkge {

struct KdClientState {
  EmbeddingTable high;
  AdamState adam_entities, adam_relations;
};

struct ClientState {
  EmbeddingTable table;  // the exchanged table (low table under fede_kd)
  AdamState adam_entities, adam_relations;
  Rng rng;
  std::unique_ptr<KdClientState> kd;
  Mat round_start;  // entity matrix at round start (svd strategies)

  const EmbeddingTable& eval_table() const { return kd ? kd->high : table; }
};

struct RunObservers {
  // after local training, before evaluation/exchange
  std::function<void(std::int64_t round, const FederationSpec&,
                     const std::vector<ClientState>&)>
      after_train;
  // after the round's exchange completed
  std::function<void(std::int64_t round, const FederationSpec&,
                     const std::vector<ClientState>&)>
      after_exchange;
};

struct RunResult {
  RunLog runlog;  // validation metrics per evaluation round
  CommLedger ledger;
  double test_mrr = 0.0;
  double test_hits10 = 0.0;
  double best_val_mrr = 0.0;
  std::int64_t best_round = -1;
  bool converged = false;
  std::int64_t rounds_run = 0;
  int effective_dim = 0;  // dimension of the exchanged table
  std::uint64_t fingerprint = 0;
  std::vector<EmbeddingTable> best_tables;  // evaluation tables at best round
};

// Loads cfg.dataset (TSV file -> seeded partition + split; directory -> a
// saved federation) and runs the configured strategy.
RunResult run_experiment(const ExperimentConfig& cfg,
                         const RunObservers* obs = nullptr,
                         const std::filesystem::path& dump_dir = {});

// Same loop over an already-built federation (splits done).
RunResult run_experiment_on(const ExperimentConfig& cfg, FederationSpec fed,
                            const RunObservers* obs = nullptr,
                            const std::filesystem::path& dump_dir = {});

FederationSpec load_dataset(const ExperimentConfig& cfg);

// config.cfg (resolved), runlog.csv, ledger.csv, summary.json,
// best_embeddings.bin
void write_run_outputs(const ExperimentConfig& cfg, const RunResult& result,
                       const std::filesystem::path& run_dir);

struct CompareReport {
  DerivedMetrics metrics;   // run vs baseline, from the validation logs
  std::string text;         // verdict table
  std::string json;
};

// Guards that both run directories used the same dataset, method and D.
CompareReport compare_runs(const std::filesystem::path& run_dir,
                           const std::filesystem::path& baseline_dir);

}  // namespace fedkge
