#include "fedkge/experiment.hpp"

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "fedkge/baselines.hpp"
#include "fedkge/protocol.hpp"
#include "fedkge/ranking.hpp"
#include "fedkge/svd_strategy.hpp"
#include "fedkge/trainer.hpp"

namespace fedkge {

namespace {

using ordered_json = nlohmann::ordered_json;

void parallel_for(int threads, std::size_t n,
                  const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mutex);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  const std::size_t workers =
      std::min(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

bool uses_svd(Strategy s) {
  return s == Strategy::fede_svd || s == Strategy::fede_svdplus;
}

void dump_message_file(const std::filesystem::path& dir, std::int64_t round,
                       const char* dir_tag, int client,
                       const std::vector<std::uint8_t>& bytes) {
  char name[64];
  std::snprintf(name, sizeof name, "round_%06" PRId64 "_%s_%d.bin", round,
                dir_tag, client);
  std::ofstream out(dir / name, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

ordered_json config_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["dataset"] = cfg.dataset;
  j["num_clients"] = cfg.num_clients;
  j["strategy"] = cfg.strategy;
  j["kge_method"] = cfg.kge_method;
  j["D"] = cfg.D;
  j["p"] = cfg.p;
  j["s"] = cfg.s;
  j["local_epochs"] = cfg.local_epochs;
  j["batch_size"] = cfg.batch_size;
  j["lr"] = cfg.lr;
  j["gamma"] = cfg.gamma;
  j["epsilon"] = cfg.epsilon;
  j["alpha_adv"] = cfg.alpha_adv;
  j["negatives"] = cfg.negatives;
  j["eval_every"] = cfg.eval_every;
  j["patience"] = cfg.patience;
  j["seed"] = cfg.seed;
  j["counting_mode"] = cfg.counting_mode;
  j["max_rounds"] = cfg.max_rounds;
  j["threads"] = cfg.threads;
  j["kd_weight"] = cfg.kd_weight;
  j["kd_low_dim"] = cfg.kd_low_dim;
  j["svd_cols"] = cfg.svd_cols;
  j["svd_rank"] = cfg.svd_rank;
  j["svd_alpha"] = cfg.svd_alpha;
  return j;
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fp);
  return buf;
}

}  // namespace

FederationSpec load_dataset(const ExperimentConfig& cfg) {
  const std::filesystem::path path(cfg.dataset);
  if (std::filesystem::is_directory(path)) {
    return load_federation(path);
  }
  const TripleStore store = load_triples(path);
  FederationSpec fed =
      partition_by_relation(store, cfg.num_clients, cfg.seed);
  for (auto& shard : fed.clients) split_shard(shard, cfg.seed);
  return fed;
}

RunResult run_experiment(const ExperimentConfig& cfg, const RunObservers* obs,
                         const std::filesystem::path& dump_dir) {
  return run_experiment_on(cfg, load_dataset(cfg), obs, dump_dir);
}

RunResult run_experiment_on(const ExperimentConfig& cfg, FederationSpec fed,
                            const RunObservers* obs,
                            const std::filesystem::path& dump_dir) {
  validate_config(cfg);
  const Strategy strat = parse_strategy(cfg.strategy);
  const KgeMethod method = parse_kge_method(cfg.kge_method);
  const SyncSchedule sched{cfg.s};

  Hyperparams hp;
  hp.gamma = cfg.gamma;
  hp.epsilon = cfg.epsilon;
  hp.adv_temperature = cfg.alpha_adv;
  hp.lr = cfg.lr;
  hp.batch_size = cfg.batch_size;
  hp.local_epochs = cfg.local_epochs;
  hp.negatives = cfg.negatives;

  const int exchanged_dim = strat == Strategy::fedepl
                                ? fedepl_dimension(cfg.p, cfg.s, cfg.D)
                                : strat == Strategy::fede_kd ? cfg.kd_low_dim
                                                             : cfg.D;

  const std::size_t num_clients = fed.clients.size();
  std::vector<ClientState> clients;
  clients.reserve(num_clients);
  std::vector<TripleSet> filters;
  filters.reserve(num_clients);
  for (std::size_t c = 0; c < num_clients; ++c) {
    const auto& shard = fed.clients[c];
    ClientState state{
        init_embeddings(shard, hp, method, exchanged_dim, cfg.seed),
        AdamState(shard.num_entities(),
                  static_cast<std::size_t>(entity_width(method, exchanged_dim))),
        AdamState(shard.num_relations(),
                  static_cast<std::size_t>(relation_width(method, exchanged_dim))),
        Rng(substream(cfg.seed, "client", c)),
        nullptr,
        Mat{}};
    if (strat == Strategy::fede_kd) {
      state.kd = std::make_unique<KdClientState>(KdClientState{
          init_embeddings(shard, hp, method, cfg.D, cfg.seed),
          AdamState(shard.num_entities(),
                    static_cast<std::size_t>(entity_width(method, cfg.D))),
          AdamState(shard.num_relations(),
                    static_cast<std::size_t>(relation_width(method, cfg.D)))});
    }
    clients.push_back(std::move(state));
    filters.push_back(make_triple_set(shard));
  }

  RunResult result;
  result.effective_dim = exchanged_dim;
  result.fingerprint = federation_fingerprint(fed);
  const CountingMode mode = parse_counting_mode(cfg.counting_mode);
  const bool dumping = !dump_dir.empty();
  if (dumping) std::filesystem::create_directories(dump_dir);

  std::vector<std::size_t> valid_weights(num_clients), test_weights(num_clients);
  for (std::size_t c = 0; c < num_clients; ++c) {
    valid_weights[c] = fed.clients[c].valid.size();
    test_weights[c] = fed.clients[c].test.size();
  }

  auto evaluate_split = [&](bool validation) {
    std::vector<RankingResult> results(num_clients);
    parallel_for(cfg.threads, num_clients, [&](std::size_t c) {
      const auto& shard = fed.clients[c];
      const auto& queries = validation ? shard.valid : shard.test;
      results[c] =
          evaluate_ranking(clients[c].eval_table(), queries, filters[c]);
    });
    return weighted_metrics(results,
                            validation ? valid_weights : test_weights);
  };

  int declines = 0;
  for (std::int64_t t = 0; t < cfg.max_rounds; ++t) {
    if (uses_svd(strat)) {
      for (auto& state : clients) state.round_start = state.table.entities;
    }

    parallel_for(cfg.threads, num_clients, [&](std::size_t c) {
      const auto& shard = fed.clients[c];
      auto& st = clients[c];
      switch (strat) {
        case Strategy::fede_kd: {
          DualEmbeddingTable dual{std::move(st.table), std::move(st.kd->high)};
          kd_local_train(shard, dual, st.adam_entities, st.adam_relations,
                         st.kd->adam_entities, st.kd->adam_relations, hp,
                         cfg.kd_weight, st.rng);
          st.table = std::move(dual.low);
          st.kd->high = std::move(dual.high);
          break;
        }
        case Strategy::fede_svdplus:
          svdplus_local_train(shard, st.table, st.adam_entities,
                              st.adam_relations, hp, st.round_start,
                              cfg.svd_cols, cfg.svd_alpha, st.rng);
          break;
        default:
          local_train(shard, st.table, st.adam_entities, st.adam_relations,
                      hp, st.rng);
          break;
      }
    });
    result.rounds_run = t + 1;
    if (obs && obs->after_train) obs->after_train(t, fed, clients);

    bool stop = false;
    if ((t + 1) % cfg.eval_every == 0) {
      const auto [mrr, hits] = evaluate_split(/*validation=*/true);
      result.runlog.rows.push_back(RunRow{t, mrr, hits, result.ledger.total(mode)});
      if (mrr > result.best_val_mrr || result.best_round < 0) {
        result.best_val_mrr = mrr;
        result.best_round = t;
        declines = 0;
        result.best_tables.clear();
        for (const auto& st : clients) result.best_tables.push_back(st.eval_table());
      } else if (++declines >= cfg.patience) {
        result.converged = true;
        stop = true;
      }
    }
    if (stop) break;

    switch (strat) {
      case Strategy::single:
        break;
      case Strategy::fedep:
      case Strategy::fedepl:
      case Strategy::fede_kd: {
        std::vector<EmbeddingTable*> tables;
        tables.reserve(num_clients);
        for (auto& st : clients) tables.push_back(&st.table);
        fede_exchange(fed, tables, t, &result.ledger);
        break;
      }
      case Strategy::fede_svd:
      case Strategy::fede_svdplus: {
        std::vector<EmbeddingTable*> tables;
        std::vector<const Mat*> starts;
        for (auto& st : clients) {
          tables.push_back(&st.table);
          starts.push_back(&st.round_start);
        }
        SvdRoundIO io{&fed, tables, starts};
        svd_exchange(io, cfg.svd_cols, cfg.svd_rank, t, &result.ledger);
        break;
      }
      case Strategy::feds: {
        std::vector<UploadMessage> uploads;
        uploads.reserve(num_clients);
        for (std::size_t c = 0; c < num_clients; ++c) {
          uploads.push_back(build_upload(fed.clients[c], clients[c].table, t,
                                         cfg.p, sched));
          result.ledger.record_upload(uploads.back(),
                                      fed.clients[c].num_shared());
          if (dumping) {
            dump_message_file(dump_dir, t, "up", static_cast<int>(c),
                              encode_message(static_cast<int>(c), t,
                                             uploads.back().sign, {},
                                             uploads.back().payload));
          }
        }
        if (is_sync_round(t, sched)) {
          const auto downloads = full_sync_exchange(uploads, fed);
          for (std::size_t c = 0; c < num_clients; ++c) {
            result.ledger.record_download(downloads[c],
                                          fed.clients[c].num_shared());
            apply_sync_download(fed.clients[c], clients[c].table, downloads[c]);
            if (dumping) {
              dump_message_file(dump_dir, t, "down", static_cast<int>(c),
                                encode_message(static_cast<int>(c), t,
                                               downloads[c].sign,
                                               downloads[c].priority,
                                               downloads[c].payload));
            }
          }
        } else {
          for (std::size_t c = 0; c < num_clients; ++c) {
            const auto agg = server_aggregate_personalized(
                uploads, static_cast<int>(c), fed);
            Rng tie_rng(substream(cfg.seed, "downtie",
                                  static_cast<std::uint64_t>(t), c));
            const auto msg = server_select_topk_download(
                agg, fed.clients[c], t, cfg.p, tie_rng);
            result.ledger.record_download(msg, fed.clients[c].num_shared());
            client_merge(fed.clients[c], clients[c].table, msg);
            if (dumping) {
              dump_message_file(dump_dir, t, "down", static_cast<int>(c),
                                encode_message(static_cast<int>(c), t, msg.sign,
                                               msg.priority, msg.payload));
            }
          }
        }
        break;
      }
    }
    if (obs && obs->after_exchange) obs->after_exchange(t, fed, clients);
  }

  if (result.runlog.rows.empty()) {
    throw std::runtime_error(
        "run finished without a single evaluation; raise max_rounds or lower "
        "eval_every");
  }

  // test metrics from the best-validation checkpoint
  {
    std::vector<RankingResult> results(num_clients);
    parallel_for(cfg.threads, num_clients, [&](std::size_t c) {
      results[c] = evaluate_ranking(result.best_tables[c],
                                    fed.clients[c].test, filters[c]);
    });
    const auto [mrr, hits] = weighted_metrics(results, test_weights);
    result.test_mrr = mrr;
    result.test_hits10 = hits;
  }
  return result;
}

void write_run_outputs(const ExperimentConfig& cfg, const RunResult& result,
                       const std::filesystem::path& run_dir) {
  std::filesystem::create_directories(run_dir);
  {
    std::ofstream out(run_dir / "config.cfg");
    if (!out) throw std::runtime_error("cannot write config.cfg");
    out << config_to_text(cfg);
  }
  result.runlog.write_csv(run_dir / "runlog.csv");
  result.ledger.write_csv(run_dir / "ledger.csv");

  const CountingMode mode = parse_counting_mode(cfg.counting_mode);
  ordered_json j;
  j["strategy"] = cfg.strategy;
  j["seed"] = cfg.seed;
  j["config"] = config_json(cfg);
  j["kge_method"] = cfg.kge_method;
  j["D"] = cfg.D;
  j["effective_dim"] = result.effective_dim;
  j["dataset_fingerprint"] = fingerprint_hex(result.fingerprint);
  j["MRR@CG"] = result.test_mrr;
  j["Hits@10@CG"] = result.test_hits10;
  j["R@CG"] = result.best_round;
  j["best_val_mrr"] = result.best_val_mrr;
  j["converged"] = result.converged;
  j["rounds_run"] = result.rounds_run;
  j["total_params_up"] = result.ledger.total_direction(Direction::up, mode);
  j["total_params_down"] = result.ledger.total_direction(Direction::down, mode);
  j["P@CG"] = nullptr;
  j["P@99"] = nullptr;
  j["P@98"] = nullptr;
  {
    std::ofstream out(run_dir / "summary.json");
    if (!out) throw std::runtime_error("cannot write summary.json");
    out << j.dump(2) << '\n';
  }

  {
    std::ofstream out(run_dir / "best_embeddings.bin", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write best_embeddings.bin");
    auto put_u32 = [&out](std::uint32_t v) {
      const std::uint8_t bytes[4] = {
          static_cast<std::uint8_t>(v & 0xff),
          static_cast<std::uint8_t>((v >> 8) & 0xff),
          static_cast<std::uint8_t>((v >> 16) & 0xff),
          static_cast<std::uint8_t>((v >> 24) & 0xff)};
      out.write(reinterpret_cast<const char*>(bytes), 4);
    };
    put_u32(static_cast<std::uint32_t>(result.best_tables.size()));
    for (std::size_t c = 0; c < result.best_tables.size(); ++c) {
      const Mat& ent = result.best_tables[c].entities;
      put_u32(static_cast<std::uint32_t>(c));
      put_u32(static_cast<std::uint32_t>(ent.rows()));
      put_u32(static_cast<std::uint32_t>(ent.cols()));
      for (double v : ent.data()) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(bits);
      }
    }
  }
}

namespace {

ordered_json load_summary(const std::filesystem::path& run_dir) {
  std::ifstream in(run_dir / "summary.json");
  if (!in) {
    throw std::runtime_error("cannot open " + (run_dir / "summary.json").string());
  }
  ordered_json j;
  in >> j;
  return j;
}

std::string format_ratio(const std::optional<double>& v) {
  if (!v.has_value()) return "not attained";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4fx", *v);
  return buf;
}

}  // namespace

CompareReport compare_runs(const std::filesystem::path& run_dir,
                           const std::filesystem::path& baseline_dir) {
  const ordered_json a = load_summary(run_dir);
  const ordered_json b = load_summary(baseline_dir);

  for (const char* key : {"dataset_fingerprint", "kge_method", "D"}) {
    if (a.at(key) != b.at(key)) {
      throw std::runtime_error(std::string("run and baseline differ on ") +
                               key + "; comparison would be meaningless");
    }
  }

  const RunLog run = RunLog::load_csv(run_dir / "runlog.csv");
  const RunLog baseline = RunLog::load_csv(baseline_dir / "runlog.csv");

  CompareReport report;
  report.metrics = derive_metrics(run, baseline);
  const auto base_best = baseline.best_index();

  std::ostringstream text;
  char buf[160];
  const std::string run_name = a.at("strategy").get<std::string>();
  const std::string base_name = b.at("strategy").get<std::string>();
  std::snprintf(buf, sizeof buf, "%-12s %18s %18s\n", "metric",
                run_name.c_str(), base_name.c_str());
  text << buf;
  auto line = [&](const char* name, const std::string& run_v,
                  const std::string& base_v) {
    std::snprintf(buf, sizeof buf, "%-12s %18s %18s\n", name, run_v.c_str(),
                  base_v.c_str());
    text << buf;
  };
  auto fmt4 = [](double v) {
    char b2[32];
    std::snprintf(b2, sizeof b2, "%.4f", v);
    return std::string(b2);
  };
  line("MRR@CG", fmt4(a.at("MRR@CG").get<double>()),
       fmt4(b.at("MRR@CG").get<double>()));
  line("Hits@10@CG", fmt4(a.at("Hits@10@CG").get<double>()),
       fmt4(b.at("Hits@10@CG").get<double>()));
  line("R@CG", std::to_string(report.metrics.r_cg),
       std::to_string(baseline.rows[base_best].round));
  line("P@CG", format_ratio(report.metrics.p_cg), "1.0000x");
  line("P@99", format_ratio(report.metrics.p99), "1.0000x");
  line("P@98", format_ratio(report.metrics.p98), "1.0000x");
  report.text = text.str();

  ordered_json j;
  j["run"] = a;
  j["baseline"] = b;
  j["P@CG"] = report.metrics.p_cg.has_value()
                  ? ordered_json(*report.metrics.p_cg)
                  : ordered_json(nullptr);
  j["P@99"] = report.metrics.p99.has_value()
                  ? ordered_json(*report.metrics.p99)
                  : ordered_json(nullptr);
  j["P@98"] = report.metrics.p98.has_value()
                  ? ordered_json(*report.metrics.p98)
                  : ordered_json(nullptr);
  j["R@CG"] = report.metrics.r_cg;
  j["val_MRR@CG"] = report.metrics.mrr_cg;
  report.json = j.dump(2) + "\n";
  return report;
}

}  // namespace fedkge
