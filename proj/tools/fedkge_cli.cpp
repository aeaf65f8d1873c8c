// Command-line front end for the federated KGE simulator.
//
//   fedkge partition  TSV -> per-client federation directory
//   fedkge run        config file -> run directory artifacts
//   fedkge compare    two run directories -> verdict table
//   fedkge ratio      p s D -> per-cycle transmitted-parameter ratio
//   fedkge fedepl-dim p s D -> traffic-matched embedding dimension
//   fedkge synth      synthetic KG -> TSV

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include "fedkge/baselines.hpp"
#include "fedkge/experiment.hpp"
#include "fedkge/synth.hpp"

namespace {

int run_command(const std::string& config_path, std::uint64_t seed,
                bool seed_set, const std::string& out_dir) {
  fedkge::ExperimentConfig cfg = fedkge::load_config_file(config_path);
  if (seed_set) cfg.seed = seed;
  fedkge::validate_config(cfg);
  const std::filesystem::path run_dir(out_dir);
  const std::filesystem::path dump_dir =
      cfg.dump_messages ? run_dir / "messages" : std::filesystem::path{};
  const fedkge::RunResult result =
      fedkge::run_experiment(cfg, nullptr, dump_dir);
  fedkge::write_run_outputs(cfg, result, run_dir);
  std::printf("strategy=%s rounds=%lld best_round=%lld converged=%s\n",
              cfg.strategy.c_str(),
              static_cast<long long>(result.rounds_run),
              static_cast<long long>(result.best_round),
              result.converged ? "true" : "false");
  std::printf("test MRR@CG=%.6f Hits@10@CG=%.6f\n", result.test_mrr,
              result.test_hits10);
  std::printf("outputs in %s\n", run_dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated knowledge-graph-embedding simulator"};
  app.require_subcommand(1);

  // partition
  auto* partition = app.add_subcommand(
      "partition", "split a TSV triple file into a federation directory");
  std::string part_input, part_out;
  int part_clients = 3;
  std::uint64_t part_seed = 42;
  partition->add_option("--input", part_input, "TSV triple file")->required();
  partition->add_option("--out", part_out, "output directory")->required();
  partition->add_option("--clients", part_clients, "number of clients");
  partition->add_option("--seed", part_seed, "partition seed");

  // run
  auto* run = app.add_subcommand("run", "run an experiment from a config file");
  std::string run_config, run_out = "run";
  std::uint64_t run_seed = 0;
  run->add_option("--config", run_config, "key=value config file")->required();
  auto* seed_opt = run->add_option("--seed", run_seed, "override config seed");
  run->add_option("--out", run_out, "run directory (default ./run)");

  // compare
  auto* compare = app.add_subcommand(
      "compare", "compare a run directory against a baseline run directory");
  std::string cmp_run, cmp_base, cmp_json;
  compare->add_option("run_dir", cmp_run, "run directory")->required();
  compare->add_option("baseline_dir", cmp_base, "baseline run directory")
      ->required();
  compare->add_option("--json", cmp_json, "also write the JSON report here");

  // ratio
  auto* ratio = app.add_subcommand(
      "ratio", "per-cycle transmitted-parameter ratio for (p, s, D)");
  double ratio_p = 0.4;
  int ratio_s = 4, ratio_d = 256;
  ratio->add_option("p", ratio_p, "sparsity ratio")->required();
  ratio->add_option("s", ratio_s, "synchronization interval")->required();
  ratio->add_option("D", ratio_d, "embedding dimension")->required();

  // fedepl-dim
  auto* dim = app.add_subcommand(
      "fedepl-dim", "traffic-matched lowered embedding dimension");
  double dim_p = 0.4;
  int dim_s = 4, dim_d = 256;
  dim->add_option("p", dim_p, "sparsity ratio")->required();
  dim->add_option("s", dim_s, "synchronization interval")->required();
  dim->add_option("D", dim_d, "embedding dimension")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic KG TSV");
  fedkge::SynthSpec synth_spec;
  std::string synth_out;
  synth->add_option("--out", synth_out, "output TSV path")->required();
  synth->add_option("--entities", synth_spec.entities, "entity count");
  synth->add_option("--relations", synth_spec.relations, "relation count");
  synth->add_option("--triples", synth_spec.triples, "triple count");
  synth->add_option("--clusters", synth_spec.clusters, "latent clusters");
  synth->add_option("--noise", synth_spec.noise, "uniform-tail probability");
  synth->add_option("--seed", synth_spec.seed, "generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (partition->parsed()) {
      const fedkge::TripleStore store = fedkge::load_triples(part_input);
      fedkge::FederationSpec fed =
          fedkge::partition_by_relation(store, part_clients, part_seed);
      for (auto& shard : fed.clients) fedkge::split_shard(shard, part_seed);
      fedkge::save_federation(fed, part_out);
      std::printf("%zu clients, %zu entities, %zu relations -> %s\n",
                  fed.clients.size(), fed.entities.size(),
                  fed.relations.size(), part_out.c_str());
      return 0;
    }
    if (run->parsed()) {
      return run_command(run_config, run_seed, seed_opt->count() > 0, run_out);
    }
    if (compare->parsed()) {
      const fedkge::CompareReport report =
          fedkge::compare_runs(cmp_run, cmp_base);
      std::fputs(report.text.c_str(), stdout);
      if (!cmp_json.empty()) {
        std::ofstream out(cmp_json);
        if (!out) throw std::runtime_error("cannot write " + cmp_json);
        out << report.json;
      }
      return 0;
    }
    if (ratio->parsed()) {
      std::printf("%.4f\n", fedkge::theoretical_ratio(ratio_p, ratio_s, ratio_d));
      return 0;
    }
    if (dim->parsed()) {
      std::printf("%d\n", fedkge::fedepl_dimension(dim_p, dim_s, dim_d));
      return 0;
    }
    if (synth->parsed()) {
      const fedkge::TripleStore store = fedkge::generate_synthetic_kg(synth_spec);
      fedkge::write_triples_tsv(store, synth_out);
      std::printf("%zu triples, %zu entities, %zu relations -> %s\n",
                  store.triples.size(), store.entities.size(),
                  store.relations.size(), synth_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
