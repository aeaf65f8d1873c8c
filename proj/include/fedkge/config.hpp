#pragma once
// Flat key=value experiment configuration ('#' comments, one key per line).

#include <cstdint>
#include <filesystem>
#include <string>

namespace fedkge {

enum class Strategy { feds, fedep, fedepl, fede_kd, fede_svd, fede_svdplus, single };

Strategy parse_strategy(const std::string& name);
const char* strategy_name(Strategy s);

struct ExperimentConfig {
  std::string dataset;  // TSV file to partition, or a federation directory
  int num_clients = 3;
  std::string strategy = "feds";
  std::string kge_method = "transe";
  int D = 256;
  double p = 0.4;
  int s = 4;
  int local_epochs = 3;
  int batch_size = 512;
  double lr = 1e-4;
  double gamma = 8.0;
  double epsilon = 2.0;
  double alpha_adv = 1.0;
  int negatives = 16;
  int eval_every = 5;  // defaults to 10 when strategy=single and unset
  int patience = 3;
  std::uint64_t seed = 42;
  std::string counting_mode = "worst_case";

  // harness knobs
  int max_rounds = 500;
  int threads = 1;
  double kd_weight = 1.0;
  int kd_low_dim = 192;
  int svd_cols = 8;   // n
  int svd_rank = 5;   // retained singular values
  double svd_alpha = 0.05;
  bool dump_messages = false;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::filesystem::path& path);
void validate_config(const ExperimentConfig& cfg);
std::string config_to_text(const ExperimentConfig& cfg);

}  // namespace fedkge
