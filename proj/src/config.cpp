#include "fedkge/config.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedkge/embedding.hpp"
#include "fedkge/ledger.hpp"

namespace fedkge {

Strategy parse_strategy(const std::string& name) {
  if (name == "feds") return Strategy::feds;
  if (name == "fedep") return Strategy::fedep;
  if (name == "fedepl") return Strategy::fedepl;
  if (name == "fede_kd") return Strategy::fede_kd;
  if (name == "fede_svd") return Strategy::fede_svd;
  if (name == "fede_svdplus") return Strategy::fede_svdplus;
  if (name == "single") return Strategy::single;
  throw std::invalid_argument("unknown strategy: " + name);
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::feds: return "feds";
    case Strategy::fedep: return "fedep";
    case Strategy::fedepl: return "fedepl";
    case Strategy::fede_kd: return "fede_kd";
    case Strategy::fede_svd: return "fede_svd";
    case Strategy::fede_svdplus: return "fede_svdplus";
    case Strategy::single: return "single";
  }
  return "?";
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const int x = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad integer for " + key + ": " + v);
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad number for " + key + ": " + v);
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("bad boolean for " + key + ": " + v);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  bool eval_every_set = false;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  " is not key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    if (key == "dataset") cfg.dataset = val;
    else if (key == "num_clients") cfg.num_clients = to_int(val, key);
    else if (key == "strategy") cfg.strategy = val;
    else if (key == "kge_method") cfg.kge_method = val;
    else if (key == "D") cfg.D = to_int(val, key);
    else if (key == "p") cfg.p = to_double(val, key);
    else if (key == "s") cfg.s = to_int(val, key);
    else if (key == "local_epochs") cfg.local_epochs = to_int(val, key);
    else if (key == "batch_size") cfg.batch_size = to_int(val, key);
    else if (key == "lr") cfg.lr = to_double(val, key);
    else if (key == "gamma") cfg.gamma = to_double(val, key);
    else if (key == "epsilon") cfg.epsilon = to_double(val, key);
    else if (key == "alpha_adv") cfg.alpha_adv = to_double(val, key);
    else if (key == "negatives") cfg.negatives = to_int(val, key);
    else if (key == "eval_every") { cfg.eval_every = to_int(val, key); eval_every_set = true; }
    else if (key == "patience") cfg.patience = to_int(val, key);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(val));
    else if (key == "counting_mode") cfg.counting_mode = val;
    else if (key == "max_rounds") cfg.max_rounds = to_int(val, key);
    else if (key == "threads") cfg.threads = to_int(val, key);
    else if (key == "kd_weight") cfg.kd_weight = to_double(val, key);
    else if (key == "kd_low_dim") cfg.kd_low_dim = to_int(val, key);
    else if (key == "svd_cols") cfg.svd_cols = to_int(val, key);
    else if (key == "svd_rank") cfg.svd_rank = to_int(val, key);
    else if (key == "svd_alpha") cfg.svd_alpha = to_double(val, key);
    else if (key == "dump_messages") cfg.dump_messages = to_bool(val, key);
    else throw std::invalid_argument("unknown config key: " + key);
  }
  if (!eval_every_set && cfg.strategy == "single") cfg.eval_every = 10;
  return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void validate_config(const ExperimentConfig& cfg) {
  parse_strategy(cfg.strategy);
  if (cfg.dataset.empty()) throw std::invalid_argument("dataset is required");
  if (cfg.num_clients < 2) throw std::invalid_argument("num_clients must be >= 2");
  if (cfg.D < 2) throw std::invalid_argument("D must be >= 2");
  if (cfg.p <= 0.0 || cfg.p > 1.0) throw std::invalid_argument("p must be in (0, 1]");
  if (cfg.s < 1) throw std::invalid_argument("s must be >= 1");
  if (cfg.local_epochs < 0) throw std::invalid_argument("local_epochs must be >= 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.lr <= 0.0) throw std::invalid_argument("lr must be positive");
  if (cfg.gamma <= 0.0) throw std::invalid_argument("gamma must be positive");
  if (cfg.alpha_adv <= 0.0) throw std::invalid_argument("alpha_adv must be positive");
  if (cfg.negatives < 1) throw std::invalid_argument("negatives must be >= 1");
  if (cfg.eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (cfg.patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (cfg.max_rounds < 1) throw std::invalid_argument("max_rounds must be >= 1");
  if (cfg.threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (cfg.kd_low_dim < 2 || cfg.kd_low_dim >= cfg.D) {
    if (cfg.strategy == "fede_kd") {
      throw std::invalid_argument("kd_low_dim must be in [2, D)");
    }
  }
  if (cfg.strategy == "fede_svd" || cfg.strategy == "fede_svdplus") {
    if (cfg.svd_cols < 1 || cfg.svd_rank < 1 || cfg.svd_rank > cfg.svd_cols) {
      throw std::invalid_argument("need 1 <= svd_rank <= svd_cols");
    }
    if (cfg.strategy == "fede_svdplus" && cfg.local_epochs < 2) {
      throw std::invalid_argument(
          "fede_svdplus needs local_epochs >= 2 so an update exists before "
          "the reparameterized final epoch");
    }
  }
  parse_kge_method(cfg.kge_method);
  parse_counting_mode(cfg.counting_mode);
}

std::string config_to_text(const ExperimentConfig& cfg) {
  char buf[64];
  std::ostringstream out;
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "dataset = " << cfg.dataset << '\n'
      << "num_clients = " << cfg.num_clients << '\n'
      << "strategy = " << cfg.strategy << '\n'
      << "kge_method = " << cfg.kge_method << '\n'
      << "D = " << cfg.D << '\n'
      << "p = " << num(cfg.p) << '\n'
      << "s = " << cfg.s << '\n'
      << "local_epochs = " << cfg.local_epochs << '\n'
      << "batch_size = " << cfg.batch_size << '\n'
      << "lr = " << num(cfg.lr) << '\n'
      << "gamma = " << num(cfg.gamma) << '\n'
      << "epsilon = " << num(cfg.epsilon) << '\n'
      << "alpha_adv = " << num(cfg.alpha_adv) << '\n'
      << "negatives = " << cfg.negatives << '\n'
      << "eval_every = " << cfg.eval_every << '\n'
      << "patience = " << cfg.patience << '\n'
      << "seed = " << cfg.seed << '\n'
      << "counting_mode = " << cfg.counting_mode << '\n'
      << "max_rounds = " << cfg.max_rounds << '\n'
      << "threads = " << cfg.threads << '\n'
      << "kd_weight = " << num(cfg.kd_weight) << '\n'
      << "kd_low_dim = " << cfg.kd_low_dim << '\n'
      << "svd_cols = " << cfg.svd_cols << '\n'
      << "svd_rank = " << cfg.svd_rank << '\n'
      << "svd_alpha = " << num(cfg.svd_alpha) << '\n'
      << "dump_messages = " << (cfg.dump_messages ? "true" : "false") << '\n';
  return out.str();
}

}  // namespace fedkge
