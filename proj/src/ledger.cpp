#include "fedkge/ledger.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fedkge {

CountingMode parse_counting_mode(const std::string& name) {
  if (name == "worst_case") return CountingMode::worst_case;
  if (name == "packed") return CountingMode::packed;
  throw std::invalid_argument("unknown counting_mode: " + name);
}

const char* counting_mode_name(CountingMode mode) {
  return mode == CountingMode::worst_case ? "worst_case" : "packed";
}

std::int64_t record_params(const LedgerRecord& r, CountingMode mode) {
  const std::int64_t sign = mode == CountingMode::worst_case
                                ? r.sign_bits
                                : (r.sign_bits + 31) / 32;
  return r.embedding_params + sign + r.priority_params;
}

void CommLedger::record_upload(const UploadMessage& msg, std::size_t n_c) {
  LedgerRecord r;
  r.round = msg.round;
  r.client_id = msg.client_id;
  r.dir = Direction::up;
  r.embedding_params = static_cast<std::int64_t>(msg.payload.rows()) *
                       static_cast<std::int64_t>(msg.payload.cols());
  r.sign_bits = msg.sync ? 0 : static_cast<std::int64_t>(n_c);
  records_.push_back(r);
}

void CommLedger::record_download(const DownloadMessage& msg, std::size_t n_c) {
  LedgerRecord r;
  r.round = msg.round;
  r.client_id = msg.client_id;
  r.dir = Direction::down;
  r.embedding_params = static_cast<std::int64_t>(msg.payload.rows()) *
                       static_cast<std::int64_t>(msg.payload.cols());
  r.sign_bits = msg.sync ? 0 : static_cast<std::int64_t>(n_c);
  r.priority_params =
      msg.sync ? 0 : static_cast<std::int64_t>(msg.priority.size());
  records_.push_back(r);
}

void CommLedger::record_raw(std::int64_t round, int client_id, Direction dir,
                            std::int64_t embedding_params,
                            std::int64_t sign_bits,
                            std::int64_t priority_params) {
  records_.push_back(LedgerRecord{round, client_id, dir, embedding_params,
                                  sign_bits, priority_params});
}

std::int64_t CommLedger::total(CountingMode mode) const {
  std::int64_t sum = 0;
  for (const auto& r : records_) sum += record_params(r, mode);
  return sum;
}

std::int64_t CommLedger::total_direction(Direction dir,
                                         CountingMode mode) const {
  std::int64_t sum = 0;
  for (const auto& r : records_) {
    if (r.dir == dir) sum += record_params(r, mode);
  }
  return sum;
}

void CommLedger::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "round,client_id,direction,embedding_params,sign_bits,priority_params\n";
  for (const auto& r : records_) {
    out << r.round << ',' << r.client_id << ','
        << (r.dir == Direction::up ? "up" : "down") << ','
        << r.embedding_params << ',' << r.sign_bits << ','
        << r.priority_params << '\n';
  }
}

double theoretical_ratio(double p, int s, int dim) {
  if (p <= 0.0 || p > 1.0) throw std::invalid_argument("p must be in (0, 1]");
  if (s < 1) throw std::invalid_argument("s must be >= 1");
  if (dim < 1) throw std::invalid_argument("D must be >= 1");
  const double sd = static_cast<double>(s);
  const double dd = static_cast<double>(dim);
  return (p * sd + 1.0 + (2.0 + p) * sd / (2.0 * dd)) / (sd + 1.0);
}

void RunLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "round,mrr,hits10,cum_params\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%" PRId64 ",%.17g,%.17g,%" PRId64 "\n",
                  r.round, r.mrr, r.hits10, r.cum_params);
    out << buf;
  }
}

RunLog RunLog::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  RunLog log;
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("empty runlog " + path.string());
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RunRow row;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    if (!(ss >> row.round >> row.mrr >> row.hits10 >> row.cum_params)) {
      throw std::runtime_error("malformed runlog row in " + path.string());
    }
    log.rows.push_back(row);
  }
  return log;
}

std::size_t RunLog::best_index() const {
  if (rows.empty()) throw std::runtime_error("empty run log");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].mrr > rows[best].mrr) best = i;
  }
  return best;
}

namespace {

// cumulative params at the first row whose MRR reaches `threshold`
std::optional<std::int64_t> params_at_first_attainment(const RunLog& log,
                                                       double threshold) {
  for (const auto& row : log.rows) {
    if (row.mrr >= threshold) return row.cum_params;
  }
  return std::nullopt;
}

std::optional<double> ratio_or_unattained(std::optional<std::int64_t> num,
                                          std::optional<std::int64_t> den) {
  if (!num.has_value() || !den.has_value()) return std::nullopt;
  if (*den == 0) return *num == 0 ? std::optional<double>(1.0) : std::nullopt;
  return static_cast<double>(*num) / static_cast<double>(*den);
}

}  // namespace

DerivedMetrics derive_metrics(const RunLog& run, const RunLog& baseline) {
  const auto run_best = run.best_index();
  const auto base_best = baseline.best_index();

  DerivedMetrics out;
  out.r_cg = run.rows[run_best].round;
  out.mrr_cg = run.rows[run_best].mrr;
  out.hits10_cg = run.rows[run_best].hits10;

  out.p_cg = ratio_or_unattained(run.rows[run_best].cum_params,
                                 baseline.rows[base_best].cum_params);

  const double base_mrr = baseline.rows[base_best].mrr;
  for (auto [target, slot] :
       {std::pair{0.99, &out.p99}, std::pair{0.98, &out.p98}}) {
    const double threshold = target * base_mrr;
    *slot = ratio_or_unattained(params_at_first_attainment(run, threshold),
                                params_at_first_attainment(baseline, threshold));
  }
  return out;
}

}  // namespace fedkge
