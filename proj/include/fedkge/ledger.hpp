#pragma once
// Transmitted-parameter accounting and the analytical efficiency ratio.
//
// Counting modes: "worst_case" prices each sign entry as one parameter (the
// formula's assumption that sign and embedding share a 32-bit type);
// "packed" prices the sign vector at one bit per entry, i.e. ceil(N_c/32)
// parameters. Worst-case is the default for all reported metrics.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedkge/protocol.hpp"

namespace fedkge {

enum class Direction { up, down };
enum class CountingMode { worst_case, packed };

CountingMode parse_counting_mode(const std::string& name);
const char* counting_mode_name(CountingMode mode);

struct LedgerRecord {
  std::int64_t round = 0;
  int client_id = 0;
  Direction dir = Direction::up;
  std::int64_t embedding_params = 0;
  std::int64_t sign_bits = 0;       // sign entries; 0 in sync rounds
  std::int64_t priority_params = 0;
};

std::int64_t record_params(const LedgerRecord& r, CountingMode mode);

class CommLedger {
 public:
  void record_upload(const UploadMessage& msg, std::size_t n_c);
  void record_download(const DownloadMessage& msg, std::size_t n_c);
  void record_raw(std::int64_t round, int client_id, Direction dir,
                  std::int64_t embedding_params, std::int64_t sign_bits = 0,
                  std::int64_t priority_params = 0);

  std::span<const LedgerRecord> records() const { return records_; }
  std::int64_t total(CountingMode mode) const;
  std::int64_t total_direction(Direction dir, CountingMode mode) const;

  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<LedgerRecord> records_;
};

// Eq: R = (p*s + 1 + (2+p)*s / (2 D)) / (s + 1)
double theoretical_ratio(double p, int s, int dim);

struct RunRow {
  std::int64_t round = 0;
  double mrr = 0.0;
  double hits10 = 0.0;
  std::int64_t cum_params = 0;  // up+down through the preceding exchange
};

struct RunLog {
  std::vector<RunRow> rows;

  void write_csv(const std::filesystem::path& path) const;
  static RunLog load_csv(const std::filesystem::path& path);

  // index of the best-MRR row (earliest on ties)
  std::size_t best_index() const;
};

struct DerivedMetrics {
  // ratios vs the baseline; nullopt = threshold never attained
  std::optional<double> p_cg, p99, p98;
  std::int64_t r_cg = 0;    // run's convergence round
  double mrr_cg = 0.0;      // run's best validation MRR
  double hits10_cg = 0.0;
};

// P@CG compares cumulative parameters at each log's own best round; P@99 and
// P@98 compare cumulative parameters at each log's first attainment of 99%
// (98%) of the baseline's best MRR.
DerivedMetrics derive_metrics(const RunLog& run, const RunLog& baseline);

}  // namespace fedkge
