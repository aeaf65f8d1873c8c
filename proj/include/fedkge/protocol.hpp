#pragma once
// Entity-wise top-K sparsification wire protocol.
//
// Upstream: clients score per-entity change as 1 - cos(current, history),
// transmit the K most-changed shared-entity embeddings plus a 0-1 sign
// vector, and refresh their history copies for what was sent.
//
// Downstream: the server sums, per target client, the uploads of every other
// client (never the target's own), ranks aggregates by upload count
// ("priority weight"), sends up to K of them, and the client merges each as
// (A + E) / (1 + P).
//
// Sync rounds (t mod (s+1) == 0) exchange everything: the server means all
// owners' uploads and every owner overwrites both its embedding and its
// history with the result.

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "fedkge/embedding.hpp"
#include "fedkge/kg.hpp"
#include "fedkge/rng.hpp"

namespace fedkge {

struct SyncSchedule {
  int interval = 4;  // s sparsified rounds between consecutive sync rounds
};

inline bool is_sync_round(std::int64_t t, SyncSchedule schedule) {
  return t % (static_cast<std::int64_t>(schedule.interval) + 1) == 0;
}

struct ChangeScores {
  std::vector<double> m;  // one entry per shared entity, each in [0, 2]
};

struct UploadMessage {
  int client_id = 0;
  std::int64_t round = 0;
  bool sync = false;
  // sign[i] flags shared_entities[i]; payload rows follow ascending i.
  std::vector<std::uint8_t> sign;
  Mat payload;

  std::size_t popcount() const;
};

struct DownloadMessage {
  int client_id = 0;
  std::int64_t round = 0;
  bool sync = false;
  std::vector<std::uint8_t> sign;
  // Upload counts |C^t_{c_e}| aligned with payload rows; empty in sync
  // rounds (payload is already the owner mean there).
  std::vector<std::uint32_t> priority;
  Mat payload;

  std::size_t popcount() const;
};

// M_i = 1 - cos(current_i, history_i); zero-norm rows on either side give 0.
ChangeScores compute_change_scores(const Mat& current_shared,
                                   const Mat& history);

// K = max(1, floor(N_c * p)); ties on M broken toward the smaller index;
// returns ascending indices. N_c = 0 gives (empty, 0).
std::pair<std::vector<std::int32_t>, int> select_topk_upload(
    const ChangeScores& scores, double p);

// Builds the round-t upload (full in sync rounds, top-K otherwise) and
// refreshes table.history rows for everything included.
UploadMessage build_upload(const ClientShard& shard, EmbeddingTable& table,
                           std::int64_t round, double p,
                           SyncSchedule schedule);

struct AggregateEntry {
  std::vector<double> sum;  // A, the summed foreign uploads
  std::uint32_t count = 0;  // |C^t_{c_e}|
};

// Personalized aggregation for `target`: sums, in ascending uploader id, the
// uploaded rows of every entity the target owns, excluding the target's own
// upload. Entities nobody else uploaded are absent.
std::map<std::int32_t, AggregateEntry> server_aggregate_personalized(
    std::span<const UploadMessage> uploads, int target,
    const FederationSpec& spec);

// Keeps up to K aggregates by descending count; boundary ties resolved by
// the seeded RNG; fewer than K available means all are sent.
DownloadMessage server_select_topk_download(
    const std::map<std::int32_t, AggregateEntry>& aggregates,
    const ClientShard& target, std::int64_t round, double p, Rng& tie_rng);

// Applies a sparsified download: flagged entities become (A + E) / (1 + P).
// History is not touched.
void client_merge(const ClientShard& shard, EmbeddingTable& table,
                  const DownloadMessage& msg);

// Full synchronization: per shared entity, the mean over all owners'
// uploaded rows (ascending client id). Requires full uploads.
std::vector<DownloadMessage> full_sync_exchange(
    std::span<const UploadMessage> uploads, const FederationSpec& spec);

// Overwrites flagged entity rows and their history copies with the payload.
void apply_sync_download(const ClientShard& shard, EmbeddingTable& table,
                         const DownloadMessage& msg);

// Debug wire record: client_id u32, round u32, N_c u32, K u32, S packed
// LSB-first, P as u32 sequence, payload as little-endian f32 rows.
std::vector<std::uint8_t> encode_message(int client_id, std::int64_t round,
                                         std::span<const std::uint8_t> sign,
                                         std::span<const std::uint32_t> priority,
                                         const Mat& payload);

struct DecodedMessage {
  std::uint32_t client_id = 0;
  std::uint32_t round = 0;
  std::vector<std::uint8_t> sign;
  std::vector<std::uint32_t> priority;
  Mat payload;  // floats widened back to double
};

DecodedMessage decode_message(std::span<const std::uint8_t> bytes,
                              bool has_priority, std::size_t row_width);

}  // namespace fedkge
