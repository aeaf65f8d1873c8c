#include "fedkge/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace fedkge {

namespace {

std::size_t count_ones(const std::vector<std::uint8_t>& sign) {
  std::size_t n = 0;
  for (auto b : sign) n += b != 0;
  return n;
}

// local entity id -> position in shard.shared_entities (which is sorted)
std::int32_t shared_position(const ClientShard& shard, std::int32_t local) {
  auto it = std::lower_bound(shard.shared_entities.begin(),
                             shard.shared_entities.end(), local);
  if (it == shard.shared_entities.end() || *it != local) return -1;
  return static_cast<std::int32_t>(it - shard.shared_entities.begin());
}

}  // namespace

std::size_t UploadMessage::popcount() const { return count_ones(sign); }
std::size_t DownloadMessage::popcount() const { return count_ones(sign); }

ChangeScores compute_change_scores(const Mat& current_shared,
                                   const Mat& history) {
  if (current_shared.rows() != history.rows() ||
      current_shared.cols() != history.cols()) {
    throw std::invalid_argument("change-score shape mismatch");
  }
  ChangeScores out;
  out.m.resize(current_shared.rows());
  for (std::size_t i = 0; i < current_shared.rows(); ++i) {
    auto cur = current_shared.row(i);
    auto hist = history.row(i);
    const double nc = norm2(cur);
    const double nh = norm2(hist);
    if (nc == 0.0 || nh == 0.0) {
      out.m[i] = 0.0;  // degenerate rows count as unchanged
      continue;
    }
    out.m[i] = 1.0 - dot(cur, hist) / (nc * nh);
  }
  return out;
}

std::pair<std::vector<std::int32_t>, int> select_topk_upload(
    const ChangeScores& scores, double p) {
  if (p <= 0.0 || p > 1.0) throw std::invalid_argument("p must be in (0, 1]");
  const auto n = static_cast<std::int32_t>(scores.m.size());
  if (n == 0) return {{}, 0};
  const int k = std::max(
      1, static_cast<int>(std::floor(static_cast<double>(n) * p)));

  std::vector<std::int32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::int32_t a, std::int32_t b) {
    return scores.m[a] > scores.m[b];
  });
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return {std::move(idx), k};
}

UploadMessage build_upload(const ClientShard& shard, EmbeddingTable& table,
                           std::int64_t round, double p,
                           SyncSchedule schedule) {
  const std::size_t n_c = shard.num_shared();
  UploadMessage msg;
  msg.client_id = shard.client_id;
  msg.round = round;
  msg.sync = is_sync_round(round, schedule);
  msg.sign.assign(n_c, 0);

  std::vector<std::int32_t> selected;  // positions into shared_entities
  if (msg.sync) {
    selected.resize(n_c);
    std::iota(selected.begin(), selected.end(), 0);
  } else {
    Mat current(n_c, table.entities.cols());
    for (std::size_t i = 0; i < n_c; ++i) {
      copy_into(table.entities.row(shard.shared_entities[i]), current.row(i));
    }
    selected = select_topk_upload(compute_change_scores(current, table.history),
                                  p).first;
  }

  msg.payload = Mat(selected.size(), table.entities.cols());
  for (std::size_t row = 0; row < selected.size(); ++row) {
    const std::int32_t i = selected[row];
    msg.sign[i] = 1;
    auto sent = table.entities.row(shard.shared_entities[i]);
    copy_into(sent, msg.payload.row(row));
    copy_into(sent, table.history.row(i));  // history tracks what was sent
  }
  return msg;
}

std::map<std::int32_t, AggregateEntry> server_aggregate_personalized(
    std::span<const UploadMessage> uploads, int target,
    const FederationSpec& spec) {
  std::vector<bool> seen(spec.clients.size(), false);
  for (const auto& up : uploads) {
    if (up.client_id < 0 ||
        up.client_id >= static_cast<int>(spec.clients.size()) ||
        seen[up.client_id]) {
      throw std::invalid_argument("duplicate or unknown upload client id");
    }
    seen[up.client_id] = true;
  }

  std::map<std::int32_t, AggregateEntry> agg;

  std::vector<const UploadMessage*> ordered;
  ordered.reserve(uploads.size());
  for (const auto& up : uploads) ordered.push_back(&up);
  std::sort(ordered.begin(), ordered.end(),
            [](const UploadMessage* a, const UploadMessage* b) {
              return a->client_id < b->client_id;
            });

  for (const UploadMessage* up : ordered) {
    if (up->client_id == target) continue;  // never the target's own upload
    const ClientShard& shard = spec.clients[up->client_id];
    std::size_t row = 0;
    for (std::size_t i = 0; i < up->sign.size(); ++i) {
      if (!up->sign[i]) continue;
      const std::int32_t g = shard.local_to_global[shard.shared_entities[i]];
      const auto owners = spec.existence[g];
      const bool target_owns =
          std::binary_search(owners.begin(), owners.end(), target);
      if (target_owns) {
        auto [it, inserted] = agg.try_emplace(g);
        if (inserted) it->second.sum.assign(up->payload.cols(), 0.0);
        axpy(1.0, up->payload.row(row), it->second.sum);
        ++it->second.count;
      }
      ++row;
    }
    if (row != up->payload.rows()) {
      throw std::invalid_argument("upload payload rows != popcount(sign)");
    }
  }
  return agg;
}

DownloadMessage server_select_topk_download(
    const std::map<std::int32_t, AggregateEntry>& aggregates,
    const ClientShard& target, std::int64_t round, double p, Rng& tie_rng) {
  const std::size_t n_c = target.num_shared();
  DownloadMessage msg;
  msg.client_id = target.client_id;
  msg.round = round;
  msg.sync = false;
  msg.sign.assign(n_c, 0);

  const int k = n_c == 0
                    ? 0
                    : std::max(1, static_cast<int>(std::floor(
                                      static_cast<double>(n_c) * p)));

  // candidates in ascending global id (map order)
  std::vector<std::int32_t> globals;
  globals.reserve(aggregates.size());
  for (const auto& [g, _] : aggregates) globals.push_back(g);

  std::vector<std::int32_t> chosen;
  if (static_cast<int>(globals.size()) <= k) {
    chosen = globals;  // fewer than K available: send everything
  } else {
    std::stable_sort(globals.begin(), globals.end(),
                     [&](std::int32_t a, std::int32_t b) {
                       return aggregates.at(a).count > aggregates.at(b).count;
                     });
    const std::uint32_t boundary =
        aggregates.at(globals[static_cast<std::size_t>(k) - 1]).count;
    std::vector<std::int32_t> tied;
    for (std::int32_t g : globals) {
      const auto c = aggregates.at(g).count;
      if (c > boundary) {
        chosen.push_back(g);
      } else if (c == boundary) {
        tied.push_back(g);
      }
    }
    // seeded uniform choice among equal-priority boundary candidates
    std::sort(tied.begin(), tied.end());
    std::size_t need = static_cast<std::size_t>(k) - chosen.size();
    for (std::size_t taken = 0; taken < need; ++taken) {
      const std::size_t pick = taken + static_cast<std::size_t>(
                                            tie_rng.below(tied.size() - taken));
      std::swap(tied[taken], tied[pick]);
      chosen.push_back(tied[taken]);
    }
  }

  // inverse map global -> local for the target
  std::unordered_map<std::int32_t, std::int32_t> to_local;
  to_local.reserve(target.local_to_global.size());
  for (std::int32_t local = 0;
       local < static_cast<std::int32_t>(target.local_to_global.size());
       ++local) {
    to_local.emplace(target.local_to_global[local], local);
  }

  // payload ordered by ascending shared-entity position
  std::vector<std::pair<std::int32_t, std::int32_t>> rows;  // (position, g)
  rows.reserve(chosen.size());
  for (std::int32_t g : chosen) {
    const auto it = to_local.find(g);
    if (it == to_local.end()) {
      throw std::logic_error("aggregated entity not owned by target");
    }
    const std::int32_t pos = shared_position(target, it->second);
    if (pos < 0) throw std::logic_error("aggregated entity not shared");
    rows.emplace_back(pos, g);
  }
  std::sort(rows.begin(), rows.end());

  msg.payload = Mat(rows.size(), rows.empty() ? 0 : aggregates.begin()->second.sum.size());
  msg.priority.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& [pos, g] = rows[r];
    msg.sign[pos] = 1;
    const AggregateEntry& entry = aggregates.at(g);
    copy_into(entry.sum, msg.payload.row(r));
    msg.priority.push_back(entry.count);
  }
  return msg;
}

void client_merge(const ClientShard& shard, EmbeddingTable& table,
                  const DownloadMessage& msg) {
  if (msg.sign.size() != shard.num_shared()) {
    throw std::invalid_argument("download sign length != N_c");
  }
  if (msg.priority.size() != msg.payload.rows() ||
      msg.popcount() != msg.payload.rows()) {
    throw std::invalid_argument("download rows, priorities and sign disagree");
  }
  std::size_t row = 0;
  for (std::size_t i = 0; i < msg.sign.size(); ++i) {
    if (!msg.sign[i]) continue;
    const std::uint32_t p = msg.priority[row];
    if (p < 1) throw std::invalid_argument("priority weight below 1");
    auto e = table.entities.row(shard.shared_entities[i]);
    auto a = msg.payload.row(row);
    const double denom = 1.0 + static_cast<double>(p);
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = (a[k] + e[k]) / denom;
    ++row;
  }
}

std::vector<DownloadMessage> full_sync_exchange(
    std::span<const UploadMessage> uploads, const FederationSpec& spec) {
  std::vector<const UploadMessage*> by_client(spec.clients.size(), nullptr);
  for (const auto& up : uploads) {
    if (up.client_id < 0 ||
        up.client_id >= static_cast<int>(spec.clients.size()) ||
        by_client[up.client_id] != nullptr) {
      throw std::invalid_argument("duplicate or unknown upload client id");
    }
    if (up.popcount() != spec.clients[up.client_id].num_shared()) {
      throw std::invalid_argument("partial upload in a sync round");
    }
    by_client[up.client_id] = &up;
  }
  for (const auto* up : by_client) {
    if (up == nullptr) throw std::invalid_argument("missing client upload");
  }

  // Per shared entity: mean over owners in ascending client id. Payload rows
  // in a full upload appear in shared_entities order, so the row of entity g
  // within client c's upload is the shared position of g in c's shard.
  std::vector<DownloadMessage> downloads(spec.clients.size());
  std::vector<std::unordered_map<std::int32_t, std::int32_t>> pos_of_global(
      spec.clients.size());
  for (std::size_t c = 0; c < spec.clients.size(); ++c) {
    const auto& shard = spec.clients[c];
    auto& msg = downloads[c];
    msg.client_id = static_cast<int>(c);
    msg.round = uploads.empty() ? 0 : uploads.front().round;
    msg.sync = true;
    msg.sign.assign(shard.num_shared(), 1);
    msg.payload = Mat(shard.num_shared(), by_client[c]->payload.cols());
    pos_of_global[c].reserve(shard.num_shared());
    for (std::int32_t pos = 0;
         pos < static_cast<std::int32_t>(shard.num_shared()); ++pos) {
      pos_of_global[c].emplace(
          shard.local_to_global[shard.shared_entities[pos]], pos);
    }
  }

  std::vector<double> acc;
  for (std::size_t g = 0; g < spec.existence.size(); ++g) {
    const auto& owners = spec.existence[g];
    if (owners.size() < 2) continue;  // exclusive entities stay local
    acc.clear();
    for (int owner : owners) {
      const std::int32_t pos =
          pos_of_global[owner].at(static_cast<std::int32_t>(g));
      auto row = by_client[owner]->payload.row(pos);
      if (acc.empty()) {
        acc.assign(row.begin(), row.end());
      } else {
        axpy(1.0, row, acc);
      }
    }
    const double inv = 1.0 / static_cast<double>(owners.size());
    for (auto& v : acc) v *= inv;
    for (int owner : owners) {
      const std::int32_t pos =
          pos_of_global[owner].at(static_cast<std::int32_t>(g));
      copy_into(acc, downloads[owner].payload.row(pos));
    }
  }
  return downloads;
}

void apply_sync_download(const ClientShard& shard, EmbeddingTable& table,
                         const DownloadMessage& msg) {
  if (msg.sign.size() != shard.num_shared() ||
      msg.popcount() != msg.payload.rows()) {
    throw std::invalid_argument("sync download shape mismatch");
  }
  std::size_t row = 0;
  for (std::size_t i = 0; i < msg.sign.size(); ++i) {
    if (!msg.sign[i]) continue;
    auto value = msg.payload.row(row);
    copy_into(value, table.entities.row(shard.shared_entities[i]));
    copy_into(value, table.history.row(i));
    ++row;
  }
}

std::vector<std::uint8_t> encode_message(int client_id, std::int64_t round,
                                         std::span<const std::uint8_t> sign,
                                         std::span<const std::uint32_t> priority,
                                         const Mat& payload) {
  auto put_u32 = [](std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
  };
  std::vector<std::uint8_t> out;
  const auto n_c = static_cast<std::uint32_t>(sign.size());
  const auto k = static_cast<std::uint32_t>(payload.rows());
  out.reserve(16 + (n_c + 7) / 8 + priority.size() * 4 +
              payload.data().size() * 4);
  put_u32(out, static_cast<std::uint32_t>(client_id));
  put_u32(out, static_cast<std::uint32_t>(round));
  put_u32(out, n_c);
  put_u32(out, k);
  // sign bits packed LSB-first
  for (std::size_t base = 0; base < sign.size(); base += 8) {
    std::uint8_t b = 0;
    for (std::size_t bit = 0; bit < 8 && base + bit < sign.size(); ++bit) {
      if (sign[base + bit]) b |= static_cast<std::uint8_t>(1u << bit);
    }
    out.push_back(b);
  }
  for (std::uint32_t p : priority) put_u32(out, p);
  for (double v : payload.data()) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  return out;
}

DecodedMessage decode_message(std::span<const std::uint8_t> bytes,
                              bool has_priority, std::size_t row_width) {
  std::size_t off = 0;
  auto get_u32 = [&]() {
    if (off + 4 > bytes.size()) throw std::runtime_error("truncated message");
    const std::uint32_t v = static_cast<std::uint32_t>(bytes[off]) |
                            (static_cast<std::uint32_t>(bytes[off + 1]) << 8) |
                            (static_cast<std::uint32_t>(bytes[off + 2]) << 16) |
                            (static_cast<std::uint32_t>(bytes[off + 3]) << 24);
    off += 4;
    return v;
  };
  DecodedMessage msg;
  msg.client_id = get_u32();
  msg.round = get_u32();
  const std::uint32_t n_c = get_u32();
  const std::uint32_t k = get_u32();
  msg.sign.assign(n_c, 0);
  const std::size_t sign_bytes = (n_c + 7) / 8;
  if (off + sign_bytes > bytes.size()) throw std::runtime_error("truncated message");
  for (std::size_t i = 0; i < n_c; ++i) {
    msg.sign[i] = (bytes[off + i / 8] >> (i % 8)) & 1u;
  }
  off += sign_bytes;
  if (has_priority) {
    msg.priority.resize(k);
    for (std::uint32_t i = 0; i < k; ++i) msg.priority[i] = get_u32();
  }
  msg.payload = Mat(k, row_width);
  for (auto& v : msg.payload.data()) {
    const std::uint32_t bits = get_u32();
    float f;
    std::memcpy(&f, &bits, 4);
    v = static_cast<double>(f);
  }
  if (off != bytes.size()) throw std::runtime_error("trailing bytes in message");
  return msg;
}

}  // namespace fedkge
