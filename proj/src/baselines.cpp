#include "fedkge/baselines.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fedkge/protocol.hpp"

namespace fedkge {

void fede_exchange(const FederationSpec& spec,
                   std::span<EmbeddingTable* const> tables, std::int64_t round,
                   CommLedger* ledger) {
  if (tables.size() != spec.clients.size()) {
    throw std::invalid_argument("one table per client required");
  }
  std::vector<UploadMessage> uploads;
  uploads.reserve(spec.clients.size());
  for (std::size_t c = 0; c < spec.clients.size(); ++c) {
    const auto& shard = spec.clients[c];
    auto& table = *tables[c];
    UploadMessage msg;
    msg.client_id = shard.client_id;
    msg.round = round;
    msg.sync = true;
    msg.sign.assign(shard.num_shared(), 1);
    msg.payload = Mat(shard.num_shared(), table.entities.cols());
    for (std::size_t i = 0; i < shard.num_shared(); ++i) {
      auto sent = table.entities.row(shard.shared_entities[i]);
      copy_into(sent, msg.payload.row(i));
      copy_into(sent, table.history.row(i));
    }
    if (ledger) ledger->record_upload(msg, shard.num_shared());
    uploads.push_back(std::move(msg));
  }

  const auto downloads = full_sync_exchange(uploads, spec);
  for (std::size_t c = 0; c < spec.clients.size(); ++c) {
    if (ledger) ledger->record_download(downloads[c], spec.clients[c].num_shared());
    apply_sync_download(spec.clients[c], *tables[c], downloads[c]);
  }
}

int fedepl_dimension(double p, int s, int dim) {
  if (p >= 1.0) {
    throw std::invalid_argument("dimension reduction needs p < 1");
  }
  if (p <= 0.0) throw std::invalid_argument("p must be positive");
  if (s < 1 || dim < 2) throw std::invalid_argument("bad s or D");
  return static_cast<int>(
      std::ceil(static_cast<double>(dim) * theoretical_ratio(p, s, dim)));
}

}  // namespace fedkge
