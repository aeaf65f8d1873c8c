#pragma once
// Full-exchange baseline pieces shared by the fedep/fedepl/fede_kd round
// loops, plus the traffic-matched dimension rule.

#include <span>

#include "fedkge/embedding.hpp"
#include "fedkge/kg.hpp"
#include "fedkge/ledger.hpp"

namespace fedkge {

class CommLedger;

// One federated-averaging exchange: full upload of every shared entity,
// per-entity owner mean, full download, history refreshed with the
// synchronized values. `tables[c]` belongs to spec.clients[c]. When a ledger
// is given, messages are counted as sync-type records (no sign vector).
void fede_exchange(const FederationSpec& spec,
                   std::span<EmbeddingTable* const> tables, std::int64_t round,
                   CommLedger* ledger);

// ceil(D * R) with R from the cycle efficiency ratio. Requires 0 < p < 1.
// Complex-space callers pass the model dimension (the convention fixes D to
// the real-space value rather than 2D).
int fedepl_dimension(double p, int s, int dim);

}  // namespace fedkge
