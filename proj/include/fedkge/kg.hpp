#pragma once
// Triple ingestion, relation-partitioned federation construction, and
// train/valid/test splitting.
//
// Entities and relations are dictionary-encoded. Each client shard stores
// triples in its own local index space with an explicit local -> global
// entity map; the server side reasons purely in global indices via the
// existence table (global entity -> owning clients).

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace fedkge {

struct Triple {
  std::int32_t head = 0;
  std::int32_t relation = 0;
  std::int32_t tail = 0;

  bool operator==(const Triple&) const = default;
};

// name <-> dense index bijection, indices assigned in first-appearance order
class Vocab {
 public:
  std::int32_t get_or_add(const std::string& name);
  std::optional<std::int32_t> find(const std::string& name) const;
  const std::string& name(std::int32_t idx) const { return names_.at(idx); }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct TripleStore {
  std::vector<Triple> triples;  // indices into the vocabularies below
  Vocab entities;
  Vocab relations;
};

// Parses a UTF-8 TSV of head<TAB>relation<TAB>tail lines. Blank lines are
// skipped; a line with the wrong field count raises with its line number.
// Duplicate lines are kept as distinct triples.
TripleStore load_triples(const std::filesystem::path& path);

struct ClientShard {
  int client_id = 0;
  // Local-index triples. partition_by_relation places everything in `train`;
  // split_shard redistributes into the three splits.
  std::vector<Triple> train, valid, test;
  std::vector<std::int32_t> local_to_global;      // local entity -> global
  std::vector<std::int32_t> rel_local_to_global;  // local relation -> global
  // Local entity indices shared with >= 1 other client, ascending. Its
  // length is the N_c of the communication protocol.
  std::vector<std::int32_t> shared_entities;

  std::size_t num_entities() const { return local_to_global.size(); }
  std::size_t num_relations() const { return rel_local_to_global.size(); }
  std::size_t num_shared() const { return shared_entities.size(); }
  std::size_t num_triples() const {
    return train.size() + valid.size() + test.size();
  }
};

struct FederationSpec {
  std::vector<ClientShard> clients;
  // global entity -> ascending client ids owning it
  std::vector<std::vector<int>> existence;
  // Global vocabularies, kept for persistence and reporting.
  Vocab entities;
  Vocab relations;
};

// Shuffles relation ids with the seed, deals them round-robin into
// num_clients groups (sizes differ by <= 1), and hands every triple to the
// owner of its relation. Shards come back with all triples in `train` and
// shared_entities already computed.
FederationSpec partition_by_relation(const TripleStore& store, int num_clients,
                                     std::uint64_t seed);

// Seeded shuffle then 0.8/0.1/0.1 split: first floor(0.8 n) -> train, next
// floor(0.1 n) -> valid, remainder -> test. Requires >= 10 triples.
void split_shard(ClientShard& shard, std::uint64_t seed,
                 double train_ratio = 0.8, double valid_ratio = 0.1);

// Recomputes every shard's shared_entities from the existence table.
void compute_shared_entities(FederationSpec& spec);

// Persistence: one directory per client with train/valid/test.tsv plus a
// root mapping.tsv of global_id<TAB>entity name.
void save_federation(const FederationSpec& spec,
                     const std::filesystem::path& dir);
FederationSpec load_federation(const std::filesystem::path& dir);

// Content hash over (client, split, triple names); stable across
// save/load round trips. Used to guard cross-run comparisons.
std::uint64_t federation_fingerprint(const FederationSpec& spec);

// Packed key for filtered-ranking lookups. Indices must fit in 21 bits each.
inline std::uint64_t triple_key(std::int32_t h, std::int32_t r,
                                std::int32_t t) {
  return (static_cast<std::uint64_t>(h) << 42) |
         (static_cast<std::uint64_t>(r) << 21) | static_cast<std::uint64_t>(t);
}

using TripleSet = std::unordered_set<std::uint64_t>;

TripleSet make_triple_set(const ClientShard& shard);

}  // namespace fedkge
