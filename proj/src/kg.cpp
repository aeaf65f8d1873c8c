#include "fedkge/kg.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedkge/rng.hpp"

namespace fedkge {

std::int32_t Vocab::get_or_add(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  auto idx = static_cast<std::int32_t>(names_.size());
  names_.push_back(name);
  index_.emplace(name, idx);
  return idx;
}

std::optional<std::int32_t> Vocab::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

// Splits a line on tabs. Returns false unless exactly three fields.
bool split_tsv_line(const std::string& line, std::array<std::string, 3>& out) {
  std::size_t start = 0;
  int field = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      if (field >= 3) return false;
      out[field++] = line.substr(start, i - start);
      start = i + 1;
    }
  }
  return field == 3;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

TripleStore load_triples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open triple file: " + path.string());
  }
  TripleStore store;
  std::string line;
  std::size_t line_no = 0;
  std::array<std::string, 3> fields;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    if (!split_tsv_line(line, fields)) {
      throw std::runtime_error("malformed triple at line " +
                               std::to_string(line_no) + " in " +
                               path.string());
    }
    Triple t;
    t.head = store.entities.get_or_add(fields[0]);
    t.relation = store.relations.get_or_add(fields[1]);
    t.tail = store.entities.get_or_add(fields[2]);
    store.triples.push_back(t);
  }
  if (store.triples.empty()) {
    throw std::runtime_error("no triples in " + path.string());
  }
  return store;
}

FederationSpec partition_by_relation(const TripleStore& store, int num_clients,
                                     std::uint64_t seed) {
  const auto num_relations = static_cast<std::int32_t>(store.relations.size());
  if (num_clients < 2) {
    throw std::invalid_argument("partition needs at least 2 clients");
  }
  if (num_relations < num_clients) {
    throw std::invalid_argument("fewer relations than clients");
  }

  std::vector<std::int32_t> order(num_relations);
  for (std::int32_t i = 0; i < num_relations; ++i) order[i] = i;
  Rng rng(substream(seed, "partition"));
  rng.shuffle(order);

  std::vector<int> owner(num_relations);
  for (std::int32_t i = 0; i < num_relations; ++i) {
    owner[order[i]] = static_cast<int>(i % num_clients);
  }

  FederationSpec spec;
  spec.entities = store.entities;
  spec.relations = store.relations;
  spec.clients.resize(num_clients);
  std::vector<std::unordered_map<std::int32_t, std::int32_t>> ent_map(
      num_clients);
  std::vector<std::unordered_map<std::int32_t, std::int32_t>> rel_map(
      num_clients);

  for (int c = 0; c < num_clients; ++c) spec.clients[c].client_id = c;

  auto local_entity = [&](int c, std::int32_t global) {
    auto& shard = spec.clients[c];
    auto [it, inserted] = ent_map[c].try_emplace(
        global, static_cast<std::int32_t>(shard.local_to_global.size()));
    if (inserted) shard.local_to_global.push_back(global);
    return it->second;
  };
  auto local_relation = [&](int c, std::int32_t global) {
    auto& shard = spec.clients[c];
    auto [it, inserted] = rel_map[c].try_emplace(
        global, static_cast<std::int32_t>(shard.rel_local_to_global.size()));
    if (inserted) shard.rel_local_to_global.push_back(global);
    return it->second;
  };

  for (const Triple& t : store.triples) {
    const int c = owner[t.relation];
    Triple local;
    local.head = local_entity(c, t.head);
    local.relation = local_relation(c, t.relation);
    local.tail = local_entity(c, t.tail);
    spec.clients[c].train.push_back(local);
  }

  spec.existence.assign(store.entities.size(), {});
  for (int c = 0; c < num_clients; ++c) {
    for (std::int32_t g : spec.clients[c].local_to_global) {
      spec.existence[g].push_back(c);
    }
  }
  for (auto& owners : spec.existence) std::sort(owners.begin(), owners.end());

  compute_shared_entities(spec);
  return spec;
}

void split_shard(ClientShard& shard, std::uint64_t seed, double train_ratio,
                 double valid_ratio) {
  std::vector<Triple> all;
  all.reserve(shard.num_triples());
  all.insert(all.end(), shard.train.begin(), shard.train.end());
  all.insert(all.end(), shard.valid.begin(), shard.valid.end());
  all.insert(all.end(), shard.test.begin(), shard.test.end());
  const std::size_t n = all.size();
  if (n < 10) {
    throw std::runtime_error("client " + std::to_string(shard.client_id) +
                             " has only " + std::to_string(n) +
                             " triples; split needs at least 10");
  }

  Rng rng(substream(seed, "split", static_cast<std::uint64_t>(shard.client_id)));
  rng.shuffle(all);

  const auto n_train = static_cast<std::size_t>(
      std::floor(train_ratio * static_cast<double>(n)));
  const auto n_valid = static_cast<std::size_t>(
      std::floor(valid_ratio * static_cast<double>(n)));

  shard.train.assign(all.begin(), all.begin() + n_train);
  shard.valid.assign(all.begin() + n_train, all.begin() + n_train + n_valid);
  shard.test.assign(all.begin() + n_train + n_valid, all.end());
}

void compute_shared_entities(FederationSpec& spec) {
  for (auto& shard : spec.clients) {
    shard.shared_entities.clear();
    for (std::int32_t local = 0;
         local < static_cast<std::int32_t>(shard.local_to_global.size());
         ++local) {
      const auto g = shard.local_to_global[local];
      if (spec.existence[g].size() >= 2) shard.shared_entities.push_back(local);
    }
    // local ids are assigned in appearance order, so this is already sorted;
    // keep the sort as a guarantee for callers that binary-search it.
    std::sort(shard.shared_entities.begin(), shard.shared_entities.end());
  }
}

namespace {

void write_split_tsv(const std::filesystem::path& path,
                     const std::vector<Triple>& triples,
                     const ClientShard& shard, const FederationSpec& spec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const Triple& t : triples) {
    out << spec.entities.name(shard.local_to_global[t.head]) << '\t'
        << spec.relations.name(shard.rel_local_to_global[t.relation]) << '\t'
        << spec.entities.name(shard.local_to_global[t.tail]) << '\n';
  }
}

void append_split(ClientShard& shard, std::vector<Triple>& split,
                  const std::filesystem::path& path, Vocab& global_entities,
                  Vocab& global_relations,
                  std::unordered_map<std::int32_t, std::int32_t>& ent_map,
                  std::unordered_map<std::int32_t, std::int32_t>& rel_map) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::array<std::string, 3> fields;
  auto local_entity = [&](std::int32_t g) {
    auto [it, inserted] = ent_map.try_emplace(
        g, static_cast<std::int32_t>(shard.local_to_global.size()));
    if (inserted) shard.local_to_global.push_back(g);
    return it->second;
  };
  auto local_relation = [&](std::int32_t g) {
    auto [it, inserted] = rel_map.try_emplace(
        g, static_cast<std::int32_t>(shard.rel_local_to_global.size()));
    if (inserted) shard.rel_local_to_global.push_back(g);
    return it->second;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!split_tsv_line(line, fields)) {
      throw std::runtime_error("malformed triple at line " +
                               std::to_string(line_no) + " in " +
                               path.string());
    }
    Triple t;
    t.head = local_entity(global_entities.get_or_add(fields[0]));
    t.relation = local_relation(global_relations.get_or_add(fields[1]));
    t.tail = local_entity(global_entities.get_or_add(fields[2]));
    split.push_back(t);
  }
}

}  // namespace

void save_federation(const FederationSpec& spec,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "mapping.tsv");
    if (!out) throw std::runtime_error("cannot write mapping.tsv");
    for (std::size_t g = 0; g < spec.entities.size(); ++g) {
      out << g << '\t' << spec.entities.name(static_cast<std::int32_t>(g))
          << '\n';
    }
  }
  for (const auto& shard : spec.clients) {
    const auto cdir = dir / ("client_" + std::to_string(shard.client_id));
    std::filesystem::create_directories(cdir);
    write_split_tsv(cdir / "train.tsv", shard.train, shard, spec);
    write_split_tsv(cdir / "valid.tsv", shard.valid, shard, spec);
    write_split_tsv(cdir / "test.tsv", shard.test, shard, spec);
  }
}

FederationSpec load_federation(const std::filesystem::path& dir) {
  FederationSpec spec;
  {
    std::ifstream in(dir / "mapping.tsv");
    if (!in) {
      throw std::runtime_error("no mapping.tsv in " + dir.string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw std::runtime_error("malformed mapping.tsv line " +
                                 std::to_string(line_no));
      }
      const auto g = spec.entities.get_or_add(line.substr(tab + 1));
      if (g != std::stoi(line.substr(0, tab))) {
        throw std::runtime_error("mapping.tsv ids not dense at line " +
                                 std::to_string(line_no));
      }
    }
  }

  for (int c = 0;; ++c) {
    const auto cdir = dir / ("client_" + std::to_string(c));
    if (!std::filesystem::is_directory(cdir)) break;
    ClientShard shard;
    shard.client_id = c;
    std::unordered_map<std::int32_t, std::int32_t> ent_map, rel_map;
    append_split(shard, shard.train, cdir / "train.tsv", spec.entities,
                 spec.relations, ent_map, rel_map);
    append_split(shard, shard.valid, cdir / "valid.tsv", spec.entities,
                 spec.relations, ent_map, rel_map);
    append_split(shard, shard.test, cdir / "test.tsv", spec.entities,
                 spec.relations, ent_map, rel_map);
    spec.clients.push_back(std::move(shard));
  }
  if (spec.clients.size() < 2) {
    throw std::runtime_error("federation directory " + dir.string() +
                             " has fewer than 2 client_* subdirectories");
  }

  spec.existence.assign(spec.entities.size(), {});
  for (const auto& shard : spec.clients) {
    for (std::int32_t g : shard.local_to_global) {
      spec.existence[g].push_back(shard.client_id);
    }
  }
  for (auto& owners : spec.existence) std::sort(owners.begin(), owners.end());
  compute_shared_entities(spec);
  return spec;
}

std::uint64_t federation_fingerprint(const FederationSpec& spec) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  };
  for (const auto& shard : spec.clients) {
    feed("client " + std::to_string(shard.client_id));
    const std::vector<const std::vector<Triple>*> splits{
        &shard.train, &shard.valid, &shard.test};
    for (const auto* split : splits) {
      for (const Triple& t : *split) {
        feed(spec.entities.name(shard.local_to_global[t.head]));
        feed(spec.relations.name(shard.rel_local_to_global[t.relation]));
        feed(spec.entities.name(shard.local_to_global[t.tail]));
      }
      feed("|");
    }
  }
  return h;
}

TripleSet make_triple_set(const ClientShard& shard) {
  TripleSet set;
  set.reserve(shard.num_triples() * 2);
  for (const auto* split : {&shard.train, &shard.valid, &shard.test}) {
    for (const Triple& t : *split) {
      set.insert(triple_key(t.head, t.relation, t.tail));
    }
  }
  return set;
}

}  // namespace fedkge
