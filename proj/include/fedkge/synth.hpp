#pragma once
// Synthetic knowledge graph generator. Entities get latent positions around
// cluster centers; each relation is (approximately) the translation between
// a source and a target cluster; tails are the nearest entity to
// head + relation in latent space, with a noise fraction drawn uniformly.
// The result is a learnable, clustered KG that needs no external data.

#include <cstdint>
#include <filesystem>

#include "fedkge/kg.hpp"

namespace fedkge {

// Triples use distinct (head, relation) pairs, so the pair capacity
// relations * (entities / clusters) must cover `triples`.
struct SynthSpec {
  int entities = 1500;
  int relations = 32;
  int triples = 7000;
  int clusters = 6;
  double noise = 0.05;  // probability of a uniform-random tail
  std::uint64_t seed = 7;
};

TripleStore generate_synthetic_kg(const SynthSpec& spec);

void write_triples_tsv(const TripleStore& store,
                       const std::filesystem::path& path);

}  // namespace fedkge
