#pragma once

#include "gasp/kb.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>

namespace gasp {

/// Two label-aligned Gaussian clusters per modality. Cluster centers sit at
/// +/- cluster_sep/2 along a random unit direction; per-component noise has
/// variance 1/d so the noise vector has norm close to 1. All vectors are
/// unit-normalized afterwards. Samples alternate authentic/manipulated and
/// manipulated samples cycle through the four manipulation types; queries
/// also carry a `group` so each type library is balanced.
struct SyntheticSpec {
  std::size_t n_samples = 100;
  std::size_t n_queries = 200;
  std::size_t visual_dim = 32;
  std::size_t textual_dim = 32;
  double cluster_sep = 3.0;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  KnowledgeBase kb;
  KnowledgeBase queries;
};

/// Throws std::invalid_argument for negative separation or zero sizes.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Writes kb.jsonl and queries.jsonl into `dir` (created if missing).
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace gasp
