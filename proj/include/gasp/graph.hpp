#pragma once

#include "gasp/kb.hpp"
#include "gasp/matrix.hpp"
#include "gasp/retrieval.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gasp {

/// Per-modality fusion coefficients. Defaults are the published setting with
/// the duplicated I2I coefficient read as T2T.
struct ModalityWeights {
  double i2i = 0.3;
  double t2t = 0.4;
  double ti2ti = 0.3;

  double operator[](RetrievalMode mode) const;
  /// Throws std::invalid_argument unless every weight is >= 0 and they sum
  /// to 1 within 1e-9.
  void validate() const;
};

/// Directed kNN graph over the candidate set in one embedding space.
/// Edge weights are cosine similarities clipped below at 0.
struct ModalityGraph {
  RetrievalMode mode = RetrievalMode::ti2ti;
  std::vector<std::string> nodes;
  std::vector<std::vector<double>> vectors;        // unit vector per node in this mode's space
  std::vector<std::vector<std::size_t>> neighbors;  // out-neighbors, best first
  Matrix adjacency;                                 // nodes x nodes
};

/// Candidate nodes followed by the query node in the last position.
struct FusedGraph {
  std::vector<std::string> nodes;
  Matrix adjacency;
  ModalityWeights lambda;

  std::size_t query_index() const noexcept { return nodes.size() - 1; }
  std::size_t size() const noexcept { return nodes.size(); }
};

/// Row-stochastic random-walk operator.
struct PropagationOperator {
  Matrix P;
  std::size_t size() const noexcept { return P.rows(); }
};

/// Per-mode query vectors indexed by RetrievalMode.
using ModeVectors = std::array<std::vector<double>, 3>;

ModeVectors mode_vectors(const EmbeddingRecord& rec);

/// Builds the kNN graph from explicit node vectors. Neighbors are ranked by
/// similarity descending, ties by node id ascending. Throws
/// std::invalid_argument for fewer than 2 nodes, k_e == 0, or ragged input.
ModalityGraph build_modality_graph(std::vector<std::string> ids, std::vector<std::vector<double>> vectors,
                                   RetrievalMode mode, std::size_t k_e);

ModalityGraph build_modality_graph(const CandidateSet& candidates, const KnowledgeBase& kb, RetrievalMode mode,
                                   std::size_t k_e);

/// Sums the modality graphs weighted by `lambda` and appends the query node,
/// linked in both directions to its top-k_e candidates in each space with
/// weight lambda_M * max(sim, 0). Throws std::invalid_argument when the graphs
/// do not cover each mode once over an identical node ordering.
FusedGraph fuse(std::span<const ModalityGraph> graphs, const ModeVectors& query, const ModalityWeights& lambda,
                std::size_t k_e, std::string query_id = "query");

/// Divides each row by its sum; an all-zero row becomes a self-loop.
PropagationOperator normalize(const FusedGraph& graph);

/// Retrieval candidates -> three modality graphs -> fused graph.
FusedGraph build_fused_graph(const KnowledgeBase& kb, const CandidateSet& candidates, const Query& query,
                             const ModalityWeights& lambda, std::size_t k_e);

}  // namespace gasp
