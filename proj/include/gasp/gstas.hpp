#pragma once

// Graph-structured Taylor-gated scoring: a random walk started at the query
// node, with each step's visit distribution weighted by how well the
// probability-weighted mean embedding aligns with the query.

#include "gasp/graph.hpp"
#include "gasp/retrieval.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gasp {

struct GstasConfig {
  double alpha = 0.4;            // propagation range, in (0, 1]
  std::size_t steps = 3;         // T
  std::size_t k2 = 3;            // exemplars kept
  double epsilon_clamp = 1e-6;   // keeps alpha*e away from the pole at 1
  RetrievalMode space = RetrievalMode::ti2ti;  // embedding space for aggregation

  /// Throws std::invalid_argument when out of range. k2 == 0 is allowed and
  /// means zero-shot.
  void validate() const;
};

/// Probability distribution over fused-graph nodes.
using PropagationState = std::vector<double>;

/// One-hot at `query_index`.
PropagationState initial_state(std::size_t nodes, std::size_t query_index);

/// p' = p^T P: mass moves along the out-edges of the row-stochastic walk.
/// Throws std::invalid_argument on a size mismatch.
PropagationState propagate_step(const PropagationOperator& op, std::span<const double> p);

/// Probability-weighted sum of node embeddings.
std::vector<double> aggregate(std::span<const double> p, std::span<const std::vector<double>> embeddings);

/// Cosine between the aggregated vector and the query vector; 0 when the
/// aggregate has zero length.
double query_alignment(std::span<const double> aggregated, std::span<const double> query);

/// (1 - x)^-1 - 1 with x = clamp(alpha * e, -1 + eps, 1 - eps), i.e. the
/// geometric series x + x^2 + ...
double gate(double e, double alpha, double epsilon_clamp = 1e-6);

struct StepTrace {
  std::size_t step = 0;
  double alignment = 0.0;  // e^(t)
  double weight = 0.0;     // w^(t)
};

struct ScoredEntry {
  std::string sample_id;
  std::size_t node = 0;  // index in the fused graph
  double score = 0.0;
};

/// Candidates (query excluded) ranked by score descending, ties by id.
struct ScoredExemplars {
  std::vector<ScoredEntry> entries;
  std::vector<StepTrace> steps;
  /// True when no propagation mass ever left the query node; entries then
  /// keep the candidate-set order.
  bool fallback_to_retrieval_order = false;
};

/// Runs `cfg.steps` propagate/aggregate/gate/accumulate rounds. `nodes` and
/// `embeddings` follow the fused-graph ordering with the query last; the
/// query embedding is embeddings.back().
ScoredExemplars score(const PropagationOperator& op, std::span<const std::string> nodes,
                      std::span<const std::vector<double>> embeddings, const GstasConfig& cfg);

/// First min(k2, |scored|) ids.
std::vector<std::string> select_topk2(const ScoredExemplars& scored, std::size_t k2);

/// Node embeddings for `graph` in `space`: the candidate vectors from the KB
/// followed by the query's.
std::vector<std::vector<double>> node_embeddings(const KnowledgeBase& kb, const CandidateSet& candidates,
                                                 const Query& query, RetrievalMode space);

}  // namespace gasp
