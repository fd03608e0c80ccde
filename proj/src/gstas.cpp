#include "gasp/gstas.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gasp {

void GstasConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in (0, 1]");
  if (steps == 0) throw std::invalid_argument("steps must be >= 1");
  if (!(epsilon_clamp > 0.0 && epsilon_clamp < 1.0)) throw std::invalid_argument("epsilon_clamp must be in (0, 1)");
}

PropagationState initial_state(std::size_t nodes, std::size_t query_index) {
  if (query_index >= nodes) throw std::invalid_argument("initial_state: query index out of range");
  PropagationState p(nodes, 0.0);
  p[query_index] = 1.0;
  return p;
}

PropagationState propagate_step(const PropagationOperator& op, std::span<const double> p) {
  const std::size_t n = op.size();
  if (p.size() != n) throw std::invalid_argument("propagate_step: state/operator size mismatch");
  PropagationState next(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] == 0.0) continue;
    const auto row = op.P.row(i);
    for (std::size_t j = 0; j < n; ++j) next[j] += p[i] * row[j];
  }
  return next;
}

std::vector<double> aggregate(std::span<const double> p, std::span<const std::vector<double>> embeddings) {
  if (p.size() != embeddings.size()) throw std::invalid_argument("aggregate: one embedding per node required");
  if (embeddings.empty()) return {};
  std::vector<double> out(embeddings.front().size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (embeddings[i].size() != out.size()) throw std::invalid_argument("aggregate: ragged embeddings");
    if (p[i] == 0.0) continue;
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += p[i] * embeddings[i][k];
  }
  return out;
}

double query_alignment(std::span<const double> aggregated, std::span<const double> query) {
  if (aggregated.size() != query.size()) throw std::invalid_argument("query_alignment: length mismatch");
  const double norm = l2_norm(aggregated);
  const double qnorm = l2_norm(query);
  if (!(norm > 0.0) || !(qnorm > 0.0)) return 0.0;
  double dot = 0.0;
  for (std::size_t k = 0; k < query.size(); ++k) dot += aggregated[k] * query[k];
  return std::clamp(dot / (norm * qnorm), -1.0, 1.0);
}

double gate(double e, double alpha, double epsilon_clamp) {
  const double x = std::clamp(alpha * e, -1.0 + epsilon_clamp, 1.0 - epsilon_clamp);
  // x / (1 - x) == (1 - x)^-1 - 1 without the cancellation near x = 0.
  return x / (1.0 - x);
}

ScoredExemplars score(const PropagationOperator& op, std::span<const std::string> nodes,
                      std::span<const std::vector<double>> embeddings, const GstasConfig& cfg) {
  cfg.validate();
  const std::size_t n = op.size();
  if (n < 2) throw std::invalid_argument("score: graph needs a query and at least one candidate");
  if (nodes.size() != n || embeddings.size() != n) throw std::invalid_argument("score: node count mismatch");

  const std::size_t query = n - 1;
  const auto& query_vec = embeddings[query];
  std::vector<double> totals(n, 0.0);
  ScoredExemplars out;
  bool mass_reached_candidates = false;

  PropagationState p = initial_state(n, query);
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    p = propagate_step(op, p);
    const double e = query_alignment(aggregate(p, embeddings), query_vec);
    const double w = gate(e, cfg.alpha, cfg.epsilon_clamp);
    out.steps.push_back({t, e, w});
    for (std::size_t i = 0; i < query; ++i) {
      if (p[i] != 0.0) mass_reached_candidates = true;
      totals[i] += w * p[i];
    }
  }

  out.entries.reserve(query);
  for (std::size_t i = 0; i < query; ++i) out.entries.push_back({nodes[i], i, totals[i]});
  out.fallback_to_retrieval_order = !mass_reached_candidates;
  if (!out.fallback_to_retrieval_order) {
    std::stable_sort(out.entries.begin(), out.entries.end(), [](const ScoredEntry& a, const ScoredEntry& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.sample_id < b.sample_id;
    });
  }
  return out;
}

std::vector<std::string> select_topk2(const ScoredExemplars& scored, std::size_t k2) {
  const auto keep = std::min(k2, scored.entries.size());
  std::vector<std::string> ids;
  ids.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) ids.push_back(scored.entries[i].sample_id);
  return ids;
}

std::vector<std::vector<double>> node_embeddings(const KnowledgeBase& kb, const CandidateSet& candidates,
                                                 const Query& query, RetrievalMode space) {
  std::vector<std::vector<double>> out;
  out.reserve(candidates.entries.size() + 1);
  for (const auto& c : candidates.entries) out.push_back(mode_vector(kb.embedding(c.ordinal), space));
  out.push_back(mode_vector(query.embedding, space));
  return out;
}

}  // namespace gasp
