#include "gasp/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gasp {

namespace {

std::size_t mode_slot(RetrievalMode mode) { return static_cast<std::size_t>(mode); }

// Indices of the k most similar entries of `sims` (excluding `skip`), best
// first, ties by id.
std::vector<std::size_t> top_neighbors(const std::vector<double>& sims, const std::vector<std::string>& ids,
                                       std::size_t k, std::size_t skip) {
  std::vector<std::size_t> order;
  order.reserve(sims.size());
  for (std::size_t j = 0; j < sims.size(); ++j)
    if (j != skip) order.push_back(j);
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (sims[a] != sims[b]) return sims[a] > sims[b];
                      return ids[a] < ids[b];
                    });
  order.resize(k);
  return order;
}

}  // namespace

double ModalityWeights::operator[](RetrievalMode mode) const {
  switch (mode) {
    case RetrievalMode::i2i: return i2i;
    case RetrievalMode::t2t: return t2t;
    case RetrievalMode::ti2ti: return ti2ti;
  }
  return 0.0;
}

void ModalityWeights::validate() const {
  if (i2i < 0.0 || t2t < 0.0 || ti2ti < 0.0) throw std::invalid_argument("lambda weights must be non-negative");
  if (std::abs(i2i + t2t + ti2ti - 1.0) > 1e-9) throw std::invalid_argument("lambda weights must sum to 1");
}

ModeVectors mode_vectors(const EmbeddingRecord& rec) {
  ModeVectors out;
  for (auto mode : kRetrievalModes) out[mode_slot(mode)] = mode_vector(rec, mode);
  return out;
}

ModalityGraph build_modality_graph(std::vector<std::string> ids, std::vector<std::vector<double>> vectors,
                                   RetrievalMode mode, std::size_t k_e) {
  const std::size_t n = ids.size();
  if (n < 2) throw std::invalid_argument("build_modality_graph: need at least 2 candidates");
  if (k_e == 0) throw std::invalid_argument("build_modality_graph: k_e must be >= 1");
  if (vectors.size() != n) throw std::invalid_argument("build_modality_graph: one vector per node required");

  ModalityGraph g;
  g.mode = mode;
  g.adjacency = Matrix(n, n);
  g.neighbors.resize(n);

  Matrix sims(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sims(i, j) = sims(j, i) = similarity(vectors[i], vectors[j]);

  std::vector<double> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(sims.row(i).begin(), sims.row(i).end(), row.begin());
    g.neighbors[i] = top_neighbors(row, ids, k_e, i);
    for (std::size_t j : g.neighbors[i]) g.adjacency(i, j) = std::max(sims(i, j), 0.0);
  }
  g.nodes = std::move(ids);
  g.vectors = std::move(vectors);
  return g;
}

ModalityGraph build_modality_graph(const CandidateSet& candidates, const KnowledgeBase& kb, RetrievalMode mode,
                                   std::size_t k_e) {
  std::vector<std::string> ids;
  std::vector<std::vector<double>> vectors;
  ids.reserve(candidates.entries.size());
  vectors.reserve(candidates.entries.size());
  for (const auto& c : candidates.entries) {
    ids.push_back(c.sample_id);
    vectors.push_back(mode_vector(kb.embedding(c.ordinal), mode));
  }
  return build_modality_graph(std::move(ids), std::move(vectors), mode, k_e);
}

FusedGraph fuse(std::span<const ModalityGraph> graphs, const ModeVectors& query, const ModalityWeights& lambda,
                std::size_t k_e, std::string query_id) {
  lambda.validate();
  if (k_e == 0) throw std::invalid_argument("fuse: k_e must be >= 1");
  if (graphs.size() != kRetrievalModes.size()) throw std::invalid_argument("fuse: expected one graph per mode");

  std::array<const ModalityGraph*, 3> by_mode{};
  for (const auto& g : graphs) {
    auto& slot = by_mode[mode_slot(g.mode)];
    if (slot != nullptr) throw std::invalid_argument("fuse: duplicate graph for mode " + std::string(to_string(g.mode)));
    slot = &g;
  }
  const auto& nodes = graphs.front().nodes;
  for (const auto& g : graphs) {
    if (g.nodes != nodes) throw std::invalid_argument("fuse: node-set mismatch between modality graphs");
  }

  const std::size_t n = nodes.size();
  FusedGraph fg;
  fg.lambda = lambda;
  fg.nodes = nodes;
  fg.nodes.push_back(std::move(query_id));
  fg.adjacency = Matrix(n + 1, n + 1);

  for (auto mode : kRetrievalModes) {
    const ModalityGraph& g = *by_mode[mode_slot(mode)];
    const double weight = lambda[mode];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) fg.adjacency(i, j) += weight * g.adjacency(i, j);

    // Query anchors: top-k_e candidates in this space, linked both ways.
    const auto& qv = query[mode_slot(mode)];
    std::vector<double> sims(n);
    for (std::size_t j = 0; j < n; ++j) sims[j] = similarity(qv, g.vectors[j]);
    for (std::size_t j : top_neighbors(sims, nodes, k_e, n)) {
      const double w = weight * std::max(sims[j], 0.0);
      fg.adjacency(n, j) += w;
      fg.adjacency(j, n) += w;
    }
  }
  return fg;
}

PropagationOperator normalize(const FusedGraph& graph) {
  const std::size_t n = graph.size();
  PropagationOperator op{Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = graph.adjacency.row(i);
    const double total =
        std::accumulate(row.begin(), row.end(), 0.0, [](double acc, double x) { return acc + std::max(x, 0.0); });
    if (!(total > 0.0)) {
      op.P(i, i) = 1.0;
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) op.P(i, j) = std::max(row[j], 0.0) / total;
  }
  return op;
}

FusedGraph build_fused_graph(const KnowledgeBase& kb, const CandidateSet& candidates, const Query& query,
                             const ModalityWeights& lambda, std::size_t k_e) {
  std::vector<ModalityGraph> graphs;
  graphs.reserve(kRetrievalModes.size());
  for (auto mode : kRetrievalModes) graphs.push_back(build_modality_graph(candidates, kb, mode, k_e));
  return fuse(graphs, mode_vectors(query.embedding), lambda, k_e, query.sample.id);
}

}  // namespace gasp
