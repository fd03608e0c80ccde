#include "gasp/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

namespace gasp {

std::string_view to_string(RetrievalMode mode) {
  switch (mode) {
    case RetrievalMode::i2i: return "i2i";
    case RetrievalMode::t2t: return "t2t";
    case RetrievalMode::ti2ti: return "ti2ti";
  }
  return "unknown";
}

std::optional<RetrievalMode> parse_retrieval_mode(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto mode : kRetrievalModes)
    if (to_string(mode) == lower) return mode;
  return std::nullopt;
}

std::vector<double> mode_vector(const EmbeddingRecord& rec, RetrievalMode mode) {
  switch (mode) {
    case RetrievalMode::i2i: return rec.visual;
    case RetrievalMode::t2t: return rec.textual;
    case RetrievalMode::ti2ti: return joint_embedding(rec);
  }
  return {};
}

double similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("similarity: length mismatch " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return std::clamp(dot, -1.0, 1.0);
}

CandidateSet retrieve(const KnowledgeBase& kb, const Query& query, RetrievalMode mode, std::size_t k1) {
  if (kb.empty()) throw KbError("retrieve: empty knowledge base");
  if (k1 == 0) throw std::invalid_argument("retrieve: k1 must be >= 1");
  if (query.embedding.visual.size() != kb.visual_dim() || query.embedding.textual.size() != kb.textual_dim()) {
    throw KbError("retrieve: query embedding dimensions do not match the knowledge base");
  }

  const auto q = mode_vector(query.embedding, mode);
  CandidateSet out;
  out.mode = mode;
  out.entries.reserve(kb.size());
  for (std::size_t i = 0; i < kb.size(); ++i) {
    if (kb.sample(i).id == query.sample.id) continue;
    out.entries.push_back({kb.sample(i).id, i, similarity(q, mode_vector(kb.embedding(i), mode))});
  }

  const auto keep = std::min(k1, out.entries.size());
  auto by_rank = [](const Candidate& a, const Candidate& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.sample_id < b.sample_id;
  };
  std::partial_sort(out.entries.begin(), out.entries.begin() + static_cast<std::ptrdiff_t>(keep),
                    out.entries.end(), by_rank);
  out.entries.resize(keep);
  return out;
}

}  // namespace gasp
