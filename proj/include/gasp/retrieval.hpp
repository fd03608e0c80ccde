#pragma once

#include "gasp/kb.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gasp {

/// Embedding space used for a similarity: visual (I2I), textual (T2T) or the
/// concatenated joint space (TI2TI).
enum class RetrievalMode { i2i, t2t, ti2ti };

inline constexpr std::array<RetrievalMode, 3> kRetrievalModes{RetrievalMode::i2i, RetrievalMode::t2t,
                                                               RetrievalMode::ti2ti};

std::string_view to_string(RetrievalMode mode);
std::optional<RetrievalMode> parse_retrieval_mode(std::string_view text);

/// A query pair with its embeddings. The sample's label is gold data for
/// evaluation only and is never read during selection.
struct Query {
  Sample sample;
  EmbeddingRecord embedding;
};

struct Candidate {
  std::string sample_id;
  std::size_t ordinal = 0;  // position in the knowledge base
  double similarity = 0.0;
};

/// Coarse candidate set, sorted by similarity descending then id ascending.
struct CandidateSet {
  RetrievalMode mode = RetrievalMode::ti2ti;
  std::vector<Candidate> entries;
};

/// Unit vector for `rec` in the space of `mode`.
std::vector<double> mode_vector(const EmbeddingRecord& rec, RetrievalMode mode);

/// Cosine similarity of two unit vectors (their dot product), clamped to
/// [-1, 1]. Throws std::invalid_argument on length mismatch.
double similarity(std::span<const double> a, std::span<const double> b);

/// Exact top-k1 search. A KB entry whose id equals the query id is skipped.
/// Throws KbError for an empty KB or dimension mismatch, std::invalid_argument
/// for k1 == 0.
CandidateSet retrieve(const KnowledgeBase& kb, const Query& query, RetrievalMode mode, std::size_t k1);

}  // namespace gasp
