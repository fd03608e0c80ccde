#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gasp {

enum class Label { authentic, manipulated };

enum class ManipulationType { face_swap, face_attribute, text_swap, text_attribute, none };

std::string_view to_string(Label label);
std::string_view to_string(ManipulationType type);
std::optional<Label> parse_label(std::string_view text);
std::optional<ManipulationType> parse_manipulation_type(std::string_view text);

/// The four manipulation types in reporting order (excludes `none`).
inline constexpr ManipulationType kManipulationTypes[] = {
    ManipulationType::face_swap, ManipulationType::face_attribute,
    ManipulationType::text_swap, ManipulationType::text_attribute};

struct Sample {
  std::string id;
  std::string image_ref;
  std::string text;
  Label label = Label::authentic;
  ManipulationType manipulation_type = ManipulationType::none;
  /// Optional evaluation library this sample belongs to (query files only).
  /// Lets authentic queries be reported under the forgery type whose
  /// balanced library they were drawn for.
  std::string group;
};

struct EmbeddingRecord {
  std::string sample_id;
  std::vector<double> visual;
  std::vector<double> textual;
};

/// Thrown for any load or validation failure. `line()` is 1-based, 0 when the
/// problem is not tied to a single line.
class KbError : public std::runtime_error {
 public:
  KbError(const std::string& what, std::size_t line = 0);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Immutable set of labeled samples with unit-norm visual and textual
/// embeddings. Order is file order.
class KnowledgeBase {
 public:
  KnowledgeBase() = default;
  /// Validates and normalizes. Throws KbError.
  KnowledgeBase(std::vector<Sample> samples, std::vector<EmbeddingRecord> embeddings);

  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t visual_dim() const noexcept { return visual_dim_; }
  std::size_t textual_dim() const noexcept { return textual_dim_; }

  const std::vector<Sample>& samples() const noexcept { return samples_; }
  const std::vector<EmbeddingRecord>& embeddings() const noexcept { return embeddings_; }
  const Sample& sample(std::size_t ordinal) const { return samples_.at(ordinal); }
  const EmbeddingRecord& embedding(std::size_t ordinal) const { return embeddings_.at(ordinal); }

  std::optional<std::size_t> find(std::string_view id) const;
  /// Throws std::out_of_range for unknown ids.
  std::size_t ordinal(std::string_view id) const;

 private:
  std::vector<Sample> samples_;
  std::vector<EmbeddingRecord> embeddings_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t visual_dim_ = 0;
  std::size_t textual_dim_ = 0;
};

KnowledgeBase load_kb(const std::filesystem::path& path);
KnowledgeBase load_kb(std::istream& in);

/// Writes the canonical JSON Lines form: fixed key order, vector components
/// rounded to f32 and printed in shortest round-trip decimal.
void save_kb(const KnowledgeBase& kb, std::ostream& out);
void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path);

/// One canonical JSONL line (no trailing newline).
std::string to_jsonl(const Sample& sample, const EmbeddingRecord& rec);

/// Returns `v / ||v||`. Throws KbError on a zero or non-finite norm.
std::vector<double> normalized(std::span<const double> v);
double l2_norm(std::span<const double> v);

/// Visual then textual, renormalized to unit length.
std::vector<double> joint_embedding(const EmbeddingRecord& rec);

}  // namespace gasp
