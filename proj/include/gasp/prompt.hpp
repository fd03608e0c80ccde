#pragma once

#include "gasp/kb.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gasp {

class PromptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Few-shot prompt layout. `demonstration` and `query` may use the
/// placeholders {image}, {text} and {label}; {label} is rejected in `query`.
struct PromptTemplate {
  std::string id = "default";
  std::string system;
  std::string demonstration;
  std::string query;

  static PromptTemplate builtin();
  /// Parses the sectioned text format; the id is the file stem.
  static PromptTemplate load(const std::filesystem::path& path);
  static PromptTemplate parse(std::string_view text, std::string id);
};

/// Word used for a label in prompts and expected back from the model.
std::string_view label_word(Label label);

struct ContentPart {
  enum class Kind { text, image };
  Kind kind = Kind::text;
  std::string value;  // text, or the image_ref for images

  bool operator==(const ContentPart&) const = default;
};

struct PromptBlock {
  std::string sample_id;
  std::string image_ref;
  std::string text;
  std::string label_word;  // empty for the query
  std::vector<ContentPart> parts;
};

struct PromptBundle {
  std::string template_id;
  std::string system_text;
  std::vector<PromptBlock> demonstrations;  // best-scored first
  PromptBlock query;
  std::vector<std::string> answer_format{"real", "fake"};

  /// Canonical text form including template, demonstration and query ids.
  std::string render() const;
};

/// Throws PromptError when a sample has no image_ref.
PromptBundle build_prompt(std::span<const Sample> exemplars, const Sample& query,
                          const PromptTemplate& tmpl = PromptTemplate::builtin());

}  // namespace gasp
