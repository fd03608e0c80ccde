#include "gasp/prompt.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace gasp {

namespace {

constexpr std::string_view kBuiltinTemplate =
    "[system]\n"
    "You are a multimodal forgery detector. Decide whether the image-text pair is real or fake. "
    "Answer with exactly one word: real or fake.\n"
    "[demonstration]\n"
    "{image}\n"
    "Caption: {text}\n"
    "Answer: {label}\n"
    "[query]\n"
    "{image}\n"
    "Caption: {text}\n"
    "Answer:\n";

std::string trim_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

// Expands one block template. Placeholders are substituted in a single pass
// over the template so caption text is never re-scanned.
std::vector<ContentPart> expand(std::string_view tmpl, const Sample& sample, std::string_view label) {
  std::vector<ContentPart> parts;
  std::string text;
  auto flush = [&] {
    if (!text.empty()) parts.push_back({ContentPart::Kind::text, std::move(text)});
    text.clear();
  };
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl.compare(i, 7, "{image}") == 0) {
      flush();
      parts.push_back({ContentPart::Kind::image, sample.image_ref});
      i += 7;
      // The image part stands on its own; drop the line break that follows it.
      if (i < tmpl.size() && tmpl[i] == '\n') ++i;
    } else if (tmpl.compare(i, 6, "{text}") == 0) {
      text += sample.text;
      i += 6;
    } else if (tmpl.compare(i, 7, "{label}") == 0) {
      text += label;
      i += 7;
    } else {
      text += tmpl[i++];
    }
  }
  flush();
  return parts;
}

PromptBlock make_block(std::string_view tmpl, const Sample& sample, std::string_view label) {
  if (sample.image_ref.empty()) throw PromptError("sample \"" + sample.id + "\" has no image_ref");
  PromptBlock block;
  block.sample_id = sample.id;
  block.image_ref = sample.image_ref;
  block.text = sample.text;
  block.label_word = std::string(label);
  block.parts = expand(tmpl, sample, label);
  return block;
}

nlohmann::ordered_json block_json(const PromptBlock& b) {
  nlohmann::ordered_json parts = nlohmann::ordered_json::array();
  for (const auto& p : b.parts) {
    parts.push_back({{p.kind == ContentPart::Kind::image ? "image" : "text", p.value}});
  }
  nlohmann::ordered_json j;
  j["id"] = b.sample_id;
  j["image_ref"] = b.image_ref;
  if (!b.label_word.empty()) j["label"] = b.label_word;
  j["parts"] = std::move(parts);
  return j;
}

}  // namespace

PromptTemplate PromptTemplate::builtin() { return parse(kBuiltinTemplate, "default"); }

PromptTemplate PromptTemplate::parse(std::string_view text, std::string id) {
  PromptTemplate t;
  t.id = std::move(id);
  std::string* section = nullptr;
  bool seen_system = false, seen_demo = false, seen_query = false;

  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line == "[system]") {
      section = &t.system;
      seen_system = true;
    } else if (line == "[demonstration]") {
      section = &t.demonstration;
      seen_demo = true;
    } else if (line == "[query]") {
      section = &t.query;
      seen_query = true;
    } else if (section == nullptr) {
      if (!line.empty() && line.front() != '#') throw PromptError("template text outside a section: " + line);
    } else {
      *section += line;
      *section += '\n';
    }
  }
  if (!seen_system || !seen_demo || !seen_query) {
    throw PromptError("template \"" + t.id + "\" needs [system], [demonstration] and [query] sections");
  }
  t.system = trim_trailing_newlines(std::move(t.system));
  t.demonstration = trim_trailing_newlines(std::move(t.demonstration));
  t.query = trim_trailing_newlines(std::move(t.query));
  if (t.query.find("{label}") != std::string::npos) throw PromptError("query section must not use {label}");
  return t;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PromptError("cannot open template " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.stem().string());
}

std::string_view label_word(Label label) { return label == Label::manipulated ? "fake" : "real"; }

PromptBundle build_prompt(std::span<const Sample> exemplars, const Sample& query, const PromptTemplate& tmpl) {
  PromptBundle bundle;
  bundle.template_id = tmpl.id;
  bundle.system_text = tmpl.system;
  bundle.demonstrations.reserve(exemplars.size());
  for (const auto& ex : exemplars) bundle.demonstrations.push_back(make_block(tmpl.demonstration, ex, label_word(ex.label)));
  bundle.query = make_block(tmpl.query, query, "");
  return bundle;
}

std::string PromptBundle::render() const {
  nlohmann::ordered_json j;
  j["template"] = template_id;
  j["system"] = system_text;
  auto demos = nlohmann::ordered_json::array();
  for (const auto& d : demonstrations) demos.push_back(block_json(d));
  j["demonstrations"] = std::move(demos);
  j["query"] = block_json(query);
  j["answer_format"] = answer_format;
  return j.dump(2);
}

}  // namespace gasp
