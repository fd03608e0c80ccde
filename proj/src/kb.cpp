#include "gasp/kb.hpp"

#include <json.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace gasp {

namespace {

constexpr std::array<std::pair<Label, std::string_view>, 2> kLabelNames{{
    {Label::authentic, "authentic"},
    {Label::manipulated, "manipulated"},
}};

constexpr std::array<std::pair<ManipulationType, std::string_view>, 5> kTypeNames{{
    {ManipulationType::face_swap, "face_swap"},
    {ManipulationType::face_attribute, "face_attribute"},
    {ManipulationType::text_swap, "text_swap"},
    {ManipulationType::text_attribute, "text_attribute"},
    {ManipulationType::none, "none"},
}};

std::string with_line(const std::string& msg, std::size_t line) {
  if (line == 0) return msg;
  return "line " + std::to_string(line) + ": " + msg;
}

std::vector<double> read_vector(const nlohmann::json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array()) {
    throw KbError(std::string("missing or non-array field \"") + key + "\"", line);
  }
  std::vector<double> v;
  v.reserve(it->size());
  for (const auto& x : *it) {
    if (!x.is_number()) throw KbError(std::string("non-numeric component in \"") + key + "\"", line);
    v.push_back(x.get<double>());
  }
  if (v.empty()) throw KbError(std::string("empty vector \"") + key + "\"", line);
  return v;
}

std::string read_string(const nlohmann::json& j, const char* key, std::size_t line, bool required = true) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) throw KbError(std::string("missing field \"") + key + "\"", line);
    return {};
  }
  if (!it->is_string()) throw KbError(std::string("field \"") + key + "\" must be a string", line);
  return it->get<std::string>();
}

// Components are stored as f32 and printed in their shortest decimal form,
// so saved files read "0.6" rather than a widened double expansion.
void append_canonical_array(std::string& out, const std::vector<double>& v) {
  out += '[';
  std::array<char, 32> buf{};
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    const auto f = static_cast<float>(v[i]);
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), f);
    (void)ec;
    std::string_view text(buf.data(), static_cast<std::size_t>(end - buf.data()));
    out += text;
    // Keep integral values typed as floats ("1.0", not "1").
    if (text.find_first_of(".eE") == std::string_view::npos && text != "inf" && text != "-inf" && text != "nan")
      out += ".0";
  }
  out += ']';
}

}  // namespace

std::string_view to_string(Label label) {
  for (const auto& [value, name] : kLabelNames)
    if (value == label) return name;
  return "unknown";
}

std::string_view to_string(ManipulationType type) {
  for (const auto& [value, name] : kTypeNames)
    if (value == type) return name;
  return "unknown";
}

std::optional<Label> parse_label(std::string_view text) {
  for (const auto& [value, name] : kLabelNames)
    if (name == text) return value;
  return std::nullopt;
}

std::optional<ManipulationType> parse_manipulation_type(std::string_view text) {
  for (const auto& [value, name] : kTypeNames)
    if (name == text) return value;
  return std::nullopt;
}

KbError::KbError(const std::string& what, std::size_t line)
    : std::runtime_error(with_line(what, line)), line_(line) {}

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

std::vector<double> normalized(std::span<const double> v) {
  const double norm = l2_norm(v);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw KbError("zero-norm or non-finite vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

std::vector<double> joint_embedding(const EmbeddingRecord& rec) {
  std::vector<double> joint;
  joint.reserve(rec.visual.size() + rec.textual.size());
  joint.insert(joint.end(), rec.visual.begin(), rec.visual.end());
  joint.insert(joint.end(), rec.textual.begin(), rec.textual.end());
  return normalized(joint);
}

KnowledgeBase::KnowledgeBase(std::vector<Sample> samples, std::vector<EmbeddingRecord> embeddings)
    : samples_(std::move(samples)) {
  if (samples_.empty()) throw KbError("empty knowledge base");
  if (embeddings.size() != samples_.size()) {
    throw KbError("sample count " + std::to_string(samples_.size()) + " != embedding count " +
                  std::to_string(embeddings.size()));
  }

  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const Sample& s = samples_[i];
    if (s.id.empty()) throw KbError("empty sample id", i + 1);
    if (!index_.emplace(s.id, i).second) throw KbError("duplicate id \"" + s.id + "\"", i + 1);
    if ((s.label == Label::authentic) != (s.manipulation_type == ManipulationType::none)) {
      throw KbError("label/manipulation_type mismatch for \"" + s.id + "\"", i + 1);
    }
  }

  // Embeddings are re-ordered to sample order; every sample needs exactly one.
  embeddings_.resize(samples_.size());
  std::vector<bool> seen(samples_.size(), false);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    auto& rec = embeddings[i];
    auto it = index_.find(rec.sample_id);
    if (it == index_.end()) throw KbError("dangling sample_id \"" + rec.sample_id + "\"", i + 1);
    if (seen[it->second]) throw KbError("duplicate embedding for \"" + rec.sample_id + "\"", i + 1);
    seen[it->second] = true;

    if (i == 0) {
      visual_dim_ = rec.visual.size();
      textual_dim_ = rec.textual.size();
      if (visual_dim_ == 0 || textual_dim_ == 0) throw KbError("empty embedding vector", 1);
    } else if (rec.visual.size() != visual_dim_ || rec.textual.size() != textual_dim_) {
      throw KbError("dimension mismatch: expected d_v=" + std::to_string(visual_dim_) +
                        ", d_t=" + std::to_string(textual_dim_) + ", got d_v=" +
                        std::to_string(rec.visual.size()) + ", d_t=" + std::to_string(rec.textual.size()),
                    i + 1);
    }
    try {
      rec.visual = normalized(rec.visual);
      rec.textual = normalized(rec.textual);
    } catch (const KbError&) {
      throw KbError("zero-norm vector for \"" + rec.sample_id + "\"", i + 1);
    }
    embeddings_[it->second] = std::move(rec);
  }
}

std::optional<std::size_t> KnowledgeBase::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t KnowledgeBase::ordinal(std::string_view id) const {
  auto pos = find(id);
  if (!pos) throw std::out_of_range("unknown sample id \"" + std::string(id) + "\"");
  return *pos;
}

KnowledgeBase load_kb(std::istream& in) {
  std::vector<Sample> samples;
  std::vector<EmbeddingRecord> embeddings;
  std::unordered_map<std::string, std::size_t> first_line;
  std::size_t dv = 0, dt = 0;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw KbError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    if (!j.is_object()) throw KbError("malformed record: expected a JSON object", lineno);

    Sample s;
    s.id = read_string(j, "id", lineno);
    s.image_ref = read_string(j, "image_ref", lineno);
    s.text = read_string(j, "text", lineno);
    s.group = read_string(j, "group", lineno, /*required=*/false);
    const auto label = parse_label(read_string(j, "label", lineno));
    if (!label) throw KbError("unknown label", lineno);
    s.label = *label;
    const auto type = parse_manipulation_type(read_string(j, "manipulation_type", lineno));
    if (!type) throw KbError("unknown manipulation_type", lineno);
    s.manipulation_type = *type;
    if (s.id.empty()) throw KbError("empty id", lineno);
    if ((s.label == Label::authentic) != (s.manipulation_type == ManipulationType::none)) {
      throw KbError("label/manipulation_type mismatch", lineno);
    }
    if (auto [it, inserted] = first_line.emplace(s.id, lineno); !inserted) {
      throw KbError("duplicate id \"" + s.id + "\" (first seen on line " + std::to_string(it->second) + ")",
                    lineno);
    }

    EmbeddingRecord rec;
    rec.sample_id = s.id;
    rec.visual = read_vector(j, "visual", lineno);
    rec.textual = read_vector(j, "textual", lineno);
    if (samples.empty()) {
      dv = rec.visual.size();
      dt = rec.textual.size();
    } else if (rec.visual.size() != dv || rec.textual.size() != dt) {
      throw KbError("dimension mismatch: expected d_v=" + std::to_string(dv) + ", d_t=" + std::to_string(dt) +
                        ", got d_v=" + std::to_string(rec.visual.size()) +
                        ", d_t=" + std::to_string(rec.textual.size()),
                    lineno);
    }
    if (!(l2_norm(rec.visual) > 0.0) || !(l2_norm(rec.textual) > 0.0)) {
      throw KbError("zero-norm vector", lineno);
    }

    samples.push_back(std::move(s));
    embeddings.push_back(std::move(rec));
  }
  if (samples.empty()) throw KbError("empty knowledge base");
  return KnowledgeBase(std::move(samples), std::move(embeddings));
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw KbError("cannot open " + path.string());
  return load_kb(in);
}

std::string to_jsonl(const Sample& sample, const EmbeddingRecord& rec) {
  nlohmann::ordered_json j;
  j["id"] = sample.id;
  j["image_ref"] = sample.image_ref;
  j["text"] = sample.text;
  j["label"] = to_string(sample.label);
  j["manipulation_type"] = to_string(sample.manipulation_type);
  if (!sample.group.empty()) j["group"] = sample.group;
  std::string line = j.dump();
  line.pop_back();  // reopen the object to append the vectors
  line += ",\"visual\":";
  append_canonical_array(line, rec.visual);
  line += ",\"textual\":";
  append_canonical_array(line, rec.textual);
  line += '}';
  return line;
}

void save_kb(const KnowledgeBase& kb, std::ostream& out) {
  for (std::size_t i = 0; i < kb.size(); ++i) out << to_jsonl(kb.sample(i), kb.embedding(i)) << '\n';
}

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path) {
  // Write-then-rename so readers never see a half-written file.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw KbError("cannot write " + tmp.string());
    save_kb(kb, out);
    if (!out) throw KbError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace gasp
