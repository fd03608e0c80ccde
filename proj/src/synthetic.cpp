#include "gasp/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace gasp {

namespace {

std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = normal(rng);
  return normalized(v);
}

std::vector<double> draw(std::mt19937_64& rng, const std::vector<double>& direction, double offset) {
  const double sigma = 1.0 / std::sqrt(static_cast<double>(direction.size()));
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<double> v(direction.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = offset * direction[k] + noise(rng);
  return normalized(v);
}

std::string make_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%04zu", prefix, i);
  return buf;
}

KnowledgeBase make_set(std::mt19937_64& rng, const SyntheticSpec& spec, std::size_t count, const char* prefix,
                       const std::vector<double>& visual_dir, const std::vector<double>& textual_dir,
                       bool with_groups) {
  std::vector<Sample> samples;
  std::vector<EmbeddingRecord> embeddings;
  samples.reserve(count);
  embeddings.reserve(count);
  std::size_t manipulated = 0, authentic = 0;
  const double half = spec.cluster_sep / 2.0;

  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.id = make_id(prefix, i);
    s.image_ref = "synthetic/" + s.id + ".png";
    s.text = "synthetic caption " + s.id;
    const bool fake = (i % 2) == 1;
    double sign = -1.0;
    if (fake) {
      s.label = Label::manipulated;
      s.manipulation_type = kManipulationTypes[manipulated++ % 4];
      if (with_groups) s.group = std::string(to_string(s.manipulation_type));
      sign = 1.0;
    } else if (with_groups) {
      s.group = std::string(to_string(kManipulationTypes[authentic++ % 4]));
    }

    EmbeddingRecord rec;
    rec.sample_id = s.id;
    rec.visual = draw(rng, visual_dir, sign * half);
    rec.textual = draw(rng, textual_dir, sign * half);
    samples.push_back(std::move(s));
    embeddings.push_back(std::move(rec));
  }
  return KnowledgeBase(std::move(samples), std::move(embeddings));
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (!(spec.cluster_sep >= 0.0)) throw std::invalid_argument("cluster_sep must be >= 0");
  if (spec.n_samples == 0 || spec.n_queries == 0) throw std::invalid_argument("sample and query counts must be > 0");
  if (spec.visual_dim == 0 || spec.textual_dim == 0) throw std::invalid_argument("dimensions must be > 0");

  std::mt19937_64 rng(spec.seed);
  const auto visual_dir = random_unit(rng, spec.visual_dim);
  const auto textual_dir = random_unit(rng, spec.textual_dim);
  SyntheticData data;
  data.kb = make_set(rng, spec, spec.n_samples, "kb", visual_dir, textual_dir, false);
  data.queries = make_set(rng, spec, spec.n_queries, "q", visual_dir, textual_dir, true);
  return data;
}

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_kb(data.kb, dir / "kb.jsonl");
  save_kb(data.queries, dir / "queries.jsonl");
}

}  // namespace gasp
