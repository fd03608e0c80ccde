#include "gasp/harness.hpp"
#include "gasp/synthetic.hpp"

#include <doctest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

using namespace gasp;

namespace {

const SyntheticData& synthetic() {
  static const SyntheticData data = generate_synthetic(SyntheticSpec{});
  return data;
}

const Dataset& dataset() {
  static const Dataset d = Dataset::from(synthetic().kb, synthetic().queries);
  return d;
}

Oracle mock() {
  return [](const PromptBundle& p) { return mock_infer(p); };
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("confusion counts against hand-computed cases") {
  Confusion c;
  c.add(Label::manipulated, Label::manipulated);  // tp
  c.add(Label::manipulated, Label::authentic);    // fn
  c.add(Label::authentic, Label::authentic);      // tn
  c.add(Label::authentic, Label::manipulated);    // fp
  c.add(Label::manipulated, std::nullopt);        // fn, parse failure
  c.add(Label::authentic, std::nullopt);          // fp, parse failure
  CHECK(c.tp == 1);
  CHECK(c.fn == 2);
  CHECK(c.tn == 1);
  CHECK(c.fp == 2);
  CHECK(c.parse_failures == 2);
  CHECK(c.accuracy_pct() == doctest::Approx(100.0 * 2 / 6));
  CHECK(c.f1_pct() == doctest::Approx(100.0 * 2 / (2 + 2 + 2)));
  CHECK(Confusion{}.accuracy_pct() == 0.0);
  CHECK(Confusion{}.f1_pct() == 0.0);
}

TEST_CASE("perfect and adversarial oracles") {
  EvalConfig cfg;
  const auto& data = dataset();
  std::map<std::string, Label> gold;
  for (const auto& q : data.queries) gold[q.sample.text] = q.sample.label;
  auto answer = [&](bool truthful) {
    return [&, truthful](const PromptBundle& p) {
      const auto label = gold.at(p.query.text);
      const auto said = truthful ? label : (label == Label::authentic ? Label::manipulated : Label::authentic);
      return Verdict{said, std::string(label_word(said)), 0.0};
    };
  };
  const auto perfect = evaluate(cfg, data, answer(true));
  CHECK(perfect.overall.accuracy_pct == 100.0);
  CHECK(perfect.overall.f1_pct == 100.0);
  const auto adversarial = evaluate(cfg, data, answer(false));
  CHECK(adversarial.overall.accuracy_pct == 0.0);

  std::size_t per_type_total = 0;
  for (const auto& [group, m] : perfect.per_type) per_type_total += m.confusion.total();
  CHECK(per_type_total == perfect.overall.confusion.total());
  CHECK(perfect.per_type.size() == 4);
  CHECK(perfect.per_type.at("face_swap").confusion.total() == 50);
}

TEST_CASE("parse failures count as wrong and are reported") {
  EvalConfig cfg;
  const auto report = evaluate(cfg, dataset(), [](const PromptBundle&) { return Verdict{std::nullopt, "hmm", 0.0}; });
  CHECK(report.parse_failures == dataset().queries.size());
  CHECK(report.overall.accuracy_pct == 0.0);
}

TEST_CASE("synthetic generator is deterministic and well-formed") {
  const auto a = generate_synthetic(SyntheticSpec{});
  const auto b = generate_synthetic(SyntheticSpec{});
  std::ostringstream sa, sb;
  save_kb(a.kb, sa);
  save_kb(b.kb, sb);
  CHECK(sa.str() == sb.str());
  CHECK(a.kb.size() == 100);
  CHECK(a.queries.size() == 200);

  const auto dir = std::filesystem::temp_directory_path() / "gasp_synth_test";
  write_synthetic(a, dir / "one");
  write_synthetic(b, dir / "two");
  CHECK(slurp(dir / "one" / "kb.jsonl") == slurp(dir / "two" / "kb.jsonl"));
  CHECK(slurp(dir / "one" / "queries.jsonl") == slurp(dir / "two" / "queries.jsonl"));
  const auto reloaded = load_kb(dir / "one" / "queries.jsonl");
  CHECK(reloaded.sample(1).group == std::string(to_string(reloaded.sample(1).manipulation_type)));

  std::size_t fakes = 0;
  for (const auto& s : a.kb.samples()) fakes += s.label == Label::manipulated;
  CHECK(fakes == 50);
  CHECK_THROWS_AS(generate_synthetic(SyntheticSpec{.cluster_sep = -1.0}), std::invalid_argument);
}

TEST_CASE("indistinguishable clusters give chance-level accuracy") {
  SyntheticSpec spec;
  spec.cluster_sep = 0.0;
  const auto data = generate_synthetic(spec);
  const auto report = evaluate(EvalConfig{}, Dataset::from(data.kb, data.queries), mock());
  CHECK(report.overall.accuracy_pct >= 35.0);
  CHECK(report.overall.accuracy_pct <= 65.0);
}

TEST_CASE("selection honors the subset chain for every baseline") {
  const auto& data = dataset();
  for (auto baseline : {Baseline::gasp, Baseline::similarity_only, Baseline::random, Baseline::zero_shot}) {
    SelectionConfig cfg;
    cfg.baseline = baseline;
    for (std::size_t qi = 0; qi < 20; ++qi) {
      const auto sel = select_exemplars(data.kb, data.queries[qi], cfg, qi);
      const std::set<std::string> ids(sel.exemplar_ids.begin(), sel.exemplar_ids.end());
      CHECK(ids.size() == sel.exemplar_ids.size());
      if (baseline == Baseline::zero_shot) {
        CHECK(sel.exemplar_ids.empty());
        continue;
      }
      CHECK(sel.exemplar_ids.size() == 3);
      for (const auto& id : sel.exemplar_ids) CHECK(data.kb.find(id).has_value());
      if (baseline == Baseline::random) continue;
      CHECK(sel.candidates.entries.size() == 50);
      std::set<std::string> coarse;
      for (const auto& c : sel.candidates.entries) coarse.insert(c.sample_id);
      for (const auto& id : sel.exemplar_ids) CHECK(coarse.count(id) == 1);
    }
  }
}

TEST_CASE("gasp selection scores and steps are traced") {
  SelectionConfig cfg;
  const auto sel = select_exemplars(dataset().kb, dataset().queries[0], cfg);
  CHECK(sel.scored.steps.size() == cfg.gstas.steps);
  CHECK(sel.scored.entries.size() == 50);
  for (std::size_t i = 1; i < sel.exemplar_scores.size(); ++i) CHECK(sel.exemplar_scores[i - 1] >= sel.exemplar_scores[i]);
  const auto j = to_json(sel);
  CHECK(j["exemplar_ids"].size() == 3);
  CHECK(j["steps"].size() == 3);

  const auto graph = to_json(fused_graph_for(dataset().kb, dataset().queries[0], cfg));
  CHECK(graph["adjacency"].size() == 51);
  CHECK(graph["nodes"].back() == dataset().queries[0].sample.id);
}

TEST_CASE("balanced selection caps either label") {
  SelectionConfig cfg;
  cfg.balance_labels = true;
  cfg.gstas.k2 = 3;
  cfg.k1 = 100;
  for (std::size_t qi = 0; qi < 10; ++qi) {
    const auto sel = select_exemplars(dataset().kb, dataset().queries[qi], cfg, qi);
    std::size_t fake = 0;
    for (const auto& id : sel.exemplar_ids) fake += dataset().kb.sample(dataset().kb.ordinal(id)).label == Label::manipulated;
    CHECK(sel.exemplar_ids.size() == 3);
    CHECK(fake >= 1);
    CHECK(fake <= 2);
  }
}

TEST_CASE("random baseline is seeded per query") {
  SelectionConfig cfg;
  cfg.baseline = Baseline::random;
  const auto& q = dataset().queries[5];
  CHECK(select_exemplars(dataset().kb, q, cfg, 5).exemplar_ids == select_exemplars(dataset().kb, q, cfg, 5).exemplar_ids);
  auto other = cfg;
  other.seed = 99;
  CHECK(select_exemplars(dataset().kb, q, cfg, 5).exemplar_ids !=
        select_exemplars(dataset().kb, q, other, 5).exemplar_ids);
}

TEST_CASE("sweeps emit one report per setting") {
  EvalConfig cfg;
  const std::vector<double> alphas{0.4};
  const auto single = sweep_alpha(cfg, dataset(), mock(), alphas);
  REQUIRE(single.size() == 1);
  const auto direct = evaluate(cfg, dataset(), mock());
  CHECK(single[0].overall.accuracy_pct == direct.overall.accuracy_pct);
  CHECK(single[0].setting == "alpha=0.4");

  const std::vector<std::size_t> shots{0, 1};
  const auto reports = sweep_shots(cfg, dataset(), mock(), shots);
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].traces[0].exemplar_ids.empty());
  CHECK(reports[0].overall.accuracy_pct == 50.0);  // fixed "real" answer on a balanced query set
  CHECK(reports[1].traces[0].exemplar_ids.size() == 1);
}

TEST_CASE("config JSON parsing") {
  const auto j = nlohmann::json::parse(R"({
    "kb": "kb.jsonl", "queries": "/abs/q.jsonl", "mode": "I2I", "k1": 20, "k_e": 4, "k2": 2,
    "alpha": 0.6, "steps": 5, "lambda": {"i2i": 0.2, "t2t": 0.5, "ti2ti": 0.3}, "baseline": "random",
    "seed": 7, "mock": false, "endpoint": {"base_url": "http://h:1/v1", "model": "m", "max_parallel": 8}
  })");
  const auto cfg = EvalConfig::from_json(j, "/base");
  CHECK(cfg.kb_path == std::filesystem::path("/base/kb.jsonl"));
  CHECK(cfg.query_path == std::filesystem::path("/abs/q.jsonl"));
  CHECK(cfg.selection.mode == RetrievalMode::i2i);
  CHECK(cfg.selection.k1 == 20);
  CHECK(cfg.selection.gstas.k2 == 2);
  CHECK(cfg.selection.gstas.steps == 5);
  CHECK(cfg.selection.lambda.t2t == 0.5);
  CHECK(cfg.selection.baseline == Baseline::random);
  CHECK_FALSE(cfg.mock);
  CHECK(cfg.endpoint.model_name == "m");
  CHECK(cfg.endpoint.max_parallel == 8);

  const auto again = EvalConfig::from_json(cfg.to_json());
  CHECK(again.to_json() == cfg.to_json());

  CHECK_THROWS_AS(EvalConfig::from_json(nlohmann::json::parse(R"({"lambda":[0.5,0.5,0.5]})")), std::invalid_argument);
  CHECK_THROWS_AS(EvalConfig::from_json(nlohmann::json::parse(R"({"alpha":1.5})")), std::invalid_argument);
  CHECK_THROWS_AS(EvalConfig::from_json(nlohmann::json::parse(R"({"baseline":"oracle"})")), std::invalid_argument);
}

TEST_CASE("overlapping query and KB ids are rejected") {
  CHECK_THROWS_AS(Dataset::from(synthetic().kb, synthetic().kb), std::invalid_argument);
}

TEST_CASE("oracle failure saves a partial trace") {
  EvalConfig cfg;
  cfg.max_parallel = 1;
  cfg.trace_path = std::filesystem::temp_directory_path() / "gasp_partial" / "trace.json";
  std::filesystem::remove(cfg.trace_path);
  int calls = 0;
  auto flaky = [&](const PromptBundle& p) {
    if (++calls > 5) throw TransportError("endpoint unreachable");
    return mock_infer(p);
  };
  CHECK_THROWS_AS(evaluate(cfg, dataset(), flaky), TransportError);
  const auto trace = nlohmann::json::parse(slurp(cfg.trace_path));
  CHECK(trace["setting"] == "partial");
  CHECK(trace["traces"].size() == 5);
}

TEST_CASE("report rendering") {
  const auto report = evaluate(EvalConfig{}, dataset(), mock());
  const auto table = report.table();
  CHECK(table.find("overall") != std::string::npos);
  CHECK(table.find("text_attribute") != std::string::npos);
  const auto j = report.to_json();
  CHECK(j["traces"].size() == 200);
  CHECK(j["per_type"]["face_swap"]["total"] == 50);
}
