#include "gasp/harness.hpp"

#include "gasp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace gasp {

namespace {

std::vector<std::string> balanced_pick(const KnowledgeBase& kb, const std::vector<ScoredEntry>& ranked,
                                       std::size_t k2) {
  // At most ceil(k2/2) of either label; leftovers fill in score order.
  const std::size_t cap = (k2 + 1) / 2;
  std::size_t fake = 0, real = 0;
  std::vector<std::string> picked;
  std::vector<bool> used(ranked.size(), false);
  for (std::size_t i = 0; i < ranked.size() && picked.size() < k2; ++i) {
    const bool is_fake = kb.sample(kb.ordinal(ranked[i].sample_id)).label == Label::manipulated;
    auto& count = is_fake ? fake : real;
    if (count < cap) {
      ++count;
      used[i] = true;
      picked.push_back(ranked[i].sample_id);
    }
  }
  for (std::size_t i = 0; i < ranked.size() && picked.size() < k2; ++i)
    if (!used[i]) picked.push_back(ranked[i].sample_id);
  return picked;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string format_setting(const char* name, double value) {
  std::ostringstream os;
  os << name << '=' << value;
  return os.str();
}

MetricSummary summary_of(const Confusion& c) { return {c, c.accuracy_pct(), c.f1_pct()}; }

nlohmann::json summary_json(const MetricSummary& m) {
  return {{"accuracy", m.accuracy_pct},
          {"f1", m.f1_pct},
          {"total", m.confusion.total()},
          {"correct", m.confusion.correct()},
          {"tp", m.confusion.tp},
          {"fp", m.confusion.fp},
          {"tn", m.confusion.tn},
          {"fn", m.confusion.fn},
          {"parse_failures", m.confusion.parse_failures}};
}

}  // namespace

std::string_view to_string(Baseline baseline) {
  switch (baseline) {
    case Baseline::gasp: return "gasp";
    case Baseline::zero_shot: return "zero_shot";
    case Baseline::random: return "random";
    case Baseline::similarity_only: return "similarity_only";
  }
  return "unknown";
}

std::optional<Baseline> parse_baseline(std::string_view text) {
  for (auto b : {Baseline::gasp, Baseline::zero_shot, Baseline::random, Baseline::similarity_only})
    if (to_string(b) == text) return b;
  return std::nullopt;
}

void SelectionConfig::validate() const {
  if (k1 == 0) throw std::invalid_argument("k1 must be >= 1");
  if (k_e == 0) throw std::invalid_argument("k_e must be >= 1");
  lambda.validate();
  gstas.validate();
}

FusedGraph fused_graph_for(const KnowledgeBase& kb, const Query& query, const SelectionConfig& cfg) {
  const auto candidates = retrieve(kb, query, cfg.mode, cfg.k1);
  return build_fused_graph(kb, candidates, query, cfg.lambda, cfg.k_e);
}

Selection select_exemplars(const KnowledgeBase& kb, const Query& query, const SelectionConfig& cfg,
                           std::size_t query_ordinal) {
  cfg.validate();
  Selection sel;
  const std::size_t k2 = cfg.gstas.k2;
  if (cfg.baseline == Baseline::zero_shot || k2 == 0) return sel;

  if (cfg.baseline == Baseline::random) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < kb.size(); ++i)
      if (kb.sample(i).id != query.sample.id) pool.push_back(i);
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(query_ordinal), static_cast<std::uint32_t>(query_ordinal >> 32)};
    std::mt19937_64 rng(seq);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(k2, pool.size()));
    for (auto i : pool) {
      sel.exemplar_ids.push_back(kb.sample(i).id);
      sel.exemplar_scores.push_back(0.0);
    }
    return sel;
  }

  sel.candidates = retrieve(kb, query, cfg.mode, cfg.k1);
  if (cfg.baseline == Baseline::similarity_only) {
    std::vector<ScoredEntry> ranked;
    for (std::size_t i = 0; i < sel.candidates.entries.size(); ++i)
      ranked.push_back({sel.candidates.entries[i].sample_id, i, sel.candidates.entries[i].similarity});
    sel.scored.entries = std::move(ranked);
  } else if (sel.candidates.entries.size() < 2) {
    // A single candidate has no graph to propagate over.
    for (const auto& c : sel.candidates.entries) sel.scored.entries.push_back({c.sample_id, 0, 0.0});
    sel.scored.fallback_to_retrieval_order = true;
  } else {
    const auto graph = build_fused_graph(kb, sel.candidates, query, cfg.lambda, cfg.k_e);
    const auto op = normalize(graph);
    const auto embeddings = node_embeddings(kb, sel.candidates, query, cfg.gstas.space);
    sel.scored = score(op, graph.nodes, embeddings, cfg.gstas);
  }

  sel.exemplar_ids = cfg.balance_labels ? balanced_pick(kb, sel.scored.entries, k2) : select_topk2(sel.scored, k2);
  for (const auto& id : sel.exemplar_ids) {
    auto it = std::find_if(sel.scored.entries.begin(), sel.scored.entries.end(),
                           [&](const ScoredEntry& e) { return e.sample_id == id; });
    sel.exemplar_scores.push_back(it->score);
  }
  return sel;
}

nlohmann::json to_json(const FusedGraph& graph) {
  nlohmann::json adjacency = nlohmann::json::array();
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto row = graph.adjacency.row(i);
    adjacency.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"nodes", graph.nodes},
          {"query_index", graph.query_index()},
          {"lambda", {{"i2i", graph.lambda.i2i}, {"t2t", graph.lambda.t2t}, {"ti2ti", graph.lambda.ti2ti}}},
          {"adjacency", std::move(adjacency)}};
}

nlohmann::json to_json(const Selection& sel) {
  nlohmann::json candidates = nlohmann::json::array();
  for (const auto& c : sel.candidates.entries) candidates.push_back({{"id", c.sample_id}, {"similarity", c.similarity}});
  nlohmann::json scored = nlohmann::json::array();
  for (const auto& e : sel.scored.entries) scored.push_back({{"id", e.sample_id}, {"score", e.score}});
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : sel.scored.steps)
    steps.push_back({{"step", s.step}, {"alignment", s.alignment}, {"weight", s.weight}});
  return {{"mode", to_string(sel.candidates.mode)},
          {"candidates", std::move(candidates)},
          {"scored", std::move(scored)},
          {"steps", std::move(steps)},
          {"fallback_to_retrieval_order", sel.scored.fallback_to_retrieval_order},
          {"exemplar_ids", sel.exemplar_ids},
          {"exemplar_scores", sel.exemplar_scores}};
}

EvalConfig EvalConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  EvalConfig cfg;
  cfg.kb_path = resolve(base_dir, j.value("kb", std::string()));
  cfg.query_path = resolve(base_dir, j.value("queries", std::string()));
  cfg.trace_path = resolve(base_dir, j.value("trace", std::string()));
  cfg.template_path = resolve(base_dir, j.value("template", std::string()));

  auto& sel = cfg.selection;
  if (j.contains("mode")) {
    auto mode = parse_retrieval_mode(j.at("mode").get<std::string>());
    if (!mode) throw std::invalid_argument("unknown mode " + j.at("mode").dump());
    sel.mode = *mode;
  }
  if (j.contains("space")) {
    auto space = parse_retrieval_mode(j.at("space").get<std::string>());
    if (!space) throw std::invalid_argument("unknown space " + j.at("space").dump());
    sel.gstas.space = *space;
  }
  sel.k1 = j.value("k1", sel.k1);
  sel.k_e = j.value("k_e", sel.k_e);
  sel.gstas.k2 = j.value("k2", sel.gstas.k2);
  sel.gstas.alpha = j.value("alpha", sel.gstas.alpha);
  sel.gstas.steps = j.value("steps", sel.gstas.steps);
  sel.gstas.epsilon_clamp = j.value("epsilon_clamp", sel.gstas.epsilon_clamp);
  if (j.contains("lambda")) {
    const auto& l = j.at("lambda");
    if (l.is_array() && l.size() == 3) {
      sel.lambda = {l[0].get<double>(), l[1].get<double>(), l[2].get<double>()};
    } else if (l.is_object()) {
      sel.lambda = {l.value("i2i", 0.0), l.value("t2t", 0.0), l.value("ti2ti", 0.0)};
    } else {
      throw std::invalid_argument("lambda must be [i2i, t2t, ti2ti] or an object");
    }
  }
  if (j.contains("baseline")) {
    auto b = parse_baseline(j.at("baseline").get<std::string>());
    if (!b) throw std::invalid_argument("unknown baseline " + j.at("baseline").dump());
    sel.baseline = *b;
  }
  sel.balance_labels = j.value("balance_labels", sel.balance_labels);
  sel.seed = j.value("seed", sel.seed);
  cfg.mock = j.value("mock", cfg.mock);
  cfg.max_parallel = j.value("max_parallel", cfg.max_parallel);

  if (j.contains("endpoint")) {
    const auto& e = j.at("endpoint");
    auto& ep = cfg.endpoint;
    ep.base_url = e.value("base_url", ep.base_url);
    ep.model_name = e.value("model", ep.model_name);
    ep.timeout_s = e.value("timeout_s", ep.timeout_s);
    ep.max_retries = e.value("max_retries", ep.max_retries);
    ep.max_parallel = e.value("max_parallel", ep.max_parallel);
    ep.temperature = e.value("temperature", ep.temperature);
    ep.max_tokens = e.value("max_tokens", ep.max_tokens);
    ep.api_key_env = e.value("api_key_env", ep.api_key_env);
  }
  sel.validate();
  return cfg;
}

EvalConfig EvalConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("invalid config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

nlohmann::json EvalConfig::to_json() const {
  const auto& sel = selection;
  return {{"kb", kb_path.string()},
          {"queries", query_path.string()},
          {"trace", trace_path.string()},
          {"template", template_path.string()},
          {"mode", to_string(sel.mode)},
          {"space", to_string(sel.gstas.space)},
          {"k1", sel.k1},
          {"k_e", sel.k_e},
          {"k2", sel.gstas.k2},
          {"alpha", sel.gstas.alpha},
          {"steps", sel.gstas.steps},
          {"epsilon_clamp", sel.gstas.epsilon_clamp},
          {"lambda", {sel.lambda.i2i, sel.lambda.t2t, sel.lambda.ti2ti}},
          {"baseline", to_string(sel.baseline)},
          {"balance_labels", sel.balance_labels},
          {"seed", sel.seed},
          {"mock", mock},
          {"max_parallel", max_parallel},
          {"endpoint",
           {{"base_url", endpoint.base_url},
            {"model", endpoint.model_name},
            {"timeout_s", endpoint.timeout_s},
            {"max_retries", endpoint.max_retries},
            {"max_parallel", endpoint.max_parallel},
            {"temperature", endpoint.temperature},
            {"max_tokens", endpoint.max_tokens},
            {"api_key_env", endpoint.api_key_env}}}};
}

Dataset Dataset::from(KnowledgeBase kb, const KnowledgeBase& queries) {
  Dataset d;
  d.queries.reserve(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (kb.find(queries.sample(i).id)) {
      throw std::invalid_argument("query id \"" + queries.sample(i).id + "\" also appears in the knowledge base");
    }
    d.queries.push_back({queries.sample(i), queries.embedding(i)});
  }
  d.kb = std::move(kb);
  return d;
}

Dataset Dataset::load(const std::filesystem::path& kb_path, const std::filesystem::path& query_path) {
  return from(load_kb(kb_path), load_kb(query_path));
}

std::string report_group(const Sample& query) {
  return query.group.empty() ? std::string(to_string(query.manipulation_type)) : query.group;
}

EvalReport summarize(std::vector<QueryTrace> traces, std::string setting) {
  EvalReport report;
  report.setting = std::move(setting);
  std::map<std::string, Confusion> per_type;
  Confusion overall;
  for (const auto& t : traces) {
    per_type[t.group].add(t.gold, t.verdict);
    overall.add(t.gold, t.verdict);
  }
  for (const auto& [group, c] : per_type) report.per_type[group] = summary_of(c);
  report.overall = summary_of(overall);
  report.parse_failures = overall.parse_failures;
  report.traces = std::move(traces);
  return report;
}

EvalReport evaluate(const EvalConfig& cfg, const Dataset& data, const Oracle& oracle, const PromptTemplate& tmpl) {
  cfg.selection.validate();
  const std::size_t n = data.queries.size();
  std::vector<std::optional<QueryTrace>> slots(n);

  auto run_one = [&](std::size_t qi) {
    const Query& query = data.queries[qi];
    const Selection sel = select_exemplars(data.kb, query, cfg.selection, qi);
    std::vector<Sample> exemplars;
    exemplars.reserve(sel.exemplar_ids.size());
    for (const auto& id : sel.exemplar_ids) exemplars.push_back(data.kb.sample(data.kb.ordinal(id)));
    const Verdict verdict = oracle(build_prompt(exemplars, query.sample, tmpl));

    QueryTrace t;
    t.query_id = query.sample.id;
    t.group = report_group(query.sample);
    t.gold = query.sample.label;
    for (const auto& c : sel.candidates.entries) t.candidate_ids.push_back(c.sample_id);
    t.exemplar_ids = sel.exemplar_ids;
    t.exemplar_scores = sel.exemplar_scores;
    for (const auto& s : sel.scored.steps) t.step_weights.push_back(s.weight);
    t.verdict = verdict.label;
    t.raw_text = verdict.raw_text;
    t.correct = verdict.label.has_value() && *verdict.label == t.gold;
    slots[qi] = std::move(t);
  };

  try {
    parallel_for(n, cfg.max_parallel, run_one);
  } catch (...) {
    if (!cfg.trace_path.empty()) {
      std::vector<QueryTrace> done;
      for (auto& s : slots)
        if (s) done.push_back(std::move(*s));
      write_trace(summarize(std::move(done), "partial"), cfg.trace_path);
    }
    throw;
  }

  std::vector<QueryTrace> traces;
  traces.reserve(n);
  for (auto& s : slots) traces.push_back(std::move(*s));
  return summarize(std::move(traces), std::string(to_string(cfg.selection.baseline)));
}

Oracle make_oracle(const EvalConfig& cfg) {
  if (cfg.mock) return [](const PromptBundle& p) { return mock_infer(p); };
  auto client = std::make_shared<LvlmClient>(cfg.endpoint);
  return [client](const PromptBundle& p) { return client->infer(p); };
}

EvalReport evaluate(const EvalConfig& cfg) {
  const auto data = Dataset::load(cfg.kb_path, cfg.query_path);
  const auto tmpl = cfg.template_path.empty() ? PromptTemplate::builtin() : PromptTemplate::load(cfg.template_path);
  auto report = evaluate(cfg, data, make_oracle(cfg), tmpl);
  if (!cfg.trace_path.empty()) write_trace(report, cfg.trace_path);
  return report;
}

std::vector<EvalReport> sweep_alpha(const EvalConfig& cfg, const Dataset& data, const Oracle& oracle,
                                    std::span<const double> alphas, const PromptTemplate& tmpl) {
  std::vector<EvalReport> reports;
  reports.reserve(alphas.size());
  for (double alpha : alphas) {
    EvalConfig c = cfg;
    c.trace_path.clear();
    c.selection.gstas.alpha = alpha;
    auto r = evaluate(c, data, oracle, tmpl);
    r.setting = format_setting("alpha", alpha);
    reports.push_back(std::move(r));
  }
  return reports;
}

std::vector<EvalReport> sweep_shots(const EvalConfig& cfg, const Dataset& data, const Oracle& oracle,
                                    std::span<const std::size_t> shots, const PromptTemplate& tmpl) {
  std::vector<EvalReport> reports;
  reports.reserve(shots.size());
  for (std::size_t k2 : shots) {
    EvalConfig c = cfg;
    c.trace_path.clear();
    c.selection.gstas.k2 = k2;
    if (k2 == 0) c.selection.baseline = Baseline::zero_shot;
    auto r = evaluate(c, data, oracle, tmpl);
    r.setting = "k2=" + std::to_string(k2);
    reports.push_back(std::move(r));
  }
  return reports;
}

nlohmann::json EvalReport::to_json(bool include_traces) const {
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [group, m] : per_type) types[group] = summary_json(m);
  nlohmann::json j{{"setting", setting},
                   {"overall", summary_json(overall)},
                   {"per_type", std::move(types)},
                   {"parse_failures", parse_failures}};
  if (include_traces) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : traces) {
      arr.push_back({{"query_id", t.query_id},
                     {"group", t.group},
                     {"gold", to_string(t.gold)},
                     {"candidate_ids", t.candidate_ids},
                     {"exemplar_ids", t.exemplar_ids},
                     {"exemplar_scores", t.exemplar_scores},
                     {"step_weights", t.step_weights},
                     {"verdict", t.verdict ? nlohmann::json(to_string(*t.verdict)) : nlohmann::json(nullptr)},
                     {"raw_text", t.raw_text},
                     {"correct", t.correct}});
    }
    j["traces"] = std::move(arr);
  }
  return j;
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  if (!setting.empty()) os << "[" << setting << "]\n";
  os << std::left << std::setw(16) << "type" << std::right << std::setw(8) << "n" << std::setw(10) << "Acc%"
     << std::setw(10) << "F1%" << '\n';
  auto line = [&](const std::string& name, const MetricSummary& m) {
    os << std::left << std::setw(16) << name << std::right << std::setw(8) << m.confusion.total() << std::setw(10)
       << m.accuracy_pct << std::setw(10) << m.f1_pct << '\n';
  };
  for (const auto& [group, m] : per_type) line(group, m);
  line("overall", overall);
  os << "parse failures: " << parse_failures << '\n';
  return os.str();
}

void write_trace(const EvalReport& report, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write trace " + path.string());
  out << report.to_json(true).dump(2) << '\n';
}

}  // namespace gasp
