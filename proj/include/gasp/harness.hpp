#pragma once

#include "gasp/graph.hpp"
#include "gasp/gstas.hpp"
#include "gasp/kb.hpp"
#include "gasp/lvlm_client.hpp"
#include "gasp/metrics.hpp"
#include "gasp/prompt.hpp"
#include "gasp/retrieval.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gasp {

enum class Baseline { gasp, zero_shot, random, similarity_only };

std::string_view to_string(Baseline baseline);
std::optional<Baseline> parse_baseline(std::string_view text);

/// Everything that decides which exemplars a query gets.
struct SelectionConfig {
  RetrievalMode mode = RetrievalMode::ti2ti;
  std::size_t k1 = 50;
  std::size_t k_e = 10;
  ModalityWeights lambda;
  GstasConfig gstas;  // gstas.k2 is the shot count
  Baseline baseline = Baseline::gasp;
  bool balance_labels = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Selection {
  CandidateSet candidates;   // empty for zero_shot and random
  ScoredExemplars scored;    // gasp only
  std::vector<std::string> exemplar_ids;
  std::vector<double> exemplar_scores;  // GSTAS score or retrieval similarity; 0 for random
};

/// Picks exemplars for one query. `query_ordinal` keys the per-query random
/// stream of the random baseline, so results do not depend on evaluation
/// order or parallelism.
Selection select_exemplars(const KnowledgeBase& kb, const Query& query, const SelectionConfig& cfg,
                           std::size_t query_ordinal = 0);

/// Fused graph for one query under `cfg`, for inspection.
FusedGraph fused_graph_for(const KnowledgeBase& kb, const Query& query, const SelectionConfig& cfg);

nlohmann::json to_json(const FusedGraph& graph);
nlohmann::json to_json(const Selection& selection);

struct EvalConfig {
  std::filesystem::path kb_path;
  std::filesystem::path query_path;
  std::filesystem::path trace_path;     // optional JSON trace output
  std::filesystem::path template_path;  // optional; builtin template otherwise
  SelectionConfig selection;
  bool mock = true;
  EndpointConfig endpoint;
  std::size_t max_parallel = 4;  // queries in flight

  /// Relative paths are resolved against `base_dir`.
  static EvalConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static EvalConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct Dataset {
  KnowledgeBase kb;
  std::vector<Query> queries;

  /// Throws std::invalid_argument when a query id also appears in the KB.
  static Dataset from(KnowledgeBase kb, const KnowledgeBase& queries);
  static Dataset load(const std::filesystem::path& kb_path, const std::filesystem::path& query_path);
};

struct QueryTrace {
  std::string query_id;
  std::string group;
  Label gold = Label::authentic;
  std::vector<std::string> candidate_ids;
  std::vector<std::string> exemplar_ids;
  std::vector<double> exemplar_scores;
  std::vector<double> step_weights;
  std::optional<Label> verdict;
  std::string raw_text;
  bool correct = false;
};

struct MetricSummary {
  Confusion confusion;
  double accuracy_pct = 0.0;
  double f1_pct = 0.0;
};

struct EvalReport {
  std::string setting;  // e.g. "alpha=0.4"
  std::map<std::string, MetricSummary> per_type;
  MetricSummary overall;
  std::size_t parse_failures = 0;
  std::vector<QueryTrace> traces;

  nlohmann::json to_json(bool include_traces = true) const;
  /// Fixed-width table of per-type and overall Acc/F1.
  std::string table() const;
};

using Oracle = std::function<Verdict(const PromptBundle&)>;

/// Per-type key: the query's group when set, else its manipulation type.
std::string report_group(const Sample& query);

/// Builds an EvalReport from finished traces (deterministic, query order).
EvalReport summarize(std::vector<QueryTrace> traces, std::string setting = {});

/// Runs selection, prompting and the oracle for every query with at most
/// cfg.max_parallel queries in flight. When the oracle throws, the traces of
/// the queries that finished are written to cfg.trace_path (if set) before
/// the error propagates.
EvalReport evaluate(const EvalConfig& cfg, const Dataset& data, const Oracle& oracle,
                    const PromptTemplate& tmpl = PromptTemplate::builtin());

/// Loads data, template and oracle (mock or endpoint) from `cfg` and writes
/// the trace file when configured.
EvalReport evaluate(const EvalConfig& cfg);

Oracle make_oracle(const EvalConfig& cfg);

std::vector<EvalReport> sweep_alpha(const EvalConfig& cfg, const Dataset& data, const Oracle& oracle,
                                    std::span<const double> alphas,
                                    const PromptTemplate& tmpl = PromptTemplate::builtin());

/// k2 == 0 runs the zero-shot baseline.
std::vector<EvalReport> sweep_shots(const EvalConfig& cfg, const Dataset& data, const Oracle& oracle,
                                    std::span<const std::size_t> shots,
                                    const PromptTemplate& tmpl = PromptTemplate::builtin());

void write_trace(const EvalReport& report, const std::filesystem::path& path);

}  // namespace gasp
