// gasp-icl: command-line front end for exemplar selection and evaluation.

#include "gasp/harness.hpp"
#include "gasp/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace gasp;

struct EndpointFlags {
  bool mock = false;
  std::string endpoint;
  std::string model;

  void add(CLI::App* app) {
    app->add_flag("--mock", mock, "Use the offline majority-label oracle");
    app->add_option("--endpoint", endpoint, "OpenAI-compatible base URL, e.g. http://127.0.0.1:8000/v1");
    app->add_option("--model", model, "Model name sent with each request");
  }

  void apply(EvalConfig& cfg) const {
    if (!endpoint.empty()) {
      cfg.endpoint.base_url = endpoint;
      cfg.mock = false;
    }
    if (!model.empty()) cfg.endpoint.model_name = model;
    if (mock) cfg.mock = true;
  }
};

int run_build_kb(const std::string& in, bool validate, const std::string& out) {
  const auto kb = load_kb(std::filesystem::path(in));
  if (validate) {
    std::cerr << "ok: " << kb.size() << " records, d_v=" << kb.visual_dim() << ", d_t=" << kb.textual_dim() << '\n';
  }
  if (out.empty()) {
    save_kb(kb, std::cout);
  } else {
    save_kb(kb, std::filesystem::path(out));
  }
  return 0;
}

int run_select(EvalConfig cfg, const std::string& query_id, const std::string& dump_graph) {
  const auto data = Dataset::load(cfg.kb_path, cfg.query_path);
  const Query* query = nullptr;
  for (const auto& q : data.queries)
    if (query_id.empty() || q.sample.id == query_id) {
      query = &q;
      break;
    }
  if (query == nullptr) throw std::runtime_error("query id \"" + query_id + "\" not found");

  const auto sel = select_exemplars(data.kb, *query, cfg.selection);
  auto j = to_json(sel);
  j["query_id"] = query->sample.id;
  std::cout << j.dump(2) << '\n';

  if (!dump_graph.empty()) {
    std::ofstream out(dump_graph);
    if (!out) throw std::runtime_error("cannot write " + dump_graph);
    out << to_json(fused_graph_for(data.kb, *query, cfg.selection)).dump(2) << '\n';
  }
  return 0;
}

int run_evaluate(const EvalConfig& cfg, bool json) {
  const auto report = evaluate(cfg);
  std::cout << report.table();
  if (json) std::cout << report.to_json(false).dump(2) << '\n';
  return 0;
}

int run_sweep(const EvalConfig& cfg, const std::vector<double>& alphas, const std::vector<std::size_t>& shots,
              bool json) {
  const auto data = Dataset::load(cfg.kb_path, cfg.query_path);
  const auto tmpl = cfg.template_path.empty() ? PromptTemplate::builtin() : PromptTemplate::load(cfg.template_path);
  const auto oracle = make_oracle(cfg);
  const auto reports =
      alphas.empty() ? sweep_shots(cfg, data, oracle, shots, tmpl) : sweep_alpha(cfg, data, oracle, alphas, tmpl);
  nlohmann::json all = nlohmann::json::array();
  for (const auto& r : reports) {
    std::cout << r.table() << '\n';
    all.push_back(r.to_json(false));
  }
  if (json) std::cout << all.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-propagation exemplar selection for multimodal in-context forgery detection"};
  app.require_subcommand(1);

  // build-kb
  auto* build = app.add_subcommand("build-kb", "Validate a knowledge base and re-emit its canonical JSONL form");
  std::string build_in, build_out;
  bool build_validate = false;
  build->add_option("--in", build_in, "Input JSONL")->required()->check(CLI::ExistingFile);
  build->add_flag("--validate", build_validate, "Report a validation summary on stderr");
  build->add_option("--out", build_out, "Write canonical JSONL here instead of stdout");

  // shared selection options for select / evaluate / sweep
  std::string config_path, kb_path, query_path, mode, space, baseline, trace_path, template_path;
  std::size_t k1 = 0, k_e = 0, k2 = 0, steps = 0;
  double alpha = 0.0;
  std::vector<double> lambda;
  std::int64_t seed = -1;
  bool balance = false;
  auto add_selection = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--kb", kb_path, "Knowledge base JSONL");
    cmd->add_option("--queries", query_path, "Query JSONL");
    cmd->add_option("--mode", mode, "Retrieval mode")->check(CLI::IsMember({"i2i", "t2t", "ti2ti"}));
    cmd->add_option("--space", space, "Aggregation space")->check(CLI::IsMember({"i2i", "t2t", "ti2ti"}));
    cmd->add_option("--k1", k1, "Coarse candidate count");
    cmd->add_option("--k-e", k_e, "Neighbors per node");
    cmd->add_option("--k2", k2, "Exemplars kept");
    cmd->add_option("--alpha", alpha, "Propagation range in (0, 1]");
    cmd->add_option("--steps", steps, "Propagation steps T");
    cmd->add_option("--lambda", lambda, "Fusion weights: i2i t2t ti2ti")->expected(3);
    cmd->add_option("--baseline", baseline, "Selection strategy")
        ->check(CLI::IsMember({"gasp", "zero_shot", "random", "similarity_only"}));
    cmd->add_option("--seed", seed, "Seed for stochastic baselines");
    cmd->add_flag("--balance-labels", balance, "Cap either label at ceil(k2/2) exemplars");
    cmd->add_option("--template", template_path, "Prompt template file");
  };

  auto* select = app.add_subcommand("select", "Select exemplars for one query and print them as JSON");
  add_selection(select);
  std::string query_id, dump_graph;
  select->add_option("--query-id", query_id, "Query to select for (default: first)");
  select->add_option("--dump-graph", dump_graph, "Write the fused adjacency as JSON");

  EndpointFlags endpoint_flags;
  bool json_out = false;
  auto* eval = app.add_subcommand("evaluate", "Run the pipeline over a query set and report Acc/F1");
  add_selection(eval);
  endpoint_flags.add(eval);
  eval->add_option("--trace", trace_path, "Write per-query traces as JSON");
  eval->add_flag("--json", json_out, "Also print the report as JSON");

  // `sweep --alpha` takes a list here, so sweep does not reuse add_selection.
  auto* sweep = app.add_subcommand("sweep", "Evaluate over a grid of alpha or k2 values");
  std::vector<double> sweep_alphas;
  std::vector<std::size_t> sweep_shots_list;
  sweep->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  sweep->add_option("--kb", kb_path, "Knowledge base JSONL");
  sweep->add_option("--queries", query_path, "Query JSONL");
  auto* alpha_opt = sweep->add_option("--alpha", sweep_alphas, "Alpha grid, e.g. 0.2 0.4 0.6 0.8 1.0");
  auto* shots_opt = sweep->add_option("--shots", sweep_shots_list, "k2 grid, e.g. 1 2 3");
  alpha_opt->excludes(shots_opt);
  sweep->add_flag("--json", json_out, "Also print the reports as JSON");
  endpoint_flags.add(sweep);

  auto* synth = app.add_subcommand("synth", "Write a seeded two-cluster synthetic KB and query set");
  std::string synth_out;
  SyntheticSpec spec;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--n", spec.n_samples, "Knowledge base size");
  synth->add_option("--queries", spec.n_queries, "Query count");
  synth->add_option("--dv", spec.visual_dim, "Visual dimension");
  synth->add_option("--dt", spec.textual_dim, "Textual dimension");
  synth->add_option("--sep", spec.cluster_sep, "Cluster separation (>= 0)");
  synth->add_option("--seed", spec.seed, "Random seed");

  CLI11_PARSE(app, argc, argv);

  auto make_config = [&]() {
    EvalConfig cfg = config_path.empty() ? EvalConfig{} : EvalConfig::load(config_path);
    auto& sel = cfg.selection;
    if (!kb_path.empty()) cfg.kb_path = kb_path;
    if (!query_path.empty()) cfg.query_path = query_path;
    if (!trace_path.empty()) cfg.trace_path = trace_path;
    if (!template_path.empty()) cfg.template_path = template_path;
    if (!mode.empty()) sel.mode = *parse_retrieval_mode(mode);
    if (!space.empty()) sel.gstas.space = *parse_retrieval_mode(space);
    if (!baseline.empty()) sel.baseline = *parse_baseline(baseline);
    if (k1 > 0) sel.k1 = k1;
    if (k_e > 0) sel.k_e = k_e;
    if (k2 > 0) sel.gstas.k2 = k2;
    if (steps > 0) sel.gstas.steps = steps;
    if (alpha > 0.0) sel.gstas.alpha = alpha;
    if (lambda.size() == 3) sel.lambda = {lambda[0], lambda[1], lambda[2]};
    if (seed >= 0) sel.seed = static_cast<std::uint64_t>(seed);
    if (balance) sel.balance_labels = true;
    endpoint_flags.apply(cfg);
    sel.validate();
    if (cfg.kb_path.empty() || cfg.query_path.empty()) throw CLI::ValidationError("--kb and --queries (or a --config) are required");
    return cfg;
  };

  try {
    if (*build) return run_build_kb(build_in, build_validate, build_out);
    if (*select) return run_select(make_config(), query_id, dump_graph);
    if (*eval) return run_evaluate(make_config(), json_out);
    if (*sweep) {
      if (sweep_alphas.empty() && sweep_shots_list.empty()) throw CLI::ValidationError("sweep needs --alpha or --shots");
      return run_sweep(make_config(), sweep_alphas, sweep_shots_list, json_out);
    }
    if (*synth) {
      write_synthetic(generate_synthetic(spec), synth_out);
      std::cerr << "wrote " << synth_out << "/kb.jsonl and " << synth_out << "/queries.jsonl\n";
      return 0;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
