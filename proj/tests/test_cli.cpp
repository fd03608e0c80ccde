#include <doctest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int status = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string("\"") + GASP_CLI_PATH + "\" " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workdir {
  fs::path dir;
  Workdir() {
    dir = fs::temp_directory_path() / "gasp_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    REQUIRE(run("synth --out \"" + dir.string() + "\" --n 40 --queries 12 --dv 6 --dt 5 --seed 4").status == 0);
  }
  std::string kb() const { return "\"" + (dir / "kb.jsonl").string() + "\""; }
  std::string queries() const { return "\"" + (dir / "queries.jsonl").string() + "\""; }
  std::string data_args() const { return "--kb " + kb() + " --queries " + queries(); }
};

}  // namespace

TEST_CASE("build-kb validates and re-emits canonical JSONL") {
  Workdir w;
  const auto r = run("build-kb --in " + w.kb() + " --validate");
  CHECK(r.status == 0);
  // Same records; components may move by an f32 ulp after renormalization.
  std::istringstream emitted(r.out), original(slurp(w.dir / "kb.jsonl"));
  std::string a, b;
  int lines = 0;
  while (std::getline(original, a)) {
    REQUIRE(std::getline(emitted, b));
    const auto ja = nlohmann::json::parse(a), jb = nlohmann::json::parse(b);
    CHECK(ja["id"] == jb["id"]);
    CHECK(ja["label"] == jb["label"]);
    CHECK(ja["manipulation_type"] == jb["manipulation_type"]);
    for (const char* key : {"visual", "textual"}) {
      REQUIRE(ja[key].size() == jb[key].size());
      for (std::size_t k = 0; k < ja[key].size(); ++k)
        CHECK(std::abs(ja[key][k].get<double>() - jb[key][k].get<double>()) <= 1e-7);
    }
    ++lines;
  }
  CHECK(lines == 40);
  CHECK_FALSE(std::getline(emitted, b));

  const auto bad = w.dir / "bad.jsonl";
  std::ofstream(bad) << R"({"id":"a","image_ref":"x","text":"t","label":"authentic","manipulation_type":"none","visual":[0],"textual":[1]})"
                     << "\n";
  CHECK(run("build-kb --in \"" + bad.string() + "\" --validate").status != 0);
  CHECK(run("build-kb --in \"" + (w.dir / "missing.jsonl").string() + "\"").status != 0);
}

TEST_CASE("select prints exemplars and dumps the fused graph") {
  Workdir w;
  const auto graph = w.dir / "graph.json";
  const auto r = run("select " + w.data_args() + " --mode ti2ti --k1 20 --k2 3 --dump-graph \"" + graph.string() + "\"");
  REQUIRE(r.status == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["candidates"].size() == 20);
  CHECK(j["exemplar_ids"].size() == 3);

  const auto g = nlohmann::json::parse(slurp(graph));
  CHECK(g["adjacency"].size() == 21);

  // Same invocation, same answer.
  CHECK(run("select " + w.data_args() + " --mode ti2ti --k1 20 --k2 3").out == r.out);
  CHECK(run("select " + w.data_args() + " --mode nonsense").status != 0);
}

TEST_CASE("evaluate with the mock oracle from a config file") {
  Workdir w;
  const auto cfg = w.dir / "eval.json";
  std::ofstream(cfg) << nlohmann::json{{"kb", "kb.jsonl"},
                                       {"queries", "queries.jsonl"},
                                       {"trace", "trace.json"},
                                       {"mock", true},
                                       {"k2", 3}}
                            .dump();
  const auto r = run("evaluate --config \"" + cfg.string() + "\" --json");
  REQUIRE(r.status == 0);
  CHECK(r.out.find("overall") != std::string::npos);
  const auto json_start = r.out.find("\n{");
  REQUIRE(json_start != std::string::npos);
  const auto report = nlohmann::json::parse(r.out.substr(json_start));
  CHECK(report["overall"]["total"] == 12);
  CHECK(fs::exists(w.dir / "trace.json"));
}

TEST_CASE("sweep runs alpha and shot grids") {
  Workdir w;
  const auto alpha = run("sweep " + w.data_args() + " --mock --alpha 0.2 0.6 1.0");
  CHECK(alpha.status == 0);
  CHECK(alpha.out.find("[alpha=0.2]") != std::string::npos);
  CHECK(alpha.out.find("[alpha=1]") != std::string::npos);

  const auto shots = run("sweep " + w.data_args() + " --mock --shots 1 2 3 --json");
  CHECK(shots.status == 0);
  const auto json_start = shots.out.find("\n[\n");
  REQUIRE(json_start != std::string::npos);
  CHECK(nlohmann::json::parse(shots.out.substr(json_start)).size() == 3);

  CHECK(run("sweep " + w.data_args() + " --mock").status != 0);
}
