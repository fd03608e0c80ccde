#include "gasp/kb.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace gasp;

namespace {

std::string record(const std::string& id, const std::string& visual, const std::string& textual,
                   const std::string& label = "authentic", const std::string& type = "none") {
  return R"({"id":")" + id + R"(","image_ref":"img/)" + id + R"(.png","text":"caption )" + id +
         R"(","label":")" + label + R"(","manipulation_type":")" + type + R"(","visual":)" + visual +
         R"(,"textual":)" + textual + "}";
}

KnowledgeBase load_text(const std::string& text) {
  std::istringstream in(text);
  return load_kb(in);
}

std::string error_of(const std::string& text) {
  try {
    load_text(text);
  } catch (const KbError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("load_kb normalizes embeddings and keeps file order") {
  const auto kb = load_text(record("b", "[3,4]", "[0,2]") + "\n" +
                            record("a", "[1,0]", "[1,1]", "manipulated", "face_swap") + "\n");
  REQUIRE(kb.size() == 2);
  CHECK(kb.visual_dim() == 2);
  CHECK(kb.textual_dim() == 2);
  CHECK(kb.sample(0).id == "b");
  CHECK(kb.sample(1).id == "a");
  CHECK(kb.embedding(0).visual[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(kb.embedding(0).visual[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(kb.embedding(0).textual == std::vector<double>{0.0, 1.0});
  CHECK(kb.sample(1).manipulation_type == ManipulationType::face_swap);
  CHECK(kb.ordinal("a") == 1);
  CHECK_FALSE(kb.find("zzz").has_value());
}

TEST_CASE("load_kb reads 100 records") {
  std::string text;
  for (int i = 0; i < 100; ++i) text += record("s" + std::to_string(i), "[1,2,3]", "[4,5]") + "\n";
  CHECK(load_text(text).size() == 100);
}

TEST_CASE("load_kb error paths") {
  CHECK(error_of("") == "empty knowledge base");
  CHECK(error_of("\n\n") == "empty knowledge base");

  SUBCASE("malformed line reports its number") {
    const auto msg = error_of(record("a", "[1]", "[1]") + "\n{not json\n");
    CHECK(msg.rfind("line 2:", 0) == 0);
  }
  SUBCASE("dimension mismatch") {
    const auto msg = error_of(record("a", "[1,0]", "[1]") + "\n" + record("b", "[1,0,0]", "[1]"));
    CHECK(msg.find("dimension mismatch") != std::string::npos);
    CHECK(msg.rfind("line 2:", 0) == 0);
  }
  SUBCASE("duplicate id") {
    CHECK(error_of(record("a", "[1]", "[1]") + "\n" + record("a", "[1]", "[1]")).find("duplicate id") !=
          std::string::npos);
  }
  SUBCASE("zero-norm vector") {
    CHECK(error_of(record("a", "[0,0]", "[1]")).find("zero-norm") != std::string::npos);
  }
  SUBCASE("label and manipulation type must agree") {
    CHECK(error_of(record("a", "[1]", "[1]", "manipulated", "none")).find("mismatch") != std::string::npos);
    CHECK(error_of(record("a", "[1]", "[1]", "authentic", "text_swap")).find("mismatch") != std::string::npos);
  }
  SUBCASE("unknown enum values") {
    CHECK(error_of(record("a", "[1]", "[1]", "maybe", "none")).find("unknown label") != std::string::npos);
  }
  SUBCASE("missing field") {
    CHECK(error_of(R"({"id":"a","image_ref":"x","text":"t","label":"authentic","visual":[1],"textual":[1]})")
              .find("manipulation_type") != std::string::npos);
  }
}

TEST_CASE("dangling embedding sample_id is rejected") {
  std::vector<Sample> samples{{"a", "img", "t", Label::authentic, ManipulationType::none, {}}};
  std::vector<EmbeddingRecord> embeddings{{"b", {1.0}, {1.0}}};
  CHECK_THROWS_WITH_AS(KnowledgeBase(samples, embeddings), doctest::Contains("dangling"), KbError);
}

TEST_CASE("joint_embedding concatenates and renormalizes") {
  const auto axes = joint_embedding({"x", {1.0, 0.0}, {0.0, 1.0}});
  const double h = 1.0 / std::sqrt(2.0);
  REQUIRE(axes.size() == 4);
  CHECK(axes[0] == doctest::Approx(h).epsilon(1e-15));
  CHECK(axes[1] == 0.0);
  CHECK(axes[2] == 0.0);
  CHECK(axes[3] == doctest::Approx(h).epsilon(1e-15));

  // Hand oracle: concat (0.6, 0.8, 1, 0) has norm sqrt(2).
  const auto j = joint_embedding({"y", {0.6, 0.8}, {1.0, 0.0}});
  CHECK(std::abs(l2_norm(j) - 1.0) <= 1e-9);
  CHECK(j[0] == doctest::Approx(0.6 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(j[2] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

  EmbeddingRecord big{"z", std::vector<double>(512, 0.0), std::vector<double>(512, 0.0)};
  big.visual[3] = 1.0;
  big.textual[7] = 1.0;
  CHECK(joint_embedding(big).size() == 1024);
}

TEST_CASE("property: joint_embedding has unit norm") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    EmbeddingRecord rec{"r", std::vector<double>(1 + trial % 17), std::vector<double>(1 + trial % 11)};
    for (auto& x : rec.visual) x = normal(rng);
    for (auto& x : rec.textual) x = normal(rng);
    rec.visual = normalized(rec.visual);
    rec.textual = normalized(rec.textual);
    CHECK(std::abs(l2_norm(joint_embedding(rec)) - 1.0) <= 1e-9);
  }
}

TEST_CASE("property: save/load round trip is stable") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::string text;
  for (int i = 0; i < 40; ++i) {
    std::ostringstream v, t;
    v << "[" << normal(rng) << "," << normal(rng) << "," << normal(rng) << "]";
    t << "[" << normal(rng) << "," << normal(rng) << "]";
    const bool fake = i % 3 == 0;
    text += record("id" + std::to_string(i), v.str(), t.str(), fake ? "manipulated" : "authentic",
                   fake ? "text_attribute" : "none") +
            "\n";
  }
  const auto first = load_text(text);
  std::ostringstream saved;
  save_kb(first, saved);
  const auto second = load_text(saved.str());
  REQUIRE(second.size() == first.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(second.sample(i).id == first.sample(i).id);
    CHECK(second.sample(i).label == first.sample(i).label);
    for (std::size_t k = 0; k < first.visual_dim(); ++k)
      CHECK(std::abs(second.embedding(i).visual[k] - first.embedding(i).visual[k]) <= 1e-7);
    for (std::size_t k = 0; k < first.textual_dim(); ++k)
      CHECK(std::abs(second.embedding(i).textual[k] - first.embedding(i).textual[k]) <= 1e-7);
  }
}

TEST_CASE("canonical line format") {
  const auto kb = load_text(record("a", "[3,4]", "[1]"));
  CHECK(to_jsonl(kb.sample(0), kb.embedding(0)) ==
        R"({"id":"a","image_ref":"img/a.png","text":"caption a","label":"authentic","manipulation_type":"none","visual":[0.6,0.8],"textual":[1.0]})");
}
