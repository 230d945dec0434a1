#include <fstream>
#include <regex>

#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace hyperhier;
namespace fs = std::filesystem;

namespace {

fs::path fixture(const char* name) { return testsupport::data_dir() / "hierarchies" / name; }

fs::path write_tree(const fs::path& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  write_file(p, text);
  return p;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_file(p)); }

const char* kChain = "r\n  x\n    y\n      z\n        p\n        q\n  s\n    t\n      u\n      v\n";

}  // namespace

TEST(Analyze, PizzaProperties) {
  const auto dir = testsupport::temp_dir("analyze");
  const auto r = cmd_analyze(fixture("pizza.txt"), dir);
  EXPECT_EQ(r.properties.num_nodes, 100u);
  EXPECT_EQ(r.properties.depth, 7u);
  EXPECT_EQ(r.properties.max_degree, 23u);
  const auto j = read_json(r.output);
  EXPECT_EQ(j["properties"]["leaves"], 78);
  EXPECT_TRUE(fs::exists(dir / j["manifest"].get<std::string>()));
}

TEST(Analyze, SingleNodeAndGraphDict) {
  const auto dir = testsupport::temp_dir("analyze1");
  EXPECT_EQ(cmd_analyze(write_tree(dir, "one.txt", "root\n"), dir).properties.num_edges, 0u);
  const auto r = cmd_analyze(write_tree(dir, "g.json", R"({"r": ["a", "b"], "a": [], "b": []})"), dir);
  EXPECT_EQ(r.properties.num_leaves, 2u);
}

TEST(Analyze, MalformedIndentReportsLine) {
  const auto dir = testsupport::temp_dir("analyze2");
  try {
    cmd_analyze(write_tree(dir, "bad.txt", "r\n  a\n     b\n"), dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_EQ(exit_code_for(e.code()), ExitCode::InputError);
  }
}

TEST(Embed, AutoDimensionAndManifest) {
  const auto dir = testsupport::temp_dir("embed");
  const auto r = cmd_embed(fixture("core50.txt"), {}, dir);
  EXPECT_EQ(r.embedding.config.dimension, 10u);
  const auto m = read_json(r.manifest);
  EXPECT_EQ(m["command"], "embed");
  EXPECT_EQ(m["config"]["dimension"], 10);
  EXPECT_EQ(m["config"]["strategy"], "hadamard");
  EXPECT_NE(read_file(r.embedding_file).find("manifest " + r.manifest.filename().string()), std::string::npos);
}

TEST(Embed, SameSeedGivesIdenticalFiles) {
  const auto a = testsupport::temp_dir("embed_a"), b = testsupport::temp_dir("embed_b");
  EmbedOptions o{Strategy::OptimizedUniform, 0, 5};
  const auto ra = cmd_embed(fixture("pascalvoc.txt"), o, a);
  const auto rb = cmd_embed(fixture("pascalvoc.txt"), o, b);
  EXPECT_EQ(read_file(ra.embedding_file), read_file(rb.embedding_file));
}

TEST(Embed, ExplicitDimensionTooSmall) {
  const auto dir = testsupport::temp_dir("embed_small");
  std::string star = "r\n";
  for (int i = 0; i < 26; ++i) star += "  c" + std::to_string(i) + "\n";
  try {
    cmd_embed(write_tree(dir, "star.txt", star), {Strategy::Hadamard, 4, 0}, dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegreeExceedsCapacity);
  }
}

TEST(Evaluate, MatchesInMemoryEvaluation) {
  const auto dir = testsupport::temp_dir("evaluate");
  const auto e = cmd_embed(fixture("pascalvoc.txt"), {}, dir);
  const auto r = cmd_evaluate(fixture("pascalvoc.txt"), e.embedding_file, 7, dir);
  EXPECT_EQ(r.report.d_avg, evaluate(e.embedding, testsupport::load_fixture("pascalvoc.txt"), 7).d_avg);
  const auto j = read_json(r.output);
  for (const char* k : {"d_avg", "d_wc", "max_stretch", "min_stretch", "num_pairs", "batch_rows", "strategy", "dimension", "tau", "seed"})
    EXPECT_TRUE(j.contains(k)) << k;
}

TEST(Evaluate, NodeMismatch) {
  const auto dir = testsupport::temp_dir("evaluate_mm");
  const auto e = cmd_embed(fixture("pascalvoc.txt"), {}, dir);
  try {
    cmd_evaluate(fixture("core50.txt"), e.embedding_file, 7, dir);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::NodeMismatch);
  }
}

TEST(Restructure, HeuristicOnChainFixture) {
  const auto dir = testsupport::temp_dir("restructure");
  const auto r = cmd_restructure(write_tree(dir, "chain.txt", kChain), Engine::Heuristic, RecommendationSet::parse("r1"), {}, dir);
  ASSERT_TRUE(r.outcome.passed());
  EXPECT_EQ(serialize_text(*r.outcome.candidate), "r\n  z\n    p\n    q\n  t\n    u\n    v\n");
  EXPECT_TRUE(fs::exists(dir / "chain.restructured.txt"));
  EXPECT_TRUE(fs::exists(dir / "chain.restructured.explanation.txt"));
  EXPECT_TRUE(fs::exists(dir / "chain.restructured.diff.json"));
  EXPECT_TRUE(fs::exists(dir / "chain.restructured.validation.json"));
}

TEST(Restructure, HeuristicWithoutTransformationFails) {
  const auto dir = testsupport::temp_dir("restructure_none");
  try {
    cmd_restructure(write_tree(dir, "star.txt", "r\n  a\n  b\n"), Engine::Heuristic, RecommendationSet::parse("r3"), {}, dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(exit_code_for(e.code()), ExitCode::ValidationFailure);
  }
}

TEST(Restructure, LlmWithPassingMock) {
  testsupport::ScopedKey key;
  testsupport::MockLlmServer mock({{200, "Collapsed chains.\n```\nr\n  z\n    p\n    q\n  s\n    t\n      u\n      v\n```"}});
  const auto dir = testsupport::temp_dir("restructure_llm");
  const auto r = cmd_restructure(write_tree(dir, "chain.txt", kChain), Engine::Llm, RecommendationSet::all(), mock.config(), dir);
  ASSERT_TRUE(r.outcome.passed());
  EXPECT_TRUE(fs::exists(dir / "chain.restructured.txt"));
  EXPECT_EQ(read_file(dir / "chain.restructured.explanation.txt"), "Collapsed chains.");
  EXPECT_TRUE(fs::exists(dir / "chain.restructured.diff.json"));
  EXPECT_TRUE(fs::exists(dir / "chain.restructured.transcript.json"));
}

TEST(Restructure, LlmWithFailingMockSavesTranscript) {
  testsupport::ScopedKey key;
  testsupport::MockLlmServer mock({{200, std::string("```\n") + kChain + "```"}});
  auto cfg = mock.config();
  cfg.max_follow_ups = 1;
  cfg.max_restarts = 0;
  const auto dir = testsupport::temp_dir("restructure_fail");
  try {
    cmd_restructure(write_tree(dir, "chain.txt", kChain), Engine::Llm, RecommendationSet::all(), cfg, dir);
    FAIL();
  } catch (const ExhaustedAttemptsError& e) {
    EXPECT_EQ(exit_code_for(e.code()), ExitCode::ValidationFailure);
  }
  const auto t = read_json(dir / "chain.restructured.transcript.json");
  EXPECT_EQ(t["turns"].size(), 4u);
  EXPECT_FALSE(fs::exists(dir / "chain.restructured.txt"));
}

TEST(Restructure, MissingKeyIsServiceFailure) {
  const auto dir = testsupport::temp_dir("restructure_key");
  LlmConfig cfg;
  cfg.api_key_env = "HYPERHIER_DEFINITELY_UNSET";
  try {
    cmd_restructure(write_tree(dir, "chain.txt", kChain), Engine::Llm, RecommendationSet::all(), cfg, dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AuthMissing);
    EXPECT_EQ(exit_code_for(e.code()), ExitCode::ServiceFailure);
  }
}

TEST(Validate, WritesReport) {
  const auto dir = testsupport::temp_dir("validate");
  const auto orig = write_tree(dir, "o.txt", kChain);
  const auto rep = cmd_validate(orig, orig, dir);
  EXPECT_FALSE(rep.structurally_different);
  EXPECT_EQ(read_json(dir / "o.validate.json")["passed"], false);
}

TEST(Compare, IdenticalInputsFailValidation) {
  const auto dir = testsupport::temp_dir("compare_same");
  try {
    cmd_compare(fixture("core50.txt"), fixture("core50.txt"), {}, dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationFailed);
  }
}

TEST(Compare, ChainFixtureImproves) {
  const auto dir = testsupport::temp_dir("compare_chain");
  const auto orig = write_tree(dir, "chain.txt", kChain);
  const auto flat = write_tree(dir, "flat.txt", "r\n  z\n    p\n    q\n  t\n    u\n    v\n");
  const auto c = cmd_compare(orig, flat, {}, dir);
  ASSERT_EQ(c.rows.size(), 2u);
  EXPECT_EQ(c.rows[0].config.dimension, c.rows[1].config.dimension);
  EXPECT_LT(c.rows[1].report.d_avg, c.rows[0].report.d_avg);
  EXPECT_EQ(c.diff.depth_delta, -2);
}

TEST(Compare, SharedTauOption) {
  CompareOptions o;
  o.shared_tau = true;
  const auto c = compare_trees(parse_text(kChain), parse_text("r\n  z\n    p\n    q\n  t\n    u\n    v\n"), o);
  EXPECT_EQ(c.rows[0].config.tau, c.rows[1].config.tau);
}

TEST(Compare, PizzaFixturePairBothStrategies) {
  const auto dir = testsupport::temp_dir("compare_pizza");
  CompareOptions o;
  o.strategies = {Strategy::Hadamard, Strategy::OptimizedUniform};
  const auto c = cmd_compare(fixture("pizza.txt"), fixture("pizza_restructured.txt"), o, dir);
  EXPECT_EQ(c.dimension, 70u);
  ASSERT_EQ(c.rows.size(), 4u);
  EXPECT_NEAR(c.rows[0].report.d_avg, 0.126, 0.02);
  EXPECT_NEAR(c.rows[0].report.d_wc, 1.180, 0.05);
  EXPECT_NEAR(c.rows[1].report.d_avg, 0.065, 0.02);
  EXPECT_NEAR(c.rows[1].report.d_wc, 1.090, 0.05);
  const auto j = read_json(dir / "pizza.compare.json");
  EXPECT_EQ(j["rows"].size(), 4u);
}

TEST(Ablate, GridShapeAndBaseline) {
  const auto dir = testsupport::temp_dir("ablate");
  const auto tree = write_tree(dir, "chain.txt", kChain);
  AblationOptions o;
  const auto rows = cmd_ablate(tree, o, dir);
  ASSERT_EQ(rows.size(), 14u);
  for (std::size_t s = 0; s < 2; ++s) {
    EXPECT_EQ(rows[7 * s].subset, "baseline");
    std::vector<std::string> subsets;
    for (std::size_t i = 1; i < 7; ++i) subsets.push_back(rows[7 * s + i].subset);
    EXPECT_EQ(subsets, (std::vector<std::string>{"r1", "r2", "r3", "r1,r2,r3", "r2,r3,r4", "r1,r2,r3,r4"}));
  }
  EXPECT_EQ(rows[3].status, "no transformation");
  EXPECT_EQ(rows[1].status, "restructured");

  const auto e = cmd_embed(tree, {}, dir);
  const auto ev = cmd_evaluate(tree, e.embedding_file, o.batch_rows, dir);
  EXPECT_EQ(rows[0].report->d_avg, ev.report.d_avg);
  EXPECT_EQ(rows[0].report->d_wc, ev.report.d_wc);
}

TEST(ExportViz, DotEdgesAndNodes) {
  const auto dir = testsupport::temp_dir("viz");
  const auto p = cmd_export_viz(write_tree(dir, "e.txt", "r\n  a\n"), dir);
  const auto dot = read_file(p);
  EXPECT_NE(dot.find("\"r\" -> \"a\";"), std::string::npos);
}

TEST(ExportViz, PizzaRoundTrip) {
  const auto dir = testsupport::temp_dir("viz_pizza");
  const auto h = testsupport::load_fixture("pizza.txt");
  const auto dot = read_file(cmd_export_viz(fixture("pizza.txt"), dir));
  // Parse node declarations and edges back out of the DOT text.
  std::set<std::string> nodes;
  std::set<std::pair<std::string, std::string>> edges;
  const std::regex node_re(R"re(^\s*"([^"]*)";$)re"), edge_re(R"re(^\s*"([^"]*)" -> "([^"]*)";$)re");
  std::istringstream in(dot);
  for (std::string line; std::getline(in, line);) {
    std::smatch m;
    if (std::regex_match(line, m, edge_re)) edges.emplace(m[1], m[2]);
    else if (std::regex_match(line, m, node_re)) nodes.insert(m[1]);
  }
  EXPECT_EQ(nodes.size(), h.size());
  EXPECT_EQ(edges, h.edge_set());
  for (const auto& n : h.names()) EXPECT_TRUE(nodes.contains(n));
}
