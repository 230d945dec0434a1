// hyperhier command-line tool.
//
//   hyperhier analyze TREE
//   hyperhier embed TREE --strategy hadamard|uniform --dim auto|N --seed S
//   hyperhier evaluate TREE EMBEDDING --batch-rows B
//   hyperhier restructure TREE --engine heuristic|llm --recs r1,r2,r3,r4
//   hyperhier validate ORIGINAL CANDIDATE
//   hyperhier compare ORIGINAL RESTRUCTURED --strategy ...
//   hyperhier ablate TREE --engine heuristic|llm --grid table2
//   hyperhier export-viz TREE
//
// Exit codes: 0 ok, 1 validation failure, 2 input error, 3 service failure.

#include <cstdio>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hyperhier/hyperhier.hpp"

namespace hh = hyperhier;

namespace {

std::vector<hh::Strategy> parse_strategies(const std::string& s) {
  if (s == "both" || s == "all") return {hh::Strategy::Hadamard, hh::Strategy::OptimizedUniform};
  return {hh::parse_strategy(s)};
}

std::size_t parse_dim(const std::string& s) {
  if (s == "auto") return 0;
  try {
    std::size_t pos = 0;
    const auto n = std::stoul(s, &pos);
    if (pos == s.size() && n >= 2) return n;
  } catch (const std::exception&) {
  }
  throw hh::Error(hh::ErrorCode::InvalidConfig, "--dim must be 'auto' or an integer >= 2, got '" + s + "'");
}

void print_json(const hh::ordered_json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchy restructuring and hyperbolic embedding evaluation"};
  app.require_subcommand(1);
  std::vector<std::string> args(argv, argv + argc);

  std::string out_dir = "out";
  app.add_option("-o,--out", out_dir, "Output directory")->capture_default_str();

  std::string tree, other, strategy = "hadamard", dim = "auto", engine = "heuristic", recs = "all", grid = "table2";
  std::uint64_t seed = 0;
  std::size_t batch_rows = 256;
  double epsilon = std::numeric_limits<double>::epsilon();
  bool shared_tau = false;

  auto* analyze = app.add_subcommand("analyze", "Tree properties");
  analyze->add_option("tree", tree, "Hierarchy file (.txt indented or .json graph dictionary)")->required();

  auto* emb = app.add_subcommand("embed", "Construct a Poincare-ball embedding");
  emb->add_option("tree", tree)->required();
  emb->add_option("--strategy", strategy, "hadamard | uniform")->capture_default_str();
  emb->add_option("--dim", dim, "auto | N")->capture_default_str();
  emb->add_option("--seed", seed)->capture_default_str();
  emb->add_option("--epsilon", epsilon, "Machine precision used for tau");

  auto* eval = app.add_subcommand("evaluate", "Distortion of an embedding");
  eval->add_option("tree", tree)->required();
  eval->add_option("embedding", other)->required();
  eval->add_option("--batch-rows", batch_rows)->capture_default_str()->check(CLI::PositiveNumber);

  hh::LlmConfig llm = hh::LlmConfig::from_env();
  auto add_llm = [&](CLI::App* sub) {
    sub->add_option("--max-follow-ups", llm.max_follow_ups)->capture_default_str();
    sub->add_option("--max-restarts", llm.max_restarts)->capture_default_str();
    sub->add_option("--timeout", llm.timeout_seconds, "Request timeout in seconds")->capture_default_str();
    sub->add_option("--temperature", llm.temperature)->capture_default_str();
  };

  auto* restr = app.add_subcommand("restructure", "Restructure a hierarchy");
  restr->add_option("tree", tree)->required();
  restr->add_option("--engine", engine, "heuristic | llm")->capture_default_str();
  restr->add_option("--recs", recs, "Comma list of r1..r4, or all")->capture_default_str();
  add_llm(restr);

  auto* val = app.add_subcommand("validate", "Check a candidate against the four criteria");
  val->add_option("original", tree)->required();
  val->add_option("candidate", other)->required();

  auto* cmp = app.add_subcommand("compare", "Embed and evaluate an original/restructured pair");
  cmp->add_option("original", tree)->required();
  cmp->add_option("restructured", other)->required();
  cmp->add_option("--strategy", strategy, "hadamard | uniform | both")->capture_default_str();
  cmp->add_option("--seed", seed)->capture_default_str();
  cmp->add_option("--batch-rows", batch_rows)->capture_default_str()->check(CLI::PositiveNumber);
  cmp->add_flag("--shared-tau", shared_tau, "Use the deeper tree's tau for both trees");

  auto* abl = app.add_subcommand("ablate", "Recommendation-subset ablation grid");
  abl->add_option("tree", tree)->required();
  abl->add_option("--engine", engine, "heuristic | llm")->capture_default_str();
  abl->add_option("--grid", grid, "table2")->capture_default_str();
  abl->add_option("--strategy", strategy, "hadamard | uniform | both")->default_val("both");
  abl->add_option("--seed", seed)->capture_default_str();
  abl->add_option("--batch-rows", batch_rows)->capture_default_str()->check(CLI::PositiveNumber);
  add_llm(abl);

  auto* viz = app.add_subcommand("export-viz", "Write the tree as Graphviz DOT");
  viz->add_option("tree", tree)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(hh::ExitCode::InputError);
  }

  try {
    if (analyze->parsed()) {
      const auto r = hh::cmd_analyze(tree, out_dir, args);
      print_json(hh::properties_json(r.properties));
    } else if (emb->parsed()) {
      hh::EmbedOptions o{hh::parse_strategy(strategy), parse_dim(dim), seed, epsilon};
      const auto r = hh::cmd_embed(tree, o, out_dir, args);
      std::cout << r.embedding_file.string() << '\n';
    } else if (eval->parsed()) {
      const auto r = hh::cmd_evaluate(tree, other, batch_rows, out_dir, args);
      print_json(hh::report_json(r.report));
    } else if (restr->parsed()) {
      try {
        const auto r = hh::cmd_restructure(tree, hh::parse_engine(engine), hh::RecommendationSet::parse(recs), llm,
                                           out_dir, args);
        for (const auto& p : r.outputs) std::cout << p.string() << '\n';
      } catch (const hh::ExhaustedAttemptsError& e) {
        std::cerr << "error: " << e.what() << " (transcript written to " << out_dir << ")\n";
        return static_cast<int>(hh::ExitCode::ValidationFailure);
      }
    } else if (val->parsed()) {
      const auto r = hh::cmd_validate(tree, other, out_dir, args);
      print_json(hh::validation_json(r));
      return static_cast<int>(r.passed() ? hh::ExitCode::Ok : hh::ExitCode::ValidationFailure);
    } else if (cmp->parsed()) {
      hh::CompareOptions o;
      o.strategies = parse_strategies(strategy);
      o.seed = seed;
      o.batch_rows = batch_rows;
      o.shared_tau = shared_tau;
      print_json(hh::comparison_json(hh::cmd_compare(tree, other, o, out_dir, args)));
    } else if (abl->parsed()) {
      if (grid != "table2") throw hh::Error(hh::ErrorCode::InvalidConfig, "only --grid table2 is available");
      hh::AblationOptions o;
      o.engine = hh::parse_engine(engine);
      o.strategies = parse_strategies(strategy);
      o.seed = seed;
      o.batch_rows = batch_rows;
      o.llm = llm;
      print_json(hh::ablation_json(hh::cmd_ablate(tree, o, out_dir, args)));
    } else if (viz->parsed()) {
      std::cout << hh::cmd_export_viz(tree, out_dir, args).string() << '\n';
    }
  } catch (const hh::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(hh::exit_code_for(e.code()));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(hh::ExitCode::InputError);
  }
  return 0;
}
