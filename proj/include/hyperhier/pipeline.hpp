#pragma once

// Command implementations behind the hyperhier tool. Each command reads its
// inputs, writes its outputs plus a run manifest into an output directory and
// returns the in-memory result so tests can inspect it without re-parsing.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperhier/embed.hpp"
#include "hyperhier/error.hpp"
#include "hyperhier/graph_dict.hpp"
#include "hyperhier/hierarchy.hpp"
#include "hyperhier/llm_gateway.hpp"
#include "hyperhier/metrics.hpp"
#include "hyperhier/restructure.hpp"

namespace hyperhier {

namespace fs = std::filesystem;

enum class ExitCode : int { Ok = 0, ValidationFailure = 1, InputError = 2, ServiceFailure = 3 };

inline ExitCode exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::ValidationFailed:
    case ErrorCode::ExhaustedAttempts:
      return ExitCode::ValidationFailure;
    case ErrorCode::AuthMissing:
    case ErrorCode::Timeout:
    case ErrorCode::RateLimited:
    case ErrorCode::MalformedResponse:
    case ErrorCode::TransportError:
      return ExitCode::ServiceFailure;
    default:
      return ExitCode::InputError;
  }
}

// ---------------------------------------------------------------------------
// I/O helpers.

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, std::string_view content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out << content;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + p.string());
}

/// .json files are graph dictionaries; anything else is indented text.
inline Hierarchy load_hierarchy(const fs::path& p) {
  const auto text = read_file(p);
  if (p.extension() == ".json") {
    ordered_json doc;
    try {
      doc = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Io, p.string() + ": " + e.what());
    }
    return parse_graph_dict(doc);
  }
  return parse_text(text);
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Run manifest.

struct RunManifest {
  RunManifest(std::string cmd, std::vector<std::string> args, std::vector<std::string> in)
      : command(std::move(cmd)), argv(std::move(args)), inputs(std::move(in)) {}

  std::string command;
  std::vector<std::string> argv;  // filled in by the CLI
  std::vector<std::string> inputs;
  ordered_json config = ordered_json::object();
  std::vector<std::string> outputs;
  std::string started_at = utc_now();
  std::string finished_at;

  ordered_json to_json() const {
    return {{"command", command}, {"argv", argv},     {"inputs", inputs},           {"config", config},
            {"outputs", outputs}, {"started_at", started_at}, {"finished_at", finished_at}};
  }
};

inline ordered_json config_json(const EmbeddingConfig& c, Strategy s, std::uint64_t seed) {
  return {{"dimension", c.dimension}, {"tau", c.tau},          {"epsilon", c.epsilon},
          {"max_path_length", c.max_path_length}, {"strategy", to_string(s)}, {"seed", seed}};
}

inline ordered_json properties_json(const TreeProperties& p) {
  return {{"nodes", p.num_nodes},   {"edges", p.num_edges},       {"depth", p.depth},
          {"leaves", p.num_leaves}, {"max_degree", p.max_degree}, {"avg_branching_factor", p.avg_branching_factor}};
}

inline ordered_json report_json(const DistortionReport& r) {
  return {{"d_avg", r.d_avg},
          {"d_wc", r.d_wc},
          {"max_stretch", r.max_stretch},
          {"min_stretch", r.min_stretch},
          {"num_pairs", r.num_pairs},
          {"batch_rows", r.batch_rows},
          {"wall_seconds", r.wall_seconds}};
}

inline ordered_json validation_json(const ValidationReport& v) {
  return {{"passed", v.passed()},
          {"structurally_different", v.structurally_different},
          {"leaves_retained", v.leaves_retained},
          {"no_hallucination", v.no_hallucination},
          {"format_ok", v.format_ok},
          {"missing_leaves", v.details.missing_leaves},
          {"invented_nodes", v.details.invented_nodes},
          {"structure_error", v.details.structure_error},
          {"parse_error", v.details.parse_error}};
}

inline ordered_json diff_json(const StructuralDiff& d) {
  return {{"removed_nodes", d.removed_nodes}, {"promoted_nodes", d.promoted_nodes}, {"node_delta", d.node_delta},
          {"depth_delta", d.depth_delta},     {"leaf_delta", d.leaf_delta},         {"avg_bf_delta", d.avg_bf_delta}};
}

/// Writes `doc` (with a "manifest" back-reference) and the manifest itself.
class OutputSet {
 public:
  OutputSet(fs::path dir, std::string base, RunManifest manifest)
      : dir_(std::move(dir)), base_(std::move(base)), manifest_(std::move(manifest)) {
    fs::create_directories(dir_);
  }

  std::string manifest_name() const { return base_ + ".manifest.json"; }

  fs::path write(const std::string& suffix, std::string_view content) {
    const auto p = dir_ / (base_ + suffix);
    write_file(p, content);
    manifest_.outputs.push_back(p.string());
    return p;
  }

  fs::path write_json(const std::string& suffix, ordered_json doc) {
    doc["manifest"] = manifest_name();
    return write(suffix, doc.dump(2) + "\n");
  }

  fs::path finish() {
    manifest_.finished_at = utc_now();
    const auto p = dir_ / manifest_name();
    write_file(p, manifest_.to_json().dump(2) + "\n");
    return p;
  }

  RunManifest& manifest() { return manifest_; }

 private:
  fs::path dir_;
  std::string base_;
  RunManifest manifest_;
};

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeResult {
  TreeProperties properties;
  fs::path output;
};

inline AnalyzeResult cmd_analyze(const fs::path& input, const fs::path& out_dir, std::vector<std::string> argv = {}) {
  const auto h = load_hierarchy(input);
  AnalyzeResult r{compute_properties(h), {}};
  OutputSet out(out_dir, input.stem().string() + ".analyze", {"analyze", std::move(argv), {input.string()}});
  r.output = out.write_json(".json", {{"input", input.string()}, {"properties", properties_json(r.properties)}});
  out.finish();
  return r;
}

// ---------------------------------------------------------------------------
// embed

struct EmbedOptions {
  Strategy strategy = Strategy::Hadamard;
  std::size_t dimension = 0;  // 0: select_dimension(max degree)
  std::uint64_t seed = 0;
  double epsilon = std::numeric_limits<double>::epsilon();
};

struct EmbedCommandResult {
  EmbeddingResult<Real> embedding;
  fs::path embedding_file;
  fs::path manifest;
};

inline EmbeddingConfig config_for(const Hierarchy& h, const EmbedOptions& o) {
  const auto p = compute_properties(h);
  return EmbeddingConfig::for_tree(p.depth, p.max_degree, o.epsilon, o.dimension);
}

inline EmbedCommandResult cmd_embed(const fs::path& input, const EmbedOptions& opts, const fs::path& out_dir,
                                    std::vector<std::string> argv = {}) {
  const auto h = load_hierarchy(input);
  const auto config = config_for(h, opts);
  EmbedCommandResult r{embed<Real>(h, config, opts.strategy, opts.seed), {}, {}};
  const std::string base = input.stem().string() + "." + std::string(to_string(opts.strategy));
  RunManifest m{"embed", std::move(argv), {input.string()}};
  m.config = config_json(config, opts.strategy, opts.seed);
  OutputSet out(out_dir, base, std::move(m));
  std::ostringstream ss;
  write_embedding(ss, r.embedding, out.manifest_name());
  r.embedding_file = out.write(".emb", ss.str());
  r.manifest = out.finish();
  return r;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateCommandResult {
  DistortionReport report;
  fs::path output;
};

inline EvaluateCommandResult cmd_evaluate(const fs::path& tree, const fs::path& embedding_file, std::size_t batch_rows,
                                          const fs::path& out_dir, std::vector<std::string> argv = {}) {
  const auto h = load_hierarchy(tree);
  std::ifstream in(embedding_file);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + embedding_file.string());
  const auto emb = read_embedding<Real>(in);
  EvaluateCommandResult r{evaluate(emb, h, batch_rows), {}};
  RunManifest m{"evaluate", std::move(argv), {tree.string(), embedding_file.string()}};
  m.config = config_json(emb.config, emb.strategy, emb.seed);
  m.config["batch_rows"] = batch_rows;
  OutputSet out(out_dir, embedding_file.stem().string() + ".evaluate", std::move(m));
  auto doc = report_json(r.report);
  doc["nodes"] = h.size();
  doc["strategy"] = to_string(emb.strategy);
  doc["dimension"] = emb.config.dimension;
  doc["tau"] = emb.config.tau;
  doc["seed"] = emb.seed;
  r.output = out.write_json(".json", std::move(doc));
  out.finish();
  return r;
}

// ---------------------------------------------------------------------------
// validate

inline ValidationReport cmd_validate(const fs::path& original, const fs::path& candidate, const fs::path& out_dir,
                                     std::vector<std::string> argv = {}) {
  const auto h = load_hierarchy(original);
  auto rep = validate_candidate(h, read_file(candidate));
  OutputSet out(out_dir, candidate.stem().string() + ".validate",
                {"validate", std::move(argv), {original.string(), candidate.string()}});
  out.write_json(".json", validation_json(rep));
  out.finish();
  return rep;
}

// ---------------------------------------------------------------------------
// restructure

enum class Engine { Heuristic, Llm };

inline Engine parse_engine(std::string_view s) {
  if (s == "heuristic") return Engine::Heuristic;
  if (s == "llm") return Engine::Llm;
  throw Error(ErrorCode::InvalidConfig, "unknown engine '" + std::string(s) + "' (expected heuristic or llm)");
}

struct RestructureCommandResult {
  RestructureOutcome outcome;
  std::optional<SessionTranscript> transcript;
  std::vector<fs::path> outputs;
};

/// Heuristic engine: chain collapse etc., then the validation gate. An
/// unchanged tree fails criterion 1 and is reported as "no transformation".
/// LLM engine: restructure_session. On failure the validation report (and
/// transcript) are written and ValidationFailed / ExhaustedAttempts thrown.
inline RestructureCommandResult cmd_restructure(const fs::path& input, Engine engine, const RecommendationSet& recs,
                                                const LlmConfig& llm, const fs::path& out_dir,
                                                std::vector<std::string> argv = {}) {
  if (!recs.any()) throw Error(ErrorCode::EmptyRecommendationSet, "select at least one recommendation");
  const auto h = load_hierarchy(input);
  RunManifest m{"restructure", std::move(argv), {input.string()}};
  m.config = {{"engine", engine == Engine::Llm ? "llm" : "heuristic"}, {"recommendations", recs.to_string()}};
  if (engine == Engine::Llm)
    m.config["llm"] = {{"base_url", llm.base_url},           {"model", llm.model},
                       {"temperature", llm.temperature},     {"max_follow_ups", llm.max_follow_ups},
                       {"max_restarts", llm.max_restarts}};
  const std::string base = input.stem().string() + ".restructured";
  OutputSet out(out_dir, base, std::move(m));
  RestructureCommandResult r;

  if (engine == Engine::Heuristic) {
    r.outcome = heuristic_outcome(h, recs);
  } else {
    try {
      auto s = restructure_session(llm, h, recs);
      r.outcome = std::move(s.outcome);
      r.transcript = std::move(s.transcript);
    } catch (const ExhaustedAttemptsError& e) {
      r.outputs.push_back(out.write_json(".transcript.json", e.transcript().to_json()));
      r.outputs.push_back(out.write_json(".validation.json", validation_json(e.last_report())));
      out.finish();
      throw;
    }
  }

  if (r.transcript) r.outputs.push_back(out.write_json(".transcript.json", r.transcript->to_json()));
  r.outputs.push_back(out.write_json(".validation.json", validation_json(r.outcome.validation)));
  if (!r.outcome.passed()) {
    out.finish();
    throw Error(ErrorCode::ValidationFailed, r.outcome.validation.structurally_different
                                                 ? "candidate failed validation"
                                                 : "no transformation applicable: the tree is unchanged");
  }
  r.outputs.push_back(out.write(".txt", serialize_text(*r.outcome.candidate)));
  r.outputs.push_back(out.write(".explanation.txt", r.outcome.explanation));
  auto diff = diff_json(*r.outcome.diff);
  diff["follow_ups"] = r.outcome.follow_ups;
  diff["restarts"] = r.outcome.restarts;
  r.outputs.push_back(out.write_json(".diff.json", std::move(diff)));
  out.finish();
  return r;
}

// ---------------------------------------------------------------------------
// compare

struct CompareOptions {
  std::vector<Strategy> strategies{Strategy::Hadamard};
  std::uint64_t seed = 0;
  std::size_t batch_rows = 256;
  double epsilon = std::numeric_limits<double>::epsilon();
  /// Use the deeper tree's tau for both trees instead of each tree's own.
  bool shared_tau = false;
};

struct ComparisonRow {
  std::string variant;  // "original" or "restructured"
  Strategy strategy = Strategy::Hadamard;
  TreeProperties properties;
  EmbeddingConfig config;
  DistortionReport report;
};

struct ComparisonResult {
  std::size_t dimension = 0;
  std::vector<ComparisonRow> rows;  // two per strategy
  StructuralDiff diff;
};

/// Embeds and evaluates both trees at one shared dimension (chosen from the
/// larger maximum degree). Each tree keeps the tau of its own depth unless
/// shared_tau is set.
inline ComparisonResult compare_trees(const Hierarchy& original, const Hierarchy& restructured, const CompareOptions& o) {
  const auto v = validate_candidate(original, serialize_text(restructured));
  if (!v.passed()) {
    std::string failed;
    for (int k : v.failed_criteria()) failed += (failed.empty() ? "" : ", ") + std::to_string(k);
    throw Error(ErrorCode::ValidationFailed, "restructured tree fails criteria " + failed);
  }
  const auto pa = compute_properties(original);
  const auto pb = compute_properties(restructured);
  ComparisonResult r;
  r.dimension = select_dimension(std::max(pa.max_degree, pb.max_degree));
  r.diff = structural_diff(original, restructured);
  auto ca = EmbeddingConfig::for_tree(pa.depth, pa.max_degree, o.epsilon, r.dimension);
  auto cb = EmbeddingConfig::for_tree(pb.depth, pb.max_degree, o.epsilon, r.dimension);
  if (o.shared_tau) {
    if (pa.depth >= pb.depth)
      cb = ca;
    else
      ca = cb;
  }
  for (Strategy s : o.strategies) {
    r.rows.push_back({"original", s, pa, ca, evaluate(embed<Real>(original, ca, s, o.seed), original, o.batch_rows)});
    r.rows.push_back(
        {"restructured", s, pb, cb, evaluate(embed<Real>(restructured, cb, s, o.seed), restructured, o.batch_rows)});
  }
  return r;
}

inline ordered_json comparison_json(const ComparisonResult& c) {
  ordered_json rows = ordered_json::array();
  for (const auto& row : c.rows) {
    rows.push_back({{"variant", row.variant},
                    {"strategy", to_string(row.strategy)},
                    {"properties", properties_json(row.properties)},
                    {"dimension", row.config.dimension},
                    {"tau", row.config.tau},
                    {"report", report_json(row.report)}});
  }
  return {{"dimension", c.dimension}, {"rows", rows}, {"diff", diff_json(c.diff)}};
}

inline ComparisonResult cmd_compare(const fs::path& original, const fs::path& restructured, const CompareOptions& o,
                                    const fs::path& out_dir, std::vector<std::string> argv = {}) {
  const auto a = load_hierarchy(original);
  const auto b = load_hierarchy(restructured);
  auto r = compare_trees(a, b, o);
  RunManifest m{"compare", std::move(argv), {original.string(), restructured.string()}};
  ordered_json strategies = ordered_json::array();
  for (Strategy s : o.strategies) strategies.push_back(to_string(s));
  m.config = {{"dimension", r.dimension}, {"epsilon", o.epsilon},     {"strategies", strategies},
              {"seed", o.seed},           {"batch_rows", o.batch_rows}, {"shared_tau", o.shared_tau}};
  OutputSet out(out_dir, original.stem().string() + ".compare", std::move(m));
  out.write_json(".json", comparison_json(r));
  out.finish();
  return r;
}

// ---------------------------------------------------------------------------
// ablate

struct AblationRow {
  std::string subset;  // "baseline" or e.g. "r1,r2,r3"
  Strategy strategy = Strategy::Hadamard;
  std::string status;  // "baseline", "restructured", "no transformation", "failed"
  std::optional<TreeProperties> properties;
  std::optional<EmbeddingConfig> config;
  std::optional<DistortionReport> report;
};

struct AblationOptions {
  Engine engine = Engine::Heuristic;
  std::vector<Strategy> strategies{Strategy::Hadamard, Strategy::OptimizedUniform};
  std::uint64_t seed = 0;
  std::size_t batch_rows = 256;
  double epsilon = std::numeric_limits<double>::epsilon();
  LlmConfig llm;
};

/// Baseline (the original embedded exactly as cmd_embed would) plus one row
/// per recommendation subset, for every strategy. Restructured trees are
/// embedded at the shared comparison dimension with their own tau; a subset
/// that leaves the tree unchanged is evaluated as-is and flagged.
inline std::vector<AblationRow> ablate(const Hierarchy& h, const AblationOptions& o) {
  struct Candidate {
    RecommendationSet recs;
    std::string status;
    std::optional<Hierarchy> tree;
  };
  std::vector<Candidate> candidates;
  for (const auto& recs : ablation_subsets()) {
    Candidate c{recs, {}, {}};
    if (o.engine == Engine::Heuristic) {
      auto hr = heuristic_restructure(h, recs);
      c.status = hr.transformed ? "restructured" : "no transformation";
      c.tree = std::move(hr.tree);
      if (hr.transformed && !validate_candidate(h, serialize_text(*c.tree)).passed()) c.status = "failed";
    } else {
      try {
        auto s = restructure_session(o.llm, h, recs);
        c.status = "restructured";
        c.tree = std::move(*s.outcome.candidate);
      } catch (const ExhaustedAttemptsError&) {
        c.status = "failed";
      }
    }
    candidates.push_back(std::move(c));
  }

  std::vector<AblationRow> rows;
  const auto props = compute_properties(h);
  for (Strategy s : o.strategies) {
    const auto base_cfg = EmbeddingConfig::for_tree(props.depth, props.max_degree, o.epsilon);
    rows.push_back({"baseline", s, "baseline", props, base_cfg, evaluate(embed<Real>(h, base_cfg, s, o.seed), h, o.batch_rows)});
    for (const auto& c : candidates) {
      AblationRow row{c.recs.to_string(), s, c.status, {}, {}, {}};
      if (c.tree && c.status != "failed") {
        const auto p = compute_properties(*c.tree);
        const auto cfg = EmbeddingConfig::for_tree(p.depth, p.max_degree, o.epsilon,
                                                   select_dimension(std::max(props.max_degree, p.max_degree)));
        row.properties = p;
        row.config = cfg;
        row.report = evaluate(embed<Real>(*c.tree, cfg, s, o.seed), *c.tree, o.batch_rows);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline ordered_json ablation_json(const std::vector<AblationRow>& rows) {
  ordered_json out = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json j{{"subset", r.subset}, {"strategy", to_string(r.strategy)}, {"status", r.status}};
    j["properties"] = r.properties ? properties_json(*r.properties) : ordered_json();
    j["dimension"] = r.config ? ordered_json(r.config->dimension) : ordered_json();
    j["tau"] = r.config ? ordered_json(r.config->tau) : ordered_json();
    j["d_avg"] = r.report ? ordered_json(r.report->d_avg) : ordered_json();
    j["d_wc"] = r.report ? ordered_json(r.report->d_wc) : ordered_json();
    out.push_back(std::move(j));
  }
  return out;
}

inline std::vector<AblationRow> cmd_ablate(const fs::path& input, const AblationOptions& o, const fs::path& out_dir,
                                           std::vector<std::string> argv = {}) {
  const auto h = load_hierarchy(input);
  auto rows = ablate(h, o);
  RunManifest m{"ablate", std::move(argv), {input.string()}};
  ordered_json strategies = ordered_json::array();
  for (Strategy s : o.strategies) strategies.push_back(to_string(s));
  m.config = {{"engine", o.engine == Engine::Llm ? "llm" : "heuristic"},
              {"grid", "table2"},
              {"strategies", strategies},
              {"seed", o.seed},
              {"batch_rows", o.batch_rows},
              {"epsilon", o.epsilon}};
  OutputSet out(out_dir, input.stem().string() + ".ablate", std::move(m));
  out.write_json(".json", {{"rows", ablation_json(rows)}});
  out.finish();
  return rows;
}

// ---------------------------------------------------------------------------
// export-viz

inline std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

inline std::string to_dot(const Hierarchy& h) {
  std::string out = "digraph hierarchy {\n";
  for (NodeId v = 0; v < h.size(); ++v) out += "  " + dot_quote(h.name(v)) + ";\n";
  for (NodeId v = 0; v < h.size(); ++v)
    for (NodeId c : h.children(v)) out += "  " + dot_quote(h.name(v)) + " -> " + dot_quote(h.name(c)) + ";\n";
  return out + "}\n";
}

inline fs::path cmd_export_viz(const fs::path& input, const fs::path& out_dir, std::vector<std::string> argv = {}) {
  const auto h = load_hierarchy(input);
  OutputSet out(out_dir, input.stem().string(), {"export-viz", std::move(argv), {input.string()}});
  auto p = out.write(".dot", to_dot(h));
  out.finish();
  return p;
}

}  // namespace hyperhier
