#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "hyperhier/error.hpp"
#include "hyperhier/graph_dict.hpp"
#include "hyperhier/hierarchy.hpp"

namespace hyperhier {

/// Which of the four structural recommendations a restructuring applies.
struct RecommendationSet {
  bool r1_width = false;
  bool r2_balance = false;
  bool r3_size = false;
  bool r4_single_inheritance = false;

  static RecommendationSet all() { return {true, true, true, true}; }

  bool any() const { return r1_width || r2_balance || r3_size || r4_single_inheritance; }

  /// Parses a comma list such as "r1,r3" or "all".
  static RecommendationSet parse(std::string_view spec) {
    RecommendationSet r;
    std::string token;
    std::istringstream in{std::string(spec)};
    while (std::getline(in, token, ',')) {
      std::string t;
      for (char c : token)
        if (c != ' ') t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (t.empty()) continue;
      if (t == "all") r = all();
      else if (t == "r1") r.r1_width = true;
      else if (t == "r2") r.r2_balance = true;
      else if (t == "r3") r.r3_size = true;
      else if (t == "r4") r.r4_single_inheritance = true;
      else throw Error(ErrorCode::InvalidConfig, "unknown recommendation '" + token + "' (expected r1..r4 or all)");
    }
    return r;
  }

  std::string to_string() const {
    std::string out;
    auto add = [&](bool on, const char* name) {
      if (!on) return;
      if (!out.empty()) out += ',';
      out += name;
    };
    add(r1_width, "r1");
    add(r2_balance, "r2");
    add(r3_size, "r3");
    add(r4_single_inheritance, "r4");
    return out.empty() ? "none" : out;
  }

  friend bool operator==(const RecommendationSet&, const RecommendationSet&) = default;
};

/// The six recommendation subsets of the prompt ablation grid.
inline std::vector<RecommendationSet> ablation_subsets() {
  return {
      {true, false, false, false},  {false, true, false, false}, {false, false, true, false},
      {true, true, true, false},    {false, true, true, true},   RecommendationSet::all(),
  };
}

// ---------------------------------------------------------------------------
// Prompt.

namespace prompt_text {

inline constexpr std::string_view kPreamble =
    "Have the following information about improving hierarchies for machine learning. "
    "Can you apply this to the attached hierarchy <Hierarchy.txt>?\n"
    "\n"
    "We offer the following recommendations for ontology engineers when designing ontologies or "
    "knowledge graph schemas for use with hyperbolic embeddings:\n"
    "\n";

inline constexpr std::string_view kWidth =
    "→ Design hierarchies for width: The most effective embedding algorithms leverage the hierarchical "
    "order between nodes to generate embeddings. Consequently, these algorithms perform best with wide "
    "hierarchies that have high branching factors, rather than deep, narrow trees with slower branching.\n";

inline constexpr std::string_view kBalance =
    "→ Do not worry about balance: Current algorithms are largely agnostic to the balance between "
    "subtrees. Interestingly, our findings indicate that when balance is not prioritized or feasible, "
    "embedding performance is not significantly impacted. It is better to have a wide, imbalanced hierarchy "
    "than a deep, balanced hierarchy. Achieving both high width and balance leads to the best performance.\n";

inline constexpr std::string_view kSize =
    "→ Hyperbolic embeddings can handle additional node complexity: We find that a significant increase "
    "in the number of nodes only moderately impacts distortion. While more complex data structures lead to "
    "more challenging embedding optimization, strong enforcement of node sparsity is not required to maintain "
    "effective embeddings.\n";

inline constexpr std::string_view kSingleInheritance =
    "→ Avoid multiple inheritance: While Poincaré embeddings can handle hierarchies with multiple "
    "inheritance, high-performance embedding algorithms do not support them. Therefore, to minimize "
    "distortion, it is best to have single inheritance. This approach is also recommended in many current "
    "ontology evaluation methodologies.\n";

inline constexpr std::string_view kInstructions =
    "\n"
    "Explain each change you make. Then output the complete restructured hierarchy in the same format as "
    "the input: one node per line, two spaces of indentation per level, using only node names that appear "
    "in the input and keeping every leaf node.\n"
    "\n"
    "Hierarchy.txt:\n";

}  // namespace prompt_text

/// Preamble, the selected recommendation paragraphs in R1..R4 order, the
/// output instructions, then the hierarchy text.
inline std::string assemble_prompt(std::string_view hierarchy_text, const RecommendationSet& recs) {
  if (!recs.any()) throw Error(ErrorCode::EmptyRecommendationSet, "at least one recommendation must be selected");
  (void)parse_text(hierarchy_text);
  std::string out(prompt_text::kPreamble);
  bool first = true;
  auto block = [&](bool on, std::string_view text) {
    if (!on) return;
    if (!first) out += '\n';
    out += text;
    first = false;
  };
  block(recs.r1_width, prompt_text::kWidth);
  block(recs.r2_balance, prompt_text::kBalance);
  block(recs.r3_size, prompt_text::kSize);
  block(recs.r4_single_inheritance, prompt_text::kSingleInheritance);
  out += prompt_text::kInstructions;
  out += hierarchy_text;
  if (out.back() != '\n') out += '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Validation gate.

struct ValidationDetails {
  std::vector<std::string> missing_leaves;
  std::vector<std::string> invented_nodes;
  std::string structure_error;  // criterion 3: not a single-rooted tree
  std::string parse_error;      // criterion 4
};

struct ValidationReport {
  bool structurally_different = false;  // 1
  bool leaves_retained = false;         // 2
  bool no_hallucination = false;        // 3
  bool format_ok = false;               // 4
  ValidationDetails details;

  bool passed() const { return structurally_different && leaves_retained && no_hallucination && format_ok; }

  std::vector<int> failed_criteria() const {
    std::vector<int> out;
    if (!structurally_different) out.push_back(1);
    if (!leaves_retained) out.push_back(2);
    if (!no_hallucination) out.push_back(3);
    if (!format_ok) out.push_back(4);
    return out;
  }

  /// One-line evidence for a failed criterion, used in follow-up prompts.
  std::string evidence(int criterion) const {
    auto join = [](const std::vector<std::string>& xs) {
      std::string s;
      for (const auto& x : xs) s += (s.empty() ? "" : ", ") + x;
      return s;
    };
    switch (criterion) {
      case 1: return "the hierarchy is structurally identical to the original";
      case 2: return "missing original leaf nodes: " + join(details.missing_leaves);
      case 3:
        if (!details.invented_nodes.empty()) return "nodes not present in the original: " + join(details.invented_nodes);
        return details.structure_error;
      case 4: return details.parse_error;
      default: return {};
    }
  }
};

namespace detail {

/// Indentation-tolerant reading used to judge content even when the strict
/// grammar rejects the text: a line's parent is the nearest earlier line
/// with a smaller indent.
struct LenientTree {
  std::vector<std::string> labels;
  std::set<std::pair<std::string, std::string>> edges;
  std::size_t roots = 0;
};

inline LenientTree read_lenient(std::string_view text) {
  LenientTree t;
  std::vector<std::pair<std::size_t, std::size_t>> stack;  // (indent, line index)
  for (auto line : split_lines(text)) {
    const auto label = trim(line);
    if (label.empty()) continue;
    std::size_t indent = 0;
    for (char c : line) {
      if (c == ' ') ++indent;
      else if (c == '\t') indent += 2;
      else break;
    }
    while (!stack.empty() && stack.back().first >= indent) stack.pop_back();
    const std::size_t idx = t.labels.size();
    t.labels.emplace_back(label);
    if (stack.empty()) ++t.roots;
    else t.edges.emplace(t.labels[stack.back().second], t.labels[idx]);
    stack.emplace_back(indent, idx);
  }
  return t;
}

}  // namespace detail

/// Checks a candidate restructuring of `original`:
///   1. its edge set differs from the original's;
///   2. every original leaf appears as a node (not necessarily a leaf);
///   3. it names no node absent from the original and has a single root;
///   4. it parses under the strict indented grammar.
/// Criteria 1-3 are judged on an indentation-tolerant reading so each
/// criterion fails independently.
inline ValidationReport validate_candidate(const Hierarchy& original, std::string_view candidate_text) {
  ValidationReport rep;
  std::optional<Hierarchy> strict;
  try {
    strict = parse_text(candidate_text);
    rep.format_ok = true;
  } catch (const Error& e) {
    rep.details.parse_error = e.what();
  }

  const auto lenient = detail::read_lenient(candidate_text);
  const std::unordered_set<std::string> labels(lenient.labels.begin(), lenient.labels.end());

  rep.structurally_different = (strict ? strict->edge_set() : lenient.edges) != original.edge_set();

  for (const auto& leaf : original.leaf_names())
    if (!labels.contains(leaf)) rep.details.missing_leaves.push_back(leaf);
  rep.leaves_retained = rep.details.missing_leaves.empty();

  std::unordered_set<std::string> reported;
  for (const auto& l : lenient.labels)
    if (!original.contains(l) && reported.insert(l).second) rep.details.invented_nodes.push_back(l);
  if (lenient.roots != 1)
    rep.details.structure_error = "expected a single root, found " + std::to_string(lenient.roots);
  rep.no_hallucination = rep.details.invented_nodes.empty() && lenient.roots == 1;
  return rep;
}

// ---------------------------------------------------------------------------
// Heuristic restructuring.

struct HeuristicResult {
  Hierarchy tree;
  std::string explanation;
  std::vector<std::string> removed;
  bool transformed = false;
};

namespace detail {

/// Removes every non-root node with exactly one child, attaching the end of
/// each such chain to the chain head's parent.
inline HeuristicResult collapse_chains(const Hierarchy& h, std::ostringstream& log) {
  std::vector<std::vector<std::size_t>> children(h.size());
  std::vector<bool> keep(h.size(), true);
  std::vector<std::string> removed;
  for (NodeId v = 0; v < h.size(); ++v) {
    if (!keep[v]) continue;
    for (NodeId c : h.children(v)) {
      NodeId end = c;
      std::vector<NodeId> chain;
      while (h.num_children(end) == 1) {
        chain.push_back(end);
        end = h.children(end)[0];
      }
      children[v].push_back(end);
      if (chain.empty()) continue;
      log << "R1 (width): collapsed chain " << h.name(v);
      for (NodeId x : chain) {
        log << " -> " << h.name(x);
        keep[x] = false;
        removed.push_back(h.name(x));
      }
      log << " -> " << h.name(end) << " into " << h.name(v) << " -> " << h.name(end) << "; removed ";
      for (std::size_t i = 0; i < chain.size(); ++i) log << (i ? ", " : "") << h.name(chain[i]);
      log << "; promoted " << h.name(end) << ".\n";
    }
  }
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> kids;
  std::vector<std::size_t> remap(h.size());
  for (NodeId v = 0; v < h.size(); ++v) {
    if (!keep[v]) continue;
    remap[v] = names.size();
    names.push_back(h.name(v));
  }
  kids.resize(names.size());
  for (NodeId v = 0; v < h.size(); ++v) {
    if (!keep[v]) continue;
    for (std::size_t c : children[v]) kids[remap[v]].push_back(remap[c]);
  }
  HeuristicResult r{Hierarchy::from_children(names, kids, 0), {}, std::move(removed), false};
  r.transformed = !r.removed.empty();
  return r;
}

inline void note_permissions(const RecommendationSet& recs, std::ostringstream& log) {
  if (recs.r2_balance) log << "R2 (balance): no action; imbalance does not need correcting.\n";
  if (recs.r3_size) log << "R3 (size): no action; the node count is not a constraint.\n";
}

}  // namespace detail

/// Deterministic restructuring baseline. With R1 every chain of single-child
/// internal nodes is collapsed (one pass reaches the fixpoint). R2 and R3 are
/// permissions and never change the tree; R4 only acts on multi-parent input.
inline HeuristicResult heuristic_restructure(const Hierarchy& h, const RecommendationSet& recs) {
  std::ostringstream log;
  HeuristicResult r{h, {}, {}, false};
  if (recs.r1_width) r = detail::collapse_chains(h, log);
  if (recs.r4_single_inheritance) log << "R4 (single inheritance): no action; every node already has one parent.\n";
  detail::note_permissions(recs, log);
  if (!r.transformed) log << "No transformation applicable.\n";
  r.explanation = log.str();
  return r;
}

/// Multi-parent input: with R4 the graph is first reduced to a tree by
/// resolve_multi_parent; without R4 multiple inheritance is an error.
inline HeuristicResult heuristic_restructure(const MultiParentGraph& g, const RecommendationSet& recs) {
  std::ostringstream log;
  const bool multi = g.has_multiple_inheritance();
  if (multi && !recs.r4_single_inheritance)
    throw Error(ErrorCode::MultipleParents, "input has multiple inheritance; enable r4 to resolve it");
  auto resolved = resolve_multi_parent_logged(g);
  for (const auto& d : resolved.dropped)
    log << "R4 (single inheritance): kept parent " << d.kept_parent << " of " << d.node << ", dropped parent "
        << d.dropped_parent << ".\n";
  HeuristicResult r{resolved.tree, {}, {}, !resolved.dropped.empty()};
  if (recs.r1_width) {
    auto collapsed = detail::collapse_chains(resolved.tree, log);
    collapsed.transformed = collapsed.transformed || r.transformed;
    r = std::move(collapsed);
  }
  detail::note_permissions(recs, log);
  if (!r.transformed) log << "No transformation applicable.\n";
  r.explanation = log.str();
  return r;
}

// ---------------------------------------------------------------------------
// Structural comparison.

struct StructuralDiff {
  std::vector<std::string> removed_nodes;
  std::vector<std::string> promoted_nodes;
  long node_delta = 0;
  long depth_delta = 0;
  long leaf_delta = 0;
  double avg_bf_delta = 0.0;
};

/// Deltas are restructured minus original. A node is promoted when its new
/// parent is shallower than its old one.
inline StructuralDiff structural_diff(const Hierarchy& original, const Hierarchy& restructured) {
  StructuralDiff d;
  for (NodeId v = 0; v < original.size(); ++v) {
    const auto& name = original.name(v);
    auto w = restructured.find(name);
    if (!w) {
      d.removed_nodes.push_back(name);
      continue;
    }
    if (v == original.root() || *w == restructured.root()) continue;
    if (restructured.depth(restructured.parent(*w)) < original.depth(original.parent(v))) d.promoted_nodes.push_back(name);
  }
  const auto a = compute_properties(original);
  const auto b = compute_properties(restructured);
  d.node_delta = static_cast<long>(b.num_nodes) - static_cast<long>(a.num_nodes);
  d.depth_delta = static_cast<long>(b.depth) - static_cast<long>(a.depth);
  d.leaf_delta = static_cast<long>(b.num_leaves) - static_cast<long>(a.num_leaves);
  d.avg_bf_delta = std::round((b.avg_branching_factor - a.avg_branching_factor) * 10.0) / 10.0;
  return d;
}

struct CorrelationRecord {
  double avg_bf_delta = 0.0;
  double d_avg_delta = 0.0;
};

/// Pearson correlation between branching-factor change and distortion change.
inline double bf_distortion_correlation(const std::vector<CorrelationRecord>& records) {
  if (records.size() < 2) throw Error(ErrorCode::DegenerateVariance, "need at least two records");
  const double n = static_cast<double>(records.size());
  double mx = 0, my = 0;
  for (const auto& r : records) {
    mx += r.avg_bf_delta;
    my += r.d_avg_delta;
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (const auto& r : records) {
    const double dx = r.avg_bf_delta - mx;
    const double dy = r.d_avg_delta - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::DegenerateVariance, "one of the series is constant");
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------

struct RestructureOutcome {
  std::optional<Hierarchy> candidate;  // present only when validation passed
  ValidationReport validation;
  std::string explanation;
  std::optional<StructuralDiff> diff;
  std::size_t follow_ups = 0;
  std::size_t restarts = 0;

  bool passed() const { return candidate.has_value(); }
};

/// Runs the heuristic and pushes its result through the validation gate.
inline RestructureOutcome heuristic_outcome(const Hierarchy& original, const RecommendationSet& recs) {
  auto h = heuristic_restructure(original, recs);
  RestructureOutcome out;
  out.validation = validate_candidate(original, serialize_text(h.tree));
  out.explanation = h.explanation;
  if (out.validation.passed()) {
    out.diff = structural_diff(original, h.tree);
    out.candidate = std::move(h.tree);
  }
  return out;
}

}  // namespace hyperhier
