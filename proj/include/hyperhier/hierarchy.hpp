#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hyperhier/error.hpp"

namespace hyperhier {

using NodeId = std::uint32_t;
inline constexpr NodeId kNoParent = std::numeric_limits<NodeId>::max();

/// Rooted ordered tree over uniquely named nodes.
///
/// Node ids are pre-order positions: the root is 0 and every parent id is
/// smaller than the ids of its children. Values are immutable once built, so a
/// Hierarchy can be shared freely between threads.
class Hierarchy {
 public:
  /// Builds a tree from named nodes and ordered child lists indexed like
  /// `names`. Throws DuplicateNodeId, UnknownChild, MultipleParents,
  /// MultipleRoots or CycleDetected when the lists do not describe a tree
  /// rooted at `root`.
  static Hierarchy from_children(const std::vector<std::string>& names,
                                 const std::vector<std::vector<std::size_t>>& children,
                                 std::size_t root) {
    const std::size_t n = names.size();
    if (n == 0) throw Error(ErrorCode::EmptyInput, "hierarchy has no nodes");
    if (root >= n) throw Error(ErrorCode::UnknownNode, "root index out of range");
    if (children.size() != n) throw Error(ErrorCode::InvalidConfig, "children table size differs from node count");
    if (n > static_cast<std::size_t>(kNoParent)) throw Error(ErrorCode::InvalidConfig, "too many nodes");

    std::unordered_map<std::string_view, std::size_t> seen;
    seen.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!seen.emplace(names[i], i).second)
        throw Error(ErrorCode::DuplicateNodeId, "node '" + names[i] + "' appears more than once");
    }

    std::vector<std::size_t> parent(n, n);
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t c : children[p]) {
        if (c >= n) throw Error(ErrorCode::UnknownChild, "child index out of range under '" + names[p] + "'");
        if (c == root) throw Error(ErrorCode::CycleDetected, "root '" + names[root] + "' is listed as a child of '" + names[p] + "'");
        if (parent[c] != n)
          throw Error(ErrorCode::MultipleParents,
                      "node '" + names[c] + "' has parents '" + names[parent[c]] + "' and '" + names[p] + "'");
        parent[c] = p;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i != root && parent[i] == n)
        throw Error(ErrorCode::MultipleRoots, "node '" + names[i] + "' has no parent besides root '" + names[root] + "'");
    }

    Hierarchy h;
    h.names_.reserve(n);
    h.parent_.reserve(n);
    h.depth_.reserve(n);
    std::vector<NodeId> new_id(n, kNoParent);
    // Iterative pre-order walk; children pushed in reverse to keep their order.
    std::vector<std::pair<std::size_t, NodeId>> stack{{root, kNoParent}};
    while (!stack.empty()) {
      auto [old, new_parent] = stack.back();
      stack.pop_back();
      const auto id = static_cast<NodeId>(h.names_.size());
      new_id[old] = id;
      h.names_.push_back(names[old]);
      h.parent_.push_back(new_parent);
      h.depth_.push_back(new_parent == kNoParent ? 0 : h.depth_[new_parent] + 1);
      for (auto it = children[old].rbegin(); it != children[old].rend(); ++it) stack.emplace_back(*it, id);
    }
    if (h.names_.size() != n) {
      for (std::size_t i = 0; i < n; ++i) {
        if (new_id[i] == kNoParent)
          throw Error(ErrorCode::CycleDetected, "node '" + names[i] + "' is unreachable from the root (cycle)");
      }
    }
    h.finish();
    return h;
  }

  /// Builds a tree from a root name and (parent, child) edges. Child order
  /// follows edge order.
  static Hierarchy from_edges(const std::string& root,
                              const std::vector<std::pair<std::string, std::string>>& edges) {
    std::vector<std::string> names{root};
    std::unordered_map<std::string, std::size_t> index{{root, 0}};
    auto intern = [&](const std::string& s) {
      auto [it, inserted] = index.emplace(s, names.size());
      if (inserted) names.push_back(s);
      return it->second;
    };
    std::vector<std::pair<std::size_t, std::size_t>> links;
    links.reserve(edges.size());
    for (const auto& [p, c] : edges) {
      const auto pi = intern(p);
      links.emplace_back(pi, intern(c));
    }
    std::vector<std::vector<std::size_t>> children(names.size());
    for (auto [p, c] : links) children[p].push_back(c);
    return from_children(names, children, 0);
  }

  std::size_t size() const noexcept { return names_.size(); }
  NodeId root() const noexcept { return 0; }
  const std::string& name(NodeId v) const { return names_.at(v); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  NodeId parent(NodeId v) const { return parent_.at(v); }
  std::span<const NodeId> children(NodeId v) const {
    return {child_list_.data() + child_begin_.at(v), child_list_.data() + child_begin_.at(v + 1)};
  }
  std::size_t num_children(NodeId v) const { return child_begin_.at(v + 1) - child_begin_.at(v); }
  bool is_leaf(NodeId v) const { return num_children(v) == 0; }
  std::uint32_t depth(NodeId v) const { return depth_.at(v); }

  std::optional<NodeId> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  NodeId at(std::string_view name) const {
    if (auto id = find(name)) return *id;
    throw Error(ErrorCode::UnknownNode, "no node named '" + std::string(name) + "'");
  }
  bool contains(std::string_view name) const { return find(name).has_value(); }

  std::vector<std::string> leaf_names() const {
    std::vector<std::string> out;
    for (NodeId v = 0; v < size(); ++v)
      if (is_leaf(v)) out.push_back(names_[v]);
    return out;
  }

  /// Edge set keyed by names, used for structural comparison.
  std::set<std::pair<std::string, std::string>> edge_set() const {
    std::set<std::pair<std::string, std::string>> out;
    for (NodeId v = 1; v < size(); ++v) out.emplace(names_[parent_[v]], names_[v]);
    return out;
  }

  /// Structural equality: same names in the same pre-order with the same parents.
  friend bool operator==(const Hierarchy& a, const Hierarchy& b) {
    return a.names_ == b.names_ && a.parent_ == b.parent_;
  }

 private:
  Hierarchy() = default;

  void finish() {
    const std::size_t n = names_.size();
    std::vector<std::uint32_t> counts(n, 0);
    for (NodeId v = 1; v < n; ++v) ++counts[parent_[v]];
    child_begin_.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) child_begin_[v + 1] = child_begin_[v] + counts[v];
    child_list_.assign(n > 0 ? n - 1 : 0, 0);
    std::vector<std::uint32_t> fill(child_begin_.begin(), child_begin_.end() - 1);
    // Pre-order ids are increasing among siblings, so this preserves child order.
    for (NodeId v = 1; v < n; ++v) child_list_[fill[parent_[v]]++] = v;
    index_.reserve(n);
    for (NodeId v = 0; v < n; ++v) index_.emplace(names_[v], v);
  }

  std::vector<std::string> names_;
  std::vector<NodeId> parent_;
  std::vector<std::uint32_t> depth_;
  std::vector<std::uint32_t> child_begin_;
  std::vector<NodeId> child_list_;
  std::unordered_map<std::string, NodeId> index_;
};

// ---------------------------------------------------------------------------
// Indented text format: one node per line, two spaces per depth level.

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

}  // namespace detail

/// Parses the indented text format. Blank lines are ignored; every other line
/// must be indented by a multiple of two spaces and may go at most one level
/// deeper than the line before it.
inline Hierarchy parse_text(std::string_view text) {
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> children;
  std::vector<std::size_t> stack;  // open ancestors, stack[k] at level k
  std::unordered_map<std::string, int> first_line;

  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    std::string_view line = lines[i];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto label = detail::trim(line);
    if (label.empty()) continue;

    std::size_t spaces = 0;
    while (spaces < line.size() && line[spaces] == ' ') ++spaces;
    if (spaces < line.size() && line[spaces] == '\t')
      throw Error(ErrorCode::BadIndent, "tab characters are not allowed in indentation", line_no);
    if (spaces % 2 != 0)
      throw Error(ErrorCode::BadIndent, "indentation of " + std::to_string(spaces) + " spaces is not a multiple of 2", line_no);
    const std::size_t level = spaces / 2;

    if (names.empty()) {
      if (level != 0) throw Error(ErrorCode::IndentJump, "first node must not be indented", line_no);
    } else if (level == 0) {
      throw Error(ErrorCode::MultipleRoots, "second top-level node '" + std::string(label) + "'", line_no);
    } else if (level > stack.size()) {
      throw Error(ErrorCode::IndentJump,
                  "indent level " + std::to_string(level) + " follows level " + std::to_string(stack.size() - 1),
                  line_no);
    }

    std::string name(label);
    if (auto [it, inserted] = first_line.emplace(name, line_no); !inserted)
      throw Error(ErrorCode::DuplicateNodeId,
                  "node '" + name + "' already defined at line " + std::to_string(it->second), line_no);

    const std::size_t id = names.size();
    names.push_back(std::move(name));
    children.emplace_back();
    stack.resize(level);
    if (level > 0) children[stack.back()].push_back(id);
    stack.push_back(id);
  }
  if (names.empty()) throw Error(ErrorCode::EmptyInput, "no nodes in input");
  return Hierarchy::from_children(names, children, 0);
}

/// Writes the pre-order indented text form, one LF-terminated line per node.
inline std::string serialize_text(const Hierarchy& h) {
  std::string out;
  for (NodeId v = 0; v < h.size(); ++v) {
    out.append(2 * static_cast<std::size_t>(h.depth(v)), ' ');
    out += h.name(v);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tree properties.

struct TreeProperties {
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  std::size_t depth = 0;
  std::size_t num_leaves = 0;
  std::size_t max_degree = 0;
  /// edges / internal nodes, truncated to one decimal.
  double avg_branching_factor = 0.0;

  friend bool operator==(const TreeProperties&, const TreeProperties&) = default;
};

inline TreeProperties compute_properties(const Hierarchy& h) {
  TreeProperties p;
  p.num_nodes = h.size();
  p.num_edges = h.size() - 1;
  for (NodeId v = 0; v < h.size(); ++v) {
    p.depth = std::max<std::size_t>(p.depth, h.depth(v));
    p.max_degree = std::max(p.max_degree, h.num_children(v));
    if (h.is_leaf(v)) ++p.num_leaves;
  }
  const std::size_t internal = p.num_nodes - p.num_leaves;
  if (internal > 0) {
    // Integer truncation avoids binary rounding of values such as 3.45.
    const std::size_t tenths = (10 * p.num_edges) / internal;
    p.avg_branching_factor = static_cast<double>(tenths) / 10.0;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Tree distances.

/// Number of edges on the unique path between u and v.
inline std::uint32_t tree_distance(const Hierarchy& h, NodeId u, NodeId v) {
  if (u >= h.size() || v >= h.size()) throw Error(ErrorCode::UnknownNode, "node id out of range");
  std::uint32_t d = 0;
  while (h.depth(u) > h.depth(v)) { u = h.parent(u); ++d; }
  while (h.depth(v) > h.depth(u)) { v = h.parent(v); ++d; }
  while (u != v) {
    u = h.parent(u);
    v = h.parent(v);
    d += 2;
  }
  return d;
}

inline std::uint32_t tree_distance(const Hierarchy& h, std::string_view u, std::string_view v) {
  return tree_distance(h, h.at(u), h.at(v));
}

/// Fills `row[w]` with d_T(source, w) for every node w. O(N).
inline void distance_row(const Hierarchy& h, NodeId source, std::span<std::uint32_t> row) {
  // Ancestors of the source get their distance by climbing; everything else
  // inherits from its parent (parents precede children in pre-order).
  std::fill(row.begin(), row.end(), std::numeric_limits<std::uint32_t>::max());
  std::uint32_t up = 0;
  for (NodeId a = source;; a = h.parent(a), ++up) {
    row[a] = up;
    if (a == h.root()) break;
  }
  for (NodeId w = 1; w < h.size(); ++w) {
    if (row[w] == std::numeric_limits<std::uint32_t>::max()) row[w] = row[h.parent(w)] + 1;
  }
}

/// A block of consecutive rows of the tree-distance matrix.
struct DistanceBatch {
  NodeId first_row = 0;
  std::size_t num_rows = 0;
  std::size_t num_cols = 0;
  std::vector<std::uint32_t> values;  // row-major, num_rows * num_cols

  std::span<const std::uint32_t> row(std::size_t i) const {
    return {values.data() + i * num_cols, num_cols};
  }
};

/// Streams the all-pairs distance matrix in batches of at most `batch_rows`
/// rows, holding O(batch_rows * N) distances at a time.
class DistanceBatches {
 public:
  DistanceBatches(const Hierarchy& h, std::size_t batch_rows) : tree_(&h), batch_rows_(batch_rows) {
    if (batch_rows == 0) throw Error(ErrorCode::InvalidConfig, "batch_rows must be at least 1");
  }

  std::optional<DistanceBatch> next() {
    const std::size_t n = tree_->size();
    if (next_row_ >= n) return std::nullopt;
    DistanceBatch b;
    b.first_row = static_cast<NodeId>(next_row_);
    b.num_rows = std::min(batch_rows_, n - next_row_);
    b.num_cols = n;
    b.values.resize(b.num_rows * n);
    for (std::size_t i = 0; i < b.num_rows; ++i)
      distance_row(*tree_, static_cast<NodeId>(next_row_ + i), std::span(b.values).subspan(i * n, n));
    next_row_ += b.num_rows;
    return b;
  }

 private:
  const Hierarchy* tree_;
  std::size_t batch_rows_;
  std::size_t next_row_ = 0;
};

inline DistanceBatches all_pairs_distances(const Hierarchy& h, std::size_t batch_rows) {
  return DistanceBatches(h, batch_rows);
}

}  // namespace hyperhier
