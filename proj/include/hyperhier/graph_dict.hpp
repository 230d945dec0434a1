#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <limits>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperhier/error.hpp"
#include "hyperhier/hierarchy.hpp"

namespace hyperhier {

using ordered_json = nlohmann::ordered_json;

/// Directed acyclic staging graph in which a node may have several parents.
/// Child lists are ordered; parents are derived from them.
struct MultiParentGraph {
  std::vector<std::string> nodes;
  std::vector<std::vector<std::size_t>> children;

  std::vector<std::vector<std::size_t>> parents() const {
    std::vector<std::vector<std::size_t>> out(nodes.size());
    for (std::size_t p = 0; p < children.size(); ++p)
      for (std::size_t c : children[p]) out[c].push_back(p);
    return out;
  }

  bool has_multiple_inheritance() const {
    for (const auto& ps : parents())
      if (ps.size() > 1) return true;
    return false;
  }

  static MultiParentGraph from_hierarchy(const Hierarchy& h) {
    MultiParentGraph g;
    g.nodes = h.names();
    g.children.resize(h.size());
    for (NodeId v = 0; v < h.size(); ++v)
      for (NodeId c : h.children(v)) g.children[v].push_back(c);
    return g;
  }
};

namespace detail {

inline void check_acyclic(const std::vector<std::string>& names, const std::vector<std::vector<std::size_t>>& children) {
  enum : unsigned char { kWhite, kGrey, kBlack };
  std::vector<unsigned char> color(names.size(), kWhite);
  for (std::size_t start = 0; start < names.size(); ++start) {
    if (color[start] != kWhite) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{start, 0}};
    color[start] = kGrey;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next < children[v].size()) {
        const std::size_t c = children[v][next++];
        if (color[c] == kGrey)
          throw Error(ErrorCode::CycleDetected, "cycle through '" + names[c] + "' and '" + names[v] + "'");
        if (color[c] == kWhite) {
          color[c] = kGrey;
          stack.emplace_back(c, 0);
        }
      } else {
        color[v] = kBlack;
        stack.pop_back();
      }
    }
  }
}

inline MultiParentGraph read_dict(const ordered_json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::EmptyInput, "graph dictionary must be a JSON object");
  if (doc.empty()) throw Error(ErrorCode::EmptyInput, "graph dictionary has no nodes");
  MultiParentGraph g;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& [key, value] : doc.items()) {
    if (!index.emplace(key, g.nodes.size()).second)
      throw Error(ErrorCode::DuplicateNodeId, "node '" + key + "' appears more than once");
    g.nodes.push_back(key);
  }
  g.children.resize(g.nodes.size());
  std::size_t i = 0;
  for (const auto& [key, value] : doc.items()) {
    if (!value.is_array()) throw Error(ErrorCode::UnknownChild, "children of '" + key + "' must be an array");
    for (const auto& child : value) {
      if (!child.is_string()) throw Error(ErrorCode::UnknownChild, "child of '" + key + "' is not a string");
      auto it = index.find(child.get<std::string>());
      if (it == index.end())
        throw Error(ErrorCode::UnknownChild, "'" + child.get<std::string>() + "' under '" + key + "' is not a node key");
      g.children[i].push_back(it->second);
    }
    ++i;
  }
  return g;
}

inline std::vector<std::size_t> sources(const MultiParentGraph& g) {
  std::vector<bool> has_parent(g.nodes.size(), false);
  for (const auto& cs : g.children)
    for (std::size_t c : cs) has_parent[c] = true;
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < g.nodes.size(); ++v)
    if (!has_parent[v]) out.push_back(v);
  return out;
}

}  // namespace detail

/// Reads a graph dictionary ({"node": ["child", ...], ...}) that allows
/// multiple parents. Checks acyclicity; the source check is left to
/// resolve_multi_parent.
inline MultiParentGraph parse_multi_parent_dict(const ordered_json& doc) {
  auto g = detail::read_dict(doc);
  detail::check_acyclic(g.nodes, g.children);
  return g;
}

/// Reads a graph dictionary that must describe a single-parent tree.
inline Hierarchy parse_graph_dict(const ordered_json& doc) {
  auto g = parse_multi_parent_dict(doc);
  const auto roots = detail::sources(g);
  if (roots.empty()) throw Error(ErrorCode::NoRoot, "every node appears as a child");
  if (roots.size() > 1)
    throw Error(ErrorCode::MultipleRoots, "nodes '" + g.nodes[roots[0]] + "' and '" + g.nodes[roots[1]] + "' both lack a parent");
  return Hierarchy::from_children(g.nodes, g.children, roots.front());
}

/// Emits every node (leaves with empty arrays) with keys in pre-order.
inline ordered_json serialize_graph_dict(const Hierarchy& h) {
  ordered_json doc = ordered_json::object();
  for (NodeId v = 0; v < h.size(); ++v) {
    ordered_json kids = ordered_json::array();
    for (NodeId c : h.children(v)) kids.push_back(h.name(c));
    doc[h.name(v)] = std::move(kids);
  }
  return doc;
}

struct DroppedLink {
  std::string node;
  std::string dropped_parent;
  std::string kept_parent;
};

struct ResolvedGraph {
  Hierarchy tree;
  std::vector<DroppedLink> dropped;
};

/// Reduces a multi-parent graph to a tree. A node with several parents keeps
/// the parent closest to the source (breadth-first depth); ties go to the
/// parent visited first in a pre-order walk from the source.
inline ResolvedGraph resolve_multi_parent_logged(const MultiParentGraph& g) {
  if (g.nodes.empty()) throw Error(ErrorCode::NoSource, "graph has no nodes");
  if (g.children.size() != g.nodes.size()) throw Error(ErrorCode::InvalidConfig, "children table size differs from node count");
  detail::check_acyclic(g.nodes, g.children);
  const auto srcs = detail::sources(g);
  if (srcs.empty()) throw Error(ErrorCode::NoSource, "every node has a parent");
  if (srcs.size() > 1)
    throw Error(ErrorCode::NoSource, "graph has " + std::to_string(srcs.size()) + " source nodes; exactly one is required");
  const std::size_t source = srcs.front();
  const std::size_t n = g.nodes.size();
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();

  std::vector<std::size_t> depth(n, kUnset);
  std::deque<std::size_t> queue{source};
  depth[source] = 0;
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    for (std::size_t c : g.children[v]) {
      if (depth[c] == kUnset) {
        depth[c] = depth[v] + 1;
        queue.push_back(c);
      }
    }
  }

  std::vector<std::size_t> preorder(n, kUnset);
  std::size_t counter = 0;
  std::vector<std::size_t> stack{source};
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    if (preorder[v] != kUnset) continue;
    preorder[v] = counter++;
    for (auto it = g.children[v].rbegin(); it != g.children[v].rend(); ++it)
      if (preorder[*it] == kUnset) stack.push_back(*it);
  }

  const auto parents = g.parents();
  std::vector<std::size_t> keep(n, kUnset);
  ResolvedGraph out{Hierarchy::from_edges(g.nodes[source], {}), {}};
  for (std::size_t v = 0; v < n; ++v) {
    if (parents[v].empty()) continue;
    keep[v] = *std::min_element(parents[v].begin(), parents[v].end(), [&](std::size_t a, std::size_t b) {
      return std::tie(depth[a], preorder[a]) < std::tie(depth[b], preorder[b]);
    });
  }
  std::vector<std::vector<std::size_t>> children(n);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t c : g.children[p]) {
      if (keep[c] == p) {
        if (std::find(children[p].begin(), children[p].end(), c) == children[p].end()) children[p].push_back(c);
      } else {
        out.dropped.push_back({g.nodes[c], g.nodes[p], g.nodes[keep[c]]});
      }
    }
  }
  out.tree = Hierarchy::from_children(g.nodes, children, source);
  return out;
}

inline Hierarchy resolve_multi_parent(const MultiParentGraph& g) { return resolve_multi_parent_logged(g).tree; }

}  // namespace hyperhier
