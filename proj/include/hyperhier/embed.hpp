#pragma once

#include <cerrno>
#include <cinttypes>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hyperhier/directions.hpp"
#include "hyperhier/error.hpp"
#include "hyperhier/hierarchy.hpp"
#include "hyperhier/poincare.hpp"

namespace hyperhier {

/// Working precision of the constructive embedders. Extended precision keeps
/// the deepest nodes, which sit within ~1e-12 of the boundary, resolvable to
/// better than 1e-6 in hyperbolic distance.
using Real = long double;

enum class Strategy { Hadamard, OptimizedUniform };

constexpr std::string_view to_string(Strategy s) noexcept {
  return s == Strategy::Hadamard ? "hadamard" : "uniform";
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "hadamard") return Strategy::Hadamard;
  if (s == "uniform" || s == "optimized-uniform" || s == "hs-dte") return Strategy::OptimizedUniform;
  throw Error(ErrorCode::InvalidConfig, "unknown strategy '" + std::string(s) + "' (expected hadamard or uniform)");
}

/// Node -> point assignment produced by an embedder (or built by hand).
/// `config.tau` is the hyperbolic length of one tree edge; distortion
/// metrics measure embedded distances in units of tau.
template <std::floating_point T = Real>
struct EmbeddingResult {
  std::vector<std::string> names;
  std::vector<PoincarePoint<T>> points;
  EmbeddingConfig config;
  Strategy strategy = Strategy::Hadamard;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return points.size(); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    if (index_.size() != names.size()) rebuild_index();
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const PoincarePoint<T>& at(std::string_view name) const {
    if (auto i = index_of(name)) return points[*i];
    throw Error(ErrorCode::UnknownNode, "no embedded node named '" + std::string(name) + "'");
  }

 private:
  void rebuild_index() const {
    index_.clear();
    for (std::size_t i = 0; i < names.size(); ++i) index_.emplace(names[i], i);
  }
  mutable std::unordered_map<std::string, std::size_t> index_;
};

/// Throws DegreeExceedsCapacity unless every node's children plus its
/// reserved parent direction fit in the Hadamard capacity of `dimension`.
inline void check_capacity(const Hierarchy& h, std::size_t dimension) {
  const std::size_t capacity = hadamard_capacity(dimension);
  for (NodeId v = 0; v < h.size(); ++v) {
    const std::size_t needed = h.num_children(v) + (v == h.root() ? 0 : 1);
    if (needed > capacity)
      throw Error(ErrorCode::DegreeExceedsCapacity,
                  "node '" + h.name(v) + "' needs " + std::to_string(needed) + " directions but dimension " +
                      std::to_string(dimension) + " provides " + std::to_string(capacity));
  }
}

/// Recursive construction: the root sits at the origin; each node is moved
/// to the origin by a Moebius translation, its children are placed at
/// hyperbolic distance tau along directions that avoid the (reserved)
/// direction back to its parent, and everything is translated back.
template <std::floating_point T = Real>
EmbeddingResult<T> embed(const Hierarchy& h, const EmbeddingConfig& config, Strategy strategy, std::uint64_t seed = 0,
                         const UniformScheduleOptions& schedule = {}) {
  config.validate();
  check_capacity(h, config.dimension);
  const std::size_t n = config.dimension;
  const T radius = radius_for_distance(static_cast<T>(config.tau));

  EmbeddingResult<T> out;
  out.names = h.names();
  out.config = config;
  out.strategy = strategy;
  out.seed = seed;
  out.points.assign(h.size(), PoincarePoint<T>::origin(n));

  for (NodeId v = 0; v < h.size(); ++v) {
    const std::size_t k = h.num_children(v);
    if (k == 0) continue;
    const PoincarePoint<T>& here = out.points[v];

    std::vector<std::vector<T>> dirs;
    if (v == h.root()) {
      dirs = strategy == Strategy::Hadamard
                 ? hadamard_directions<T>(n, k).directions
                 : optimize_uniform_directions<T>(n, k, std::nullopt, detail::mix_seed(seed ^ detail::mix_seed(v)), schedule).directions;
    } else {
      const auto local_parent = translate(-here, out.points[h.parent(v)]);
      std::vector<T> toward_parent(local_parent.coords().begin(), local_parent.coords().end());
      detail::normalize(toward_parent);
      if (strategy == Strategy::Hadamard) {
        const auto codes = hadamard_directions<T>(n, k + 1);
        const Reflection<T> align(codes[0], toward_parent);
        dirs.reserve(k);
        for (std::size_t i = 1; i <= k; ++i) dirs.push_back(align.apply(codes[i]));
      } else {
        dirs = optimize_uniform_directions<T>(n, k, std::span<const T>(toward_parent),
                                              detail::mix_seed(seed ^ detail::mix_seed(v)), schedule)
                   .directions;
      }
    }

    const auto kids = h.children(v);
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<T> local(n);
      for (std::size_t d = 0; d < n; ++d) local[d] = radius * dirs[i][d];
      out.points[kids[i]] = translate(here, PoincarePoint<T>::from_computed(std::move(local)));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embedding file: "key value" header lines, then one "name<TAB>coords" line
// per node. Coordinates are written with enough digits to round-trip the
// scalar type exactly.

namespace detail {

template <std::floating_point T>
std::string format_real(T x) {
  char buf[64];
  if constexpr (std::is_same_v<T, long double>) {
    std::snprintf(buf, sizeof buf, "%.20Le", x);
  } else {
    std::snprintf(buf, sizeof buf, "%.17e", static_cast<double>(x));
  }
  return buf;
}

template <std::floating_point T>
T parse_real(const std::string& s) {
  char* end = nullptr;
  errno = 0;
  const long double v = std::strtold(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    throw Error(ErrorCode::Io, "cannot parse number '" + s + "'");
  return static_cast<T>(v);
}

}  // namespace detail

template <std::floating_point T>
void write_embedding(std::ostream& os, const EmbeddingResult<T>& e, std::string_view manifest = {}) {
  os << "# hyperhier embedding v1\n";
  os << "dimension " << e.config.dimension << '\n';
  os << "tau " << detail::format_real(e.config.tau) << '\n';
  os << "epsilon " << detail::format_real(e.config.epsilon) << '\n';
  os << "max_path_length " << e.config.max_path_length << '\n';
  os << "strategy " << to_string(e.strategy) << '\n';
  os << "seed " << e.seed << '\n';
  if (!manifest.empty()) os << "manifest " << manifest << '\n';
  os << "nodes " << e.size() << '\n';
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e.names[i].find_first_of("\t\n") != std::string::npos)
      throw Error(ErrorCode::Io, "node name '" + e.names[i] + "' contains a tab or newline");
    os << e.names[i] << '\t';
    const auto c = e.points[i].coords();
    for (std::size_t d = 0; d < c.size(); ++d) {
      if (d) os << ' ';
      os << detail::format_real(c[d]);
    }
    os << '\n';
  }
}

template <std::floating_point T = Real>
EmbeddingResult<T> read_embedding(std::istream& is) {
  EmbeddingResult<T> e;
  std::string line;
  std::optional<std::size_t> count;
  while (!count && std::getline(is, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream kv(line);
    std::string key, value;
    kv >> key >> value;
    if (key == "dimension") e.config.dimension = std::stoul(value);
    else if (key == "tau") e.config.tau = detail::parse_real<double>(value);
    else if (key == "epsilon") e.config.epsilon = detail::parse_real<double>(value);
    else if (key == "max_path_length") e.config.max_path_length = std::stoul(value);
    else if (key == "strategy") e.strategy = parse_strategy(value);
    else if (key == "seed") e.seed = std::stoull(value);
    else if (key == "nodes") count = std::stoul(value);
  }
  if (!count) throw Error(ErrorCode::Io, "embedding file has no 'nodes' header");
  e.config.validate();
  for (std::size_t i = 0; i < *count; ++i) {
    if (!std::getline(is, line)) throw Error(ErrorCode::Io, "embedding file ends after " + std::to_string(i) + " nodes");
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorCode::Io, "node line without tab separator");
    e.names.push_back(line.substr(0, tab));
    std::istringstream coords(line.substr(tab + 1));
    std::vector<T> c;
    std::string tok;
    while (coords >> tok) c.push_back(detail::parse_real<T>(tok));
    if (c.size() != e.config.dimension)
      throw Error(ErrorCode::Io, "node '" + e.names.back() + "' has " + std::to_string(c.size()) + " coordinates");
    e.points.emplace_back(std::move(c));
  }
  return e;
}

}  // namespace hyperhier
