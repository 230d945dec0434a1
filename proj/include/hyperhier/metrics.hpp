#pragma once

#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hyperhier/embed.hpp"
#include "hyperhier/error.hpp"
#include "hyperhier/hierarchy.hpp"
#include "hyperhier/poincare.hpp"

namespace hyperhier {

struct DistortionReport {
  double d_avg = 0.0;
  double d_wc = 1.0;
  double max_stretch = 0.0;
  double min_stretch = 0.0;
  std::uint64_t num_pairs = 0;  // ordered pairs, N(N-1)
  std::size_t batch_rows = 0;
  double wall_seconds = 0.0;
};

/// Neumaier-compensated running sum.
template <std::floating_point T>
class CompensatedSum {
 public:
  void add(T x) {
    const T t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      carry_ += (sum_ - t) + x;
    else
      carry_ += (x - t) + sum_;
    sum_ = t;
  }
  T value() const { return sum_ + carry_; }

 private:
  T sum_ = 0;
  T carry_ = 0;
};

namespace detail {

struct RawDistortion {
  long double relative_error_sum = 0;
  long double max_stretch = 0;
  long double min_stretch = std::numeric_limits<long double>::infinity();
  std::uint64_t pairs = 0;
};

/// Maps tree node ids to embedding rows; NodeMismatch unless the node sets agree.
template <std::floating_point T>
std::vector<std::size_t> match_nodes(const EmbeddingResult<T>& emb, const Hierarchy& h) {
  if (emb.size() != h.size() || emb.names.size() != emb.points.size())
    throw Error(ErrorCode::NodeMismatch, "embedding has " + std::to_string(emb.size()) + " points but the tree has " +
                                             std::to_string(h.size()) + " nodes");
  std::vector<std::size_t> rows(h.size());
  for (NodeId v = 0; v < h.size(); ++v) {
    auto i = emb.index_of(h.name(v));
    if (!i) throw Error(ErrorCode::NodeMismatch, "tree node '" + h.name(v) + "' is not embedded");
    rows[v] = *i;
  }
  return rows;
}

/// Streams distance-row batches; each row is summed left to right with
/// compensation and row sums are folded in row order, so the result does
/// not depend on the batch size.
template <std::floating_point T>
RawDistortion accumulate(const EmbeddingResult<T>& emb, const Hierarchy& h, std::size_t batch_rows) {
  if (h.size() < 2) throw Error(ErrorCode::InvalidConfig, "distortion needs at least two nodes");
  const auto rows = match_nodes(emb, h);
  const std::size_t n = h.size();
  const T scale = T(1) / static_cast<T>(emb.config.tau);

  std::vector<T> one_minus_sq(n);
  for (NodeId v = 0; v < n; ++v) one_minus_sq[v] = T(1) - emb.points[rows[v]].squared_norm();

  RawDistortion raw;
  CompensatedSum<long double> total;
  auto batches = all_pairs_distances(h, batch_rows);
  while (auto batch = batches.next()) {
    for (std::size_t r = 0; r < batch->num_rows; ++r) {
      const NodeId u = batch->first_row + static_cast<NodeId>(r);
      const auto& pu = emb.points[rows[u]];
      const auto tree_row = batch->row(r);
      CompensatedSum<long double> row_sum;
      for (NodeId w = 0; w < n; ++w) {
        if (w == u) continue;
        const auto& pw = emb.points[rows[w]];
        T s = 0;
        for (std::size_t d = 0; d < pu.dim(); ++d) {
          const T diff = pu[d] - pw[d];
          s += diff * diff;
        }
        T dist = 0;
        if (s != T(0)) {
          const T p = one_minus_sq[u] * one_minus_sq[w];
          dist = T(2) * std::log((std::sqrt(s + p) + std::sqrt(s)) / std::sqrt(p));
        }
        const T dt = static_cast<T>(tree_row[w]);
        const T stretch = dist * scale / dt;
        row_sum.add(static_cast<long double>(std::abs(dist * scale - dt) / dt));
        raw.max_stretch = std::max<long double>(raw.max_stretch, stretch);
        raw.min_stretch = std::min<long double>(raw.min_stretch, stretch);
      }
      total.add(row_sum.value());
    }
  }
  raw.pairs = static_cast<std::uint64_t>(n) * (n - 1);
  raw.relative_error_sum = total.value();
  return raw;
}

}  // namespace detail

/// Single streamed pass computing both distortion measures over ordered pairs:
///   D_avg = 1/(N(N-1)) sum_{u!=v} |d_D(u,v)/tau - d_T(u,v)| / d_T(u,v)
///   D_wc  = max stretch / min stretch, stretch = (d_D/tau) / d_T.
template <std::floating_point T>
DistortionReport evaluate(const EmbeddingResult<T>& emb, const Hierarchy& h, std::size_t batch_rows) {
  const auto start = std::chrono::steady_clock::now();
  const auto raw = detail::accumulate(emb, h, batch_rows);
  if (!(raw.min_stretch > 0))
    throw Error(ErrorCode::DegenerateEmbedding, "two distinct nodes share an embedded position");
  DistortionReport rep;
  rep.d_avg = static_cast<double>(raw.relative_error_sum / static_cast<long double>(raw.pairs));
  rep.max_stretch = static_cast<double>(raw.max_stretch);
  rep.min_stretch = static_cast<double>(raw.min_stretch);
  rep.d_wc = static_cast<double>(raw.max_stretch / raw.min_stretch);
  rep.num_pairs = raw.pairs;
  rep.batch_rows = batch_rows;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

template <std::floating_point T>
double avg_distortion(const EmbeddingResult<T>& emb, const Hierarchy& h, std::size_t batch_rows) {
  const auto raw = detail::accumulate(emb, h, batch_rows);
  return static_cast<double>(raw.relative_error_sum / static_cast<long double>(raw.pairs));
}

template <std::floating_point T>
double worst_case_distortion(const EmbeddingResult<T>& emb, const Hierarchy& h, std::size_t batch_rows) {
  return evaluate(emb, h, batch_rows).d_wc;
}

}  // namespace hyperhier
