#pragma once

#include <bit>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hyperhier/error.hpp"
#include "hyperhier/poincare.hpp"

namespace hyperhier {

/// Unit vectors around a parent along which its children are placed.
template <std::floating_point T>
struct DirectionSet {
  std::vector<std::vector<T>> directions;

  std::size_t size() const noexcept { return directions.size(); }
  std::size_t dim() const noexcept { return directions.empty() ? 0 : directions.front().size(); }
  const std::vector<T>& operator[](std::size_t i) const { return directions[i]; }
};

/// Entry (i, j) of the Sylvester Hadamard matrix: (-1)^popcount(i & j).
constexpr int sylvester_entry(std::size_t i, std::size_t j) { return (std::popcount(i & j) % 2 == 0) ? 1 : -1; }

/// First k rows of the Sylvester Hadamard matrix of order 2^floor(log2 n),
/// normalized and zero-padded to n coordinates. Distinct rows are orthogonal.
template <std::floating_point T>
DirectionSet<T> hadamard_directions(std::size_t n, std::size_t k) {
  const std::size_t order = hadamard_capacity(n);
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "direction count must be at least 1");
  if (k > order)
    throw Error(ErrorCode::DegreeExceedsCapacity, std::to_string(k) + " directions requested but dimension " + std::to_string(n) +
                                                      " offers only " + std::to_string(order) + " Hadamard codes");
  const T scale = T(1) / std::sqrt(static_cast<T>(order));
  DirectionSet<T> out;
  out.directions.assign(k, std::vector<T>(n, T(0)));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < order; ++j) out.directions[i][j] = scale * static_cast<T>(sylvester_entry(i, j));
  return out;
}

namespace detail {

/// splitmix64 step; used to derive independent per-node seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Standard normal samples from raw 64-bit engine output (Box-Muller), so the
/// stream does not depend on the standard library's distribution code.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;          // [0, 1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

template <std::floating_point T>
T norm(std::span<const T> v) {
  T s = 0;
  for (T x : v) s += x * x;
  return std::sqrt(s);
}

template <std::floating_point T>
void normalize(std::vector<T>& v) {
  const T len = norm<T>(v);
  for (T& x : v) x /= len;
}

}  // namespace detail

/// Schedule of the projected gradient descent used for uniform directions.
struct UniformScheduleOptions {
  std::size_t iterations = 450;
  double learning_rate = 0.01;
  std::size_t decay_every = 150;
  double decay_factor = 0.1;
};

/// k unit vectors spread approximately uniformly over the sphere S^{n-1} by
/// minimizing the Riesz energy sum_{i<j} 1 / |x_i - x_j| with projected
/// gradient descent. An optional anchor takes part in the energy as a fixed
/// point and is not returned. Each step moves a point by the learning rate
/// along its normalized tangent gradient, then renormalizes it.
template <std::floating_point T>
DirectionSet<T> optimize_uniform_directions(std::size_t n, std::size_t k, std::optional<std::span<const T>> anchor,
                                            std::uint64_t seed, const UniformScheduleOptions& schedule = {}) {
  if (n < 2) throw Error(ErrorCode::InvalidConfig, "dimension must be at least 2");
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "direction count must be at least 1");
  if (anchor && anchor->size() != n) throw Error(ErrorCode::DimensionMismatch, "anchor dimension differs from n");

  detail::NormalStream normal(seed);
  std::vector<std::vector<T>> x(k, std::vector<T>(n));
  for (auto& v : x) {
    for (T& c : v) c = static_cast<T>(normal.next());
    detail::normalize(v);
  }

  std::vector<std::vector<T>> grad(k, std::vector<T>(n));
  std::vector<T> diff(n);
  auto accumulate = [&](std::size_t i, std::span<const T> other) {
    T sq = 0;
    for (std::size_t d = 0; d < n; ++d) {
      diff[d] = x[i][d] - other[d];
      sq += diff[d] * diff[d];
    }
    if (sq == T(0)) return;
    const T inv3 = T(1) / (sq * std::sqrt(sq));
    for (std::size_t d = 0; d < n; ++d) grad[i][d] -= diff[d] * inv3;
  };

  for (std::size_t it = 0; it < schedule.iterations; ++it) {
    const auto drops = schedule.decay_every == 0 ? 0 : it / schedule.decay_every;
    const T lr = static_cast<T>(schedule.learning_rate * std::pow(schedule.decay_factor, static_cast<double>(drops)));
    for (std::size_t i = 0; i < k; ++i) {
      std::fill(grad[i].begin(), grad[i].end(), T(0));
      for (std::size_t j = 0; j < k; ++j)
        if (j != i) accumulate(i, x[j]);
      if (anchor) accumulate(i, *anchor);
      // Project onto the tangent space of the sphere at x_i.
      const T radial = detail::dot<T>(grad[i], x[i]);
      for (std::size_t d = 0; d < n; ++d) grad[i][d] -= radial * x[i][d];
    }
    for (std::size_t i = 0; i < k; ++i) {
      const T len = detail::norm<T>(grad[i]);
      if (len == T(0)) continue;
      for (std::size_t d = 0; d < n; ++d) x[i][d] -= lr * grad[i][d] / len;
      detail::normalize(x[i]);
    }
  }
  return DirectionSet<T>{std::move(x)};
}

/// Householder reflection H = I - 2 w w^T / |w|^2 with w = from - to, which
/// maps the unit vector `from` onto the unit vector `to`.
template <std::floating_point T>
class Reflection {
 public:
  Reflection(std::span<const T> from, std::span<const T> to) : w_(from.size()) {
    T sq = 0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
      w_[i] = from[i] - to[i];
      sq += w_[i] * w_[i];
    }
    identity_ = sq <= std::numeric_limits<T>::epsilon() * std::numeric_limits<T>::epsilon();
    inv_sq_ = identity_ ? T(0) : T(1) / sq;
  }

  std::vector<T> apply(std::span<const T> v) const {
    std::vector<T> out(v.begin(), v.end());
    if (identity_) return out;
    const T f = T(2) * detail::dot<T>(w_, v) * inv_sq_;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= f * w_[i];
    return out;
  }

 private:
  std::vector<T> w_;
  T inv_sq_ = 0;
  bool identity_ = false;
};

}  // namespace hyperhier
