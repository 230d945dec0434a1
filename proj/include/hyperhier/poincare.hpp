#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hyperhier/error.hpp"

namespace hyperhier {

/// Largest squared norm any computed point may have: 1 - 10 * machine epsilon
/// of the scalar type. Results beyond it are pulled back radially.
template <std::floating_point T>
constexpr T max_squared_norm() {
  return T(1) - T(10) * std::numeric_limits<T>::epsilon();
}

/// Point of the open unit ball D^n = {x : |x|^2 < 1}.
template <std::floating_point T>
class PoincarePoint {
 public:
  using value_type = T;

  static PoincarePoint origin(std::size_t dim) { return PoincarePoint(std::vector<T>(dim, T(0)), Unchecked{}); }

  /// Throws OutsideBall unless every coordinate is finite and |x|^2 < 1.
  explicit PoincarePoint(std::vector<T> coords) : coords_(std::move(coords)) {
    T sq = 0;
    for (T c : coords_) {
      if (!std::isfinite(c)) throw Error(ErrorCode::OutsideBall, "non-finite coordinate");
      sq += c * c;
    }
    if (!(sq < T(1))) throw Error(ErrorCode::OutsideBall, "squared norm " + std::to_string(static_cast<double>(sq)) + " is not below 1");
  }

  /// Builds a point from a computed coordinate vector: non-finite values raise
  /// NumericOverflow and norms past the safety floor are rescaled onto it.
  static PoincarePoint from_computed(std::vector<T> coords) {
    T sq = 0;
    for (T c : coords) {
      if (!std::isfinite(c)) throw Error(ErrorCode::NumericOverflow, "computation produced a non-finite coordinate");
      sq += c * c;
    }
    if (sq > max_squared_norm<T>()) {
      const T scale = std::sqrt(max_squared_norm<T>() / sq);
      for (T& c : coords) c *= scale;
    }
    return PoincarePoint(std::move(coords), Unchecked{});
  }

  std::size_t dim() const noexcept { return coords_.size(); }
  std::span<const T> coords() const noexcept { return coords_; }
  T operator[](std::size_t i) const { return coords_[i]; }

  T squared_norm() const noexcept {
    T sq = 0;
    for (T c : coords_) sq += c * c;
    return sq;
  }
  T norm() const noexcept { return std::sqrt(squared_norm()); }

  PoincarePoint operator-() const {
    std::vector<T> neg(coords_.size());
    for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -coords_[i];
    return PoincarePoint(std::move(neg), Unchecked{});
  }

  friend bool operator==(const PoincarePoint&, const PoincarePoint&) = default;

 private:
  struct Unchecked {};
  PoincarePoint(std::vector<T> coords, Unchecked) : coords_(std::move(coords)) {}

  std::vector<T> coords_;
};

namespace detail {

template <std::floating_point T>
void require_same_dim(const PoincarePoint<T>& a, const PoincarePoint<T>& b) {
  if (a.dim() != b.dim())
    throw Error(ErrorCode::DimensionMismatch,
                "points have dimensions " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
}

template <std::floating_point T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

/// Moebius addition
///   a (+) b = ((1 + 2<a,b> + |b|^2) a + (1 - |a|^2) b) / (1 + 2<a,b> + |a|^2 |b|^2).
///
/// Evaluated through the equivalent form
///   (|s|^2 a + (1 - |a|^2) s) / (|s|^2 + (1 - |a|^2)(1 - |b|^2)),  s = a + b,
/// whose terms are all small and non-negative when a and -b are close to each
/// other near the boundary, so nothing cancels. Raises NumericOverflow when
/// the denominator still vanishes in the floating format.
template <std::floating_point T>
PoincarePoint<T> mobius_add(const PoincarePoint<T>& a, const PoincarePoint<T>& b) {
  detail::require_same_dim(a, b);
  std::vector<T> s(a.dim());
  T ss = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = a[i] + b[i];
    ss += s[i] * s[i];
  }
  const T alpha = T(1) - a.squared_norm();
  const T denom = ss + alpha * (T(1) - b.squared_norm());
  if (!(denom > T(0)) || !std::isfinite(denom))
    throw Error(ErrorCode::NumericOverflow, "Moebius addition denominator underflows the floating format");
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = (ss * a[i] + alpha * s[i]) / denom;
  return PoincarePoint<T>::from_computed(std::move(s));
}

/// Left translation x -> a (+) x, an isometry of the ball; translate(-a, .)
/// undoes translate(a, .).
template <std::floating_point T>
PoincarePoint<T> translate(const PoincarePoint<T>& a, const PoincarePoint<T>& x) {
  return mobius_add(a, x);
}

/// Hyperbolic distance 2 artanh(|-a (+) b|).
///
/// Evaluated through the equivalent closed form
///   |-a (+) b|^2 = s / (s + p),  s = |a - b|^2,  p = (1 - |a|^2)(1 - |b|^2),
/// giving d = 2 log((sqrt(s + p) + sqrt(s)) / sqrt(p)), which stays accurate
/// when |-a (+) b| is close to 1.
template <std::floating_point T>
T distance(const PoincarePoint<T>& a, const PoincarePoint<T>& b) {
  detail::require_same_dim(a, b);
  T s = 0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const T diff = a[i] - b[i];
    s += diff * diff;
  }
  if (s == T(0)) return T(0);
  const T p = (T(1) - a.squared_norm()) * (T(1) - b.squared_norm());
  if (!(p > T(0))) throw Error(ErrorCode::NumericOverflow, "point on the boundary of the ball");
  const T d = T(2) * std::log((std::sqrt(s + p) + std::sqrt(s)) / std::sqrt(p));
  if (!std::isfinite(d)) throw Error(ErrorCode::NumericOverflow, "distance is not finite in this floating format");
  return d;
}

/// Conformal factor lambda_x = 2 / (1 - |x|^2) of the ball metric.
template <std::floating_point T>
T conformal_factor(const PoincarePoint<T>& a) {
  return T(2) / (T(1) - a.squared_norm());
}

/// Converts a hyperbolic distance from the origin into a Euclidean radius.
template <std::floating_point T>
T radius_for_distance(T hyperbolic_distance) {
  return std::tanh(hyperbolic_distance / T(2));
}

// ---------------------------------------------------------------------------
// Hyperparameters.

/// Edge length tau = ln((2 - eps/2) / (eps/2)) / (1.3 * l), with l the
/// longest root-to-leaf path and eps the machine precision of the format.
inline double compute_tau(std::size_t max_path_length, double epsilon) {
  if (max_path_length < 1) throw Error(ErrorCode::InvalidConfig, "max path length must be at least 1");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must lie in (0, 1)");
  const double half = epsilon / 2.0;
  return std::log((2.0 - half) / half) / (1.3 * static_cast<double>(max_path_length));
}

/// Number of distinct Hadamard codes available in dimension n: 2^floor(log2 n).
inline std::size_t hadamard_capacity(std::size_t dimension) { return dimension == 0 ? 0 : std::bit_floor(dimension); }

/// Smallest multiple of 10 whose Hadamard capacity exceeds max_degree, so a
/// node of maximal degree still has a code left for its parent direction.
inline std::size_t select_dimension(std::size_t max_degree) {
  std::size_t n = 10;
  while (hadamard_capacity(n) <= max_degree) n += 10;
  return n;
}

struct EmbeddingConfig {
  std::size_t dimension = 2;
  double tau = 1.0;
  double epsilon = std::numeric_limits<double>::epsilon();
  std::size_t max_path_length = 1;

  void validate() const {
    if (dimension < 2) throw Error(ErrorCode::InvalidConfig, "dimension must be at least 2");
    if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::InvalidConfig, "tau must be positive");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error(ErrorCode::InvalidConfig, "epsilon must lie in (0, 1)");
    if (max_path_length < 1) throw Error(ErrorCode::InvalidConfig, "max path length must be at least 1");
  }

  /// Dimension from select_dimension(max_degree) unless `dimension` is
  /// given; tau from the tree depth (a single-node tree counts as depth 1).
  static EmbeddingConfig for_tree(std::size_t depth, std::size_t max_degree, double epsilon = std::numeric_limits<double>::epsilon(),
                                  std::size_t dimension = 0) {
    EmbeddingConfig c;
    c.max_path_length = std::max<std::size_t>(depth, 1);
    c.epsilon = epsilon;
    c.tau = compute_tau(c.max_path_length, epsilon);
    c.dimension = dimension == 0 ? select_dimension(max_degree) : dimension;
    c.validate();
    return c;
  }
};

}  // namespace hyperhier
