#pragma once

// Tanh-sinh (double-exponential) quadrature on finite intervals, with
// per-endpoint exponents for integrands that behave like x^{alpha-1} at an
// endpoint, plus a half-line wrapper and an iterated (up to 3-D) driver.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "besqlab/errors.hpp"

namespace besqlab::quad {

struct QuadratureSpec {
  double rel_tol = 1e-9;
  double abs_tol = 1e-14;
  int max_levels = 12;
  // alpha such that the integrand is ~ x^{alpha-1} at that endpoint; 1 = regular.
  double left_exponent = 1.0;
  double right_exponent = 1.0;

  void validate() const;
  QuadratureSpec with_exponents(double left, double right) const;
};

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

// A quadrature node. from_left = x - a and from_right = b - x are computed
// from the transformation itself, so they stay accurate when x rounds onto
// an endpoint.
struct Abscissa {
  double x;
  double from_left;
  double from_right;
};

namespace detail {

// Half-width (in the tanh-sinh parameter) of the node window on one side.
double window_for_exponent(double exponent);

template <class F>
auto call_at(F& f, const Abscissa& node) {
  if constexpr (std::is_invocable_v<F&, const Abscissa&>) {
    return f(node);
  } else {
    return f(node.x);
  }
}

template <class R>
void accumulate(const R& r, double weight, double& sum, double& err_sum,
                std::size_t& evals, bool& inner_ok) {
  if constexpr (std::is_same_v<R, QuadratureResult>) {
    sum += weight * r.value;
    err_sum += weight * r.error_estimate;
    evals += r.evaluations;
    inner_ok = inner_ok && r.converged;
  } else {
    sum += weight * static_cast<double>(r);
    evals += 1;
  }
}

template <class R>
bool finite_value(const R& r) {
  if constexpr (std::is_same_v<R, QuadratureResult>) {
    return std::isfinite(r.value) && std::isfinite(r.error_estimate);
  } else {
    return std::isfinite(static_cast<double>(r));
  }
}

}  // namespace detail

/// Integrates f over (a, b). f is called either with a double or with an
/// Abscissa; it may return a double or a QuadratureResult (nested
/// integration), in which case inner error estimates are integrated and added
/// to the outer estimate, and inner non-convergence propagates.
///
/// Endpoints are never evaluated. The error estimate is the difference of
/// the last two refinement levels.
template <class F>
QuadratureResult integrate(F&& f, double a, double b,
                           const QuadratureSpec& spec = {}) {
  spec.validate();
  if (!std::isfinite(a) || !std::isfinite(b) || !(a < b)) {
    throw DomainError("integrate requires finite a < b");
  }
  using Node = Abscissa;
  using R = decltype(detail::call_at(f, std::declval<const Node&>()));
  constexpr bool kPlainDouble = !std::is_invocable_v<F&, const Abscissa&>;

  const double half = 0.5 * (b - a);
  const double t_left = detail::window_for_exponent(spec.left_exponent);
  const double t_right = detail::window_for_exponent(spec.right_exponent);

  double sum = 0.0;
  double err_sum = 0.0;
  std::size_t evals = 0;
  bool inner_ok = true;

  auto add_node = [&](double t) {
    const double s = 0.5 * std::numbers::pi * std::sinh(std::abs(t));
    const double e = std::exp(-2.0 * s);
    const double gap = half * 2.0 * e / (1.0 + e);
    const double weight = half * 0.5 * std::numbers::pi * std::cosh(t) * 4.0 *
                          e / ((1.0 + e) * (1.0 + e));
    if (!(gap > 0.0) || !(weight > 0.0)) return;
    const double far = 2.0 * half - gap;
    const Node node = t < 0.0 ? Node{a + gap, gap, far} : Node{b - gap, far, gap};
    if constexpr (kPlainDouble) {
      if (!(node.x > a) || !(node.x < b)) return;
    }
    const R r = detail::call_at(f, node);
    if (!detail::finite_value(r)) {
      throw DomainError("integrand is not finite at x = " + std::to_string(node.x));
    }
    detail::accumulate(r, weight, sum, err_sum, evals, inner_ok);
  };

  // Level 0: integer nodes.
  for (int k = -static_cast<int>(t_left); k <= static_cast<int>(t_right); ++k) {
    add_node(static_cast<double>(k));
  }
  double step = 1.0;
  double previous = step * sum;
  QuadratureResult out;
  constexpr int kMinLevels = 3;
  const int min_levels = std::min(kMinLevels, spec.max_levels);
  for (int level = 1; level <= spec.max_levels; ++level) {
    step *= 0.5;
    for (double t = -step; t >= -t_left; t -= 2.0 * step) add_node(t);
    for (double t = step; t <= t_right; t += 2.0 * step) add_node(t);
    const double current = step * sum;
    const double diff = std::abs(current - previous);
    previous = current;
    out.value = current;
    out.error_estimate = diff + step * err_sum;
    out.evaluations = evals;
    const double tol = std::max(spec.rel_tol * std::abs(current), spec.abs_tol);
    if (level >= min_levels && diff <= tol) {
      // Outer rule resolved; inner estimates must fit in the same budget.
      out.converged = inner_ok && out.error_estimate <= tol;
      return out;
    }
  }
  out.converged = false;
  return out;
}

/// Integrates f over (a, inf) through x = a + scale * u / (1 - u).
template <class F>
QuadratureResult integrate_to_infinity(F&& f, double a,
                                       QuadratureSpec spec = {},
                                       double scale = 1.0) {
  if (!std::isfinite(a)) throw DomainError("lower limit must be finite");
  if (!(scale > 0.0)) throw DomainError("scale must be positive");
  spec.right_exponent = 1.0;
  auto mapped = [&](const Abscissa& u) {
    const double r = u.from_right;
    const double offset = scale * u.from_left / r;
    const double jac = scale / (r * r);
    const Abscissa node{a + offset, offset,
                        std::numeric_limits<double>::infinity()};
    auto v = detail::call_at(f, node);
    using V = decltype(v);
    if constexpr (std::is_same_v<V, QuadratureResult>) {
      if (v.value == 0.0 && v.error_estimate == 0.0) return v;
      v.value *= jac;
      v.error_estimate *= jac;
      return v;
    } else {
      const double value = static_cast<double>(v);
      return value == 0.0 ? 0.0 : value * jac;
    }
  };
  return integrate(mapped, 0.0, 1.0, spec);
}

using CoordinateFn = std::function<double(std::span<const double>)>;

/// One axis of an iterated integral. Bounds receive the coordinates of the
/// enclosing (outer) axes, outermost first.
struct AxisBounds {
  CoordinateFn lower;
  CoordinateFn upper;
  QuadratureSpec spec;
};

/// Nested integration, axes[0] outermost; at most three axes. The integrand
/// receives all coordinates, outermost first.
QuadratureResult integrate_iterated(const CoordinateFn& f,
                                    std::span<const AxisBounds> axes);

/// Constant bound helper for AxisBounds.
CoordinateFn constant_bound(double value);

}  // namespace besqlab::quad
