#include "besqlab/quadrature.hpp"

#include <algorithm>
#include <array>

namespace besqlab::quad {

void QuadratureSpec::validate() const {
  if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) {
    throw DomainError("quadrature tolerances must be positive");
  }
  if (max_levels < 1) throw DomainError("max_levels must be >= 1");
  auto ok = [](double e) { return e > 0.0 && e <= 1.0; };
  if (!ok(left_exponent) || !ok(right_exponent)) {
    throw DomainError("endpoint exponents must lie in (0, 1]");
  }
}

QuadratureSpec QuadratureSpec::with_exponents(double left, double right) const {
  QuadratureSpec s = *this;
  s.left_exponent = left;
  s.right_exponent = right;
  return s;
}

namespace detail {

double window_for_exponent(double exponent) {
  // Relative gap g at which the neglected end piece, ~ g^alpha / alpha, drops
  // below 1e-17; limited by the smallest normal double.
  const double g = std::clamp(std::pow(1e-17 * exponent, 1.0 / exponent),
                              1e-300, 1e-17);
  const double s = 0.5 * std::log(2.0 / g);
  return std::asinh(2.0 * s / std::numbers::pi);
}

}  // namespace detail

CoordinateFn constant_bound(double value) {
  return [value](std::span<const double>) { return value; };
}

namespace {

QuadratureResult iterate_axis(const CoordinateFn& f,
                              std::span<const AxisBounds> axes,
                              std::array<double, 3>& coords, std::size_t depth) {
  const AxisBounds& axis = axes[depth];
  const std::span<const double> outer(coords.data(), depth);
  const double lo = axis.lower(outer);
  const double hi = axis.upper(outer);
  if (!(lo < hi)) {
    // Empty inner region contributes nothing.
    QuadratureResult empty;
    empty.converged = true;
    return empty;
  }
  if (depth + 1 == axes.size()) {
    return integrate(
        [&](double x) {
          coords[depth] = x;
          return f(std::span<const double>(coords.data(), axes.size()));
        },
        lo, hi, axis.spec);
  }
  return integrate(
      [&](double x) {
        coords[depth] = x;
        return iterate_axis(f, axes, coords, depth + 1);
      },
      lo, hi, axis.spec);
}

}  // namespace

QuadratureResult integrate_iterated(const CoordinateFn& f,
                                    std::span<const AxisBounds> axes) {
  if (axes.empty() || axes.size() > 3) {
    throw DomainError("integrate_iterated supports 1 to 3 axes");
  }
  std::array<double, 3> coords{};
  return iterate_axis(f, axes, coords, 0);
}

}  // namespace besqlab::quad
