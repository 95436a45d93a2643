#pragma once

// Joint densities of Z = cX + Y observed at times (eps, 1, 2), where X and Y
// are independent BESQ(delta1) and BESQ(delta2) processes from 0, and the
// conditional density of Z(2) given (Z(eps), Z(1)) = (z1, z2). Everything is
// evaluated by nested tanh-sinh quadrature over the hidden X coordinates with
// kernels assembled in log space.
//
// Kernels (y_i = z_i - c x_i):
//   A11(x1)     = p_eps(0, x1; d1)     p_eps(0, y1; d2)
//   A12(x1, x2) = p_{1-eps}(x1, x2; d1) p_{1-eps}(y1, y2; d2)
//   A13(x2, x3) = p_1(x2, x3; d1)       p_1(y2, y3; d2)
//   A21(x2)     = p_1(0, x2; d1)        p_1(z1, y2; d2)        (eps -> 0)
//   A32(x2)     = w(x2; d1) w(y2; d2),  w = besq::weighted_zero_limit at t = 1

#include <functional>
#include <map>
#include <utility>
#include <span>
#include <vector>

#include "besqlab/quadrature.hpp"

namespace besqlab::nonmarkov {

using quad::QuadratureResult;

/// Range of each hidden X coordinate.
enum class XRange {
  kFull,       // x in (0, z / c): the whole support, y = z - c x > 0.
  kTruncated,  // x in (0, z): drops x in (z, z / c) when c < 1.
};

struct ScenarioParams {
  double c = 0.5;
  double delta1 = 1.0;
  double delta2 = 1.0;
  double eps = 0.5;
  double z1 = 1.0;
  double z2 = 1.0;
  double z3 = 1.0;

  /// 0 <= c <= 1 (c = 0 and c = 1 are the Markov cases), deltas > 0,
  /// 0 < eps < 1, z's > 0.
  void validate() const;
};

struct Options {
  XRange range = XRange::kFull;
  double rel_tol = 1e-8;  // outer axis; inner axes use rel_tol / 10
  int max_levels = 12;
};

double log_kernel_A11(const ScenarioParams& s, double x1);
double kernel_A11(const ScenarioParams& s, double x1);

/// Density of (Z(eps), Z(1)) at (z1, z2); with use_eps = false, the eps -> 0
/// object q(z2; z1) = int A21 dx2.
QuadratureResult joint_density_pair(const ScenarioParams& s, bool use_eps,
                                    const Options& opts = {});

/// Density of (Z(eps), Z(1), Z(2)) at (z1, z2, z3); with use_eps = false the
/// eps -> 0 object int A21 A13 dx3 dx2.
QuadratureResult joint_density_triple(const ScenarioParams& s, bool use_eps,
                                      const Options& opts = {});

struct RatioResult {
  double value = 0.0;
  double error_estimate = 0.0;
  bool converged = false;
  QuadratureResult pair;
  QuadratureResult triple;
};

/// triple / pair: the conditional density of Z(2) at z3 given
/// (Z(eps), Z(1)) = (z1, z2). Throws UnreliableRatioError when the pair
/// density is below 1e-300.
RatioResult conditional_ratio(const ScenarioParams& s, bool use_eps,
                              const Options& opts = {});

/// Conditional law of Z(2) for fixed (c, deltas, eps, z1, z2); s.z3 is
/// ignored. The inner x1 integrals are cached per x2 node, so repeated
/// evaluation at many z3 is cheap. Not safe for concurrent use.
class ConditionalLaw {
 public:
  ConditionalLaw(const ScenarioParams& s, bool use_eps, const Options& opts = {});

  const QuadratureResult& pair() const noexcept { return pair_; }
  QuadratureResult triple(double z3) const;
  /// Conditional density at z3.
  double density(double z3) const;
  /// int_0^inf density(z3) dz3.
  QuadratureResult total_mass() const;
  /// Conditional CDF at each point of `points` (sorted ascending, > 0).
  std::vector<double> cdf(std::span<const double> points) const;

 private:
  QuadratureResult inner(double x2, double y2) const;
  QuadratureResult third_axis(double x2, double y2, double z3) const;
  double panel(double lo, double hi, quad::QuadratureSpec spec, int depth) const;

  ScenarioParams s_;
  bool use_eps_;
  Options opts_;
  QuadratureResult pair_;
  // Keyed by (x2, y2): near x2 = z2 / c distinct nodes share a rounded x2.
  mutable std::map<std::pair<double, double>, QuadratureResult> inner_cache_;
};

/// int_0^U u^{d1/2 - 1} (1 - c u)^{d2/2 - 1} du, U = 1 (kTruncated) or
/// U = 1 / c (kFull).
double c1_constant(double c, double delta1, double delta2,
                   XRange range = XRange::kTruncated);

/// int A21 A32 dx2 at (z1, z2).
QuadratureResult weighted_pair(const ScenarioParams& s, const Options& opts = {});

/// C1 * weighted_pair: the limit of z3^{1 - (d1 + d2)/2} times the eps -> 0
/// triple density as z3 -> 0+. C1 uses the same X range as opts.
QuadratureResult zero_limit_weighted_triple(const ScenarioParams& s,
                                            const Options& opts = {});

/// 1 + (1 - c) / (1 - c + sqrt(r) c).
double d_of_r(double r, double c);

/// int_0^1 e^{-lambda phi(x)} f(lambda, x) x^{nu - 1} dx with phi increasing,
/// phi(0+) = a, phi'(0+) = b > 0, and f(lambda, x / lambda) -> f_inf0.
struct LaplaceProblem {
  double a = 0.0;
  double b = 1.0;
  double nu = 1.0;
  std::function<double(double)> phi;
  std::function<double(double, double)> f;
  double f_inf0 = 1.0;
};

/// f_inf0 Gamma(nu) b^{-nu} lambda^{-nu} e^{-a lambda}.
double laplace_asymptotic(const LaplaceProblem& p, double lambda);

/// The integral itself, by quadrature with left exponent min(nu, 1).
QuadratureResult laplace_numeric(const LaplaceProblem& p, double lambda,
                                 double rel_tol = 1e-10);

/// inf over a uniform interior grid of (phi(x) - a) / x. Must be positive
/// for the asymptotic to apply.
double laplace_lower_slope(const LaplaceProblem& p, int grid_points = 2000);

/// With R(r) = weighted_pair / pair at z1 = r z2 (eps -> 0 objects), returns
/// R(r1) / R(r2) - (D(r1) / D(r2))^{-delta1/2}; tends to 0 as z2 grows.
double lemma3_ratio_check(double r1, double r2, double z2, double c, double delta1,
                          double delta2, const Options& opts = {});

}  // namespace besqlab::nonmarkov
