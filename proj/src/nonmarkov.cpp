#include "besqlab/nonmarkov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "besqlab/besq.hpp"
#include "besqlab/errors.hpp"
#include "besqlab/specfun.hpp"

namespace besqlab::nonmarkov {

namespace {

constexpr double kTinyAbs = std::numeric_limits<double>::min();

// Upper limit of a hidden X coordinate whose observed sum is z.
double x_upper(double z, double c, XRange range) {
  return range == XRange::kFull ? z / c : z;
}

// The Y coordinate z - c x reaches 0 at the upper limit.
bool y_vanishes_at_upper(double c, XRange range) {
  return range == XRange::kFull || c == 1.0;
}

// z - c x at a node, accurate near the upper limit z / c.
double y_at(const quad::Abscissa& n, double z, double c, XRange range) {
  if (y_vanishes_at_upper(c, range) && n.from_right < n.from_left) {
    return c * n.from_right;
  }
  return z - c * n.x;
}

double exponent_of(double delta) { return std::min(0.5 * delta, 1.0); }

quad::QuadratureSpec axis_spec(const ScenarioParams& s, const Options& o, double rel_tol) {
  quad::QuadratureSpec spec;
  spec.rel_tol = rel_tol;
  spec.abs_tol = kTinyAbs;
  spec.max_levels = o.max_levels;
  spec.left_exponent = exponent_of(s.delta1);
  spec.right_exponent = y_vanishes_at_upper(s.c, o.range) ? exponent_of(s.delta2) : 1.0;
  return spec;
}

// Scenarios use at most a handful of dimensions; keep their parameter
// objects so the Gamma-function constants are computed once per thread.
const besq::BesqParams& params_for(double delta) {
  thread_local std::vector<besq::BesqParams> cache;
  for (const auto& p : cache) {
    if (p.delta == delta) return p;
  }
  if (cache.size() >= 8) cache.erase(cache.begin());
  cache.emplace_back(delta);
  return cache.back();
}

double log_p(double delta, double t, double x, double y) {
  return besq::log_transition_density(params_for(delta), t, x, y);
}

QuadratureResult exact(double value) {
  QuadratureResult r;
  r.value = value;
  r.evaluations = 1;
  r.converged = true;
  return r;
}

QuadratureResult product(const QuadratureResult& a, const QuadratureResult& b) {
  QuadratureResult r;
  r.value = a.value * b.value;
  r.error_estimate = std::abs(a.value) * b.error_estimate + std::abs(b.value) * a.error_estimate;
  r.evaluations = a.evaluations + b.evaluations;
  r.converged = a.converged && b.converged;
  return r;
}

void require(const QuadratureResult& r, const char* what) {
  if (!r.converged) {
    throw NonConvergenceError(std::string(what) + ": quadrature did not converge");
  }
}

}  // namespace

void ScenarioParams::validate() const {
  if (!(c >= 0.0 && c <= 1.0)) throw DomainError("c must lie in [0, 1]");
  if (!(delta1 > 0.0) || !(delta2 > 0.0)) throw DomainError("dimensions must be positive");
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0, 1)");
  if (!(z1 > 0.0) || !(z2 > 0.0) || !(z3 > 0.0)) {
    throw DomainError("observed values must be positive");
  }
}

double log_kernel_A11(const ScenarioParams& s, double x1) {
  const double y1 = s.z1 - s.c * x1;
  if (!(x1 > 0.0) || !(y1 > 0.0)) throw DomainError("A11 needs 0 < x1 < z1 / c");
  return log_p(s.delta1, s.eps, 0.0, x1) + log_p(s.delta2, s.eps, 0.0, y1);
}

double kernel_A11(const ScenarioParams& s, double x1) {
  return std::exp(log_kernel_A11(s, x1));
}

// ---------------------------------------------------------------------------
// ConditionalLaw

ConditionalLaw::ConditionalLaw(const ScenarioParams& s, bool use_eps, const Options& opts)
    : s_(s), use_eps_(use_eps), opts_(opts) {
  s_.validate();
  if (s_.c == 0.0) {
    // Z = Y; X integrates out.
    const double v = use_eps_ ? std::exp(log_p(s_.delta2, s_.eps, 0.0, s_.z1) +
                                         log_p(s_.delta2, 1.0 - s_.eps, s_.z1, s_.z2))
                              : std::exp(log_p(s_.delta2, 1.0, s_.z1, s_.z2));
    pair_ = exact(v);
    return;
  }
  const auto spec = axis_spec(s_, opts_, opts_.rel_tol);
  pair_ = quad::integrate(
      [&](const quad::Abscissa& n) {
        return inner(n.x, y_at(n, s_.z2, s_.c, opts_.range));
      },
      0.0, x_upper(s_.z2, s_.c, opts_.range), spec);
}

// g(x2): the density of (Z(eps), X(1), Y(1)) at (z1, x2, y2), or A21 when
// eps -> 0.
QuadratureResult ConditionalLaw::inner(double x2, double y2) const {
  if (auto it = inner_cache_.find({x2, y2}); it != inner_cache_.end()) return it->second;
  QuadratureResult g;
  if (!use_eps_) {
    g = exact(std::exp(log_p(s_.delta1, 1.0, 0.0, x2) + log_p(s_.delta2, 1.0, s_.z1, y2)));
  } else {
    const double tail = 1.0 - s_.eps;
    const auto spec = axis_spec(s_, opts_, 0.1 * opts_.rel_tol);
    g = quad::integrate(
        [&](const quad::Abscissa& n) {
          const double x1 = n.x;
          const double y1 = y_at(n, s_.z1, s_.c, opts_.range);
          return std::exp(log_p(s_.delta1, s_.eps, 0.0, x1) +
                          log_p(s_.delta2, s_.eps, 0.0, y1) +
                          log_p(s_.delta1, tail, x1, x2) + log_p(s_.delta2, tail, y1, y2));
        },
        0.0, x_upper(s_.z1, s_.c, opts_.range), spec);
  }
  inner_cache_.emplace(std::pair{x2, y2}, g);
  return g;
}

// h(x2): density of cX(2) + Y(2) at z3 given (X(1), Y(1)) = (x2, y2).
QuadratureResult ConditionalLaw::third_axis(double x2, double y2, double z3) const {
  const auto spec = axis_spec(s_, opts_, 0.1 * opts_.rel_tol);
  return quad::integrate(
      [&](const quad::Abscissa& n) {
        const double y3 = y_at(n, z3, s_.c, opts_.range);
        return std::exp(log_p(s_.delta1, 1.0, x2, n.x) + log_p(s_.delta2, 1.0, y2, y3));
      },
      0.0, x_upper(z3, s_.c, opts_.range), spec);
}

QuadratureResult ConditionalLaw::triple(double z3) const {
  if (!(z3 > 0.0)) throw DomainError("z3 must be positive");
  if (s_.c == 0.0) {
    return exact(pair_.value * std::exp(log_p(s_.delta2, 1.0, s_.z2, z3)));
  }
  const auto spec = axis_spec(s_, opts_, opts_.rel_tol);
  return quad::integrate(
      [&](const quad::Abscissa& n) {
        const double y2 = y_at(n, s_.z2, s_.c, opts_.range);
        const QuadratureResult g = inner(n.x, y2);
        if (g.value == 0.0) return g;
        return product(g, third_axis(n.x, y2, z3));
      },
      0.0, x_upper(s_.z2, s_.c, opts_.range), spec);
}

double ConditionalLaw::density(double z3) const {
  if (!(pair_.value >= 1e-300)) {
    throw UnreliableRatioError("pair density below 1e-300; ratio is unreliable");
  }
  return triple(z3).value / pair_.value;
}

QuadratureResult ConditionalLaw::total_mass() const {
  quad::QuadratureSpec spec;
  spec.rel_tol = 10.0 * opts_.rel_tol;
  spec.abs_tol = kTinyAbs;
  spec.max_levels = 10;
  spec.left_exponent = std::min(0.5 * (s_.delta1 + s_.delta2), 1.0);
  const double scale = std::max(1.0, s_.z2);
  return quad::integrate_to_infinity([&](double z3) { return density(z3); }, 0.0, spec,
                                     scale);
}

double ConditionalLaw::panel(double lo, double hi, quad::QuadratureSpec spec, int depth) const {
  const auto r = quad::integrate([&](double z3) { return density(z3); }, lo, hi, spec);
  constexpr int kMaxDepth = 6;
  if (r.converged || depth == kMaxDepth) return r.value;
  // Unresolved panels are bisected; each half gets half the absolute budget.
  const double mid = 0.5 * (lo + hi);
  quad::QuadratureSpec right = spec;
  right.left_exponent = 1.0;
  spec.right_exponent = 1.0;
  spec.abs_tol *= 0.5;
  right.abs_tol *= 0.5;
  return panel(lo, mid, spec, depth + 1) + panel(mid, hi, right, depth + 1);
}

std::vector<double> ConditionalLaw::cdf(std::span<const double> points) const {
  quad::QuadratureSpec spec;
  spec.rel_tol = 10.0 * opts_.rel_tol;
  // The density is normalized, so panel errors are absolute CDF errors.
  spec.abs_tol = spec.rel_tol / static_cast<double>(std::max<std::size_t>(points.size(), 1));
  spec.max_levels = 8;
  std::vector<double> out;
  out.reserve(points.size());
  double lo = 0.0;
  double acc = 0.0;
  for (double z : points) {
    if (!(z > lo) && !(z == lo && lo > 0.0)) throw DomainError("cdf points must increase");
    if (z > lo) {
      spec.left_exponent = lo == 0.0 ? std::min(0.5 * (s_.delta1 + s_.delta2), 1.0) : 1.0;
      acc += panel(lo, z, spec, 0);
      lo = z;
    }
    out.push_back(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------

QuadratureResult joint_density_pair(const ScenarioParams& s, bool use_eps, const Options& opts) {
  return ConditionalLaw(s, use_eps, opts).pair();
}

QuadratureResult joint_density_triple(const ScenarioParams& s, bool use_eps,
                                      const Options& opts) {
  ConditionalLaw law(s, use_eps, opts);
  return law.triple(s.z3);
}

RatioResult conditional_ratio(const ScenarioParams& s, bool use_eps, const Options& opts) {
  ConditionalLaw law(s, use_eps, opts);
  RatioResult r;
  r.pair = law.pair();
  if (!(r.pair.value >= 1e-300)) {
    throw UnreliableRatioError("pair density below 1e-300; ratio is unreliable");
  }
  r.triple = law.triple(s.z3);
  r.value = r.triple.value / r.pair.value;
  const double rel = (r.triple.value > 0.0 ? r.triple.error_estimate / r.triple.value : 0.0) +
                     r.pair.error_estimate / r.pair.value;
  r.error_estimate = std::abs(r.value) * rel;
  r.converged = r.pair.converged && r.triple.converged;
  return r;
}

double c1_constant(double c, double delta1, double delta2, XRange range) {
  if (!(c > 0.0 && c <= 1.0)) throw DomainError("C1 needs 0 < c <= 1");
  if (!(delta1 > 0.0) || !(delta2 > 0.0)) throw DomainError("dimensions must be positive");
  const double upper = range == XRange::kFull ? 1.0 / c : 1.0;
  const bool vanishing = range == XRange::kFull || c == 1.0;
  quad::QuadratureSpec spec;
  spec.rel_tol = 1e-12;
  spec.left_exponent = exponent_of(delta1);
  spec.right_exponent = vanishing ? exponent_of(delta2) : 1.0;
  const auto r = quad::integrate(
      [&](const quad::Abscissa& n) {
        const double w = vanishing && n.from_right < n.from_left ? c * n.from_right
                                                                 : 1.0 - c * n.x;
        return std::pow(n.x, 0.5 * delta1 - 1.0) * std::pow(w, 0.5 * delta2 - 1.0);
      },
      0.0, upper, spec);
  require(r, "c1_constant");
  return r.value;
}

QuadratureResult weighted_pair(const ScenarioParams& s, const Options& opts) {
  s.validate();
  if (!(s.c > 0.0)) throw DomainError("weighted_pair needs c > 0");
  const besq::BesqParams p1(s.delta1);
  const besq::BesqParams p2(s.delta2);
  const auto spec = axis_spec(s, opts, opts.rel_tol);
  return quad::integrate(
      [&](const quad::Abscissa& n) {
        const double y2 = y_at(n, s.z2, s.c, opts.range);
        return std::exp(log_p(s.delta1, 1.0, 0.0, n.x) + log_p(s.delta2, 1.0, s.z1, y2) +
                        besq::log_weighted_zero_limit(p1, 1.0, n.x) +
                        besq::log_weighted_zero_limit(p2, 1.0, y2));
      },
      0.0, x_upper(s.z2, s.c, opts.range), spec);
}

QuadratureResult zero_limit_weighted_triple(const ScenarioParams& s, const Options& opts) {
  QuadratureResult q = weighted_pair(s, opts);
  const double c1 = c1_constant(s.c, s.delta1, s.delta2, opts.range);
  q.value *= c1;
  q.error_estimate *= c1;
  return q;
}

double d_of_r(double r, double c) {
  if (!(r > 0.0)) throw DomainError("r must be positive");
  if (!(c > 0.0 && c < 1.0)) throw DomainError("D(r) needs 0 < c < 1");
  if (std::isinf(r)) return 1.0;
  return 1.0 + (1.0 - c) / (1.0 - c + std::sqrt(r) * c);
}

double laplace_asymptotic(const LaplaceProblem& p, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  if (!(p.nu > 0.0) || !(p.b > 0.0)) throw DomainError("Laplace problem needs nu, b > 0");
  return p.f_inf0 *
         std::exp(specfun::ln_gamma(p.nu) - p.nu * std::log(p.b * lambda) - p.a * lambda);
}

QuadratureResult laplace_numeric(const LaplaceProblem& p, double lambda, double rel_tol) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  if (!(p.nu > 0.0)) throw DomainError("nu must be positive");
  quad::QuadratureSpec spec;
  spec.rel_tol = rel_tol;
  spec.abs_tol = kTinyAbs;
  spec.left_exponent = std::min(p.nu, 1.0);
  // e^{-a lambda} is factored out and restored at the end.
  QuadratureResult r = quad::integrate(
      [&](double x) {
        return std::exp(-lambda * (p.phi(x) - p.a) + (p.nu - 1.0) * std::log(x)) *
               p.f(lambda, x);
      },
      0.0, 1.0, spec);
  const double scale = std::exp(-p.a * lambda);
  r.value *= scale;
  r.error_estimate *= scale;
  return r;
}

double laplace_lower_slope(const LaplaceProblem& p, int grid_points) {
  if (grid_points < 2) throw DomainError("grid needs at least two points");
  double k = std::numeric_limits<double>::infinity();
  for (int i = 1; i < grid_points; ++i) {
    const double x = static_cast<double>(i) / grid_points;
    k = std::min(k, (p.phi(x) - p.a) / x);
  }
  return k;
}

double lemma3_ratio_check(double r1, double r2, double z2, double c, double delta1,
                          double delta2, const Options& opts) {
  if (!(r1 > 0.0) || !(r2 > 0.0)) throw DomainError("r1, r2 must be positive");
  if (!(c > 0.0 && c < 1.0)) throw DomainError("ratio check needs 0 < c < 1");
  if (r1 == r2) return 0.0;
  auto ratio = [&](double r) {
    ScenarioParams s;
    s.c = c;
    s.delta1 = delta1;
    s.delta2 = delta2;
    s.z1 = z2 * r;
    s.z2 = z2;
    const QuadratureResult num = weighted_pair(s, opts);
    const QuadratureResult den = joint_density_pair(s, false, opts);
    require(num, "weighted pair");
    require(den, "pair");
    if (!(den.value >= 1e-300)) throw UnreliableRatioError("pair density below 1e-300");
    return num.value / den.value;
  };
  const double predicted = std::pow(d_of_r(r1, c) / d_of_r(r2, c), -0.5 * delta1);
  return ratio(r1) / ratio(r2) - predicted;
}

}  // namespace besqlab::nonmarkov
