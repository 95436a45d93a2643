#include "besqlab/besq.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "besqlab/errors.hpp"
#include "besqlab/specfun.hpp"

namespace besqlab::besq {

namespace {

void check_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("time must be positive");
}

void check_times(std::span<const double> times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0) {
      throw DomainError("observation times must be finite and nonnegative");
    }
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw DomainError("observation times must be strictly increasing");
    }
  }
}

double checked_delta(double d) {
  if (!(d > 0.0) || !std::isfinite(d)) throw DomainError("dimension delta must be positive");
  return d;
}

}  // namespace

BesqParams::BesqParams(double d)
    : delta(checked_delta(d)),
      nu(0.5 * (d - 2.0)),
      ln_gamma_half(specfun::ln_gamma(0.5 * d)),
      index(nu) {}

void PathSample::validate() const {
  if (times.size() != values.size()) throw DomainError("path times/values length mismatch");
  check_times(times);
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("path values must be finite");
  }
}

void write_csv(std::ostream& os, const PathSample& path) {
  const auto old = os.precision(17);
  os << "t,value\n";
  for (std::size_t i = 0; i < path.size(); ++i) {
    os << path.times[i] << ',' << path.values[i] << '\n';
  }
  os.precision(old);
}

double log_weighted_zero_limit(const BesqParams& p, double t, double x) {
  check_time(t);
  if (!(x >= 0.0)) throw DomainError("x must be nonnegative");
  const double h = 0.5 * p.delta;
  return -h * std::log(2.0 * t) - p.ln_gamma_half - x / (2.0 * t);
}

double weighted_zero_limit(const BesqParams& p, double t, double x) {
  return std::exp(log_weighted_zero_limit(p, t, x));
}

double log_transition_density(const BesqParams& p, double t, double x, double y) {
  check_time(t);
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("x must be finite and nonnegative");
  if (!(y > 0.0) || !std::isfinite(y)) throw DomainError("y must be finite and positive");
  if (x == 0.0) {
    return (0.5 * p.delta - 1.0) * std::log(y) + log_weighted_zero_limit(p, t, y);
  }
  const double rx = std::sqrt(x);
  const double ry = std::sqrt(y);
  const double arg = rx * ry / t;
  const double gap = rx - ry;
  return -std::log(2.0 * t) + 0.5 * p.nu * std::log(y / x) - gap * gap / (2.0 * t) +
         specfun::log_bessel_i_scaled(p.index, arg);
}

double transition_density(const BesqParams& p, double t, double x, double y) {
  const double log_value = log_transition_density(p, t, x, y);
  const double value = std::exp(log_value);
  if (std::isinf(value)) throw DomainError("transition density overflows");
  return value;
}

double far_field_density(const BesqParams& p, double t, double x, double y) {
  check_time(t);
  if (!(x > 0.0) || !(y > 0.0)) throw DomainError("far field needs x, y > 0");
  const double gap = std::sqrt(x) - std::sqrt(y);
  const double log_value = -std::log(2.0 * t * std::sqrt(2.0 * std::numbers::pi)) +
                           0.25 * (p.delta - 3.0) * std::log(y) -
                           0.25 * (p.delta - 1.0) * std::log(x) -
                           gap * gap / (2.0 * t);
  return std::exp(log_value);
}

double sample_transition(Rng& rng, const BesqParams& p, double t, double x) {
  check_time(t);
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("x must be finite and nonnegative");
  if (p.delta >= 1.0) {
    // Noncentral chi-square with delta >= 1 degrees of freedom splits into
    // one shifted Gaussian square plus a central chi-square with delta - 1.
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    const double shifted = std::sqrt(x) + std::sqrt(t) * normal(rng);
    double rest = 0.0;
    if (p.delta > 1.0) {
      boost::random::gamma_distribution<double> gamma(0.5 * (p.delta - 1.0), 2.0 * t);
      rest = gamma(rng);
    }
    return shifted * shifted + rest;
  }
  double shape = 0.5 * p.delta;
  if (x > 0.0) {
    boost::random::poisson_distribution<long long> poisson(x / (2.0 * t));
    shape += static_cast<double>(poisson(rng));
  }
  boost::random::gamma_distribution<double> gamma(shape, 2.0 * t);
  return gamma(rng);
}

PathSample sample_path(Rng& rng, const BesqParams& p, double x0,
                       std::span<const double> times) {
  if (!(x0 >= 0.0) || !std::isfinite(x0)) throw DomainError("x0 must be finite and nonnegative");
  check_times(times);
  PathSample path;
  path.times.assign(times.begin(), times.end());
  path.values.reserve(times.size());
  double state = x0;
  double now = 0.0;
  for (double t : times) {
    if (t > now) state = sample_transition(rng, p, t - now, state);
    path.values.push_back(state);
    now = t;
  }
  return path;
}

PathSample bessel_path(Rng& rng, const BesqParams& p, double xi0,
                       std::span<const double> times) {
  if (!(xi0 >= 0.0)) throw DomainError("xi0 must be nonnegative");
  PathSample path = sample_path(rng, p, xi0 * xi0, times);
  for (double& v : path.values) v = std::sqrt(v);
  return path;
}

}  // namespace besqlab::besq
