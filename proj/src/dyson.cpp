#include "besqlab/dyson.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include <boost/random/normal_distribution.hpp>

#include "besqlab/errors.hpp"

namespace besqlab::dyson {

namespace {

void check_c(double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("c must be finite and nonnegative");
}

PathSample brownian_path(Rng& rng, std::span<const double> times, double variance_rate,
                         double start) {
  PathSample path;
  path.times.assign(times.begin(), times.end());
  path.values.reserve(times.size());
  boost::random::normal_distribution<double> normal;
  double state = start;
  double now = 0.0;
  for (double t : times) {
    if (t > now) state += std::sqrt(variance_rate * (t - now)) * normal(rng);
    path.values.push_back(state);
    now = t;
  }
  return path;
}

}  // namespace

void MatrixProcessConfig::validate() const {
  check_c(c);
  besq::BesqParams check(delta);
  PathSample probe{times, std::vector<double>(times.size(), 0.0)};
  probe.validate();
}

EigenPair eigenvalues(const DriverState& s, double c) {
  check_c(c);
  if (!(s.xi >= 0.0)) throw DomainError("xi must be nonnegative");
  const double sum = s.b1 + s.b2;
  const double diff = s.b1 - s.b2;
  const double root = std::sqrt(diff * diff + 2.0 * c * s.xi * s.xi);
  return {0.5 * (sum + root), 0.5 * (sum - root)};
}

Decomposition decompose(const EigenPair& e) {
  if (e.lambda1 < e.lambda2) throw DomainError("eigenvalues must be ordered");
  return {e.lambda1 + e.lambda2, e.lambda1 - e.lambda2};
}

double offdiag_norm(std::span<const double> v) {
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x / scale) * (x / scale);
  return scale * std::sqrt(ss);
}

EigenPair eigenvalues_from_vector_offdiag(double b1, double b2, std::span<const double> v,
                                          double c) {
  const auto n = v.size();
  if (n != 1 && n != 2 && n != 4) {
    throw DomainError("off-diagonal must have 1, 2 or 4 real coordinates");
  }
  // Conjugating by diag(1, w/|w|) turns the entry w into |w| and leaves the
  // diagonal alone.
  return eigenvalues(DriverState{b1, b2, offdiag_norm(v)}, c);
}

DriverPaths simulate_drivers(Rng& rng, const MatrixProcessConfig& cfg) {
  cfg.validate();
  Rng rng_b1 = spawn(rng);
  Rng rng_b2 = spawn(rng);
  Rng rng_xi = spawn(rng);
  DriverPaths d;
  d.b1 = brownian_path(rng_b1, cfg.times, 1.0, 0.0);
  d.b2 = brownian_path(rng_b2, cfg.times, 1.0, 0.0);
  d.xi = besq::bessel_path(rng_xi, besq::BesqParams(cfg.delta), 0.0, cfg.times);
  return d;
}

EigenPaths eigen_paths(const DriverPaths& drivers, double c) {
  EigenPaths out;
  out.lambda1.times = drivers.b1.times;
  out.lambda2.times = drivers.b1.times;
  const auto n = drivers.b1.size();
  out.lambda1.values.resize(n);
  out.lambda2.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const EigenPair e = eigenvalues(
        DriverState{drivers.b1.values[i], drivers.b2.values[i], drivers.xi.values[i]}, c);
    out.lambda1.values[i] = e.lambda1;
    out.lambda2.values[i] = e.lambda2;
  }
  return out;
}

EigenPaths eigen_paths(Rng& rng, const MatrixProcessConfig& cfg) {
  return eigen_paths(simulate_drivers(rng, cfg), cfg.c);
}

EigenPaths integrate_dyson_sde(Rng& rng, double delta, std::span<const double> times,
                               EigenPair initial) {
  const bool from_diagonal = initial.lambda1 == 0.0 && initial.lambda2 == 0.0;
  if (!(initial.lambda1 > initial.lambda2) && !from_diagonal) {
    throw DomainError("initial eigenvalues must satisfy lambda1 > lambda2 or both be 0");
  }
  Rng rng_sum = spawn(rng);
  Rng rng_gap = spawn(rng);
  const Decomposition start = decompose(initial);
  // sum = sqrt(2) B, gap = sqrt(2) R with R a Bessel(1 + delta) process.
  const PathSample sum = brownian_path(rng_sum, times, 2.0, start.sum);
  const PathSample radial = besq::bessel_path(rng_gap, besq::BesqParams(1.0 + delta),
                                              start.gap / std::numbers::sqrt2, times);
  EigenPaths out;
  out.lambda1.times.assign(times.begin(), times.end());
  out.lambda2.times = out.lambda1.times;
  out.lambda1.values.resize(times.size());
  out.lambda2.values.resize(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double gap = std::numbers::sqrt2 * radial.values[i];
    out.lambda1.values[i] = 0.5 * (sum.values[i] + gap);
    out.lambda2.values[i] = 0.5 * (sum.values[i] - gap);
  }
  return out;
}

void write_csv(std::ostream& os, const EigenPaths& paths) {
  const auto old = os.precision(17);
  os << "t,lambda1,lambda2\n";
  for (std::size_t i = 0; i < paths.lambda1.size(); ++i) {
    os << paths.lambda1.times[i] << ',' << paths.lambda1.values[i] << ','
       << paths.lambda2.values[i] << '\n';
  }
  os.precision(old);
}

}  // namespace besqlab::dyson
