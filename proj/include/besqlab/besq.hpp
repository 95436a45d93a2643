#pragma once

// Squared Bessel processes BESQ(delta): transition density, its limiting
// regimes, and exact sampling of the transition law.

#include <iosfwd>
#include <span>
#include <vector>

#include "besqlab/rng.hpp"
#include "besqlab/specfun.hpp"

namespace besqlab::besq {

struct BesqParams {
  explicit BesqParams(double delta);
  double delta;
  double nu;  // (delta - 2) / 2
  double ln_gamma_half;  // ln Gamma(delta / 2)
  specfun::BesselIndex index;
};

/// Discretely observed path. times strictly increasing and >= 0.
struct PathSample {
  std::vector<double> times;
  std::vector<double> values;

  void validate() const;
  std::size_t size() const noexcept { return times.size(); }
};

/// CSV with header "t,value".
void write_csv(std::ostream& os, const PathSample& path);

/// ln p_t(x, y). x = 0 uses the closed form started from the origin.
/// Throws DomainError for t <= 0, x < 0 or y <= 0.
double log_transition_density(const BesqParams& p, double t, double x, double y);

/// p_t(x, y), the BESQ(delta) transition density in y.
double transition_density(const BesqParams& p, double t, double x, double y);

/// lim_{y -> 0+} y^{1 - delta/2} p_t(x, y) = (2t)^{-delta/2} e^{-x/2t} / Gamma(delta/2).
/// Also valid at x = 0.
double weighted_zero_limit(const BesqParams& p, double t, double x);
double log_weighted_zero_limit(const BesqParams& p, double t, double x);

/// Leading-order approximation of p_t(x, y) as sqrt(xy) grows. Not a density.
double far_field_density(const BesqParams& p, double t, double x, double y);

/// One exact draw of X_t given X_0 = x. For delta >= 1 this is
/// (sqrt(x) + sqrt(t) G)^2 + Gamma((delta-1)/2, scale 2t); for delta < 1,
/// Gamma(delta/2 + N, scale 2t) with N ~ Poisson(x / 2t).
double sample_transition(Rng& rng, const BesqParams& p, double t, double x);

/// Exact skeleton X(times[i]) started from x0 at time 0.
PathSample sample_path(Rng& rng, const BesqParams& p, double x0,
                       std::span<const double> times);

/// Bessel process sqrt(X) started from xi0 >= 0.
PathSample bessel_path(Rng& rng, const BesqParams& p, double xi0,
                       std::span<const double> times);

}  // namespace besqlab::besq
