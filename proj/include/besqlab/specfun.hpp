#pragma once

namespace besqlab::specfun {

/// Index of a modified Bessel function, restricted to nu > -1. Caches
/// ln Gamma(nu + 1) for the series branch.
class BesselIndex {
 public:
  explicit BesselIndex(double nu);
  double value() const noexcept { return nu_; }
  double ln_gamma_next() const noexcept { return ln_gamma_next_; }

 private:
  double nu_;
  double ln_gamma_next_;
};

/// ln Gamma(x) for x > 0.
double ln_gamma(double x);

/// e^{-x} I_nu(x) for x >= 0. Finite for every finite x; at x = 0 it is 1 for
/// nu = 0, 0 for nu > 0 and +inf for -1 < nu < 0.
double bessel_i_scaled(const BesselIndex& nu, double x);

/// ln(e^{-x} I_nu(x)). Stays finite where bessel_i_scaled would underflow,
/// e.g. tiny x with large nu. Returns -inf at x = 0 when nu > 0.
double log_bessel_i_scaled(const BesselIndex& nu, double x);

/// Argument above which the large-x expansion replaces the power series.
double bessel_i_crossover(double nu) noexcept;

}  // namespace besqlab::specfun
