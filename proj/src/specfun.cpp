#include "besqlab/specfun.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

#include "besqlab/errors.hpp"

namespace besqlab::specfun {

namespace {

constexpr int kMaxTerms = 500;
constexpr double kSeriesTol = 1e-17;

// ln(e^{-x} I_nu(x)) from the ascending series
//   I_nu(x) = sum_k (x/2)^{2k+nu} / (k! Gamma(k+nu+1)).
// Terms are accumulated relative to the k = 0 term so nothing overflows.
double log_series(const BesselIndex& index, double x) {
  const double nu = index.value();
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 0; k < kMaxTerms; ++k) {
    const double next = term * q / ((k + 1.0) * (k + 1.0 + nu));
    sum += next;
    const bool decreasing = next < term;
    term = next;
    if (decreasing && term < kSeriesTol * sum) break;
  }
  return -x + nu * std::log(0.5 * x) - index.ln_gamma_next() + std::log(sum);
}

// Hankel expansion e^{-x} I_nu(x) ~ (2 pi x)^{-1/2} sum_k (-1)^k a_k(nu) / x^k,
// truncated at the smallest term. The e^{-2x} companion term is dropped; it is
// below 1e-20 relative at the crossover.
double log_asymptotic(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < kMaxTerms; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (8.0 * k * x);
    if (std::abs(next) >= std::abs(term)) break;
    sum += next;
    term = next;
    if (std::abs(term) < kSeriesTol * std::abs(sum)) break;
  }
  return -0.5 * std::log(2.0 * std::numbers::pi * x) + std::log(sum);
}

}  // namespace

BesselIndex::BesselIndex(double nu) : nu_(nu), ln_gamma_next_(0.0) {
  if (!(nu > -1.0) || !std::isfinite(nu)) {
    throw DomainError("Bessel index must satisfy nu > -1");
  }
  ln_gamma_next_ = ln_gamma(nu + 1.0);
}

double ln_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("ln_gamma requires a finite x > 0");
  }
  return boost::math::lgamma(x);
}

double bessel_i_crossover(double nu) noexcept { return 25.0 + nu * nu; }

double log_bessel_i_scaled(const BesselIndex& index, double x) {
  const double nu = index.value();
  if (!(x >= 0.0)) throw DomainError("bessel_i_scaled requires x >= 0");
  if (x == 0.0) {
    if (nu == 0.0) return 0.0;
    return nu > 0.0 ? -std::numeric_limits<double>::infinity()
                    : std::numeric_limits<double>::infinity();
  }
  if (std::isinf(x)) return -std::numeric_limits<double>::infinity();
  return x < bessel_i_crossover(nu) ? log_series(index, x)
                                    : log_asymptotic(nu, x);
}

double bessel_i_scaled(const BesselIndex& index, double x) {
  return std::exp(log_bessel_i_scaled(index, x));
}

}  // namespace besqlab::specfun
