#pragma once

// The 2x2 matrix process
//   [ B1(t)              sqrt(c/2) xi(t) ]
//   [ sqrt(c/2) xi(t)    B2(t)           ]
// with B1, B2 Brownian motions and xi a Bessel(delta) process from 0, its
// ordered eigenvalues, and the Dyson SDE for c = 1.

#include <iosfwd>
#include <span>
#include <vector>

#include "besqlab/besq.hpp"
#include "besqlab/rng.hpp"

namespace besqlab::dyson {

using besq::PathSample;

struct MatrixProcessConfig {
  double c = 1.0;
  double delta = 1.0;
  std::vector<double> times;

  void validate() const;
};

struct EigenPair {
  double lambda1;  // larger
  double lambda2;
};

struct DriverState {
  double b1;
  double b2;
  double xi;  // >= 0
};

struct Decomposition {
  double sum;  // lambda1 + lambda2
  double gap;  // lambda1 - lambda2 >= 0
};

EigenPair eigenvalues(const DriverState& s, double c);
Decomposition decompose(const EigenPair& e);

/// Eigenvalues when the off-diagonal entry is sqrt(c/2) times a real,
/// complex or quaternion number given by its coordinates (v.size() in
/// {1, 2, 4}). A diagonal unitary conjugation rotates the entry onto |v|, so
/// the result is eigenvalues({b1, b2, |v|}, c).
EigenPair eigenvalues_from_vector_offdiag(double b1, double b2,
                                          std::span<const double> v, double c);

/// Euclidean norm used for the off-diagonal magnitude.
double offdiag_norm(std::span<const double> v);

struct DriverPaths {
  PathSample b1;
  PathSample b2;
  PathSample xi;
};

struct EigenPaths {
  PathSample lambda1;
  PathSample lambda2;
};

/// B1, B2 by exact Gaussian increments and xi = sqrt(BESQ(delta)) from 0,
/// each from its own child generator.
DriverPaths simulate_drivers(Rng& rng, const MatrixProcessConfig& cfg);

/// Pointwise eigenvalues of given driver paths.
EigenPaths eigen_paths(const DriverPaths& drivers, double c);
EigenPaths eigen_paths(Rng& rng, const MatrixProcessConfig& cfg);

/// Dyson SDE
///   d lambda1 = d beta1 + delta / (2 (lambda1 - lambda2)) dt
///   d lambda2 = d beta2 + delta / (2 (lambda2 - lambda1)) dt
/// sampled exactly at `times`: the sum is sqrt(2) times a Brownian motion and
/// the gap is sqrt(2) times a Bessel(1 + delta) process, both drawn from exact
/// transitions. initial must satisfy lambda1 > lambda2, or both be 0.
EigenPaths integrate_dyson_sde(Rng& rng, double delta, std::span<const double> times,
                               EigenPair initial);

/// CSV with header "t,lambda1,lambda2".
void write_csv(std::ostream& os, const EigenPaths& paths);

}  // namespace besqlab::dyson
