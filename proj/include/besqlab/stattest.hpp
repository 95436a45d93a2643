#pragma once

// Monte-Carlo probes of the Markov property. Conditional laws are estimated
// by window rejection at the fixed times (eps, 1, 2) and compared with the
// two-sample Kolmogorov-Smirnov test.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "besqlab/besq.hpp"
#include "besqlab/rng.hpp"

namespace besqlab::stattest {

using besq::PathSample;

struct ConditioningWindow {
  double center = 0.0;
  double halfwidth = 1.0;  // > 0

  void validate() const;
  bool contains(double v) const noexcept { return std::fabs(v - center) <= halfwidth; }
};

enum class Verdict { kConsistent, kRejected, kInconclusive };

std::string_view to_string(Verdict v);

struct TestReport {
  double statistic = 0.0;
  double threshold = 0.0;  // rejected iff statistic > threshold
  double p_value = 1.0;
  std::size_t n_samples = 0;  // both arms together
  Verdict verdict = Verdict::kConsistent;
  std::uint64_t seed = 0;
};

/// Asymptotic Kolmogorov survival function P(K > lambda).
double kolmogorov_sf(double lambda);

/// Two-sample KS test at level alpha. The p-value uses the effective size
/// n*m/(n+m) with Stephens' finite-sample correction; the threshold is the
/// statistic at which that p-value equals alpha.
TestReport ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha);

/// Z(t) = c X(t) + Y(t) with X ~ BESQ(delta1), Y ~ BESQ(delta2), both from 0.
PathSample sample_z_process(Rng& rng, double c, double delta1, double delta2,
                            std::span<const double> times);

struct SamplingBudget {
  std::uint64_t max_attempts = 2'000'000'000;
  /// The acceptance rate is checked once this many attempts have been made.
  std::uint64_t probe_attempts = 4'000'000;
  double min_acceptance = 1e-6;
};

struct ConditionalSample {
  std::vector<double> values;  // accepted values at time 2
  std::uint64_t attempts = 0;

  double acceptance_rate() const noexcept {
    return attempts == 0 ? 0.0 : static_cast<double>(values.size()) / static_cast<double>(attempts);
  }
};

/// Samples Z(2) given Z(eps) in w1 and Z(1) in w2, 0 < eps < 1. Throws
/// BudgetExhaustedError when acceptance falls below the budget's floor or
/// the attempt cap is reached.
ConditionalSample conditional_sample(Rng& rng, double c, double delta1, double delta2,
                                     double eps, const ConditioningWindow& w1,
                                     const ConditioningWindow& w2, std::size_t n_target,
                                     const SamplingBudget& budget = {});

/// Maximum of a Brownian bridge from a to b over a span dt, drawn exactly
/// from its conditional law given the endpoints.
double bridge_maximum(Rng& rng, double a, double b, double dt);

/// W = c M - X for a standard Brownian motion X with running maximum M,
/// observed at `times`. Each output interval is split into `refinement`
/// Gaussian substeps whose maxima are drawn from the bridge law.
PathSample cmx_path(Rng& rng, double c, std::span<const double> times, int refinement = 100);

/// Same conditioning as conditional_sample, for W = c M - X.
ConditionalSample cmx_conditional_sample(Rng& rng, double c, double eps,
                                         const ConditioningWindow& w1,
                                         const ConditioningWindow& w2, std::size_t n_target,
                                         const SamplingBudget& budget = {});

enum class ProcessKind { kZ, kCmx };

std::string_view to_string(ProcessKind k);

struct CellSpec {
  double eps = 0.5;
  ConditioningWindow w1;
};

struct DiscrepancyConfig {
  ProcessKind process = ProcessKind::kZ;
  std::vector<double> c_values;
  double delta1 = 1.0;  // Z process only
  double delta2 = 1.0;
  /// cells[0] is the reference; every other cell is tested against it.
  std::vector<CellSpec> cells;
  ConditioningWindow w2;
  std::size_t n_per_cell = 10000;
  double alpha = 1e-3;  // family-wise, Bonferroni-split over comparisons
  std::uint64_t seed = 0;
  SamplingBudget budget;

  void validate() const;
};

struct CellReport {
  double c = 0.0;
  std::size_t cell = 0;
  CellSpec spec;
  std::uint64_t stream = 0;
  double acceptance_rate = 0.0;
  TestReport test;
};

struct CSummary {
  double c = 0.0;
  Verdict verdict = Verdict::kConsistent;
};

struct DiscrepancyReport {
  std::vector<CellReport> cells;
  std::vector<CSummary> summary;
};

/// Frozen witness settings for Z = cX + Y over c in {0, 0.5, 1}: two wide
/// Z(eps) windows at eps = 0.8 sharing the window Z(1) in [1.9, 2.1]. The
/// effect at c = 0.5 is a KS distance near 0.014. Seed left at 0.
DiscrepancyConfig default_z_config();

/// Frozen settings for W = cM - X over c in {0, 1, 2, 0.5}. The effect at
/// c = 0.5 is a KS distance near 0.026.
DiscrepancyConfig default_cmx_config();

/// Runs every (c, cell) pair on its own generator stream(seed, index) and
/// reduces each c to a verdict: rejected if any comparison rejects, else
/// inconclusive if any cell ran out of budget, else consistent.
DiscrepancyReport markov_discrepancy_report(const DiscrepancyConfig& cfg);

void write_json(std::ostream& os, const DiscrepancyConfig& cfg, const DiscrepancyReport& r);

}  // namespace besqlab::stattest
