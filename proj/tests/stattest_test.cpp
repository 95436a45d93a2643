#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>
#include <json.hpp>

#include "besqlab/errors.hpp"
#include "besqlab/nonmarkov.hpp"
#include "besqlab/stattest.hpp"
#include "support.hpp"

namespace {

using namespace besqlab;
using namespace besqlab::stattest;

TEST(KolmogorovSf, KnownValues) {
  EXPECT_NEAR(kolmogorov_sf(1.358), 0.05, 1e-3);
  EXPECT_NEAR(kolmogorov_sf(1.628), 0.01, 2e-4);
  EXPECT_NEAR(kolmogorov_sf(1.949), 0.001, 2e-5);
  EXPECT_EQ(kolmogorov_sf(0.0), 1.0);
  // The small- and large-lambda series agree where they meet.
  EXPECT_NEAR(kolmogorov_sf(1.18 - 1e-12), kolmogorov_sf(1.18 + 1e-12), 1e-10);
  double last = 1.0;
  for (double l = 0.05; l < 4.0; l += 0.05) {
    const double v = kolmogorov_sf(l);
    EXPECT_LE(v, last);
    last = v;
  }
}

TEST(KsTwoSample, IdenticalArrays) {
  const std::vector<double> a = {0.3, 1.2, -4.0, 2.2, 0.0};
  const TestReport r = ks_two_sample(a, a, 1e-3);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.verdict, Verdict::kConsistent);
  EXPECT_EQ(r.n_samples, 10u);
}

TEST(KsTwoSample, StatisticMatchesBruteForce) {
  Rng rng = stream(1, 0);
  std::normal_distribution<double> g;
  std::vector<double> a(700), b(900);
  for (double& v : a) v = g(rng);
  for (double& v : b) v = std::round(4.0 * g(rng)) / 4.0 + 0.1;  // ties
  EXPECT_NEAR(ks_two_sample(a, b, 0.05).statistic, testkit::ks_two_sample_distance(a, b), 1e-15);
}

TEST(KsTwoSample, DetectsShift) {
  Rng rng = stream(2, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> a(10'000), b(10'000);
  for (double& v : a) v = u(rng);
  for (double& v : b) v = u(rng) + 0.5;
  const TestReport r = ks_two_sample(a, b, 1e-3);
  EXPECT_EQ(r.verdict, Verdict::kRejected);
  EXPECT_GT(r.statistic, r.threshold);
  EXPECT_LT(r.p_value, 1e-3);
}

TEST(KsTwoSample, CalibratedUnderTheNull) {
  const double alpha = 0.05;
  int rejections = 0;
  std::normal_distribution<double> g;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng = stream(3, seed);
    std::vector<double> a(400), b(300);
    for (double& v : a) v = g(rng);
    for (double& v : b) v = g(rng);
    rejections += ks_two_sample(a, b, alpha).verdict == Verdict::kRejected;
  }
  EXPECT_LE(rejections, static_cast<int>(2 * alpha * 1000));
}

TEST(KsTwoSample, RejectsBadInput) {
  const std::vector<double> a = {1.0};
  const std::vector<double> none;
  EXPECT_THROW(ks_two_sample(a, none, 0.05), DomainError);
  EXPECT_THROW(ks_two_sample(a, a, 0.0), DomainError);
}

TEST(ZProcess, Mean) {
  Rng rng = stream(4, 0);
  const std::vector<double> times = {0.5, 2.0};
  const int n = 100'000;
  std::vector<double> end(n);
  for (double& e : end) e = sample_z_process(rng, 0.4, 1.5, 0.8, times).values[1];
  EXPECT_NEAR(testkit::mean(end), (0.4 * 1.5 + 0.8) * 2.0, 4.0 * std::sqrt(testkit::variance(end) / n));
}

TEST(ZProcess, UnitCIsSummedBesq) {
  Rng rng = stream(5, 0);
  const std::vector<double> times = {1.3};
  const int n = 50'000;
  std::vector<double> v(n);
  for (double& s : v) s = sample_z_process(rng, 1.0, 0.7, 1.8, times).values[0];
  // BESQ(2.5) from 0 at t: Gamma(1.25, scale 2t).
  const double d = testkit::ks_distance(v, [](double y) { return boost::math::gamma_p(1.25, y / 2.6); });
  EXPECT_LT(d, testkit::kKsCrit001 / std::sqrt(n));
}

TEST(ZProcess, ZeroCIsSecondComponent) {
  Rng rng = stream(6, 0);
  const std::vector<double> times = {1.0};
  const int n = 50'000;
  std::vector<double> v(n);
  for (double& s : v) s = sample_z_process(rng, 0.0, 5.0, 2.0, times).values[0];
  const double d = testkit::ks_distance(v, [](double y) { return -std::expm1(-0.5 * y); });
  EXPECT_LT(d, testkit::kKsCrit001 / std::sqrt(n));
}

TEST(ConditionalSample, EmptyWindowExhaustsBudget) {
  Rng rng = stream(7, 0);
  SamplingBudget budget;
  budget.probe_attempts = 100'000;
  EXPECT_THROW(conditional_sample(rng, 0.5, 1.0, 1.0, 0.5, {-5.0, 0.1}, {1.0, 0.1}, 10, budget),
               BudgetExhaustedError);
  SamplingBudget capped;
  capped.max_attempts = 1000;
  EXPECT_THROW(conditional_sample(rng, 0.5, 1.0, 1.0, 0.5, {1.0, 0.5}, {1.0, 0.5}, 100'000, capped),
               BudgetExhaustedError);
}

TEST(ConditionalSample, MarkovCaseIgnoresThePast) {
  const ConditioningWindow w2{2.0, 0.1};
  Rng r1 = stream(8, 0);
  Rng r2 = stream(8, 1);
  const auto a = conditional_sample(r1, 1.0, 1.0, 1.0, 0.3, {0.3, 0.25}, w2, 20'000);
  const auto b = conditional_sample(r2, 1.0, 1.0, 1.0, 0.8, {2.5, 0.5}, w2, 20'000);
  EXPECT_EQ(ks_two_sample(a.values, b.values, 1e-3).verdict, Verdict::kConsistent);
  EXPECT_GT(a.acceptance_rate(), 0.0);
  EXPECT_LE(a.acceptance_rate(), 1.0);
}

TEST(ConditionalSample, AgreesWithQuadratureLaw) {
  // Narrow windows at (z1, z2) = (1, 2) against the point-conditioned law.
  const double eps = 0.5;
  Rng rng = stream(9, 0);
  const std::size_t n = 20'000;
  const auto mc = conditional_sample(rng, 0.5, 1.0, 1.0, eps, {1.0, 0.05}, {2.0, 0.05}, n);

  nonmarkov::ScenarioParams s;
  s.c = 0.5;
  s.delta1 = 1.0;
  s.delta2 = 1.0;
  s.eps = eps;
  s.z1 = 1.0;
  s.z2 = 2.0;
  nonmarkov::Options opts;
  opts.rel_tol = 1e-6;
  const nonmarkov::ConditionalLaw law(s, true, opts);
  std::vector<double> grid;
  for (double z = 0.05; z < 40.0; z *= 1.06) grid.push_back(z);
  const std::vector<double> cdf = law.cdf(grid);
  auto interpolated = [&](double z) {
    if (z <= grid.front()) return cdf.front() * z / grid.front();
    const auto it = std::upper_bound(grid.begin(), grid.end(), z);
    if (it == grid.end()) return 1.0;
    const std::size_t i = static_cast<std::size_t>(it - grid.begin());
    const double w = (z - grid[i - 1]) / (grid[i] - grid[i - 1]);
    return (1.0 - w) * cdf[i - 1] + w * cdf[i];
  };
  const double d = testkit::ks_distance(mc.values, interpolated);
  // Dvoretzky-Kiefer-Wolfowitz band at 95%.
  const double dkw = std::sqrt(std::log(2.0 / 0.05) / (2.0 * static_cast<double>(n)));
  EXPECT_LT(d, 2.0 * dkw);
}

TEST(BridgeMaximum, MatchesReflectionLaw) {
  // Bridge from 0 to 0 over dt: P(M > m) = exp(-2 m^2 / dt).
  Rng rng = stream(10, 0);
  const int n = 50'000;
  std::vector<double> v(n);
  for (double& m : v) {
    m = bridge_maximum(rng, 0.0, 0.0, 2.0);
    ASSERT_GE(m, 0.0);
  }
  const double d = testkit::ks_distance(v, [](double m) { return -std::expm1(-m * m); });
  EXPECT_LT(d, testkit::kKsCrit001 / std::sqrt(n));
  EXPECT_GE(bridge_maximum(rng, 1.0, 3.0, 0.1), 3.0);
}

std::vector<double> cmx_at(double c, double t, int n, std::uint64_t seed, int refinement = 100) {
  Rng rng = stream(seed, 0);
  const std::vector<double> times = {t};
  std::vector<double> v(n);
  for (double& s : v) s = cmx_path(rng, c, times, refinement).values[0];
  return v;
}

TEST(CmxPath, BrownianAtZero) {
  const int n = 20'000;
  const auto v = cmx_at(0.0, 1.5, n, 11);
  EXPECT_NEAR(testkit::variance(v), 1.5, 4.0 * 1.5 * std::sqrt(2.0 / n));
  EXPECT_NEAR(testkit::mean(v), 0.0, 4.0 * std::sqrt(1.5 / n));
}

TEST(CmxPath, ReflectedAtOne) {
  const int n = 20'000;
  const double t = 0.8;
  const auto v = cmx_at(1.0, t, n, 12);
  const double d = testkit::ks_distance(v, [t](double y) { return std::erf(y / std::sqrt(2.0 * t)); });
  EXPECT_LT(d, testkit::kKsCrit001 / std::sqrt(n));
}

TEST(CmxPath, Bessel3AtTwo) {
  const int n = 20'000;
  const double t = 1.2;
  const auto v = cmx_at(2.0, t, n, 13);
  const double d = testkit::ks_distance(
      v, [t](double r) { return boost::math::gamma_p(1.5, r * r / (2.0 * t)); });
  EXPECT_LT(d, testkit::kKsCrit001 / std::sqrt(n));
}

TEST(CmxPath, RefinementHalvingIsWithinNoise) {
  const int n = 20'000;
  const auto fine = cmx_at(0.5, 1.0, n, 14, 100);
  const auto coarse = cmx_at(0.5, 1.0, n, 15, 50);
  EXPECT_EQ(ks_two_sample(fine, coarse, 1e-3).verdict, Verdict::kConsistent);
}

TEST(CmxConditional, LevyCaseIgnoresThePast) {
  const ConditioningWindow w2{0.5, 0.05};
  Rng r1 = stream(16, 0);
  Rng r2 = stream(16, 1);
  const auto a = cmx_conditional_sample(r1, 1.0, 0.5, {0.2, 0.2}, w2, 20'000);
  const auto b = cmx_conditional_sample(r2, 1.0, 0.5, {1.0, 0.3}, w2, 20'000);
  EXPECT_EQ(ks_two_sample(a.values, b.values, 1e-3).verdict, Verdict::kConsistent);
}

DiscrepancyConfig small_config() {
  DiscrepancyConfig cfg;
  cfg.process = ProcessKind::kZ;
  cfg.c_values = {0.0, 1.0};
  cfg.cells = {{0.5, {0.5, 0.5}}, {0.5, {2.0, 0.5}}};
  cfg.w2 = {2.0, 0.2};
  cfg.n_per_cell = 2000;
  cfg.alpha = 1e-3;
  cfg.seed = 77;
  return cfg;
}

TEST(DiscrepancyReport, DeterministicAndConsistentForMarkovCases) {
  const DiscrepancyConfig cfg = small_config();
  const DiscrepancyReport a = markov_discrepancy_report(cfg);
  const DiscrepancyReport b = markov_discrepancy_report(cfg);
  ASSERT_EQ(a.cells.size(), 4u);
  ASSERT_EQ(a.summary.size(), 2u);
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].test.statistic, b.cells[i].test.statistic);
    EXPECT_EQ(a.cells[i].test.p_value, b.cells[i].test.p_value);
    EXPECT_EQ(a.cells[i].acceptance_rate, b.cells[i].acceptance_rate);
    EXPECT_EQ(a.cells[i].stream, i);
  }
  for (const auto& s : a.summary) EXPECT_EQ(s.verdict, Verdict::kConsistent) << s.c;
}

TEST(DiscrepancyReport, BudgetExhaustionIsInconclusive) {
  DiscrepancyConfig cfg = small_config();
  cfg.c_values = {1.0};
  cfg.cells[1].w1 = {-3.0, 0.1};
  cfg.budget.probe_attempts = 50'000;
  const DiscrepancyReport r = markov_discrepancy_report(cfg);
  EXPECT_EQ(r.summary[0].verdict, Verdict::kInconclusive);
  EXPECT_EQ(r.cells[1].test.verdict, Verdict::kInconclusive);
}

TEST(DiscrepancyReport, ValidatesConfig) {
  DiscrepancyConfig cfg = small_config();
  cfg.c_values = {1.5};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.cells.resize(1);
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.process = ProcessKind::kCmx;
  cfg.c_values = {2.0};
  EXPECT_NO_THROW(cfg.validate());
}

TEST(DiscrepancyReport, JsonRoundTrip) {
  const DiscrepancyConfig cfg = small_config();
  const DiscrepancyReport r = markov_discrepancy_report(cfg);
  std::ostringstream os;
  write_json(os, cfg, r);
  const auto j = nlohmann::json::parse(os.str());
  ASSERT_EQ(j.at("cells").size(), r.cells.size());
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const auto& c = j.at("cells")[i];
    EXPECT_EQ(c.at("statistic").get<double>(), r.cells[i].test.statistic);
    EXPECT_EQ(c.at("p_value").get<double>(), r.cells[i].test.p_value);
    EXPECT_EQ(c.at("seed").get<std::uint64_t>(), cfg.seed);
    EXPECT_EQ(c.at("verdict").get<std::string>(), to_string(r.cells[i].test.verdict));
    EXPECT_EQ(c.at("eps").get<double>(), r.cells[i].spec.eps);
  }
  ASSERT_EQ(j.at("summary").size(), 2u);
  EXPECT_EQ(j.at("summary")[1].at("verdict").get<std::string>(), "consistent");
}

// Witness power: the frozen Z setting rejects c = 0.5 in at least 90% of
// seeded repetitions; likewise for cM - X.
TEST(DiscrepancyReport, FrozenWitnessesHavePower) {
  for (auto cfg : {default_z_config(), default_cmx_config()}) {
    cfg.c_values = {0.5};
    int rejected = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      cfg.seed = 1000 + seed;
      if (markov_discrepancy_report(cfg).summary.front().verdict == Verdict::kRejected) ++rejected;
    }
    EXPECT_GE(rejected, 45) << to_string(cfg.process);
  }
}

}  // namespace
