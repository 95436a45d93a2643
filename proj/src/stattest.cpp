#include "besqlab/stattest.hpp"

#include <algorithm>
#include <atomic>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <thread>

#include <boost/random/normal_distribution.hpp>
#include <json.hpp>

#include "besqlab/errors.hpp"

namespace besqlab::stattest {

namespace {

void check_eps(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0, 1)");
}

void check_budget(const ConditionalSample& s, const SamplingBudget& b) {
  if (s.attempts >= b.max_attempts) {
    throw BudgetExhaustedError("attempt cap reached with " + std::to_string(s.values.size()) +
                               " accepted samples");
  }
  if (s.attempts >= b.probe_attempts &&
      static_cast<double>(s.values.size()) < b.min_acceptance * static_cast<double>(s.attempts)) {
    throw BudgetExhaustedError("acceptance rate below " + std::to_string(b.min_acceptance));
  }
}

// Effective-size scaling of the KS statistic.
double stephens_scale(std::size_t n, std::size_t m) {
  const double ne = static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(n + m);
  const double r = std::sqrt(ne);
  return r + 0.12 + 0.11 / r;
}

double kolmogorov_quantile(double alpha) {
  double lo = 0.0;
  double hi = 10.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (kolmogorov_sf(mid) > alpha ? lo : hi) = mid;
  }
  return hi;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

// Runs jobs [0, n) on up to hardware_concurrency threads. Results land in
// caller-owned slots, so the outcome does not depend on scheduling.
template <class Job>
void run_parallel(std::size_t n, Job job) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) job(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) job(k);
    });
  }
}

}  // namespace

void ConditioningWindow::validate() const {
  if (!std::isfinite(center)) throw DomainError("window center must be finite");
  if (!(halfwidth > 0.0) || !std::isfinite(halfwidth)) {
    throw DomainError("window halfwidth must be positive");
  }
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kConsistent: return "consistent";
    case Verdict::kRejected: return "rejected";
    case Verdict::kInconclusive: return "inconclusive";
  }
  return "unknown";
}

std::string_view to_string(ProcessKind k) {
  return k == ProcessKind::kZ ? "z" : "cmx";
}

double kolmogorov_sf(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  constexpr double pi = std::numbers::pi;
  if (lambda < 1.18) {
    // Jacobi-transformed series converges fast for small lambda.
    const double w = -pi * pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double odd = 2.0 * k - 1.0;
      cdf += std::exp(w * odd * odd);
    }
    cdf *= std::sqrt(2.0 * pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sf = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sf += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sf, 0.0, 1.0);
}

TestReport ks_two_sample(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.empty() || b.empty()) throw DomainError("KS test needs two nonempty samples");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  TestReport r;
  r.statistic = ks_statistic({a.begin(), a.end()}, {b.begin(), b.end()});
  const double scale = stephens_scale(a.size(), b.size());
  r.threshold = kolmogorov_quantile(alpha) / scale;
  r.p_value = kolmogorov_sf(scale * r.statistic);
  r.n_samples = a.size() + b.size();
  r.verdict = r.statistic > r.threshold ? Verdict::kRejected : Verdict::kConsistent;
  return r;
}

PathSample sample_z_process(Rng& rng, double c, double delta1, double delta2,
                            std::span<const double> times) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("c must be finite and nonnegative");
  const besq::BesqParams p1(delta1);
  const besq::BesqParams p2(delta2);
  PathSample z = besq::sample_path(rng, p1, 0.0, times);
  const PathSample y = besq::sample_path(rng, p2, 0.0, times);
  for (std::size_t i = 0; i < z.values.size(); ++i) z.values[i] = c * z.values[i] + y.values[i];
  return z;
}

ConditionalSample conditional_sample(Rng& rng, double c, double delta1, double delta2,
                                     double eps, const ConditioningWindow& w1,
                                     const ConditioningWindow& w2, std::size_t n_target,
                                     const SamplingBudget& budget) {
  if (!(c >= 0.0 && c <= 1.0)) throw DomainError("c must lie in [0, 1]");
  check_eps(eps);
  w1.validate();
  w2.validate();
  const besq::BesqParams p1(delta1);
  const besq::BesqParams p2(delta2);
  // With c = 0 the X component never reaches Z; skip drawing it.
  const bool with_x = c > 0.0;
  ConditionalSample out;
  out.values.reserve(n_target);
  while (out.values.size() < n_target) {
    check_budget(out, budget);
    ++out.attempts;
    double x = with_x ? besq::sample_transition(rng, p1, eps, 0.0) : 0.0;
    double y = besq::sample_transition(rng, p2, eps, 0.0);
    if (!w1.contains(c * x + y)) continue;
    if (with_x) x = besq::sample_transition(rng, p1, 1.0 - eps, x);
    y = besq::sample_transition(rng, p2, 1.0 - eps, y);
    if (!w2.contains(c * x + y)) continue;
    if (with_x) x = besq::sample_transition(rng, p1, 1.0, x);
    y = besq::sample_transition(rng, p2, 1.0, y);
    out.values.push_back(c * x + y);
  }
  return out;
}

double bridge_maximum(Rng& rng, double a, double b, double dt) {
  if (!(dt > 0.0)) throw DomainError("bridge span must be positive");
  // 1 - U lies in (0, 1], so the logarithm is finite.
  const double u = 1.0 - std::generate_canonical<double, 53>(rng);
  const double d = b - a;
  return 0.5 * (a + b + std::sqrt(d * d - 2.0 * dt * std::log(u)));
}

namespace {

struct BrownianState {
  double x = 0.0;
  double max = 0.0;

  void advance(Rng& rng, double dt, boost::random::normal_distribution<double>& normal) {
    const double next = x + std::sqrt(dt) * normal(rng);
    max = std::max(max, bridge_maximum(rng, x, next, dt));
    x = next;
  }
};

}  // namespace

PathSample cmx_path(Rng& rng, double c, std::span<const double> times, int refinement) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("c must be finite and nonnegative");
  if (refinement < 1) throw DomainError("refinement must be at least 1");
  PathSample path;
  path.times.assign(times.begin(), times.end());
  path.values.assign(times.size(), 0.0);
  path.validate();
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  BrownianState s;
  double now = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] > now) {
      const double dt = (times[i] - now) / refinement;
      for (int k = 0; k < refinement; ++k) s.advance(rng, dt, normal);
      now = times[i];
    }
    path.values[i] = c * s.max - s.x;
  }
  return path;
}

ConditionalSample cmx_conditional_sample(Rng& rng, double c, double eps,
                                         const ConditioningWindow& w1,
                                         const ConditioningWindow& w2, std::size_t n_target,
                                         const SamplingBudget& budget) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("c must be finite and nonnegative");
  check_eps(eps);
  w1.validate();
  w2.validate();
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  ConditionalSample out;
  out.values.reserve(n_target);
  while (out.values.size() < n_target) {
    check_budget(out, budget);
    ++out.attempts;
    // Bridge maxima are exact, so one step per observation interval suffices.
    BrownianState s;
    s.advance(rng, eps, normal);
    if (!w1.contains(c * s.max - s.x)) continue;
    s.advance(rng, 1.0 - eps, normal);
    if (!w2.contains(c * s.max - s.x)) continue;
    s.advance(rng, 1.0, normal);
    out.values.push_back(c * s.max - s.x);
  }
  return out;
}

void DiscrepancyConfig::validate() const {
  if (c_values.empty()) throw ConfigError("c grid is empty");
  for (double c : c_values) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("c values must be nonnegative");
    if (process == ProcessKind::kZ && c > 1.0) {
      throw ConfigError("Z-process c values must lie in [0, 1]; rescale larger c first");
    }
  }
  if (process == ProcessKind::kZ && !(delta1 > 0.0 && delta2 > 0.0)) {
    throw ConfigError("dimensions must be positive");
  }
  if (cells.size() < 2) throw ConfigError("need a reference cell and at least one more");
  try {
    for (const auto& cell : cells) {
      check_eps(cell.eps);
      cell.w1.validate();
    }
    w2.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (n_per_cell == 0) throw ConfigError("n_per_cell must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
}

DiscrepancyConfig default_z_config() {
  DiscrepancyConfig cfg;
  cfg.process = ProcessKind::kZ;
  cfg.c_values = {0.0, 0.5, 1.0};
  cfg.delta1 = 1.0;
  cfg.delta2 = 1.0;
  cfg.cells = {{0.8, {0.27, 0.27}}, {0.8, {1.78, 0.39}}};
  cfg.w2 = {2.0, 0.1};
  cfg.n_per_cell = 120000;
  cfg.alpha = 1e-3;
  return cfg;
}

DiscrepancyConfig default_cmx_config() {
  DiscrepancyConfig cfg;
  cfg.process = ProcessKind::kCmx;
  cfg.c_values = {0.0, 1.0, 2.0, 0.5};
  cfg.cells = {{0.5, {0.13, 0.13}}, {0.5, {1.43, 0.87}}};
  cfg.w2 = {0.5, 0.05};
  cfg.n_per_cell = 40000;
  cfg.alpha = 1e-3;
  return cfg;
}

DiscrepancyReport markov_discrepancy_report(const DiscrepancyConfig& cfg) {
  cfg.validate();
  const std::size_t n_cells = cfg.cells.size();
  const std::size_t n_jobs = cfg.c_values.size() * n_cells;
  std::vector<std::optional<ConditionalSample>> samples(n_jobs);

  run_parallel(n_jobs, [&](std::size_t k) {
    const double c = cfg.c_values[k / n_cells];
    const CellSpec& cell = cfg.cells[k % n_cells];
    Rng rng = stream(cfg.seed, k);
    try {
      samples[k] = cfg.process == ProcessKind::kZ
                       ? conditional_sample(rng, c, cfg.delta1, cfg.delta2, cell.eps, cell.w1,
                                            cfg.w2, cfg.n_per_cell, cfg.budget)
                       : cmx_conditional_sample(rng, c, cell.eps, cell.w1, cfg.w2,
                                                cfg.n_per_cell, cfg.budget);
    } catch (const BudgetExhaustedError&) {
      samples[k].reset();
    }
  });

  const double cell_alpha = cfg.alpha / static_cast<double>(n_cells - 1);
  DiscrepancyReport report;
  for (std::size_t ci = 0; ci < cfg.c_values.size(); ++ci) {
    CSummary summary{cfg.c_values[ci], Verdict::kConsistent};
    bool any_rejected = false;
    bool any_inconclusive = false;
    const auto& reference = samples[ci * n_cells];
    for (std::size_t j = 0; j < n_cells; ++j) {
      const std::size_t k = ci * n_cells + j;
      CellReport cr;
      cr.c = cfg.c_values[ci];
      cr.cell = j;
      cr.spec = cfg.cells[j];
      cr.stream = k;
      cr.test.seed = cfg.seed;
      if (samples[k]) cr.acceptance_rate = samples[k]->acceptance_rate();
      if (j > 0) {
        if (reference && samples[k]) {
          cr.test = ks_two_sample(reference->values, samples[k]->values, cell_alpha);
          cr.test.seed = cfg.seed;
          any_rejected = any_rejected || cr.test.verdict == Verdict::kRejected;
        } else {
          cr.test.verdict = Verdict::kInconclusive;
          any_inconclusive = true;
        }
      } else if (!reference) {
        cr.test.verdict = Verdict::kInconclusive;
      }
      report.cells.push_back(cr);
    }
    if (any_rejected) {
      summary.verdict = Verdict::kRejected;
    } else if (any_inconclusive) {
      summary.verdict = Verdict::kInconclusive;
    }
    report.summary.push_back(summary);
  }
  return report;
}

void write_json(std::ostream& os, const DiscrepancyConfig& cfg, const DiscrepancyReport& r) {
  using nlohmann::json;
  json cells = json::array();
  for (const auto& c : r.cells) {
    cells.push_back({
        {"process", to_string(cfg.process)},
        {"c", c.c},
        {"cell", c.cell},
        {"reference", c.cell == 0},
        {"eps", c.spec.eps},
        {"w1", {{"center", c.spec.w1.center}, {"halfwidth", c.spec.w1.halfwidth}}},
        {"w2", {{"center", cfg.w2.center}, {"halfwidth", cfg.w2.halfwidth}}},
        {"delta1", cfg.delta1},
        {"delta2", cfg.delta2},
        {"acceptance_rate", c.acceptance_rate},
        {"statistic", c.test.statistic},
        {"threshold", c.test.threshold},
        {"p_value", c.test.p_value},
        {"n_samples", c.test.n_samples},
        {"verdict", to_string(c.test.verdict)},
        {"seed", c.test.seed},
        {"stream", c.stream},
    });
  }
  json summary = json::array();
  for (const auto& s : r.summary) {
    summary.push_back({{"c", s.c}, {"verdict", to_string(s.verdict)}});
  }
  os << json{{"cells", cells}, {"summary", summary}}.dump(2) << '\n';
}

}  // namespace besqlab::stattest
