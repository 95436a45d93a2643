#include "besqlab/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <type_traits>
#include <variant>
#include <vector>

#include "besqlab/besq.hpp"
#include "besqlab/dyson.hpp"
#include "besqlab/errors.hpp"
#include "besqlab/nonmarkov.hpp"
#include "besqlab/stattest.hpp"

#ifndef BESQLAB_VERSION
#define BESQLAB_VERSION "unknown"
#endif

namespace besqlab::cli {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Parameter schema

enum class Kind { kNumber, kCount, kBool, kChoice, kNumberList };

struct Key {
  std::string name;
  Kind kind;
  json fallback;  // null: required
  std::string help;
  std::vector<std::string> choices = {};
};

struct CommandInfo {
  Command command;
  std::string name;
  std::string help;
  std::vector<Key> keys;
};

// Per-cell lists and shared keys of a frozen witness configuration.
json witness_defaults(const stattest::DiscrepancyConfig& cfg) {
  json eps = json::array(), centers = json::array(), halfwidths = json::array();
  for (const auto& cell : cfg.cells) {
    eps.push_back(cell.eps);
    centers.push_back(cell.w1.center);
    halfwidths.push_back(cell.w1.halfwidth);
  }
  return {{"c_values", cfg.c_values}, {"eps", eps},
          {"w1_center", centers},     {"w1_halfwidth", halfwidths},
          {"w2_center", cfg.w2.center}, {"w2_halfwidth", cfg.w2.halfwidth},
          {"n", cfg.n_per_cell},      {"alpha", cfg.alpha}};
}

const std::vector<CommandInfo>& commands() {
  static const json z = witness_defaults(stattest::default_z_config());
  static const json w = witness_defaults(stattest::default_cmx_config());
  static const std::vector<CommandInfo> table = {
      {Command::kDensity, "density", "BESQ(delta) transition density p_t(x, y)",
       {{"delta", Kind::kNumber, nullptr, "dimension"},
        {"t", Kind::kNumber, nullptr, "elapsed time"},
        {"x", Kind::kNumber, nullptr, "start point"},
        {"y", Kind::kNumber, nullptr, "end point"}}},
      {Command::kSimulate, "simulate", "exact BESQ(delta) or Bessel paths on a uniform grid",
       {{"delta", Kind::kNumber, nullptr, "dimension"},
        {"x0", Kind::kNumber, 0.0, "start point (squared scale)"},
        {"t_max", Kind::kNumber, 1.0, "horizon"},
        {"steps", Kind::kCount, 100, "grid intervals"},
        {"paths", Kind::kCount, 1, "independent paths"},
        {"bessel", Kind::kBool, false, "emit the square root of the path"}}},
      {Command::kEigen, "eigen", "eigenvalue paths of the 2x2 matrix model or the Dyson SDE",
       {{"c", Kind::kNumber, 1.0, "off-diagonal weight"},
        {"delta", Kind::kNumber, 1.0, "Bessel dimension of the off-diagonal driver"},
        {"t_max", Kind::kNumber, 1.0, "horizon"},
        {"steps", Kind::kCount, 100, "grid intervals"},
        {"paths", Kind::kCount, 1, "independent paths"},
        {"method", Kind::kChoice, "matrix", "matrix or sde (sde needs c = 1)",
         {"matrix", "sde"}}}},
      {Command::kRatio, "ratio",
       "conditional density of Z(2) given Z(eps) = z1, Z(1) = z2; list values form a grid",
       {{"c", Kind::kNumberList, nullptr, "weight of X; c > 1 is rescaled to 1/c"},
        {"delta1", Kind::kNumberList, nullptr, "dimension of X"},
        {"delta2", Kind::kNumberList, nullptr, "dimension of Y"},
        {"eps", Kind::kNumberList, json::array({0.5}), "first observation time"},
        {"z1", Kind::kNumberList, nullptr, "Z(eps)"},
        {"z2", Kind::kNumberList, nullptr, "Z(1)"},
        {"z3", Kind::kNumberList, nullptr, "Z(2)"},
        {"limit_eps", Kind::kBool, false, "use the eps -> 0 limit object"},
        {"range", Kind::kChoice, "full", "hidden X range: full or truncated",
         {"full", "truncated"}},
        {"rel_tol", Kind::kNumber, 1e-8, "outer quadrature tolerance"}}},
      {Command::kLaplace, "laplace",
       "int_0^1 exp(-lambda phi) x^(nu-1)/(1+x) dx against its endpoint asymptotic, "
       "phi = a + b x + k x^2",
       {{"a", Kind::kNumber, 0.0, "phi(0)"},
        {"b", Kind::kNumber, 1.0, "phi'(0) > 0"},
        {"k", Kind::kNumber, 1.0, "curvature of phi, >= 0"},
        {"nu", Kind::kNumber, 1.0, "algebraic weight exponent, > 0"},
        {"lambdas", Kind::kNumberList, json::array({20.0, 50.0, 100.0, 200.0}),
         "large parameters"}}},
      {Command::kLemma3, "lemma3", "double-ratio residual over a z2 sweep",
       {{"c", Kind::kNumber, 0.5, "weight of X, in (0, 1)"},
        {"delta1", Kind::kNumber, 1.0, "dimension of X"},
        {"delta2", Kind::kNumber, 1.0, "dimension of Y"},
        {"r1", Kind::kNumber, 1.0, "first z1 / z2 ratio"},
        {"r2", Kind::kNumber, 4.0, "second z1 / z2 ratio"},
        {"z2_values", Kind::kNumberList, json::array({10.0, 20.0, 40.0}), "z2 sweep"},
        {"range", Kind::kChoice, "full", "hidden X range: full or truncated",
         {"full", "truncated"}},
        {"rel_tol", Kind::kNumber, 1e-8, "outer quadrature tolerance"}}},
      {Command::kMarkovTest, "markov-test",
       "Monte-Carlo Markov test for Z = cX + Y over a c grid; c > 1 is rescaled",
       {{"c_values", Kind::kNumberList, z["c_values"], "c grid"},
        {"delta1", Kind::kNumber, 1.0, "dimension of X"},
        {"delta2", Kind::kNumber, 1.0, "dimension of Y"},
        {"eps", Kind::kNumberList, z["eps"], "per-cell eps; cell 0 is the reference"},
        {"w1_center", Kind::kNumberList, z["w1_center"], "per-cell Z(eps) window center"},
        {"w1_halfwidth", Kind::kNumberList, z["w1_halfwidth"],
         "per-cell Z(eps) window halfwidth"},
        {"w2_center", Kind::kNumber, z["w2_center"], "Z(1) window center"},
        {"w2_halfwidth", Kind::kNumber, z["w2_halfwidth"], "Z(1) window halfwidth"},
        {"n", Kind::kCount, z["n"], "accepted samples per cell"},
        {"alpha", Kind::kNumber, z["alpha"], "family-wise level"}}},
      {Command::kCmxTest, "cmx-test", "Monte-Carlo Markov test for W = cM - X over a c grid",
       {{"c_values", Kind::kNumberList, w["c_values"], "c grid"},
        {"eps", Kind::kNumberList, w["eps"], "per-cell eps"},
        {"w1_center", Kind::kNumberList, w["w1_center"], "per-cell W(eps) centers"},
        {"w1_halfwidth", Kind::kNumberList, w["w1_halfwidth"], "per-cell W(eps) halfwidths"},
        {"w2_center", Kind::kNumber, w["w2_center"], "W(1) window center"},
        {"w2_halfwidth", Kind::kNumber, w["w2_halfwidth"], "W(1) window halfwidth"},
        {"n", Kind::kCount, w["n"], "accepted samples per cell"},
        {"alpha", Kind::kNumber, w["alpha"], "family-wise level"}}},
  };
  return table;
}

const CommandInfo& info_for(Command c) {
  for (const auto& i : commands()) {
    if (i.command == c) return i;
  }
  throw ConfigError("unknown command");
}

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

double parse_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw ConfigError("'" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

// Checks a value against its key and returns it normalized.
json coerce(const Key& k, const json& v) {
  const auto fail = [&](const std::string& what) {
    throw ConfigError("'" + k.name + "' expects " + what + ", got " + v.dump());
  };
  switch (k.kind) {
    case Kind::kNumber:
      if (!v.is_number()) fail("a number");
      return v.get<double>();
    case Kind::kCount:
      if (!v.is_number_integer() || v.get<long long>() < 1) fail("a positive integer");
      return v.get<long long>();
    case Kind::kBool:
      if (!v.is_boolean()) fail("true or false");
      return v;
    case Kind::kChoice:
      if (!v.is_string() ||
          std::find(k.choices.begin(), k.choices.end(), v.get<std::string>()) == k.choices.end()) {
        std::string list;
        for (const auto& c : k.choices) list += (list.empty() ? "" : "|") + c;
        fail("one of " + list);
      }
      return v;
    case Kind::kNumberList: {
      if (v.is_number()) return json::array({v.get<double>()});
      if (!v.is_array() || v.empty()) fail("a nonempty list of numbers");
      json out = json::array();
      for (const auto& e : v) {
        if (!e.is_number()) fail("a nonempty list of numbers");
        out.push_back(e.get<double>());
      }
      return out;
    }
  }
  return v;
}

json from_flag(const Key& k, const std::string& text) {
  switch (k.kind) {
    case Kind::kNumber:
      return coerce(k, parse_number(k.name, text));
    case Kind::kCount: {
      const double v = parse_number(k.name, text);
      if (v != std::floor(v)) throw ConfigError("'" + k.name + "' expects an integer");
      return coerce(k, static_cast<long long>(v));
    }
    case Kind::kBool:
    case Kind::kChoice:
      return coerce(k, text);
    case Kind::kNumberList: {
      json list = json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) list.push_back(parse_number(k.name, item));
      return coerce(k, list);
    }
  }
  return nullptr;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

struct ParseOutcome {
  std::optional<RunConfig> config;
  std::string help;
};

ParseOutcome parse_impl(std::span<const std::string> args) {
  CLI::App app{"besqlab: squared Bessel processes, eigenvalue processes and Markov tests", "besqlab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(BESQLAB_VERSION));

  struct Bound {
    const CommandInfo* info;
    CLI::App* sub;
    std::map<std::string, std::string> text;
    std::map<std::string, bool> flags;
    std::string config_path;
    std::string seed;
    std::string output;
    std::string format;
  };
  std::vector<Bound> bound(commands().size());
  for (std::size_t i = 0; i < commands().size(); ++i) {
    Bound& b = bound[i];
    b.info = &commands()[i];
    b.sub = app.add_subcommand(b.info->name, b.info->help);
    b.sub->add_option("--config", b.config_path, "JSON file with parameter keys");
    b.sub->add_option("--seed", b.seed, "random seed (stochastic commands)");
    b.sub->add_option("--output", b.output, "data file; a .meta.json sidecar is written too");
    b.sub->add_option("--format", b.format, "csv or json");
    for (const Key& k : b.info->keys) {
      std::string help = k.help;
      if (!k.fallback.is_null()) help += " [default " + k.fallback.dump() + "]";
      if (k.kind == Kind::kBool) {
        b.sub->add_flag(flag_name(k.name), b.flags[k.name], help);
      } else {
        b.sub->add_option(flag_name(k.name), b.text[k.name], help);
      }
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (const Bound& b : bound) {
      if (b.sub->parsed()) target = b.sub;
    }
    return {std::nullopt, target->help()};
  } catch (const CLI::CallForVersion&) {
    return {std::nullopt, std::string(BESQLAB_VERSION) + "\n"};
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }

  const Bound* chosen = nullptr;
  for (const Bound& b : bound) {
    if (b.sub->parsed()) chosen = &b;
  }
  if (chosen == nullptr) throw ConfigError("no command given");

  RunConfig cfg;
  cfg.command = chosen->info->command;
  json file = chosen->config_path.empty() ? json::object() : load_config_file(chosen->config_path);

  std::map<std::string, const Key*> by_name;
  for (const Key& k : chosen->info->keys) by_name[k.name] = &k;
  for (const auto& [name, value] : file.items()) {
    if (name == "seed" || name == "output" || name == "format" || name == "command") continue;
    if (!by_name.count(name)) {
      throw ConfigError("unknown key '" + name + "' for " + chosen->info->name);
    }
  }
  if (file.contains("command") && file["command"] != chosen->info->name) {
    throw ConfigError("config file is for command " + file["command"].dump());
  }

  for (const Key& k : chosen->info->keys) {
    json v = k.fallback;
    if (file.contains(k.name)) v = coerce(k, file[k.name]);
    if (chosen->sub->count(flag_name(k.name)) > 0) {
      v = k.kind == Kind::kBool ? json(chosen->flags.at(k.name))
                                : from_flag(k, chosen->text.at(k.name));
    }
    if (v.is_null()) throw ConfigError("missing required parameter '" + k.name + "'");
    cfg.params[k.name] = v;
  }

  const auto string_setting = [&](const char* key, const std::string& flag) -> std::string {
    if (chosen->sub->count(std::string("--") + key) > 0) return flag;
    if (file.contains(key)) {
      if (!file[key].is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
      return file[key].get<std::string>();
    }
    return {};
  };
  cfg.output_path = string_setting("output", chosen->output);
  const std::string format = string_setting("format", chosen->format);
  if (format.empty() || format == "csv") {
    cfg.format = Format::kCsv;
  } else if (format == "json") {
    cfg.format = Format::kJson;
  } else {
    throw ConfigError("format must be csv or json");
  }

  if (chosen->sub->count("--seed") > 0) {
    const std::string& s = chosen->seed;
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
      throw ConfigError("seed must be a nonnegative integer");
    }
    try {
      cfg.seed = std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigError("seed out of range");
    }
  } else if (file.contains("seed")) {
    if (!file["seed"].is_number_unsigned()) throw ConfigError("seed must be a nonnegative integer");
    cfg.seed = file["seed"].get<std::uint64_t>();
  }
  cfg.validate();
  return {cfg, {}};
}

// ---------------------------------------------------------------------------
// Output

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void write_csv(std::ostream& os) const {
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        std::visit(
            [&](const auto& v) {
              using T = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<T, double>) {
                os << fmt(v);
              } else {
                os << v;
              }
            },
            row[i]);
      }
      os << '\n';
    }
  }

  json to_json() const {
    json out = json::array();
    for (const auto& row : rows) {
      json obj = json::object();
      for (std::size_t i = 0; i < row.size(); ++i) {
        std::visit([&](const auto& v) { obj[columns[i]] = v; }, row[i]);
      }
      out.push_back(obj);
    }
    return out;
  }
};

struct Outcome {
  Table table;
  std::optional<json> json_override;  // replaces the table in JSON output
  std::string console;  // printed in every case
  bool scalar = false;  // console replaces the data when there is no output file
  int status = kOk;
};

std::vector<double> time_grid(double t_max, long long steps) {
  if (!(t_max > 0.0)) throw ConfigError("t_max must be positive");
  std::vector<double> times(static_cast<std::size_t>(steps) + 1);
  for (long long i = 0; i <= steps; ++i) {
    times[static_cast<std::size_t>(i)] = t_max * static_cast<double>(i) / static_cast<double>(steps);
  }
  return times;
}

double num(const json& p, const char* key) { return p.at(key).get<double>(); }
long long count(const json& p, const char* key) { return p.at(key).get<long long>(); }
std::vector<double> list(const json& p, const char* key) {
  return p.at(key).get<std::vector<double>>();
}

nonmarkov::XRange range_of(const json& p) {
  return p.at("range") == "truncated" ? nonmarkov::XRange::kTruncated : nonmarkov::XRange::kFull;
}

Outcome do_density(const RunConfig& cfg) {
  const json& p = cfg.params;
  const double v = besq::transition_density(besq::BesqParams(num(p, "delta")), num(p, "t"),
                                            num(p, "x"), num(p, "y"));
  Outcome o;
  o.table.columns = {"delta", "t", "x", "y", "density"};
  o.table.rows.push_back({num(p, "delta"), num(p, "t"), num(p, "x"), num(p, "y"), v});
  o.console = fmt(v) + "\n";
  o.scalar = true;
  return o;
}

Outcome do_simulate(const RunConfig& cfg) {
  const json& p = cfg.params;
  const besq::BesqParams params(num(p, "delta"));
  const auto times = time_grid(num(p, "t_max"), count(p, "steps"));
  const bool bessel = p.at("bessel").get<bool>();
  Outcome o;
  o.table.columns = {"path", "t", "value"};
  for (long long k = 0; k < count(p, "paths"); ++k) {
    Rng rng = stream(*cfg.seed, static_cast<std::uint64_t>(k));
    const auto path = besq::sample_path(rng, params, num(p, "x0"), times);
    for (std::size_t i = 0; i < path.size(); ++i) {
      const double v = bessel ? std::sqrt(path.values[i]) : path.values[i];
      o.table.rows.push_back({k, path.times[i], v});
    }
  }
  return o;
}

Outcome do_eigen(const RunConfig& cfg) {
  const json& p = cfg.params;
  dyson::MatrixProcessConfig mc;
  mc.c = num(p, "c");
  mc.delta = num(p, "delta");
  mc.times = time_grid(num(p, "t_max"), count(p, "steps"));
  mc.validate();
  const bool sde = p.at("method") == "sde";
  if (sde && mc.c != 1.0) throw ConfigError("method sde describes c = 1 only");
  Outcome o;
  o.table.columns = {"path", "t", "lambda1", "lambda2"};
  for (long long k = 0; k < count(p, "paths"); ++k) {
    Rng rng = stream(*cfg.seed, static_cast<std::uint64_t>(k));
    const auto e = sde ? dyson::integrate_dyson_sde(rng, mc.delta, mc.times, {0.0, 0.0})
                       : dyson::eigen_paths(rng, mc);
    for (std::size_t i = 0; i < e.lambda1.size(); ++i) {
      o.table.rows.push_back({k, e.lambda1.times[i], e.lambda1.values[i], e.lambda2.values[i]});
    }
  }
  return o;
}

// For c > 1, Z / c = X + Y / c: the weight becomes 1/c on the other
// component, so the dimensions swap and observed levels scale by 1/c.
struct Rescaled {
  double c;
  double delta1;
  double delta2;
  double scale;  // observed levels are divided by this
};

Rescaled rescale(double c, double d1, double d2) {
  if (c > 1.0) return {1.0 / c, d2, d1, c};
  return {c, d1, d2, 1.0};
}

Outcome do_ratio(const RunConfig& cfg) {
  const json& p = cfg.params;
  nonmarkov::Options opts;
  opts.range = range_of(p);
  opts.rel_tol = num(p, "rel_tol");
  const bool use_eps = !p.at("limit_eps").get<bool>();
  Outcome o;
  o.scalar = true;
  o.table.columns = {"c",  "delta1", "delta2", "eps",   "z1",        "z2",
                     "z3", "ratio",  "error",  "limit", "converged"};
  for (double c : list(p, "c")) {
    if (!(c >= 0.0)) throw ConfigError("c must be nonnegative");
    for (double d1 : list(p, "delta1")) {
      for (double d2 : list(p, "delta2")) {
        const Rescaled r = rescale(c, d1, d2);
        for (double eps : list(p, "eps")) {
          for (double z1 : list(p, "z1")) {
            for (double z2 : list(p, "z2")) {
              for (double z3 : list(p, "z3")) {
                nonmarkov::ScenarioParams s{r.c,          r.delta1,     r.delta2,    eps,
                                            z1 / r.scale, z2 / r.scale, z3 / r.scale};
                const auto res = nonmarkov::conditional_ratio(s, use_eps, opts);
                // Density of Z(2) = scale * Z'(2).
                const double value = res.value / r.scale;
                o.table.rows.push_back({c, d1, d2, eps, z1, z2, z3, value,
                                        res.error_estimate / r.scale,
                                        static_cast<long long>(!use_eps),
                                        static_cast<long long>(res.converged)});
                o.console += fmt(value) + "\n";
                if (!res.converged) o.status = kNonConvergence;
              }
            }
          }
        }
      }
    }
  }
  return o;
}

Outcome do_laplace(const RunConfig& cfg) {
  const json& p = cfg.params;
  const double a = num(p, "a");
  const double b = num(p, "b");
  const double k = num(p, "k");
  if (!(b > 0.0) || !(k >= 0.0) || !(num(p, "nu") > 0.0)) {
    throw ConfigError("laplace needs b > 0, k >= 0 and nu > 0");
  }
  nonmarkov::LaplaceProblem prob;
  prob.a = a;
  prob.b = b;
  prob.nu = num(p, "nu");
  prob.phi = [a, b, k](double x) { return a + b * x + k * x * x; };
  prob.f = [](double, double x) { return 1.0 / (1.0 + x); };
  prob.f_inf0 = 1.0;
  Outcome o;
  o.table.columns = {"lambda", "numeric", "asymptotic", "ratio", "error"};
  for (double lambda : list(p, "lambdas")) {
    if (!(lambda > 0.0)) throw ConfigError("lambdas must be positive");
    const auto n = nonmarkov::laplace_numeric(prob, lambda);
    const double asym = nonmarkov::laplace_asymptotic(prob, lambda);
    o.table.rows.push_back({lambda, n.value, asym, n.value / asym, n.error_estimate});
    if (!n.converged) o.status = kNonConvergence;
  }
  return o;
}

Outcome do_lemma3(const RunConfig& cfg) {
  const json& p = cfg.params;
  nonmarkov::Options opts;
  opts.range = range_of(p);
  opts.rel_tol = num(p, "rel_tol");
  Outcome o;
  o.table.columns = {"z2", "residual"};
  for (double z2 : list(p, "z2_values")) {
    const double res = nonmarkov::lemma3_ratio_check(num(p, "r1"), num(p, "r2"), z2, num(p, "c"),
                                                     num(p, "delta1"), num(p, "delta2"), opts);
    o.table.rows.push_back({z2, res});
  }
  return o;
}

Outcome do_markov(const RunConfig& cfg, stattest::ProcessKind kind) {
  const json& p = cfg.params;
  const auto eps = list(p, "eps");
  const auto centers = list(p, "w1_center");
  const auto halfwidths = list(p, "w1_halfwidth");
  if (centers.size() != eps.size() || halfwidths.size() != eps.size()) {
    throw ConfigError("eps, w1_center and w1_halfwidth need one entry per cell");
  }
  const auto c_values = list(p, "c_values");
  const bool is_z = kind == stattest::ProcessKind::kZ;

  Outcome o;
  o.table.columns = {"c",        "cell",      "eps",       "w1_center", "w1_halfwidth",
                     "acceptance", "statistic", "threshold", "p_value",   "n_samples",
                     "verdict"};
  json cells = json::array();
  json summary = json::array();
  bool inconclusive = false;
  // Each c runs as its own report so that rescaled c > 1 values get their own
  // windows; streams stay distinct through the c index mixed into the seed.
  for (std::size_t ci = 0; ci < c_values.size(); ++ci) {
    const double c = c_values[ci];
    stattest::DiscrepancyConfig dc;
    dc.process = kind;
    Rescaled r{c, 0.0, 0.0, 1.0};
    if (is_z) r = rescale(c, num(p, "delta1"), num(p, "delta2"));
    dc.c_values = {r.c};
    dc.delta1 = is_z ? r.delta1 : 1.0;
    dc.delta2 = is_z ? r.delta2 : 1.0;
    for (std::size_t j = 0; j < eps.size(); ++j) {
      dc.cells.push_back({eps[j], {centers[j] / r.scale, halfwidths[j] / r.scale}});
    }
    dc.w2 = {num(p, "w2_center") / r.scale, num(p, "w2_halfwidth") / r.scale};
    dc.n_per_cell = static_cast<std::size_t>(count(p, "n"));
    dc.alpha = num(p, "alpha");
    dc.seed = *cfg.seed + 0x100000000ULL * ci;
    const auto rep = stattest::markov_discrepancy_report(dc);
    std::ostringstream js;
    stattest::write_json(js, dc, rep);
    json part = json::parse(js.str());
    for (auto& cell : part["cells"]) {
      cell["c"] = c;
      cells.push_back(cell);
    }
    for (const auto& cr : rep.cells) {
      o.table.rows.push_back({c, static_cast<long long>(cr.cell), cr.spec.eps,
                              cr.spec.w1.center * r.scale, cr.spec.w1.halfwidth * r.scale,
                              cr.acceptance_rate, cr.test.statistic, cr.test.threshold,
                              cr.test.p_value, static_cast<long long>(cr.test.n_samples),
                              std::string(stattest::to_string(cr.test.verdict))});
    }
    const auto verdict = rep.summary.front().verdict;
    summary.push_back({{"c", c}, {"verdict", stattest::to_string(verdict)}});
    o.console += "c=" + fmt(c) + " " + std::string(stattest::to_string(verdict)) + "\n";
    inconclusive = inconclusive || verdict == stattest::Verdict::kInconclusive;
  }
  o.json_override = json{{"cells", cells}, {"summary", summary}};
  if (inconclusive) o.status = kInconclusive;
  return o;
}

Outcome dispatch(const RunConfig& cfg) {
  switch (cfg.command) {
    case Command::kDensity: return do_density(cfg);
    case Command::kSimulate: return do_simulate(cfg);
    case Command::kEigen: return do_eigen(cfg);
    case Command::kRatio: return do_ratio(cfg);
    case Command::kLaplace: return do_laplace(cfg);
    case Command::kLemma3: return do_lemma3(cfg);
    case Command::kMarkovTest: return do_markov(cfg, stattest::ProcessKind::kZ);
    case Command::kCmxTest: return do_markov(cfg, stattest::ProcessKind::kCmx);
  }
  throw ConfigError("unknown command");
}

void write_data(std::ostream& os, const RunConfig& cfg, const Outcome& o) {
  if (cfg.format == Format::kCsv) {
    o.table.write_csv(os);
  } else {
    os << (o.json_override ? *o.json_override : o.table.to_json()).dump(2) << '\n';
  }
}

}  // namespace

std::string_view to_string(Command c) {
  return info_for(c).name;
}

bool is_stochastic(Command c) {
  return c == Command::kSimulate || c == Command::kEigen || c == Command::kMarkovTest ||
         c == Command::kCmxTest;
}

void RunConfig::validate() const {
  if (is_stochastic(command) && !seed) {
    throw ConfigError(std::string(to_string(command)) + " needs --seed");
  }
}

RunConfig parse_args(std::span<const std::string> args) {
  auto outcome = parse_impl(args);
  if (!outcome.config) throw ConfigError("help or version requested");
  return *outcome.config;
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = dispatch(cfg);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (cfg.output_path.empty()) {
    if (o.scalar) {
      out << o.console;
    } else {
      err << o.console;
      write_data(out, cfg, o);
    }
  } else {
    out << o.console;
    std::ofstream data(cfg.output_path);
    if (!data) {
      err << "cannot write " << cfg.output_path << '\n';
      return kConfigError;
    }
    write_data(data, cfg, o);
    json meta = {
        {"command", to_string(cfg.command)},
        {"config", cfg.params},
        {"seed", cfg.seed ? json(*cfg.seed) : json(nullptr)},
        {"format", cfg.format == Format::kCsv ? "csv" : "json"},
        {"version", BESQLAB_VERSION},
        {"exit_status", o.status},
        {"wall_time_seconds", wall},
    };
    std::ofstream side(cfg.output_path + ".meta.json");
    side << meta.dump(2) << '\n';
  }
  return o.status;
}

int main_entry(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  try {
    auto parsed = parse_impl(args);
    if (!parsed.config) {
      out << parsed.help;
      return kOk;
    }
    return run(*parsed.config, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NonConvergenceError& e) {
    err << "not converged: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const UnreliableRatioError& e) {
    err << "not converged: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const BudgetExhaustedError& e) {
    err << "inconclusive: " << e.what() << '\n';
    return kInconclusive;
  }
}

}  // namespace besqlab::cli
