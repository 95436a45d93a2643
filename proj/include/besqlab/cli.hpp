#pragma once

// Command-line front end. Every command reads a flat key/value parameter
// set; values come from schema defaults, then an optional JSON config file,
// then long flags (--delta1 mirrors the key "delta1", --limit-eps mirrors
// "limit_eps").

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

namespace besqlab::cli {

enum class Command { kDensity, kSimulate, kEigen, kRatio, kLaplace, kLemma3, kMarkovTest, kCmxTest };
enum class Format { kCsv, kJson };

enum ExitCode : int { kOk = 0, kConfigError = 2, kNonConvergence = 3, kInconclusive = 4 };

std::string_view to_string(Command c);
bool is_stochastic(Command c);

struct RunConfig {
  Command command = Command::kDensity;
  nlohmann::json params = nlohmann::json::object();  // every schema key
  std::optional<std::uint64_t> seed;
  std::string output_path;  // empty: data goes to the output stream
  Format format = Format::kCsv;

  /// Throws ConfigError when a stochastic command lacks a seed.
  void validate() const;
};

/// Parses arguments after the program name. Throws ConfigError.
RunConfig parse_args(std::span<const std::string> args);

/// Executes the command. Data goes to cfg.output_path (plus a sidecar
/// "<output>.meta.json") or, without an output path, to `out`.
int run(const RunConfig& cfg, std::ostream& out, std::ostream& err);

/// parse_args + run with errors mapped to exit codes.
int main_entry(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace besqlab::cli
