#ifndef MACLDP_CLI_HPP
#define MACLDP_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "macldp/core.hpp"

namespace macldp::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kNonConvergence = 3,
  kInsufficient = 4,
};

/// Fully resolved settings of one invocation; echoed as the first output line.
struct RunConfig {
  std::string command;
  Params params;
  Protocol protocol = Protocol::Csma;
  double horizon = 1000.0;
  std::int64_t steps = 10000;
  std::int64_t runs = 1000;
  std::uint64_t seed = 0;
  std::string output;  // empty = stdout
  std::string format = "csv";
  std::optional<double> grid_h;
  std::optional<double> grid_smax;
  std::optional<int> kmax;
  // Command-specific extras.
  std::string curve = "IS";
  double from = 0.0;
  double to = 0.0;
  double a_from = 0.0;
  double a_to = 0.0;
  int points = 0;
  double s_target = 0.0;
  std::string arrivals;  // scripted arrival file for simulate
  bool measure = false;  // sample-chain: emit the kappa-string measure

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

nlohmann::ordered_json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

/// "# config: {...}" for CSV output.
std::string config_header(const RunConfig& cfg);
/// Recovers the config from a CSV header line or a JSON output document.
RunConfig parse_config_header(const std::string& first_line);

/// Parses `args` (without the program name) and runs the command. Results go
/// to `out` unless --output names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace macldp::cli

#endif  // MACLDP_CLI_HPP
