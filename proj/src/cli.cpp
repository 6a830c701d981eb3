#include "macldp/cli.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "macldp/estimators.hpp"
#include "macldp/event_sim.hpp"
#include "macldp/kernel.hpp"
#include "macldp/ldp.hpp"
#include "macldp/throughput.hpp"

namespace macldp::cli {

namespace {

constexpr const char* kHeaderPrefix = "# config: ";

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

template <class T>
void put_optional(nlohmann::ordered_json& j, const char* key, const std::optional<T>& v) {
  if (v) {
    j[key] = *v;
  } else {
    j[key] = nullptr;
  }
}

template <class T>
std::optional<T> get_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

LdpGrid ldp_grid(const RunConfig& cfg) {
  LdpGrid g;
  if (cfg.grid_h) g.h = *cfg.grid_h;
  if (cfg.kmax) g.k_max = *cfg.kmax;
  return g;
}

struct Output {
  nlohmann::ordered_json json;  // JSON body after schema_version and config
  std::ostringstream csv;       // CSV body after the header line
};

std::vector<StepRecord> simulate_steps(const RunConfig& cfg, std::int64_t n, std::uint64_t stream) {
  // Grow the horizon until the run holds n admissions, then keep the first n.
  const double rate = throughput(cfg.params, Protocol::Csma).value;
  double horizon = 1.2 * static_cast<double>(n) / std::max(rate, 1e-3) + 10.0;
  for (;;) {
    Trace tr = simulate(cfg.params, cfg.protocol,
                        ArrivalStream::poisson(cfg.params.lambda, RandomSource(cfg.seed, stream)),
                        horizon);
    if (static_cast<std::int64_t>(tr.steps.size()) >= n) {
      tr.steps.resize(static_cast<std::size_t>(n));
      return tr.steps;
    }
    horizon *= 2.0;
  }
}

int cmd_simulate(const RunConfig& cfg, Output& o) {
  Trace tr;
  if (!cfg.arrivals.empty()) {
    std::ifstream in(cfg.arrivals);
    if (!in) throw InvalidArgument(fmt::format("cannot open arrival file '{}'", cfg.arrivals));
    tr = simulate(cfg.params, cfg.protocol,
                  ArrivalStream::scripted(read_arrival_times(in), RandomSource(cfg.seed, 0)),
                  cfg.horizon);
  } else {
    tr = simulate(cfg.params, cfg.protocol,
                  ArrivalStream::poisson(cfg.params.lambda, RandomSource(cfg.seed, 0)), cfg.horizon);
  }
  const double rate = static_cast<double>(tr.counts.successes_total) / cfg.horizon;
  o.json["summary"] = {{"attempts", tr.counts.attempts_total},
                       {"successes", tr.counts.successes_total},
                       {"potential_successes", tr.counts.potential_successes},
                       {"throughput", rate}};
  o.json["trace"] = trace_to_json(tr);
  o.csv << fmt::format("# attempts={},successes={},potential_successes={},throughput={}\n",
                       tr.counts.attempts_total, tr.counts.successes_total,
                       tr.counts.potential_successes, num(rate));
  write_steps_csv(o.csv, tr.steps);
  return kOk;
}

int cmd_sample_chain(const RunConfig& cfg, Output& o) {
  RandomSource src(cfg.seed, 0);
  const auto steps = run_chain(cfg.params, cfg.protocol, cfg.steps, src);
  const auto pm = pi_means(steps);
  const double rate = lln_throughput(steps, cfg.protocol);
  o.json["summary"] = {{"steps", cfg.steps},
                       {"mean_attempts", pm.mean_attempts},
                       {"mean_gap", pm.mean_gap},
                       {"lln_throughput", rate}};
  if (cfg.measure) {
    StringGrid g = default_string_grid(cfg.params);
    if (cfg.grid_h) g.h = *cfg.grid_h;
    if (cfg.grid_smax) g.s_max = *cfg.grid_smax;
    if (cfg.kmax) g.k_max = *cfg.kmax;
    const auto m = build_string_measure(steps, cfg.params.kappa, g);
    auto& cells = o.json["measure"] = nlohmann::ordered_json::array();
    for (const auto& [key, w] : m.weights) cells.push_back({{"cells", key}, {"weight", w}});
    o.json["gap_overflow"] = m.gap_overflow;
    o.json["attempts_overflow"] = m.attempts_overflow;
    o.csv << fmt::format("# gap_overflow={},attempts_overflow={},marginal_defect={}\n",
                         m.gap_overflow, m.attempts_overflow, num(m.marginal_defect()));
    m.write_csv(o.csv);
    return kOk;
  }
  auto& arr = o.json["steps"] = nlohmann::ordered_json::array();
  for (const auto& s : steps) arr.push_back({{"attempts", s.attempts}, {"gap", s.gap}});
  o.csv << fmt::format("# mean_attempts={},mean_gap={},lln_throughput={}\n", num(pm.mean_attempts),
                       num(pm.mean_gap), num(rate));
  write_steps_csv(o.csv, steps);
  return kOk;
}

int cmd_throughput(const RunConfig& cfg, Output& o) {
  const double v = throughput(cfg.params, cfg.protocol).value;
  o.json["throughput"] = v;
  o.csv << "protocol,lambda,kappa,throughput\n"
        << to_string(cfg.protocol) << ',' << num(cfg.params.lambda) << ',' << cfg.params.kappa
        << ',' << num(v) << '\n';
  return kOk;
}

int cmd_optimize(const RunConfig& cfg, Output& o) {
  const auto opt = optimize_lambda_aloha(cfg.params.kappa);
  const double ratio = opt.lambda_star / cfg.params.kappa;
  o.json["lambda_star"] = opt.lambda_star;
  o.json["ratio"] = ratio;
  o.json["value"] = opt.value;
  o.csv << "kappa,lambda_star,ratio,value\n"
        << cfg.params.kappa << ',' << num(opt.lambda_star) << ',' << num(ratio) << ','
        << num(opt.value) << '\n';
  return kOk;
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(n == 1 ? a : a + (b - a) * i / (n - 1));
  return v;
}

int cmd_rate_function(const RunConfig& cfg, Output& o) {
  const double s_star = throughput(cfg.params, cfg.protocol).value;
  const double s_from = cfg.from > 0.0 ? cfg.from : 0.5 * s_star;
  const double s_to = cfg.to > 0.0 ? cfg.to : 1.2 * s_star;
  const double a_from = cfg.a_from > 0.0 ? cfg.a_from : 0.5 * cfg.params.lambda;
  const double a_to = cfg.a_to > 0.0 ? cfg.a_to : 1.5 * cfg.params.lambda;
  auto& rows = o.json["curve"] = nlohmann::ordered_json::array();

  if (cfg.curve == "IA") {
    const int n = cfg.points > 0 ? cfg.points : 20;
    o.csv << "a,I_A\n";
    for (double a : linspace(a_from, a_to, n)) {
      const double v = rate_IA(a, cfg.params).value;
      rows.push_back({{"a", a}, {"I_A", v}});
      o.csv << num(a) << ',' << num(v) << '\n';
    }
    return kOk;
  }
  RateSolver solver(cfg.protocol, cfg.params, ldp_grid(cfg));
  if (cfg.curve == "IS") {
    const int n = cfg.points > 0 ? cfg.points : 20;
    o.csv << "s,I_S\n";
    for (double s : linspace(s_from, s_to, n)) {
      const auto r = solver.IS(s);
      rows.push_back({{"s", s}, {"I_S", r.infinite ? nlohmann::ordered_json("inf")
                                                   : nlohmann::ordered_json(r.value)}});
      o.csv << num(s) << ',' << num(r.value) << '\n';
    }
    return kOk;
  }
  // curve == "I": a x s grid
  const int n = cfg.points > 0 ? cfg.points : 8;
  o.csv << "a,s,I\n";
  for (double a : linspace(a_from, a_to, n)) {
    for (double s : linspace(s_from, s_to, n)) {
      const auto r = solver.I(a, s);
      rows.push_back({{"a", a}, {"s", s}, {"I", r.infinite ? nlohmann::ordered_json("inf")
                                                            : nlohmann::ordered_json(r.value)}});
      o.csv << num(a) << ',' << num(s) << ',' << num(r.value) << '\n';
    }
  }
  return kOk;
}

int cmd_tail_check(const RunConfig& cfg, Output& o) {
  const auto rep = tail_bound_check(cfg.protocol, cfg.params, cfg.s_target, cfg.horizon, cfg.runs,
                                    cfg.seed, 0, ldp_grid(cfg));
  o.json["status"] = rep.status;
  o.json["runs"] = rep.runs;
  o.json["occurrences"] = rep.occurrences;
  o.json["probability"] = rep.probability;
  o.json["mc_rate"] = std::isinf(rep.mc_rate) ? nlohmann::ordered_json("inf")
                                              : nlohmann::ordered_json(rep.mc_rate);
  o.json["predicted_rate"] = rep.predicted_rate;
  o.json["passed"] = rep.passed;
  o.csv << "status,runs,occurrences,probability,mc_rate,predicted_rate,passed\n"
        << rep.status << ',' << rep.runs << ',' << rep.occurrences << ',' << num(rep.probability)
        << ',' << num(rep.mc_rate) << ',' << num(rep.predicted_rate) << ','
        << (rep.passed ? "true" : "false") << '\n';
  return rep.status == "insufficient" ? kInsufficient : kOk;
}

int cmd_compare(const RunConfig& cfg, Output& o) {
  std::vector<StepRecord> sim, chain;
  std::thread sim_worker([&] { sim = simulate_steps(cfg, cfg.steps, 0); });
  {
    RandomSource src(cfg.seed, 1);
    chain = run_chain(cfg.params, cfg.protocol, cfg.steps, src);
  }
  sim_worker.join();
  const double ks = ks_distance(gaps_of(sim), gaps_of(chain));
  const double tv = tv_attempts(sim, chain);
  o.json["n"] = cfg.steps;
  o.json["ks_gap"] = ks;
  o.json["tv_attempts"] = tv;
  o.csv << "metric,value\n"
        << "n," << cfg.steps << '\n'
        << "ks_gap," << num(ks) << '\n'
        << "tv_attempts," << num(tv) << '\n';
  return kOk;
}

}  // namespace

nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["command"] = cfg.command;
  j["protocol"] = std::string(to_string(cfg.protocol));
  j["lambda"] = cfg.params.lambda;
  j["kappa"] = cfg.params.kappa;
  j["horizon"] = cfg.horizon;
  j["steps"] = cfg.steps;
  j["runs"] = cfg.runs;
  j["seed"] = cfg.seed;
  j["output"] = cfg.output;
  j["format"] = cfg.format;
  put_optional(j, "grid_h", cfg.grid_h);
  put_optional(j, "grid_smax", cfg.grid_smax);
  put_optional(j, "kmax", cfg.kmax);
  j["curve"] = cfg.curve;
  j["from"] = cfg.from;
  j["to"] = cfg.to;
  j["a_from"] = cfg.a_from;
  j["a_to"] = cfg.a_to;
  j["points"] = cfg.points;
  j["s_target"] = cfg.s_target;
  j["arrivals"] = cfg.arrivals;
  j["measure"] = cfg.measure;
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.command = j.at("command").get<std::string>();
  c.protocol = parse_protocol(j.at("protocol").get<std::string>());
  c.params.lambda = j.at("lambda").get<double>();
  c.params.kappa = j.at("kappa").get<int>();
  c.horizon = j.at("horizon").get<double>();
  c.steps = j.at("steps").get<std::int64_t>();
  c.runs = j.at("runs").get<std::int64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.output = j.at("output").get<std::string>();
  c.format = j.at("format").get<std::string>();
  c.grid_h = get_optional<double>(j, "grid_h");
  c.grid_smax = get_optional<double>(j, "grid_smax");
  c.kmax = get_optional<int>(j, "kmax");
  c.curve = j.at("curve").get<std::string>();
  c.from = j.at("from").get<double>();
  c.to = j.at("to").get<double>();
  c.a_from = j.at("a_from").get<double>();
  c.a_to = j.at("a_to").get<double>();
  c.points = j.at("points").get<int>();
  c.s_target = j.at("s_target").get<double>();
  c.arrivals = j.at("arrivals").get<std::string>();
  c.measure = j.at("measure").get<bool>();
  return c;
}

std::string config_header(const RunConfig& cfg) {
  return kHeaderPrefix + config_to_json(cfg).dump();
}

RunConfig parse_config_header(const std::string& first_line) {
  const std::string prefix = kHeaderPrefix;
  if (first_line.rfind(prefix, 0) == 0) {
    return config_from_json(nlohmann::json::parse(first_line.substr(prefix.size())));
  }
  const auto doc = nlohmann::json::parse(first_line);
  return config_from_json(doc.at("config"));
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::string protocol = "csma";
  double grid_h = 0.0, grid_smax = 0.0;
  int kmax = 0;

  CLI::App app{"Multi-channel ALOHA / CSMA simulator and large-deviation toolkit", "macldp"};
  app.require_subcommand(1);

  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--lambda", cfg.params.lambda, "arrival intensity")->capture_default_str();
    sub->add_option("--kappa", cfg.params.kappa, "number of channels")->capture_default_str();
    sub->add_option("--protocol", protocol, "aloha or csma")
        ->check(CLI::IsMember({"aloha", "csma", "ALOHA", "CSMA"}))
        ->capture_default_str();
  };
  auto add_io = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "random seed")->capture_default_str();
    sub->add_option("--output", cfg.output, "output file (default stdout)");
    sub->add_option("--format", cfg.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
  };
  auto add_grid = [&](CLI::App* sub, bool smax) {
    sub->add_option("--grid-h", grid_h, "gap bin width")->check(CLI::PositiveNumber);
    if (smax) sub->add_option("--grid-smax", grid_smax, "upper gap edge")->check(CLI::PositiveNumber);
    sub->add_option("--kmax", kmax, "attempt truncation")->check(CLI::PositiveNumber);
  };

  auto* simulate_cmd = app.add_subcommand("simulate", "discrete-event simulation");
  add_model(simulate_cmd);
  add_io(simulate_cmd);
  simulate_cmd->add_option("--horizon", cfg.horizon, "time horizon")->capture_default_str();
  simulate_cmd->add_option("--arrivals", cfg.arrivals, "file of scripted arrival times");

  auto* chain_cmd = app.add_subcommand("sample-chain", "sample the admission chain");
  add_model(chain_cmd);
  add_io(chain_cmd);
  add_grid(chain_cmd, true);
  chain_cmd->add_option("--steps", cfg.steps, "chain length")->capture_default_str();
  chain_cmd->add_flag("--measure", cfg.measure, "emit the empirical kappa-string measure");

  auto* tp_cmd = app.add_subcommand("throughput", "closed-form throughput");
  add_model(tp_cmd);
  add_io(tp_cmd);

  auto* opt_cmd = app.add_subcommand("optimize-lambda", "ALOHA throughput-optimal lambda");
  opt_cmd->add_option("--kappa", cfg.params.kappa, "number of channels")->capture_default_str();
  add_io(opt_cmd);

  auto* rate_cmd = app.add_subcommand("rate-function", "rate-function curves");
  add_model(rate_cmd);
  add_io(rate_cmd);
  add_grid(rate_cmd, false);
  rate_cmd->add_option("--curve", cfg.curve, "IS, I or IA")
      ->check(CLI::IsMember({"IS", "I", "IA"}))
      ->capture_default_str();
  rate_cmd->add_option("--s-from", cfg.from, "first s");
  rate_cmd->add_option("--s-to", cfg.to, "last s");
  rate_cmd->add_option("--a-from", cfg.a_from, "first a");
  rate_cmd->add_option("--a-to", cfg.a_to, "last a");
  rate_cmd->add_option("--points", cfg.points, "points per axis");

  auto* tail_cmd = app.add_subcommand("tail-check", "Monte-Carlo check of the tail upper bound");
  add_model(tail_cmd);
  add_io(tail_cmd);
  add_grid(tail_cmd, false);
  tail_cmd->add_option("--s-target", cfg.s_target, "success rate threshold")->required();
  tail_cmd->add_option("--horizon", cfg.horizon, "time t")->capture_default_str();
  tail_cmd->add_option("--runs", cfg.runs, "independent runs")->capture_default_str();

  auto* cmp_cmd = app.add_subcommand("compare", "event simulation vs chain sampler");
  add_model(cmp_cmd);
  add_io(cmp_cmd);
  cmp_cmd->add_option("--steps", cfg.steps, "steps per side")->capture_default_str();

  std::vector<const char*> argv{"macldp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  for (auto* sub : app.get_subcommands()) cfg.command = sub->get_name();
  const CLI::App* sub = app.get_subcommand(cfg.command);
  if (sub->get_option_no_throw("--grid-h") && sub->get_option("--grid-h")->count()) cfg.grid_h = grid_h;
  if (sub->get_option_no_throw("--grid-smax") && sub->get_option("--grid-smax")->count()) {
    cfg.grid_smax = grid_smax;
  }
  if (sub->get_option_no_throw("--kmax") && sub->get_option("--kmax")->count()) cfg.kmax = kmax;

  try {
    cfg.protocol = parse_protocol(protocol);
    if (cfg.command == "optimize-lambda") cfg.protocol = Protocol::Aloha;
    validate_params(cfg.params);
    if (!(cfg.horizon > 0.0)) throw InvalidArgument("horizon must be positive");
    if (cfg.steps < 1 || cfg.runs < 1) throw InvalidArgument("steps and runs must be positive");

    Output o;
    int code = kOk;
    if (cfg.command == "simulate") code = cmd_simulate(cfg, o);
    else if (cfg.command == "sample-chain") code = cmd_sample_chain(cfg, o);
    else if (cfg.command == "throughput") code = cmd_throughput(cfg, o);
    else if (cfg.command == "optimize-lambda") code = cmd_optimize(cfg, o);
    else if (cfg.command == "rate-function") code = cmd_rate_function(cfg, o);
    else if (cfg.command == "tail-check") code = cmd_tail_check(cfg, o);
    else code = cmd_compare(cfg, o);

    std::ofstream file;
    if (!cfg.output.empty()) {
      file.open(cfg.output, std::ios::binary);
      if (!file) throw InvalidArgument(fmt::format("cannot write '{}'", cfg.output));
    }
    std::ostream& dest = cfg.output.empty() ? out : file;
    if (cfg.format == "json") {
      nlohmann::ordered_json doc;
      doc["config"] = config_to_json(cfg);
      doc["schema_version"] = 1;
      for (auto& [k, v] : o.json.items()) doc[k] = v;
      dest << doc.dump() << '\n';
    } else {
      dest << config_header(cfg) << '\n' << o.csv.str();
    }
    return code;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConvergenceError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNonConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace macldp::cli
