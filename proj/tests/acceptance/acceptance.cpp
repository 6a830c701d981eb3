// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance                 run all criteria
//   acceptance --criterion N   run criterion N only

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include "macldp/cli.hpp"
#include "macldp/estimators.hpp"
#include "macldp/event_sim.hpp"
#include "macldp/kernel.hpp"
#include "macldp/ldp.hpp"
#include "macldp/throughput.hpp"
#include "oracle.hpp"

using namespace macldp;

namespace {

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, std::string note) {
    if (!ok) pass = false;
    notes.push_back((ok ? "" : "!") + std::move(note));
  }
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

const char* name(Protocol p) { return p == Protocol::Csma ? "csma" : "aloha"; }

// Event-simulated admission steps, extending the horizon until n admissions exist.
std::vector<StepRecord> simulated_steps(const Params& p, Protocol proto, std::int64_t n,
                                        std::uint64_t seed) {
  double horizon = 1.5 * static_cast<double>(n) * (1.0 + 1.0 / p.lambda) / p.kappa + 10.0;
  for (;;) {
    Trace tr = simulate(p, proto, ArrivalStream::poisson(p.lambda, RandomSource(seed, 0)), horizon);
    if (static_cast<std::int64_t>(tr.steps.size()) >= n) {
      tr.steps.resize(static_cast<std::size_t>(n));
      return tr.steps;
    }
    horizon *= 2.0;
  }
}

Verdict simulation_rate(Protocol proto, const std::vector<std::pair<Params, double>>& cases,
                        double tolerance) {
  Verdict v;
  for (const auto& [p, target] : cases) {
    Stopwatch sw;
    const double horizon = 1e5;
    const Trace tr = simulate(p, proto, ArrivalStream::poisson(p.lambda, RandomSource(2024, 0)), horizon);
    const double rate = static_cast<double>(tr.counts.successes_total) / horizon;
    const double secs = sw.seconds();
    v.require(std::abs(rate - target) <= tolerance && secs < 10.0,
              fmt::format("lambda={} kappa={}: S(t)/t={:.5f} target={:.5f} ({:.2f}s)", p.lambda,
                          p.kappa, rate, target, secs));
  }
  return v;
}

Verdict criterion1() {
  std::vector<std::pair<Params, double>> cases;
  for (Params p : {Params{1.0, 1}, Params{1.0, 2}, Params{2.0, 3}}) {
    cases.emplace_back(p, s_csma(p).value);
  }
  Verdict v = simulation_rate(Protocol::Csma, cases, 0.01);
  v.require(s_csma({1.0, 1}).value == 0.5, "closed form at (1,1) is 0.5");
  return v;
}

Verdict criterion2() {
  return simulation_rate(Protocol::Aloha,
                         {{Params{0.5, 1}, 1.0 / (2.0 * std::exp(1.0))}, {Params{1.0, 1}, std::exp(-2.0)}},
                         0.005);
}

Verdict criterion3() {
  Verdict v;
  for (auto [kappa, target] : {std::pair{2, 0.43}, {3, 0.41}}) {
    const auto opt = optimize_lambda_aloha(kappa);
    const double ratio = opt.lambda_star / kappa;
    v.require(std::abs(ratio - target) <= 0.01,
              fmt::format("kappa={}: lambda*/kappa={:.6f} target={}", kappa, ratio, target));
  }
  const auto best = boost::math::tools::brent_find_minima(
      [](double x) { return -aloha_asymptotic(x); }, 0.0, 1.0, 50);
  const double expected = (3.0 - std::sqrt(5.0)) / 2.0;
  v.require(std::abs(best.first - expected) <= 1e-6,
            fmt::format("asymptotic argmax={:.9f} expected={:.9f}", best.first, expected));
  return v;
}

Verdict criterion4() {
  Verdict v;
  Stopwatch sw;

  // Normalization over random histories.
  RandomSource hist(404, 0);
  const std::vector<double> lambdas{0.5, 1.0, 2.0};
  for (auto proto : {Protocol::Csma, Protocol::Aloha}) {
    for (int kappa : {1, 2, 3}) {
      double worst = 0.0;
      for (int i = 0; i < 100; ++i) {
        const KernelDensity kd{proto, {lambdas[i % 3], kappa}, oracle::random_history(kappa, hist)};
        const std::vector<double> gaps(kd.history.gaps().begin(), kd.history.gaps().end());
        auto cuts = oracle::breakpoints(gaps, 0.0, 1.0);
        cuts.push_back(oracle::gamma(gaps));
        cuts.push_back(1.0);
        const double total = oracle::integrate(
            [&](double s) {
              double sum = 0.0;
              for (int k = 1; k <= 60; ++k) sum += density(kd, k, s);
              return sum;
            },
            0.0, INFINITY, cuts);
        worst = std::max(worst, std::abs(total - 1.0));
      }
      v.require(worst <= 1e-6,
                fmt::format("{} kappa={} normalization max|err|={:.2e}", name(proto), kappa, worst));
    }
  }

  // Sampler against the density.
  for (auto proto : {Protocol::Csma, Protocol::Aloha}) {
    for (int kappa : {1, 2, 3}) {
      const KernelDensity kd{proto, {1.0, kappa}, oracle::random_history(kappa, hist)};
      RandomSource src(405, static_cast<std::uint64_t>(kappa));
      const auto r = oracle::sampler_chi2(kd, 100000, src);
      v.require(r.pvalue > 0.001, fmt::format("{} kappa={} chi2={:.1f} dof={} p={:.3g}", name(proto),
                                              kappa, r.statistic, r.cells - 1, r.pvalue));
    }
  }

  // Event simulation against the chain.
  double worst_ks = 0.0, worst_tv = 0.0;
  std::string worst_where;
  for (auto proto : {Protocol::Csma, Protocol::Aloha}) {
    for (int kappa : {1, 2, 3}) {
      for (double lambda : lambdas) {
        const Params p{lambda, kappa};
        const auto sim = simulated_steps(p, proto, 100000, 406);
        RandomSource src(407, 1);
        const auto chain = run_chain(p, proto, 100000, src);
        const double ks = ks_distance(gaps_of(sim), gaps_of(chain));
        const double tv = tv_attempts(sim, chain);
        v.require(ks < 0.02 && tv < 0.02, fmt::format("{} kappa={} lambda={} KS={:.4f} TV={:.4f}",
                                                      name(proto), kappa, lambda, ks, tv));
        worst_ks = std::max(worst_ks, ks);
        worst_tv = std::max(worst_tv, tv);
      }
    }
  }
  const double secs = sw.seconds();
  v.require(secs < 60.0, fmt::format("runtime {:.1f}s", secs));
  return v;
}

Verdict criterion5() {
  Verdict v;
  for (double lambda : {0.5, 1.0, 2.0}) {
    RandomSource src(505, 0);
    const auto chain = run_chain({lambda, 1}, Protocol::Aloha, 100000, src);
    // The first step leaves an empty system and is not a draw from the kernel.
    auto gaps = gaps_of(std::span<const StepRecord>(chain).subspan(1));
    const double d = ks_distance(std::move(gaps), [&](double s) {
      return s < 1.0 ? 0.0 : -std::expm1(-lambda * (s - 1.0));
    });
    v.require(d < 0.01, fmt::format("lambda={} KS={:.4f}", lambda, d));
  }
  return v;
}

struct LdpCase {
  Protocol proto;
  Params p;
};

Verdict criterion6() {
  Verdict v;
  Stopwatch sw;
  const std::vector<LdpCase> cases{{Protocol::Csma, {1.0, 1}},
                                   {Protocol::Csma, {1.0, 2}},
                                   {Protocol::Aloha, {0.5, 1}},
                                   {Protocol::Aloha, {0.5, 2}}};
  for (const auto& [proto, p] : cases) {
    const std::string tag = fmt::format("{} kappa={} lambda={}", name(proto), p.kappa, p.lambda);
    RateSolver solver(proto, p);
    auto& cgf = solver.cgf();

    const double origin = cgf(0.0, 0.0);
    v.require(std::abs(origin) <= 1e-6, fmt::format("{}: Lambda(0,0)={:.2e}", tag, origin));

    RandomSource src(606, static_cast<std::uint64_t>(p.kappa));
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const double A = -1.0 + 2.0 * src.uniform();
      const double B = p.lambda * (-1.5 + 2.0 * src.uniform());
      worst = std::max(worst, std::abs(cgf(A, B) - cgf.direct(A, B)));
    }
    v.require(worst <= 1e-8, fmt::format("{}: tilt scaling max|diff|={:.2e}", tag, worst));

    RandomSource chain_src(607, static_cast<std::uint64_t>(p.kappa));
    const auto m = pi_means(run_chain(p, proto, 1000000, chain_src));
    const double j0 = solver.J(m.mean_attempts, m.mean_gap).value;
    v.require(std::abs(j0) <= 2e-3, fmt::format("{}: J(pi_means)={:.2e}", tag, j0));

    const double a_min = m.mean_attempts / m.mean_gap;
    const double s_min = (proto == Protocol::Csma ? 1.0 : 2.0 - m.mean_attempts) / m.mean_gap;
    const double i0 = solver.I(a_min, s_min).value;
    v.require(std::abs(i0) <= 5e-3, fmt::format("{}: I(a_min,s_min)={:.2e}", tag, i0));

    const double s_star = throughput(p, proto).value;
    const double is0 = solver.IS(s_star).value;
    v.require(std::abs(is0) <= 5e-3, fmt::format("{}: I^S(s_*)={:.2e}", tag, is0));

    // 20 x 20 grid of J around the minimizer; midpoint checks along rows, columns and diagonals.
    const int n = 20;
    const double x_lo = std::max(1.02, 0.85 * m.mean_attempts), x_hi = 1.3 * m.mean_attempts;
    const double y_floor = p.kappa == 1 ? 1.02 : 0.02;
    const double y_lo = std::max(y_floor, 0.7 * m.mean_gap), y_hi = 1.4 * m.mean_gap;
    std::vector<double> grid(n * n);
    std::vector<char> usable(n * n);
    for (int i = 0; i < n; ++i) {
      for (int jj = 0; jj < n; ++jj) {
        const int j = i % 2 == 0 ? jj : n - 1 - jj;  // serpentine keeps warm starts close
        const auto pt = solver.J(x_lo + (x_hi - x_lo) * i / (n - 1), y_lo + (y_hi - y_lo) * j / (n - 1));
        grid[i * n + j] = pt.value;
        usable[i * n + j] = !pt.infinite && !pt.edge && std::isfinite(pt.value);
      }
    }
    double min_slack = INFINITY, min_value = INFINITY;
    int checks = 0, skipped = 0;
    auto check = [&](int i0, int j0, int di, int dj) {
      const int a = i0 * n + j0, b = (i0 + di) * n + j0 + dj, c = (i0 + 2 * di) * n + j0 + 2 * dj;
      if (!usable[a] || !usable[b] || !usable[c]) {
        ++skipped;
        return;
      }
      min_slack = std::min(min_slack, 0.5 * (grid[a] + grid[c]) - grid[b]);
      ++checks;
    };
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (usable[i * n + j]) min_value = std::min(min_value, grid[i * n + j]);
        if (j + 2 < n) check(i, j, 0, 1);
        if (i + 2 < n) check(i, j, 1, 0);
        if (i + 2 < n && j + 2 < n) check(i, j, 1, 1);
        if (i + 2 < n && j >= 2) check(i, j, 1, -1);
      }
    }
    v.require(checks > 0 && min_slack >= -1e-8 && min_value >= -1e-8,
              fmt::format("{}: convexity {} checks ({} skipped) min slack={:.2e}, min J={:.2e}", tag,
                          checks, skipped, min_slack, min_value));
  }
  const double secs = sw.seconds();
  v.require(secs < 300.0, fmt::format("runtime {:.1f}s", secs));
  return v;
}

Verdict criterion7() {
  Verdict v;
  Stopwatch sw;
  const auto rep = tail_bound_check(Protocol::Csma, {1.0, 1}, 0.3, 200.0, 100000, 707);
  const double secs = sw.seconds();
  v.require(rep.status != "insufficient" && rep.passed && secs < 300.0,
            fmt::format("status={} occurrences={}/{} mc_rate={} predicted={:.5f} ({:.1f}s)",
                        rep.status, rep.occurrences, rep.runs, rep.mc_rate, rep.predicted_rate, secs));
  return v;
}

Verdict criterion8() {
  Verdict v;
  for (auto proto : {Protocol::Csma, Protocol::Aloha}) {
    const auto r = ergodicity_ratio_diagnostic({1.0, 2}, proto);
    v.require(r.ratio <= r.bound * 1.01,
              fmt::format("{}: ratio={:.4f} bound={:.4f}", name(proto), r.ratio, r.bound));
  }
  return v;
}

Verdict criterion9() {
  Verdict v;
  const std::vector<std::vector<std::string>> commands{
      {"simulate", "--protocol", "aloha", "--lambda", "0.7", "--kappa", "2", "--horizon", "500", "--seed", "9"},
      {"sample-chain", "--protocol", "csma", "--lambda", "1.2", "--kappa", "3", "--steps", "5000", "--seed", "9"},
      {"sample-chain", "--protocol", "aloha", "--lambda", "1", "--kappa", "2", "--steps", "5000", "--measure"},
      {"throughput", "--protocol", "aloha", "--lambda", "0.5", "--kappa", "3"},
      {"optimize-lambda", "--kappa", "3", "--format", "json"},
      {"rate-function", "--curve", "IS", "--protocol", "csma", "--lambda", "1", "--kappa", "1", "--points", "4"},
      {"tail-check", "--protocol", "csma", "--lambda", "1", "--kappa", "1", "--s-target", "0.45", "--horizon", "50", "--runs", "2000", "--seed", "3"},
      {"compare", "--protocol", "aloha", "--lambda", "1", "--kappa", "2", "--steps", "5000", "--seed", "9"},
  };
  for (const auto& args : commands) {
    std::ostringstream out1, err1, out2, err2;
    const int c1 = cli::run(args, out1, err1);
    const int c2 = cli::run(args, out2, err2);
    v.require(c1 == 0 && c1 == c2 && out1.str() == out2.str() && !out1.str().empty(),
              fmt::format("{}: exit {}/{}, {} bytes", args[0], c1, c2, out1.str().size()));
  }
  return v;
}

const std::vector<std::pair<std::string, std::function<Verdict()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Verdict()>>> all{
      {"CSMA simulation matches the closed-form throughput", criterion1},
      {"ALOHA simulation matches the closed-form throughput", criterion2},
      {"optimal ALOHA density", criterion3},
      {"kernel correctness", criterion4},
      {"single-channel ALOHA gap marginal", criterion5},
      {"LDP numerics", criterion6},
      {"tail upper bound", criterion7},
      {"ergodicity diagnostic", criterion8},
      {"reproducibility", criterion9},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-9)")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);

  bool all_pass = true;
  for (std::size_t i = 0; i < criteria().size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only != 0 && only != id) continue;
    Verdict v;
    try {
      v = criteria()[i].second();
    } catch (const std::exception& e) {
      v.require(false, fmt::format("error: {}", e.what()));
    }
    all_pass = all_pass && v.pass;
    std::string detail;
    for (const auto& n : v.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::cout << fmt::format("{} criterion {}: {} [{}]", v.pass ? "PASS" : "FAIL", id,
                             criteria()[i].first, detail)
              << std::endl;
  }
  return all_pass ? 0 : 1;
}
