#include "macldp/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "macldp/kernel.hpp"

namespace macldp {

ReconstructedCounts reconstruct_counts(std::span<const StepRecord> records, Protocol proto,
                                       double t) {
  if (!(t > 0.0)) throw InvalidArgument("t must be positive");
  double clock = 0.0;
  std::size_t admitted = 0;
  std::int64_t attempts = 0;
  while (admitted < records.size() && clock + records[admitted].gap <= t) {
    clock += records[admitted].gap;
    attempts += records[admitted].attempts;
    ++admitted;
  }
  if (admitted == records.size()) {
    throw InvalidArgument(
        fmt::format("records cover only {} of t = {}; more steps needed", clock, t));
  }
  ReconstructedCounts out;
  out.attempts_lower = attempts;
  out.attempts_upper = attempts + records[admitted].attempts - 1;
  out.counts.attempts_total = attempts;
  const auto n = static_cast<std::int64_t>(admitted);
  out.counts.potential_successes = n;
  out.counts.successes_total = proto == Protocol::Csma ? n : 2 * n - attempts;
  return out;
}

double lln_throughput(std::span<const StepRecord> records, Protocol proto) {
  if (records.empty()) throw InvalidArgument("no records");
  double gaps = 0.0;
  std::int64_t attempts = 0;
  for (const auto& r : records) {
    gaps += r.gap;
    attempts += r.attempts;
  }
  const auto n = static_cast<double>(records.size());
  const double delivered = proto == Protocol::Csma ? n : 2.0 * n - static_cast<double>(attempts);
  return delivered / gaps;
}

PiMeans pi_means(std::span<const StepRecord> records) {
  if (records.empty()) throw InvalidArgument("no records");
  double a = 0.0, s = 0.0;
  for (const auto& r : records) {
    a += static_cast<double>(r.attempts);
    s += r.gap;
  }
  const auto n = static_cast<double>(records.size());
  return {a / n, s / n};
}

int StringGrid::gap_bins() const { return static_cast<int>(std::ceil(s_max / h - 1e-9)) + 1; }

StringGrid default_string_grid(const Params& params) {
  const Params p = validate_params(params);
  StringGrid g;
  g.h = 0.01;
  g.s_max = 1.0 + 20.0 / p.lambda;
  int k = 1;
  // P(N > k) = P(N >= k + 1) = regularized lower gamma P(k + 1, mean).
  while (boost::math::gamma_p(k + 1.0, 2.0 * p.lambda) >= 1e-10) ++k;
  g.k_max = k;
  return g;
}

int step_cell(const StringGrid& g, const StepRecord& r) {
  const int overflow = g.gap_bins() - 1;
  const int s_bin = r.gap >= g.s_max ? overflow : std::min(static_cast<int>(r.gap / g.h), overflow - 1);
  const int a_bin = static_cast<int>(std::min<std::int64_t>(r.attempts, g.k_max)) - 1;
  return a_bin * g.gap_bins() + s_bin;
}

double EmpiricalStringMeasure::total_weight() const {
  double t = 0.0;
  for (const auto& [cell, w] : weights) t += w;
  return t;
}

double EmpiricalStringMeasure::marginal_defect() const {
  if (kappa == 1) return 0.0;
  std::map<std::vector<int>, double> head, tail;
  for (const auto& [cells, w] : weights) {
    head[std::vector<int>(cells.begin(), cells.end() - 1)] += w;
    tail[std::vector<int>(cells.begin() + 1, cells.end())] += w;
  }
  double tv = 0.0;
  for (const auto& [key, w] : head) {
    auto it = tail.find(key);
    tv += std::abs(w - (it == tail.end() ? 0.0 : it->second));
  }
  for (const auto& [key, w] : tail) {
    if (!head.count(key)) tv += w;
  }
  return 0.5 * tv;
}

void EmpiricalStringMeasure::write_csv(std::ostream& os) const {
  os << "cells,weight\n";
  for (const auto& [cells, w] : weights) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? ":" : "") << cells[i];
    os << ',' << format_double(w) << '\n';
  }
}

EmpiricalStringMeasure build_string_measure(std::span<const StepRecord> records, int kappa,
                                            const StringGrid& grid) {
  if (kappa < 1) throw InvalidArgument("kappa must be at least 1");
  if (!(grid.h > 0.0) || !(grid.s_max > 0.0) || grid.k_max < 1) {
    throw InvalidArgument("grid needs h > 0, s_max > 0, k_max >= 1");
  }
  if (records.size() < static_cast<std::size_t>(kappa)) {
    throw InvalidArgument(fmt::format("need at least kappa = {} records", kappa));
  }
  EmpiricalStringMeasure m;
  m.kappa = kappa;
  m.grid = grid;
  m.n = static_cast<std::int64_t>(records.size());
  m.windows = m.n - kappa + 1;

  std::vector<int> cells(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    cells[i] = step_cell(grid, records[i]);
    if (records[i].gap >= grid.s_max) ++m.gap_overflow;
    if (records[i].attempts > grid.k_max) ++m.attempts_overflow;
  }
  const double unit = 1.0 / static_cast<double>(m.windows);
  for (std::int64_t w = 0; w < m.windows; ++w) {
    m.weights[std::vector<int>(cells.begin() + w, cells.begin() + w + kappa)] += unit;
  }
  return m;
}

double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw InvalidArgument("empty sample");
  std::sort(sample.begin(), sample.end());
  const auto n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

double tv_attempts(std::span<const StepRecord> a, std::span<const StepRecord> b, int k_max) {
  if (a.empty() || b.empty()) throw InvalidArgument("empty sample");
  auto pmf = [k_max](std::span<const StepRecord> r) {
    std::vector<double> p(k_max + 1, 0.0);
    for (const auto& s : r) p[std::min<std::int64_t>(s.attempts, k_max + 1) - 1] += 1.0;
    for (auto& v : p) v /= static_cast<double>(r.size());
    return p;
  };
  const auto pa = pmf(a), pb = pmf(b);
  double tv = 0.0;
  for (int k = 0; k <= k_max; ++k) tv += std::abs(pa[k] - pb[k]);
  return 0.5 * tv;
}

std::vector<double> gaps_of(std::span<const StepRecord> records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.gap);
  return out;
}

ErgodicityReport ergodicity_ratio_diagnostic(const Params& params, Protocol proto, double h,
                                             double s_max, int k_max) {
  const Params p = validate_params(params);
  if (p.kappa > 3) throw InvalidArgument("ergodicity diagnostic is limited to kappa <= 3");
  if (k_max < 1 || !(s_max > 0.0)) throw InvalidArgument("need k_max >= 1 and s_max > 0");
  const HistoryLattice lat(p.kappa, h);
  const auto states = lat.states();
  const int base = lat.gap_bins();
  const double log_lambda = std::log(p.lambda);

  // Binned gap transition: mass[x * base + b] = P(next gap in bin b | state x).
  std::vector<double> mass(static_cast<std::size_t>(states) * base);
  for (std::int64_t x = 0; x < states; ++x) {
    const HistoryWindow hist = lat.history(x);
    for (int b = 0; b < base; ++b) {
      mass[x * base + b] = std::exp(log_summed_mass(proto, p.kappa, hist, log_lambda, p.lambda,
                                                    lat.bin_lo(b), lat.bin_hi(b)));
    }
  }

  std::vector<double> s_points;
  for (double s = 0.5 * h; s < s_max; s += h) s_points.push_back(s);

  std::vector<double> hi(s_points.size() * k_max, 0.0);
  std::vector<double> lo(s_points.size() * k_max, std::numeric_limits<double>::infinity());

  std::vector<double> dist(states), next(states);
  for (std::int64_t start = 0; start < states; ++start) {
    std::fill(dist.begin(), dist.end(), 0.0);
    dist[start] = 1.0;
    for (int step = 0; step < p.kappa; ++step) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::int64_t x = 0; x < states; ++x) {
        if (dist[x] == 0.0) continue;
        for (int b = 0; b < base; ++b) next[lat.shift(x, b)] += dist[x] * mass[x * base + b];
      }
      std::swap(dist, next);
    }
    std::vector<double> dens(hi.size(), 0.0);
    for (std::int64_t x = 0; x < states; ++x) {
      if (dist[x] == 0.0) continue;
      const KernelDensity kd{proto, p, lat.history(x)};
      for (std::size_t i = 0; i < s_points.size(); ++i) {
        for (int k = 1; k <= k_max; ++k) {
          dens[i * k_max + (k - 1)] += dist[x] * density(kd, k, s_points[i]);
        }
      }
    }
    for (std::size_t j = 0; j < dens.size(); ++j) {
      hi[j] = std::max(hi[j], dens[j]);
      lo[j] = std::min(lo[j], dens[j]);
    }
  }

  ErgodicityReport rep;
  rep.bound = std::exp(p.lambda * p.kappa);
  rep.histories = states;
  for (std::size_t j = 0; j < hi.size(); ++j) {
    if (hi[j] == 0.0) continue;
    rep.ratio = std::max(rep.ratio, lo[j] > 0.0 ? hi[j] / lo[j]
                                                : std::numeric_limits<double>::infinity());
  }
  return rep;
}

}  // namespace macldp
