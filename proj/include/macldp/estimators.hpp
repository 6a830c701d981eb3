#ifndef MACLDP_ESTIMATORS_HPP
#define MACLDP_ESTIMATORS_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "macldp/core.hpp"

namespace macldp {

/// Counting processes at time t recovered from chain steps by inverting the
/// partial sums of the gaps. `counts.attempts_total` is the lower end of the
/// attempts bracket; the upper end needs the step that straddles t.
struct ReconstructedCounts {
  Counts counts;
  std::int64_t attempts_lower = 0;
  std::optional<std::int64_t> attempts_upper;
};

/// Throws InvalidArgument when the gaps do not reach t.
ReconstructedCounts reconstruct_counts(std::span<const StepRecord> records, Protocol proto,
                                       double t);

/// Plug-in throughput: n / sum(gap) (CSMA), (2n - sum(attempts)) / sum(gap) (ALOHA).
double lln_throughput(std::span<const StepRecord> records, Protocol proto);

struct PiMeans {
  double mean_attempts = 0.0;
  double mean_gap = 0.0;
};

PiMeans pi_means(std::span<const StepRecord> records);

/// Binning of single steps: gap bins of width h over [0, s_max) plus one
/// overflow bin, attempts 1..k_max with k_max absorbing larger counts.
struct StringGrid {
  double h = 0.01;
  double s_max = 21.0;
  int k_max = 10;

  int gap_bins() const;  // overflow bin included
  int cells() const { return gap_bins() * k_max; }
};

/// h = 0.01, s_max = 1 + 20/lambda, k_max = smallest k with P(Poisson(2 lambda) > k) < 1e-10.
StringGrid default_string_grid(const Params& p);

/// Normalized histogram of consecutive kappa-strings of binned steps
/// (non-periodic windows, n - kappa + 1 of them).
struct EmpiricalStringMeasure {
  int kappa = 1;
  StringGrid grid;
  std::int64_t n = 0;        // steps
  std::int64_t windows = 0;  // n - kappa + 1
  std::map<std::vector<int>, double> weights;
  std::int64_t gap_overflow = 0;       // steps with gap >= s_max
  std::int64_t attempts_overflow = 0;  // steps with attempts > k_max

  double total_weight() const;
  /// Total variation between the projections on the first and the last
  /// kappa-1 coordinates; 0 for kappa = 1.
  double marginal_defect() const;
  /// Sparse CSV `cells,weight`, cells joined by ':'.
  void write_csv(std::ostream& os) const;
};

/// Cell index of one step: (attempt bin) * gap_bins + gap bin.
int step_cell(const StringGrid& g, const StepRecord& r);

EmpiricalStringMeasure build_string_measure(std::span<const StepRecord> records, int kappa,
                                            const StringGrid& grid);

/// Kolmogorov-Smirnov distance of a sample against a continuous CDF.
double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf);
/// Two-sample Kolmogorov-Smirnov distance.
double ks_distance(std::vector<double> a, std::vector<double> b);
/// Total variation between attempt pmfs on {1, ..., k_max}, larger counts lumped
/// into one extra class.
double tv_attempts(std::span<const StepRecord> a, std::span<const StepRecord> b, int k_max = 20);

std::vector<double> gaps_of(std::span<const StepRecord> records);

struct ErgodicityReport {
  double ratio = 0.0;  // max over (k, s) of max/min over start histories
  double bound = 0.0;  // e^{lambda kappa}
  std::int64_t histories = 0;
};

/// Grid spot check of the uniform ergodicity bound. Start histories are the
/// lattice states of width h; each is pushed kappa steps through the binned
/// gap transition, then the next-step density is evaluated at (k, s) for
/// k = 1..k_max and s at the gap-bin midpoints below s_max. Points where every
/// start gives zero density are skipped. Requires kappa <= 3.
ErgodicityReport ergodicity_ratio_diagnostic(const Params& p, Protocol proto, double h = 0.01,
                                             double s_max = 3.0, int k_max = 8);

}  // namespace macldp

#endif  // MACLDP_ESTIMATORS_HPP
