#ifndef MACLDP_LDP_HPP
#define MACLDP_LDP_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "macldp/core.hpp"
#include "macldp/kernel.hpp"

namespace macldp {

/// Kernel reweighted by exp(A k + B s). Requires B < lambda.
struct TiltedKernelSpec {
  double A = 0.0;
  double B = 0.0;
  Protocol protocol = Protocol::Csma;
  Params params;
};

/// The (A, B) tilt at intensity lambda equals the (D, 0) tilt at lambda - B.
struct TiltReduction {
  double D = 0.0;
  double lambda_shifted = 0.0;
};

/// D = A + log(lambda / (lambda - B)). Throws for B >= lambda.
TiltReduction tilt_reduce(const TiltedKernelSpec& spec);

/// Gap-history grid of the spectral computations. h = 0 picks 0.005 for
/// kappa <= 2 and 0.02 for kappa = 3; k_max = 0 picks the smallest k with
/// P(Poisson(2 lambda') > k) < 1e-12.
struct LdpGrid {
  double h = 0.0;
  int k_max = 0;
  double tolerance = 1e-12;  // relative, power iteration
  int max_iterations = 100000;
};

double default_ldp_h(int kappa);
int default_ldp_kmax(double lambda_shifted);

/// Binned kernel: for each history state, the masses of {A = k, sigma in bin}
/// for k = 1..k_max and the lattice bins (the last bin is [1, inf)).
/// Tilts are applied inside the bin integrals.
struct DiscretizedKernel {
  Protocol protocol = Protocol::Csma;
  Params params;
  HistoryLattice lattice{1, 1.0};
  int k_max = 1;
  double tilt_a = 0.0;
  double tilt_b = 0.0;
  std::vector<double> entries;  // [state][k-1][bin]

  double entry(std::int64_t state, int k, int bin) const;
  double row_sum(std::int64_t state) const;
  std::int64_t next_state(std::int64_t state, int bin) const { return lattice.shift(state, bin); }
};

DiscretizedKernel discretize(const Params& p, Protocol proto, double h, int k_max = 0,
                             double tilt_a = 0.0, double tilt_b = 0.0);

/// Location and value of a rate function. `infinite` flags points outside the
/// effective domain; `edge` flags a supremum that pressed against the search
/// box without a clear outward gradient.
struct RatePoint {
  double x = 0.0;
  double y = 0.0;
  double value = 0.0;
  Protocol protocol = Protocol::Csma;
  bool infinite = false;
  bool edge = false;
  double tilt_a = 0.0;  // maximizing tilt, J and I only
  double tilt_b = 0.0;
};

/// Lambda(A, B) = log spectral radius of the tilted binned transfer operator,
/// with the attempt sum done in closed form. Keeps the last eigenvector as a
/// warm start, so one evaluator should not be shared between threads.
class CgfEvaluator {
 public:
  CgfEvaluator(Protocol proto, const Params& p, LdpGrid grid = {});

  /// Through tilt_reduce: (D, 0) at intensity lambda - B.
  double operator()(double A, double B);
  /// Same operator assembled straight from (A, B) at intensity lambda.
  double direct(double A, double B);

  Protocol protocol() const { return proto_; }
  const Params& params() const { return params_; }
  const HistoryLattice& lattice() const { return lattice_; }
  int last_iterations() const { return last_iterations_; }

 private:
  double spectral(double log_mult, double rate);

  Protocol proto_;
  Params params_;
  LdpGrid grid_;
  HistoryLattice lattice_;
  std::vector<KernelPieces> pieces_;
  std::vector<double> log_entries_;
  std::vector<std::int64_t> targets_;
  std::vector<double> vec_;
  int last_iterations_ = 0;
};

/// Convenience wrapper around a fresh CgfEvaluator.
double lambda_cgf(const TiltedKernelSpec& spec, const LdpGrid& grid = {});

/// Legendre transforms and contracted rates on top of one CgfEvaluator.
/// Successive calls warm-start from the previous maximizing tilt.
class RateSolver {
 public:
  RateSolver(Protocol proto, const Params& p, LdpGrid grid = {});

  /// J(x, y) = sup_{A, B < lambda} [A x + B y - Lambda(A, B)].
  RatePoint J(double x, double y);
  /// CSMA: s J(a/s, 1/s); ALOHA: ((a+s)/2) J(2a/(a+s), 2/(a+s)).
  RatePoint I(double a, double s);
  /// inf over a >= s of I(a, s).
  RatePoint IS(double s);
  /// CSMA only: s sup_B [B/s - Lambda(0, B)], the dual form of IS.
  double IS_dual(double s);

  CgfEvaluator& cgf() { return cgf_; }

 private:
  CgfEvaluator cgf_;
  double warm_a_ = 0.0;
  double warm_u_;  // log(lambda - B)
};

RatePoint rate_J(double x, double y, Protocol proto, const Params& p, const LdpGrid& grid = {});
RatePoint rate_I(double a, double s, Protocol proto, const Params& p, const LdpGrid& grid = {});
RatePoint rate_IS(double s, Protocol proto, const Params& p, const LdpGrid& grid = {});

/// Poisson rate of the attempt count: lambda - a + a log(a / lambda).
RatePoint rate_IA(double a, const Params& p);

struct TailReport {
  std::string status;  // "ok", "violated" or "insufficient"
  std::int64_t runs = 0;
  std::int64_t occurrences = 0;
  double probability = 0.0;
  double mc_rate = 0.0;         // -(1/t) log P(S(t) <= s_target t)
  double predicted_rate = 0.0;  // inf of I^S over [0, s_target]
  bool passed = false;          // mc_rate >= 0.9 predicted_rate
};

/// Monte-Carlo check of the upper bound P(S(t) <= s t) <~ exp(-t inf I^S).
/// Run r uses stream r of `seed`; runs are spread over `threads` workers
/// (0 = hardware concurrency). Fewer than 10 occurrences gives "insufficient".
TailReport tail_bound_check(Protocol proto, const Params& p, double s_target, double t,
                            std::int64_t runs, std::uint64_t seed, unsigned threads = 0,
                            const LdpGrid& grid = {});

}  // namespace macldp

#endif  // MACLDP_LDP_HPP
