#ifndef MACLDP_KERNEL_HPP
#define MACLDP_KERNEL_HPP

#include <cstdint>
#include <vector>

#include "macldp/core.hpp"
#include "macldp/random.hpp"

namespace macldp {

/// Residual time until some channel frees: [1 - sum(gaps)]_+ (1 when kappa = 1).
double gamma(const HistoryWindow& h);

/// Busy channels `s` after the newest admission:
/// max{m : s + (sum of the m-1 newest gaps) <= 1} capped at kappa, 0 if empty.
int beta(const HistoryWindow& h, double s);

/// Integral of beta over [gamma, s] (beta is taken as 0 below gamma).
double beta_integral(const HistoryWindow& h, double s);

/// A constant-beta stretch of (gamma, inf): beta == busy on (lo, hi].
struct BetaPiece {
  double lo;
  double hi;
  int busy;
};

/// Pieces covering (gamma, inf) in increasing order; the last is (max(1, gamma), inf) with busy 0.
std::vector<BetaPiece> beta_pieces(const HistoryWindow& h);

/// Transition law of the next (attempts, gap) pair given the gap history.
/// The kernel never looks at past attempt counts, so the window holds gaps only.
struct KernelDensity {
  Protocol protocol = Protocol::Csma;
  Params params;
  HistoryWindow history;
};

/// Joint density of (A = k, sigma = s). Throws for k < 1.
double density(const KernelDensity& kd, std::int64_t k, double s);

/// Masses of {A = k, sigma in [lo, hi)} for k = 1..k_max, tilted by
/// exp(tilt_a * k + tilt_b * s) inside the integral (tilt_b < lambda). `hi`
/// may be +inf. Exact up to Gauss-Legendre error on smooth pieces.
std::vector<double> bin_masses(const KernelDensity& kd, double lo, double hi, int k_max,
                               double tilt_a = 0.0, double tilt_b = 0.0);

/// c(s) and w(s) of the kernel for one history, as linear pieces on (gamma, inf):
/// c(s) = c_lo + slope * (s - lo), w(s) = weight on (lo, hi].
struct KernelPieces {
  struct Piece {
    double lo;
    double hi;
    double c_lo;
    double slope;
    double weight;
  };
  Protocol protocol = Protocol::Csma;
  int kappa = 1;
  double gamma = 1.0;
  std::vector<Piece> pieces;
};

KernelPieces kernel_pieces(Protocol proto, int kappa, const HistoryWindow& h);

/// log of the attempt-summed kernel mass of sigma in [lo, hi), the sum over k
/// done in closed form:
///   log int_lo^hi  m * w(s) * exp(m * c(s) - rate * s) ds,   m = exp(log_mult),
/// where c(s) is gamma (CSMA) or gamma + B(s)/kappa (ALOHA) and w(s) is 1
/// (CSMA) or 1 - beta(s)/kappa (ALOHA). With log_mult = log(lambda) and
/// rate = lambda this is the untilted sigma-marginal; an attempt tilt e^{Dk} at
/// intensity lambda' corresponds to log_mult = D + log(lambda'), rate = lambda'.
double log_summed_mass(Protocol proto, int kappa, const HistoryWindow& h, double log_mult,
                       double rate, double lo, double hi);
double log_summed_mass(const KernelPieces& kp, double log_mult, double rate, double lo, double hi);

/// One draw from the kernel: CSMA by gamma + Exp(lambda); ALOHA by thinning
/// arrivals after gamma with acceptance probability 1 - beta/kappa.
StepRecord sample_step(const KernelDensity& kd, RandomSource& src);

/// First admission of an initially empty system: one attempt after Exp(lambda).
StepRecord sample_first_step(const Params& p, RandomSource& src);

/// n chain steps starting from the given gap history.
std::vector<StepRecord> run_chain(const Params& p, Protocol proto, std::int64_t n,
                                  HistoryWindow init, RandomSource& src);

/// n chain steps starting from an empty system at time 0. After the first
/// admission the window holds sentinels, because time 0 is not an admission.
std::vector<StepRecord> run_chain(const Params& p, Protocol proto, std::int64_t n,
                                  RandomSource& src);

/// Discretized gap history: each of the kappa-1 gaps falls in one of
/// round(1/h) bins over [0, 1) or in the class [1, inf). Gaps >= 1 are
/// interchangeable for every kernel quantity, so the class is exact.
class HistoryLattice {
 public:
  HistoryLattice(int kappa, double h);

  int kappa() const { return kappa_; }
  double h() const { return h_; }
  /// Number of bins for a single gap, the [1, inf) class included.
  int gap_bins() const { return base_; }
  std::int64_t states() const { return states_; }

  double bin_lo(int bin) const;
  double bin_hi(int bin) const;  // +inf for the last bin
  double representative(int bin) const;
  int bin_of(double gap) const;

  /// Bin of gap position `pos` (0 = oldest) in `state`.
  int bin_at(std::int64_t state, int pos) const;
  /// State reached by appending `new_bin` and dropping the oldest gap.
  std::int64_t shift(std::int64_t state, int new_bin) const;
  std::int64_t state_of(const HistoryWindow& h) const;
  HistoryWindow history(std::int64_t state) const;

 private:
  int kappa_;
  double h_;
  int base_;
  std::int64_t states_;
};

}  // namespace macldp

#endif  // MACLDP_KERNEL_HPP
