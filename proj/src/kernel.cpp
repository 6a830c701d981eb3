#include "macldp/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>
#include <fmt/format.h>

#include "macldp/numerics.hpp"

namespace macldp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// int_a^b exp(-rate * s) ds, b possibly infinite.
double exp_integral(double rate, double a, double b) {
  if (!(b > a)) return 0.0;
  if (std::isinf(b)) {
    if (!(rate > 0.0)) throw InvalidArgument("tilt must stay below lambda");
    return std::exp(-rate * a) / rate;
  }
  if (rate == 0.0) return b - a;
  return std::exp(-rate * a) * -std::expm1(-rate * (b - a)) / rate;
}

}  // namespace

double gamma(const HistoryWindow& h) { return std::max(0.0, 1.0 - h.sum()); }

int beta(const HistoryWindow& h, double s) {
  const auto gaps = h.gaps();
  const int kappa = h.kappa();
  double reach = s;  // s plus the m-1 newest gaps
  int busy = 0;
  for (int m = 1; m <= kappa; ++m) {
    if (reach > 1.0) break;
    busy = m;
    if (m <= kappa - 1) reach += gaps[kappa - 1 - m];
  }
  return busy;
}

std::vector<BetaPiece> beta_pieces(const HistoryWindow& h) {
  const auto gaps = h.gaps();
  const int kappa = h.kappa();
  const double g = gamma(h);

  // threshold[m-1] = 1 - (sum of the m-1 newest gaps): beta(r) >= m iff r <= threshold.
  std::vector<double> threshold(kappa + 1, 1.0);
  double partial = 0.0;
  for (int m = 2; m <= kappa; ++m) {
    partial += gaps[kappa - m];
    threshold[m - 1] = 1.0 - partial;
  }
  threshold[kappa] = -kInf;

  std::vector<BetaPiece> pieces;
  for (int m = kappa - 1; m >= 1; --m) {
    const double hi = threshold[m - 1];
    const double lo = std::max(g, threshold[m]);
    if (hi > lo) pieces.push_back(BetaPiece{lo, hi, m});
  }
  pieces.push_back(BetaPiece{std::max(1.0, g), kInf, 0});
  return pieces;
}

double beta_integral(const HistoryWindow& h, double s) {
  double total = 0.0;
  for (const auto& piece : beta_pieces(h)) {
    if (piece.busy == 0) continue;
    total += piece.busy * std::max(0.0, std::min(s, piece.hi) - piece.lo);
  }
  return total;
}

double density(const KernelDensity& kd, std::int64_t k, double s) {
  if (k < 1) throw InvalidArgument("attempt count must be at least 1");
  const double lambda = kd.params.lambda;
  const int kappa = kd.params.kappa;
  const double g = gamma(kd.history);
  if (!(s > 0.0) || s < g) return 0.0;

  double weight = 1.0;
  double rate_scale = g;  // c(s)
  if (kd.protocol == Protocol::Aloha) {
    weight = 1.0 - static_cast<double>(beta(kd.history, s)) / kappa;
    rate_scale = g + beta_integral(kd.history, s) / kappa;
  }
  if (weight <= 0.0) return 0.0;
  if (rate_scale == 0.0) {
    return k == 1 ? weight * lambda * std::exp(-lambda * s) : 0.0;
  }
  const double km1 = static_cast<double>(k - 1);
  const double log_d = km1 * std::log(rate_scale) - std::lgamma(km1 + 1.0) + std::log(weight) +
                       static_cast<double>(k) * std::log(lambda) - lambda * s;
  return std::exp(log_d);
}

std::vector<double> bin_masses(const KernelDensity& kd, double lo, double hi, int k_max,
                               double tilt_a, double tilt_b) {
  if (k_max < 1) throw InvalidArgument("k_max must be at least 1");
  const double lambda = kd.params.lambda;
  const int kappa = kd.params.kappa;
  const double rate = lambda - tilt_b;
  const double g = gamma(kd.history);
  const double ea = std::exp(tilt_a);
  std::vector<double> out(k_max, 0.0);

  // Pieces on which c(s) is constant integrate in closed form.
  auto add_constant_piece = [&](double a, double b, double c, double weight) {
    const double base = weight * exp_integral(rate, a, b);
    if (base == 0.0) return;
    double term = base * lambda * ea;
    for (int k = 1; k <= k_max; ++k) {
      out[k - 1] += term;
      term *= lambda * c * ea / k;
    }
  };

  const double from = std::max(lo, g);
  if (!(hi > from)) return out;

  if (kd.protocol == Protocol::Csma) {
    add_constant_piece(from, hi, g, 1.0);
    return out;
  }

  using Quad = boost::math::quadrature::gauss<double, 20>;
  for (const auto& piece : beta_pieces(kd.history)) {
    const double a = std::max(from, piece.lo);
    const double b = std::min(hi, piece.hi);
    if (!(b > a)) continue;
    const double weight = 1.0 - static_cast<double>(piece.busy) / kappa;
    const double c_at_lo = g + beta_integral(kd.history, piece.lo) / kappa;
    if (piece.busy == 0) {
      add_constant_piece(a, b, c_at_lo, 1.0);
      continue;
    }
    const double slope = static_cast<double>(piece.busy) / kappa;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    const auto& abscissa = Quad::abscissa();
    const auto& weights = Quad::weights();
    auto add_node = [&](double s, double w) {
      const double c = c_at_lo + slope * (s - piece.lo);
      double term = w * half * weight * lambda * ea * std::exp(-rate * s);
      for (int k = 1; k <= k_max; ++k) {
        out[k - 1] += term;
        term *= lambda * c * ea / k;
      }
    };
    for (std::size_t i = 0; i < abscissa.size(); ++i) {
      if (abscissa[i] == 0.0) {
        add_node(mid, weights[i]);
      } else {
        add_node(mid - half * abscissa[i], weights[i]);
        add_node(mid + half * abscissa[i], weights[i]);
      }
    }
  }
  return out;
}

KernelPieces kernel_pieces(Protocol proto, int kappa, const HistoryWindow& h) {
  KernelPieces kp;
  kp.protocol = proto;
  kp.kappa = kappa;
  kp.gamma = gamma(h);
  if (proto == Protocol::Csma) {
    kp.pieces.push_back({kp.gamma, kInf, kp.gamma, 0.0, 1.0});
    return kp;
  }
  double c = kp.gamma;
  for (const auto& piece : beta_pieces(h)) {
    const double slope = static_cast<double>(piece.busy) / kappa;
    kp.pieces.push_back({piece.lo, piece.hi, c, slope, 1.0 - slope});
    if (std::isfinite(piece.hi)) c += slope * (piece.hi - piece.lo);
  }
  return kp;
}

double log_summed_mass(const KernelPieces& kp, double log_mult, double rate, double lo,
                       double hi) {
  const double mult = std::exp(log_mult);
  double total = numerics::kNegInf;
  for (const auto& piece : kp.pieces) {
    const double a = std::max(lo, piece.lo);
    const double b = std::min(hi, piece.hi);
    if (!(b > a) || piece.weight <= 0.0) continue;
    // log int_a^b mult*w*exp(mult*c(s) - rate*s) ds with c linear on the piece.
    const double c_a = piece.c_lo + piece.slope * (a - piece.lo);
    const double log_piece = log_mult + std::log(piece.weight) + mult * c_a - rate * a +
                             numerics::log_integral_exp_linear(mult * piece.slope - rate, b - a);
    total = numerics::log_add(total, log_piece);
  }
  return total;
}

double log_summed_mass(Protocol proto, int kappa, const HistoryWindow& h, double log_mult,
                       double rate, double lo, double hi) {
  return log_summed_mass(kernel_pieces(proto, kappa, h), log_mult, rate, lo, hi);
}

StepRecord sample_step(const KernelDensity& kd, RandomSource& src) {
  const double lambda = kd.params.lambda;
  const double g = gamma(kd.history);
  StepRecord rec;
  rec.attempts = 1 + src.poisson(lambda * g);
  if (kd.protocol == Protocol::Csma) {
    rec.gap = g + src.exponential(lambda);
    return rec;
  }
  const int kappa = kd.params.kappa;
  double r = g;
  for (;;) {
    r += src.exponential(lambda);
    const int busy = beta(kd.history, r);
    if (busy == 0 || src.uniform() * kappa >= busy) break;
    ++rec.attempts;
  }
  rec.gap = r;
  return rec;
}

StepRecord sample_first_step(const Params& p, RandomSource& src) {
  return StepRecord{1, src.exponential(p.lambda)};
}

std::vector<StepRecord> run_chain(const Params& params, Protocol proto, std::int64_t n,
                                  HistoryWindow init, RandomSource& src) {
  const Params p = validate_params(params);
  if (n < 1) throw InvalidArgument("chain length must be at least 1");
  if (init.kappa() != p.kappa) throw InvalidArgument("history window does not match kappa");
  KernelDensity kd{proto, p, std::move(init)};
  std::vector<StepRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    out.push_back(sample_step(kd, src));
    kd.history.push(out.back().gap);
  }
  return out;
}

std::vector<StepRecord> run_chain(const Params& params, Protocol proto, std::int64_t n,
                                  RandomSource& src) {
  const Params p = validate_params(params);
  if (n < 1) throw InvalidArgument("chain length must be at least 1");
  std::vector<StepRecord> out;
  out.reserve(static_cast<std::size_t>(n));
  out.push_back(sample_first_step(p, src));
  if (n > 1) {
    auto rest = run_chain(p, proto, n - 1, HistoryWindow::sentinel(p.kappa), src);
    out.insert(out.end(), rest.begin(), rest.end());
  }
  return out;
}

HistoryLattice::HistoryLattice(int kappa, double h) : kappa_(kappa), h_(h) {
  if (kappa < 1) throw InvalidArgument("kappa must be at least 1");
  if (!(h > 0.0) || h > 1.0) throw InvalidArgument("grid width must lie in (0, 1]");
  const double bins = std::round(1.0 / h);
  if (std::abs(bins * h - 1.0) > 1e-9) {
    throw InvalidArgument(fmt::format("grid width {} does not divide 1", h));
  }
  base_ = static_cast<int>(bins) + 1;
  states_ = 1;
  for (int i = 0; i < kappa - 1; ++i) states_ *= base_;
}

double HistoryLattice::bin_lo(int bin) const { return bin * h_; }

double HistoryLattice::bin_hi(int bin) const {
  return bin == base_ - 1 ? kInf : (bin + 1 == base_ - 1 ? 1.0 : (bin + 1) * h_);
}

double HistoryLattice::representative(int bin) const {
  return bin == base_ - 1 ? kSentinelGap : (bin + 0.5) * h_;
}

int HistoryLattice::bin_of(double gap) const {
  if (gap >= 1.0) return base_ - 1;
  return std::clamp(static_cast<int>(gap / h_), 0, base_ - 2);
}

int HistoryLattice::bin_at(std::int64_t state, int pos) const {
  std::int64_t div = 1;
  for (int i = pos + 1; i < kappa_ - 1; ++i) div *= base_;
  return static_cast<int>((state / div) % base_);
}

std::int64_t HistoryLattice::shift(std::int64_t state, int new_bin) const {
  if (kappa_ == 1) return 0;
  return (state % (states_ / base_)) * base_ + new_bin;
}

std::int64_t HistoryLattice::state_of(const HistoryWindow& h) const {
  std::int64_t state = 0;
  for (double g : h.gaps()) state = state * base_ + bin_of(g);
  return state;
}

HistoryWindow HistoryLattice::history(std::int64_t state) const {
  std::vector<double> gaps(kappa_ - 1);
  for (int pos = 0; pos < kappa_ - 1; ++pos) gaps[pos] = representative(bin_at(state, pos));
  return HistoryWindow(kappa_, std::move(gaps));
}

}  // namespace macldp
