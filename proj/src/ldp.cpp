#include "macldp/ldp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include "macldp/event_sim.hpp"
#include "macldp/numerics.hpp"
#include "macldp/throughput.hpp"

namespace macldp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kBoxA = 50.0;
constexpr double kBoxULo = -30.0;
constexpr double kBoxUHi = 30.0;

Params spectral_params(const Params& params) {
  const Params p = validate_params(params);
  if (p.kappa > 3) throw InvalidArgument("spectral computations support kappa <= 3");
  return p;
}

}  // namespace

TiltReduction tilt_reduce(const TiltedKernelSpec& spec) {
  const Params p = validate_params(spec.params);
  if (!std::isfinite(spec.A) || !std::isfinite(spec.B)) throw InvalidArgument("tilt must be finite");
  if (!(spec.B < p.lambda)) throw InvalidArgument("tilt B must be below lambda");
  const double shifted = p.lambda - spec.B;
  return {spec.A + std::log(p.lambda / shifted), shifted};
}

double default_ldp_h(int kappa) { return kappa <= 2 ? 0.005 : 0.02; }

int default_ldp_kmax(double lambda_shifted) {
  int k = 1;
  while (boost::math::gamma_p(k + 1.0, 2.0 * lambda_shifted) >= 1e-12) ++k;
  return k;
}

double DiscretizedKernel::entry(std::int64_t state, int k, int bin) const {
  const int base = lattice.gap_bins();
  return entries[(state * k_max + (k - 1)) * base + bin];
}

double DiscretizedKernel::row_sum(std::int64_t state) const {
  const std::size_t width = static_cast<std::size_t>(k_max) * lattice.gap_bins();
  double s = 0.0;
  for (std::size_t i = 0; i < width; ++i) s += entries[state * width + i];
  return s;
}

DiscretizedKernel discretize(const Params& params, Protocol proto, double h, int k_max,
                             double tilt_a, double tilt_b) {
  const Params p = spectral_params(params);
  if (!(tilt_b < p.lambda)) throw InvalidArgument("tilt B must be below lambda");
  DiscretizedKernel dk;
  dk.protocol = proto;
  dk.params = p;
  dk.lattice = HistoryLattice(p.kappa, h);
  dk.k_max = k_max > 0 ? k_max : default_ldp_kmax(p.lambda - tilt_b);
  dk.tilt_a = tilt_a;
  dk.tilt_b = tilt_b;
  const int base = dk.lattice.gap_bins();
  const auto states = dk.lattice.states();
  dk.entries.assign(static_cast<std::size_t>(states) * dk.k_max * base, 0.0);
  for (std::int64_t x = 0; x < states; ++x) {
    const KernelDensity kd{proto, p, dk.lattice.history(x)};
    for (int b = 0; b < base; ++b) {
      const auto m = bin_masses(kd, dk.lattice.bin_lo(b), dk.lattice.bin_hi(b), dk.k_max, tilt_a,
                                tilt_b);
      for (int k = 1; k <= dk.k_max; ++k) {
        dk.entries[(x * dk.k_max + (k - 1)) * base + b] = m[k - 1];
      }
    }
  }
  return dk;
}

CgfEvaluator::CgfEvaluator(Protocol proto, const Params& p, LdpGrid grid)
    : proto_(proto),
      params_(spectral_params(p)),
      grid_(grid),
      lattice_(params_.kappa, grid.h > 0.0 ? grid.h : default_ldp_h(params_.kappa)) {
  const auto states = lattice_.states();
  pieces_.reserve(states);
  for (std::int64_t x = 0; x < states; ++x) {
    pieces_.push_back(kernel_pieces(proto_, params_.kappa, lattice_.history(x)));
  }
  log_entries_.resize(static_cast<std::size_t>(states) * lattice_.gap_bins());
  targets_.resize(log_entries_.size());
  for (std::int64_t x = 0; x < states; ++x) {
    for (int b = 0; b < lattice_.gap_bins(); ++b) targets_[x * lattice_.gap_bins() + b] = lattice_.shift(x, b);
  }
  vec_.assign(states, 1.0);
}

double CgfEvaluator::operator()(double A, double B) {
  const auto r = tilt_reduce(TiltedKernelSpec{A, B, proto_, params_});
  return spectral(r.D + std::log(r.lambda_shifted), r.lambda_shifted);
}

double CgfEvaluator::direct(double A, double B) {
  if (!(B < params_.lambda)) throw InvalidArgument("tilt B must be below lambda");
  return spectral(A + std::log(params_.lambda), params_.lambda - B);
}

double CgfEvaluator::spectral(double log_mult, double rate) {
  if (!(rate > 0.0)) throw InvalidArgument("shifted intensity must be positive");
  const auto states = lattice_.states();
  const int base = lattice_.gap_bins();
  const double h = lattice_.h();
  const double mult = std::exp(log_mult);

  std::fill(log_entries_.begin(), log_entries_.end(), numerics::kNegInf);
  for (std::int64_t x = 0; x < states; ++x) {
    double* row = &log_entries_[x * base];
    for (const auto& piece : pieces_[x].pieces) {
      if (piece.weight <= 0.0) continue;
      // On a piece the log-integrand is linear in s with slope q, so every
      // whole bin costs one multiply-add; only clipped bins need the general form.
      const double q = mult * piece.slope - rate;
      const double full = std::log(piece.weight) + numerics::log_integral_exp_linear(q, h);
      const double at_lo = log_mult + mult * piece.c_lo - rate * piece.lo;
      const int first = lattice_.bin_of(piece.lo);
      const int last = std::isinf(piece.hi) ? base - 1 : lattice_.bin_of(piece.hi);
      for (int b = first; b <= last; ++b) {
        const double lo = std::max(lattice_.bin_lo(b), piece.lo);
        const double hi = std::min(lattice_.bin_hi(b), piece.hi);
        if (!(hi > lo)) continue;
        const double at = at_lo + q * (lo - piece.lo);
        const bool whole = b < base - 1 && lo == lattice_.bin_lo(b) && hi == lattice_.bin_hi(b);
        const double v = whole ? at + full
                               : at + std::log(piece.weight) +
                                     numerics::log_integral_exp_linear(q, hi - lo);
        row[b] = numerics::log_add(row[b], v);
      }
    }
  }
  double top = numerics::kNegInf;
  for (double v : log_entries_) top = std::max(top, v);
  if (!std::isfinite(top)) throw ConvergenceError("tilted operator is not finite");
  for (auto& v : log_entries_) v = std::exp(v - top);
  const auto& m = log_entries_;

  for (auto& v : vec_) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      std::fill(vec_.begin(), vec_.end(), 1.0);
      break;
    }
  }
  // Iterates v <- M v + shift v with shift = the previous radius estimate: this
  // damps eigenvalues near -rho (gap sequences that alternate short and long)
  // without moving the Collatz-Wielandt bounds, which use M v / v alone.
  std::vector<double> next(states);
  double lo = 0.0, hi = 0.0, shift = 0.0;
  for (int it = 1; it <= grid_.max_iterations; ++it) {
    lo = kInf;
    hi = 0.0;
    double norm = 0.0;
    for (std::int64_t x = 0; x < states; ++x) {
      double acc = 0.0;
      const std::int64_t* to = &targets_[x * base];
      for (int b = 0; b < base; ++b) acc += m[x * base + b] * vec_[to[b]];
      const double ratio = acc / vec_[x];
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
      next[x] = acc + shift * vec_[x];
      norm = std::max(norm, next[x]);
    }
    if (!(norm > 0.0) || !std::isfinite(norm)) throw ConvergenceError("tilted operator vanished");
    for (std::int64_t x = 0; x < states; ++x) vec_[x] = next[x] / norm;
    if (hi - lo <= grid_.tolerance * hi) {
      last_iterations_ = it;
      return std::log(0.5 * (lo + hi)) + top;
    }
    shift = 0.5 * (lo + hi);
  }
  last_iterations_ = grid_.max_iterations;
  throw ConvergenceError(fmt::format(
      "power iteration did not converge in {} iterations (relative bracket {:.3e})",
      grid_.max_iterations, (hi - lo) / hi));
}

double lambda_cgf(const TiltedKernelSpec& spec, const LdpGrid& grid) {
  CgfEvaluator cgf(spec.protocol, spec.params, grid);
  return cgf(spec.A, spec.B);
}

RateSolver::RateSolver(Protocol proto, const Params& p, LdpGrid grid)
    : cgf_(proto, p, grid), warm_u_(std::log(cgf_.params().lambda)) {}

RatePoint RateSolver::J(double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y) || !(y > 0.0)) {
    throw InvalidArgument("J needs finite x and y > 0");
  }
  const double lambda = cgf_.params().lambda;
  RatePoint out;
  out.x = x;
  out.y = y;
  out.protocol = cgf_.protocol();

  // Lambda, or NaN where the tilted operator cannot be evaluated.
  auto cgf = [&](double A, double B) {
    try {
      return cgf_(A, B);
    } catch (const ConvergenceError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  auto objective = [&](double A, double u) {
    const double v = A * x + (lambda - std::exp(u)) * y - cgf(A, lambda - std::exp(u));
    return std::isnan(v) ? -kInf : v;
  };

  // Start from the better of the previous maximizer and the origin (value 0).
  double A = 0.0, u = std::log(lambda);
  double f = objective(A, u);
  {
    const double wa = std::clamp(warm_a_, -kBoxA, kBoxA);
    const double wu = std::clamp(warm_u_, kBoxULo, kBoxUHi);
    const double wf = objective(wa, wu);
    if (wf > f) {
      A = wa;
      u = wu;
      f = wf;
    }
  }
  const double step = 1e-4;
  bool failed = false;

  for (int iter = 0; iter < 200; ++iter) {
    // Derivatives of Lambda in (A, B) by central differences; the B step
    // scales with lambda - B so the shifted intensity stays positive.
    const double shifted = std::exp(u);
    const double B = lambda - shifted;
    const double ha = step, hb = step * shifted;
    const double c = cgf(A, B);
    const double a_p = cgf(A + ha, B), a_m = cgf(A - ha, B);
    const double b_p = cgf(A, B + hb), b_m = cgf(A, B - hb);
    const double pp = cgf(A + ha, B + hb), pm = cgf(A + ha, B - hb);
    const double mp = cgf(A - ha, B + hb), mm = cgf(A - ha, B - hb);
    const double ga = x - (a_p - a_m) / (2 * ha);
    const double gb = y - (b_p - b_m) / (2 * hb);
    double haa = (a_p - 2 * c + a_m) / (ha * ha);
    double hbb = (b_p - 2 * c + b_m) / (hb * hb);
    const double hab = (pp - pm - mp + mm) / (4 * ha * hb);
    if (!std::isfinite(ga + gb + haa + hbb + hab)) {
      failed = true;
      break;
    }

    // Newton direction for the concave objective; ridge if curvature is lost.
    double ridge = 0.0;
    double det = haa * hbb - hab * hab;
    while (!(haa > 0.0 && hbb > 0.0 && det > 1e-14 * haa * hbb)) {
      ridge = ridge == 0.0 ? 1e-8 * (std::abs(haa) + std::abs(hbb) + 1.0) : ridge * 10.0;
      haa += ridge;
      hbb += ridge;
      det = haa * hbb - hab * hab;
    }
    double da = (hbb * ga - hab * gb) / det;
    double db = (haa * gb - hab * ga) / det;
    const double decrement = ga * da + gb * db;
    if (decrement < 1e-13) break;

    // Cap the step at |dA| <= 5 and a factor e^3 in the shifted intensity.
    double scale = std::min(1.0, 5.0 / std::max(std::abs(da), 1e-300));
    if (db > 0.0) scale = std::min(scale, (1.0 - std::exp(-3.0)) * shifted / db);
    if (db < 0.0) scale = std::min(scale, (std::exp(3.0) - 1.0) * shifted / -db);
    da *= scale;
    db *= scale;

    bool moved = false;
    double t = 1.0;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      const double na = std::clamp(A + t * da, -kBoxA, kBoxA);
      const double nu = std::clamp(std::log(shifted - t * db), kBoxULo, kBoxUHi);
      const double nf = objective(na, nu);
      if (nf >= f - 1e-15 * std::max(1.0, std::abs(f))) {
        moved = na != A || nu != u;
        A = na;
        u = nu;
        f = std::max(f, nf);
        break;
      }
    }
    if (!moved) break;
  }

  out.tilt_a = A;
  out.tilt_b = lambda - std::exp(u);
  // Far out in the box the supremum is either unbounded (gradient still
  // pointing outward) or sits on the edge of the effective domain.
  const double u_far = std::log(lambda) + 12.0;
  const bool far = std::abs(A) > kBoxA - 5.0 || u > u_far || u < kBoxULo + 5.0;
  if (far || failed) {
    const double sh = std::exp(u);
    const double Bc = lambda - sh;
    const double gA = x - (cgf(A + step, Bc) - cgf(A - step, Bc)) / (2 * step);
    const double gB = y - (cgf(A, Bc + step * sh) - cgf(A, Bc - step * sh)) / (2 * step * sh);
    const double gU = -gB * sh;
    const bool outward = (A < 0.0 && gA < -1e-6 && std::abs(A) > kBoxA - 5.0) ||
                         (A > 0.0 && gA > 1e-6 && std::abs(A) > kBoxA - 5.0) ||
                         (u > u_far && gU > 1e-6) || (u < kBoxULo + 5.0 && gU < -1e-6);
    if (outward) {
      out.infinite = true;
      out.value = kInf;
      return out;
    }
    out.edge = true;
  }
  out.value = std::max(0.0, f);
  if (!out.edge) {
    warm_a_ = A;
    warm_u_ = u;
  }
  return out;
}

RatePoint RateSolver::I(double a, double s) {
  if (!(a > 0.0) || !(s > 0.0)) throw InvalidArgument("I needs a > 0 and s > 0");
  RatePoint j;
  double scale;
  if (cgf_.protocol() == Protocol::Csma) {
    scale = s;
    j = J(a / s, 1.0 / s);
  } else {
    scale = 0.5 * (a + s);
    j = J(2.0 * a / (a + s), 2.0 / (a + s));
  }
  j.x = a;
  j.y = s;
  j.value = j.infinite ? kInf : scale * j.value;
  return j;
}

RatePoint RateSolver::IS(double s) {
  if (!(s > 0.0)) throw InvalidArgument("I^S needs s > 0");
  const double lambda = cgf_.params().lambda;
  const bool csma = cgf_.protocol() == Protocol::Csma;
  // Search over the attempts-per-step ratio x = x(a): a/s (CSMA) or 2a/(a+s) (ALOHA).
  const double x_lo = 1.0 + 1e-3;
  const double x_hi = csma ? 2.0 + 3.0 * lambda : 1.98;
  auto a_of = [&](double xx) { return csma ? xx * s : xx * s / (2.0 - xx); };
  auto value = [&](double xx) {
    const auto r = I(a_of(xx), s);
    return r.infinite ? kInf : r.value;
  };

  // I(., s) is convex in a, hence unimodal in x. Bracket the minimum by
  // stepping outward from the stationary attempt mean, then golden section.
  const double h = 1e-4;
  double x0 = (cgf_(h, 0.0) - cgf_(-h, 0.0)) / (2 * h);
  x0 = std::clamp(x0, x_lo, x_hi);
  double f0 = value(x0);
  double d = 0.05;
  double x1 = std::min(x0 + d, x_hi), f1 = value(x1);
  if (f1 > f0) {
    d = -d;
    x1 = std::max(x0 + d, x_lo);
    f1 = value(x1);
  }
  double x_prev = x0;
  while (f1 <= f0 && x1 > x_lo && x1 < x_hi) {
    x_prev = x0;
    x0 = x1;
    f0 = f1;
    d *= 2.0;
    x1 = std::clamp(x0 + d, x_lo, x_hi);
    f1 = value(x1);
  }
  const double lo = std::min(x_prev, x1);
  const double hi = std::max(x_prev, x1);
  auto opt = numerics::golden_section_minimize(value, lo, hi, 1e-5);
  if (f0 < opt.value) opt = {x0, f0};

  RatePoint out = I(a_of(opt.x), s);
  out.x = s;
  out.y = 0.0;
  return out;
}

double RateSolver::IS_dual(double s) {
  if (cgf_.protocol() != Protocol::Csma) throw InvalidArgument("dual form is CSMA only");
  if (!(s > 0.0)) throw InvalidArgument("I^S needs s > 0");
  const double lambda = cgf_.params().lambda;
  auto f = [&](double u) {
    const double B = lambda - std::exp(u);
    return B / s - cgf_(0.0, B);
  };
  const auto opt = numerics::golden_section_maximize(f, -20.0, 10.0, 1e-10);
  return std::max(0.0, s * opt.value);
}

RatePoint rate_J(double x, double y, Protocol proto, const Params& p, const LdpGrid& grid) {
  RateSolver solver(proto, p, grid);
  return solver.J(x, y);
}

RatePoint rate_I(double a, double s, Protocol proto, const Params& p, const LdpGrid& grid) {
  RateSolver solver(proto, p, grid);
  return solver.I(a, s);
}

RatePoint rate_IS(double s, Protocol proto, const Params& p, const LdpGrid& grid) {
  RateSolver solver(proto, p, grid);
  return solver.IS(s);
}

RatePoint rate_IA(double a, const Params& params) {
  const Params p = validate_params(params);
  if (!(a > 0.0)) throw InvalidArgument("a must be positive");
  RatePoint out;
  out.x = a;
  out.value = p.lambda - a + a * std::log(a / p.lambda);
  return out;
}

TailReport tail_bound_check(Protocol proto, const Params& params, double s_target, double t,
                            std::int64_t runs, std::uint64_t seed, unsigned threads,
                            const LdpGrid& grid) {
  const Params p = validate_params(params);
  if (!(s_target > 0.0) || !(t > 0.0) || runs < 1) {
    throw InvalidArgument("tail check needs s_target > 0, t > 0 and runs >= 1");
  }
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());

  std::atomic<std::int64_t> cursor{0};
  std::atomic<std::int64_t> hits{0};
  auto worker = [&] {
    std::int64_t local = 0;
    for (;;) {
      const std::int64_t r = cursor.fetch_add(1);
      if (r >= runs) break;
      const Trace tr = simulate(p, proto,
                                ArrivalStream::poisson(p.lambda, RandomSource(seed, static_cast<std::uint64_t>(r))), t);
      if (static_cast<double>(tr.counts.successes_total) <= s_target * t) ++local;
    }
    hits += local;
  };
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  TailReport rep;
  rep.runs = runs;
  rep.occurrences = hits.load();
  rep.probability = static_cast<double>(rep.occurrences) / static_cast<double>(runs);

  // I^S is convex and vanishes at the throughput, so below it the infimum
  // over [0, s_target] sits at s_target.
  const double s_star = throughput(p, proto).value;
  rep.predicted_rate = s_target >= s_star ? 0.0 : rate_IS(s_target, proto, p, grid).value;

  if (rep.occurrences < 10) {
    rep.status = "insufficient";
    rep.mc_rate = rep.occurrences == 0 ? kInf : -std::log(rep.probability) / t;
    rep.passed = false;
    return rep;
  }
  rep.mc_rate = -std::log(rep.probability) / t;
  rep.passed = rep.mc_rate >= 0.9 * rep.predicted_rate;
  rep.status = rep.passed ? "ok" : "violated";
  return rep;
}

}  // namespace macldp
