#include "macldp/throughput.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "macldp/numerics.hpp"

namespace macldp {

namespace {

// log Poi_lambda([0, m]) by forward recursion on log-terms.
double log_poisson_cdf(double lambda, int m) {
  if (m < 0) return numerics::kNegInf;
  if (lambda == 0.0) return 0.0;
  double log_term = -lambda;
  double acc = log_term;
  for (int n = 1; n <= m; ++n) {
    log_term += std::log(lambda / n);
    acc = numerics::log_add(acc, log_term);
  }
  return std::min(acc, 0.0);
}

}  // namespace

double poisson_cdf(double lambda, int m) {
  if (lambda < 0.0 || !std::isfinite(lambda)) throw InvalidArgument("lambda must be non-negative");
  return std::exp(log_poisson_cdf(lambda, m));
}

ThroughputResult s_csma(const Params& params) {
  const Params p = validate_params(params);
  const double v = p.lambda * std::exp(log_poisson_cdf(p.lambda, p.kappa - 1) -
                                       log_poisson_cdf(p.lambda, p.kappa));
  return {v, Protocol::Csma, p};
}

ThroughputResult s_aloha(const Params& params) {
  const Params p = validate_params(params);
  const double l = p.lambda;
  const int kappa = p.kappa;
  double term = 1.0;  // lambda^n / n!
  double sum = 0.0;
  for (int n = 0; n < kappa; ++n) {
    sum += term * static_cast<double>(kappa - n) / kappa;
    term *= l / (n + 1);
  }
  const double v = l * std::exp(-(kappa + 1.0) / kappa * l) * sum;
  return {v, Protocol::Aloha, p};
}

ThroughputResult throughput(const Params& p, Protocol proto) {
  return proto == Protocol::Csma ? s_csma(p) : s_aloha(p);
}

double s_aloha_form1(const Params& params) {
  const Params p = validate_params(params);
  const double l = p.lambda;
  return l * std::exp(-l / p.kappa) *
         (poisson_cdf(l, p.kappa - 1) - l / p.kappa * poisson_cdf(l, p.kappa - 2));
}

double s_aloha_form2(const Params& params) {
  const Params p = validate_params(params);
  const double l = p.lambda;
  double expect = 0.0;
  double log_pmf = -l;
  for (int n = 0; n < p.kappa; ++n) {
    if (n > 0) log_pmf += std::log(l / n);
    expect += std::exp(log_pmf) * (1.0 - static_cast<double>(n) / p.kappa);
  }
  return l * std::exp(-l / p.kappa) * expect;
}

double aloha_asymptotic(double x) {
  if (!(x >= 0.0)) throw InvalidArgument("x must be non-negative");
  return x * (1.0 - x) * std::exp(-x);
}

LambdaOptimum optimize_lambda_aloha(int kappa) {
  if (kappa < 1) throw InvalidArgument("kappa must be at least 1");
  auto f = [kappa](double l) { return s_aloha(Params{l, kappa}).value; };
  const double step = kappa / 200.0;
  const int points = 400;
  std::vector<double> vals(points);
  int best = 0;
  for (int i = 0; i < points; ++i) {
    vals[i] = f(step * (i + 1));
    if (vals[i] > vals[best]) best = i;
  }
  for (int i = 0; i < points; ++i) {
    if (std::abs(i - best) > 1 && vals[best] - vals[i] < 1e-9) {
      // A tie only counts when a dip separates the two candidates.
      const int lo = std::min(i, best), hi = std::max(i, best);
      const double dip = *std::min_element(vals.begin() + lo, vals.begin() + hi + 1);
      if (vals[best] - dip > 1e-9) {
        throw ConvergenceError(fmt::format("two separated maxima near lambda = {} and {}",
                                           step * (best + 1), step * (i + 1)));
      }
    }
  }
  // Grid point i sits at step*(i+1); bracket its two neighbours.
  const double lo = best == 0 ? 1e-12 : step * best;
  const double hi = step * std::min(best + 2, points);
  const auto opt = numerics::golden_section_maximize(f, lo, hi, 1e-9);
  return {opt.x, opt.value};
}

}  // namespace macldp
