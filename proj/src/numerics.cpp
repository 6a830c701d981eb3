#include "macldp/numerics.hpp"

#include <cmath>

#include "macldp/core.hpp"

namespace macldp::numerics {

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

double log_integral_exp_linear(double q, double width) {
  if (!(width > 0.0)) return kNegInf;
  if (std::isinf(width)) {
    if (!(q < 0.0)) throw InvalidArgument("divergent exponential tail integral");
    return -std::log(-q);
  }
  const double x = q * width;
  if (x == 0.0) return std::log(width);
  if (x > 0.0) return x + std::log(-std::expm1(-x)) - std::log(q);
  return std::log(-std::expm1(x)) - std::log(-q);
}

ScalarOptimum golden_section_minimize(const std::function<double(double)>& f, double lo,
                                      double hi, double tol, int max_iter) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < max_iter && (b - a) > tol; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? ScalarOptimum{c, fc} : ScalarOptimum{d, fd};
}

ScalarOptimum golden_section_maximize(const std::function<double(double)>& f, double lo,
                                      double hi, double tol, int max_iter) {
  auto r = golden_section_minimize([&](double x) { return -f(x); }, lo, hi, tol, max_iter);
  return {r.x, -r.value};
}

}  // namespace macldp::numerics
