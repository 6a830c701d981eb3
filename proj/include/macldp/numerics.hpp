#ifndef MACLDP_NUMERICS_HPP
#define MACLDP_NUMERICS_HPP

#include <functional>
#include <limits>
#include <span>

namespace macldp::numerics {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(exp(a) + exp(b)) without overflow; -inf is the neutral element.
double log_add(double a, double b);

/// log of the integral of exp(q*u) over u in [0, width]; width may be +inf
/// when q < 0.
double log_integral_exp_linear(double q, double width);

struct ScalarOptimum {
  double x;
  double value;
};

/// Golden-section search for the minimum of a unimodal function on [lo, hi],
/// stopping once the bracket is narrower than `tol`.
ScalarOptimum golden_section_minimize(const std::function<double(double)>& f, double lo,
                                      double hi, double tol, int max_iter = 200);

/// Golden-section search for the maximum (sign-flipped minimize).
ScalarOptimum golden_section_maximize(const std::function<double(double)>& f, double lo,
                                      double hi, double tol, int max_iter = 200);

}  // namespace macldp::numerics

#endif  // MACLDP_NUMERICS_HPP
