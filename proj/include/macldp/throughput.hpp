#ifndef MACLDP_THROUGHPUT_HPP
#define MACLDP_THROUGHPUT_HPP

#include "macldp/core.hpp"

namespace macldp {

/// Long-run deliveries per unit time.
struct ThroughputResult {
  double value = 0.0;
  Protocol protocol = Protocol::Csma;
  Params params;
};

/// P(Poisson(lambda) <= m); 0 for m < 0.
double poisson_cdf(double lambda, int m);

/// lambda * Poi([0, kappa-1]) / Poi([0, kappa]).
ThroughputResult s_csma(const Params& p);

/// lambda e^{-(kappa+1) lambda / kappa} sum_{n<kappa} lambda^n/n! (kappa-n)/kappa.
ThroughputResult s_aloha(const Params& p);
ThroughputResult throughput(const Params& p, Protocol proto);

/// The two alternative closed forms of the ALOHA throughput, exposed so they
/// can be checked against s_aloha:
///   form 1: lambda e^{-lambda/kappa} (Poi([0,kappa-1]) - (lambda/kappa) Poi([0,kappa-2]))
///   form 2: lambda e^{-lambda/kappa} E[(1 - N/kappa)_+],  N ~ Poisson(lambda)
double s_aloha_form1(const Params& p);
double s_aloha_form2(const Params& p);

/// Large-kappa limit of s_aloha(x kappa, kappa) / kappa: x(1-x)e^{-x}.
double aloha_asymptotic(double x);

struct LambdaOptimum {
  double lambda_star = 0.0;
  double value = 0.0;
};

/// Argmax of lambda -> s_aloha over (0, 2 kappa]: grid of step kappa/200,
/// then golden section to 1e-6. Throws ConvergenceError if two separated grid
/// points tie for the maximum within 1e-9.
LambdaOptimum optimize_lambda_aloha(int kappa);

}  // namespace macldp

#endif  // MACLDP_THROUGHPUT_HPP
