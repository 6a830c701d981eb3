#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "macldp/estimators.hpp"
#include "macldp/kernel.hpp"
#include "macldp/ldp.hpp"
#include "macldp/throughput.hpp"
#include "oracle.hpp"

using namespace macldp;

namespace {

// E[e^{Ak + B sigma}] for a history-free kernel, by adaptive quadrature of the density.
double one_state_cgf(Protocol proto, const Params& p, double A, double B) {
  const KernelDensity kd{proto, p, HistoryWindow(1, {})};
  double total = 0.0;
  for (int k = 1; k <= 80; ++k) {
    total += std::exp(A * k) *
             oracle::integrate(
                 [&](double s) {
                   const double d = density(kd, k, s);
                   return d == 0.0 ? 0.0 : std::exp(B * s) * d;
                 },
                 1.0,
                               INFINITY);
  }
  return std::log(total);
}

PiMeans stationary_means(Protocol proto, const Params& p) {
  RandomSource src(900, static_cast<std::uint64_t>(p.kappa));
  return pi_means(run_chain(p, proto, 1000000, src));
}

}  // namespace

TEST_CASE("tilt_reduce examples") {
  const auto r0 = tilt_reduce({0.0, 0.0, Protocol::Csma, {1.0, 1}});
  CHECK(r0.D == 0.0);
  CHECK(r0.lambda_shifted == 1.0);
  const auto r1 = tilt_reduce({0.0, 0.5, Protocol::Csma, {1.0, 1}});
  CHECK(r1.D == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(r1.lambda_shifted == 0.5);
  const auto r2 = tilt_reduce({1.0, -1.0, Protocol::Aloha, {1.0, 1}});
  CHECK(r2.D == doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-15));
  CHECK(r2.lambda_shifted == 2.0);
  CHECK_THROWS_AS(tilt_reduce({0.0, 1.0, Protocol::Csma, {1.0, 1}}), InvalidArgument);
  CHECK_THROWS_AS(tilt_reduce({0.0, 2.0, Protocol::Csma, {1.0, 1}}), InvalidArgument);
}

TEST_CASE("discretized kernels are row-stochastic") {
  const auto csma = discretize({1.0, 1}, Protocol::Csma, 0.01);
  CHECK(csma.lattice.states() == 1);
  CHECK(std::abs(csma.row_sum(0) - 1.0) < 1e-6);

  for (auto proto : {Protocol::Csma, Protocol::Aloha}) {
    const auto dk = discretize({1.0, 2}, proto, 0.01);
    for (std::int64_t st = 0; st < dk.lattice.states(); ++st) {
      CHECK(std::abs(dk.row_sum(st) - 1.0) < 1e-6);
    }
    CHECK(*std::min_element(dk.entries.begin(), dk.entries.end()) >= 0.0);
  }
}

TEST_CASE("tilted entries equal the reduced kernel at shifted intensity") {
  const Params p{1.0, 2};
  for (auto proto : {Protocol::Csma, Protocol::Aloha}) {
    for (auto [A, B] : {std::pair{0.4, 0.3}, {-0.7, -1.5}, {1.2, 0.8}}) {
      const auto r = tilt_reduce({A, B, proto, p});
      const auto tilted = discretize(p, proto, 0.05, 12, A, B);
      const auto reduced = discretize({r.lambda_shifted, 2}, proto, 0.05, 12, r.D, 0.0);
      REQUIRE(tilted.entries.size() == reduced.entries.size());
      for (std::size_t i = 0; i < tilted.entries.size(); ++i) {
        CHECK(std::abs(tilted.entries[i] - reduced.entries[i]) <=
              1e-10 * std::max(1e-300, std::abs(reduced.entries[i])) + 1e-300);
      }
    }
  }
}

TEST_CASE("cgf vanishes at the origin") {
  for (auto [proto, lambda] : {std::pair{Protocol::Csma, 1.0}, {Protocol::Csma, 2.0},
                               {Protocol::Aloha, 0.5}, {Protocol::Aloha, 1.0}}) {
    for (int kappa : {1, 2}) {
      CgfEvaluator cgf(proto, {lambda, kappa});
      CHECK(std::abs(cgf(0.0, 0.0)) < 1e-6);
    }
  }
  CgfEvaluator three(Protocol::Csma, {1.0, 3});
  CHECK(std::abs(three(0.0, 0.0)) < 1e-6);
}

TEST_CASE("single-channel cgf matches the one-state closed form") {
  for (auto proto : {Protocol::Csma, Protocol::Aloha}) {
    for (double lambda : {0.5, 1.0, 2.0}) {
      const Params p{lambda, 1};
      CgfEvaluator cgf(proto, p);
      for (auto [A, B] : {std::pair{0.0, 0.0}, {0.5, 0.2}, {-1.0, -2.0}, {1.5, -0.4}, {-0.3, 0.3}}) {
        if (B >= lambda) continue;
        const double lp = lambda - B;
        const double closed = A + std::log(lambda / lp) + lambda * std::exp(A) - lp;
        CHECK(std::abs(cgf(A, B) - closed) < 1e-6);
        CHECK(std::abs(one_state_cgf(proto, p, A, B) - closed) < 1e-8);
      }
    }
  }
}

TEST_CASE("grid refinement leaves the untilted cgf at zero") {
  for (auto proto : {Protocol::Csma, Protocol::Aloha}) {
    CgfEvaluator coarse(proto, {1.0, 2}, LdpGrid{0.02});
    CgfEvaluator fine(proto, {1.0, 2}, LdpGrid{0.01});
    CHECK(std::abs(coarse(0.0, 0.0) - fine(0.0, 0.0)) < 1e-6);
  }
}

TEST_CASE("reduced and direct tilts agree") {
  RandomSource src(77, 0);
  for (auto proto : {Protocol::Csma, Protocol::Aloha}) {
    CgfEvaluator cgf(proto, {1.0, 2});
    for (int i = 0; i < 5; ++i) {
      const double A = -1.0 + 2.0 * src.uniform();
      const double B = -2.0 + 2.5 * src.uniform();
      CHECK(std::abs(cgf(A, B) - cgf.direct(A, B)) < 1e-8);
    }
  }
}

TEST_CASE("cgf is nondecreasing in A") {
  for (auto proto : {Protocol::Csma, Protocol::Aloha}) {
    CgfEvaluator cgf(proto, {1.0, 2});
    double prev = -INFINITY;
    for (double A = -2.0; A <= 2.0; A += 0.5) {
      const double v = cgf(A, 0.3);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("J vanishes at the stationary means and is positive elsewhere") {
  for (auto [proto, lambda] : {std::pair{Protocol::Csma, 1.0}, {Protocol::Aloha, 0.5}}) {
    const Params p{lambda, 2};
    RateSolver solver(proto, p);
    const auto m = stationary_means(proto, p);
    const auto zero = solver.J(m.mean_attempts, m.mean_gap);
    CAPTURE(zero.value);
    CHECK(std::abs(zero.value) < 2e-3);
    for (double fx : {0.9, 1.2}) {
      for (double fy : {0.8, 1.3}) {
        const auto pt = solver.J(std::max(1.01, fx * m.mean_attempts), fy * m.mean_gap);
        CHECK(pt.value >= 0.0);
        CHECK(pt.value > zero.value);
      }
    }
  }
}

TEST_CASE("J flags points outside the effective domain") {
  RateSolver solver(Protocol::Csma, {1.0, 1});
  // Every gap is at least 1 for the single-channel kernel.
  const auto pt = solver.J(2.0, 0.5);
  CHECK(pt.infinite);
  CHECK(std::isinf(pt.value));
}

TEST_CASE("J is midpoint convex along a segment") {
  RateSolver solver(Protocol::Csma, {1.0, 2});
  const auto m = stationary_means(Protocol::Csma, {1.0, 2});
  std::vector<double> v;
  for (int i = 0; i <= 6; ++i) v.push_back(solver.J(m.mean_attempts * (0.8 + 0.1 * i), m.mean_gap).value);
  for (int i = 1; i + 1 < static_cast<int>(v.size()); ++i) CHECK(0.5 * (v[i - 1] + v[i + 1]) - v[i] >= -1e-8);
}

TEST_CASE("I is the scaled J") {
  RateSolver solver(Protocol::Csma, {1.0, 2});
  const auto i = solver.I(0.9, 0.6);
  const auto j = solver.J(0.9 / 0.6, 1.0 / 0.6);
  CHECK(i.value == doctest::Approx(0.6 * j.value).epsilon(1e-9));

  RateSolver aloha(Protocol::Aloha, {0.5, 1});
  const auto ia = aloha.I(0.3, 0.2);
  const auto ja = aloha.J(2.0 * 0.3 / 0.5, 2.0 / 0.5);
  CHECK(ia.value == doctest::Approx(0.25 * ja.value).epsilon(1e-9));
}

TEST_CASE("I vanishes at the minimizer built from the stationary means") {
  {
    const auto m = stationary_means(Protocol::Csma, {1.0, 1});
    const double a_min = m.mean_attempts / m.mean_gap, s_min = 1.0 / m.mean_gap;
    CHECK(std::abs(s_min - 0.5) < 0.01);
    RateSolver solver(Protocol::Csma, {1.0, 1});
    CHECK(std::abs(solver.I(a_min, s_min).value) < 5e-3);
    CHECK(solver.I(1.5 * a_min, s_min).value > 0.0);
  }
  {
    const auto m = stationary_means(Protocol::Aloha, {0.5, 2});
    const double a_min = m.mean_attempts / m.mean_gap;
    const double s_min = (2.0 - m.mean_attempts) / m.mean_gap;
    RateSolver solver(Protocol::Aloha, {0.5, 2});
    CHECK(std::abs(solver.I(a_min, s_min).value) < 5e-3);
    CHECK(solver.I(1.5 * a_min, s_min).value > 0.0);
  }
}

TEST_CASE("I^S properties") {
  RateSolver solver(Protocol::Csma, {1.0, 1});
  const double s_star = s_csma({1.0, 1}).value;
  CHECK(std::abs(solver.IS(s_star).value) < 5e-3);
  CHECK(solver.IS(0.6 * s_star).value > 0.0);

  std::vector<double> v;
  for (double s = 0.25; s <= 0.651; s += 0.05) v.push_back(solver.IS(s).value);
  for (std::size_t i = 1; i + 1 < v.size(); ++i) CHECK(0.5 * (v[i - 1] + v[i + 1]) - v[i] >= -1e-6);

  // Contraction over a agrees with the dual form s sup_B [B/s - Lambda(0, B)].
  for (double s : {0.3, 0.4, 0.6}) {
    CHECK(solver.IS(s).value == doctest::Approx(solver.IS_dual(s)).epsilon(1e-4));
  }
}

TEST_CASE("I^S vanishes at the ALOHA closed-form throughput") {
  RateSolver solver(Protocol::Aloha, {0.5, 1});
  CHECK(std::abs(solver.IS(s_aloha({0.5, 1}).value).value) < 5e-3);
}

TEST_CASE("attempt-count rate") {
  CHECK(rate_IA(1.0, {1.0, 1}).value == 0.0);
  CHECK(rate_IA(1.0, {2.0, 1}).value == doctest::Approx(1.0 + std::log(0.5)).epsilon(1e-14));
  CHECK(rate_IA(1e-12, {2.0, 1}).value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK_THROWS_AS(rate_IA(0.0, {2.0, 1}), InvalidArgument);
}

TEST_CASE("tail check outcomes") {
  const Params p{1.0, 1};
  const auto typical = tail_bound_check(Protocol::Csma, p, 0.5, 50.0, 400, 5, 1);
  CHECK(typical.status == "ok");
  CHECK(typical.predicted_rate == 0.0);
  CHECK(typical.passed);

  const auto rare = tail_bound_check(Protocol::Csma, p, 0.1, 200.0, 100, 6, 1);
  CHECK(rare.status == "insufficient");
  CHECK(rare.occurrences == 0);
  CHECK_FALSE(rare.passed);

  const auto mid = tail_bound_check(Protocol::Csma, p, 0.42, 200.0, 50000, 7);
  CAPTURE(mid.mc_rate);
  CAPTURE(mid.predicted_rate);
  REQUIRE(mid.occurrences >= 10);
  CHECK(mid.status == "ok");
  CHECK(mid.mc_rate >= 0.9 * mid.predicted_rate);
  CHECK(mid.predicted_rate > 0.0);

  // Same seed, any thread count: identical report.
  const auto again = tail_bound_check(Protocol::Csma, p, 0.42, 200.0, 50000, 7, 3);
  CHECK(again.occurrences == mid.occurrences);
}
