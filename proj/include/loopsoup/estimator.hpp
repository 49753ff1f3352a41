#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "loopsoup/soup.hpp"

namespace loopsoup {

/// Monte Carlo estimate of a loop-measure integral with realization-level
/// error bars.
struct MuEstimate {
  double mean = 0.0;
  double stderror = 0.0;
  std::size_t n = 0;
};

/// Functional of a single loop, split by how trivial loops are handled:
/// `nontrivial` is evaluated on every materialized loop; trivial loops enter
/// either through `trivial_aggregate` (for functionals additive over loops,
/// evaluated on the aggregated trivial local-time vector, Monte Carlo) or
/// through `trivial_exact` (a closed-form value of the integral restricted
/// to trivial loops, added deterministically).
struct LoopFunctional {
  std::function<double(const Path&)> nontrivial;
  std::function<double(const Vector&)> trivial_aggregate;  // optional
  double trivial_exact = 0.0;
};

/// Campbell-formula estimator: the expectation of sum_{loops} f(loop) under
/// the soup equals alpha * integral of f against the loop measure, so the
/// estimator averages the per-realization sums and divides by alpha.
/// Realizations are mergeable shards: only (n, sum, sum of squares) enter.
inline MuEstimate campbell_estimate(std::span<const SoupRealization> reals,
                                    const LoopFunctional& f, double alpha) {
  require(alpha > 0.0, Errc::out_of_domain, "alpha must be positive");
  require(!reals.empty(), Errc::out_of_domain, "need at least one realization");
  std::vector<double> values;
  values.reserve(reals.size());
  for (const SoupRealization& r : reals) {
    double v = 0.0;
    for (const Path& loop : r.loops) v += f.nontrivial ? f.nontrivial(loop) : 0.0;
    if (f.trivial_aggregate) v += f.trivial_aggregate(r.trivial_lt);
    values.push_back(v / alpha);
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const auto n = values.size();
  double se = n > 1 ? std::sqrt(ss / (static_cast<double>(n) * static_cast<double>(n - 1))) : 0.0;
  return MuEstimate{mean + f.trivial_exact, se, n};
}

/// Closed form of the trivial-loop part of a pure local-time monomial at a
/// single state: integral of t^{-1} e^{-lambda t} (t/m)^k dt = (k-1)! /
/// (lambda m)^k for k >= 1.
inline double trivial_monomial_mu(const Chain& chain, int x, int degree) {
  require(degree >= 1, Errc::out_of_domain, "degree must be at least 1");
  double rate = chain.lambda()(x) * chain.m()(x);
  double value = 1.0;
  for (int j = 1; j < degree; ++j) value *= j;
  return value / std::pow(rate, degree);
}

/// Trivial-loop part of the loop measure against a lifetime functional at
/// one state: integral over t in (lo, infinity) of t^{-1} e^{-lambda(x) t}
/// g(t) dt, by adaptive Gauss-Kronrod.
inline double trivial_mu_quadrature(const Chain& chain, int x,
                                    const std::function<double(double)>& g, double lo = 0.0,
                                    double tol = 1e-10) {
  const double lambda = chain.lambda()(x);
  double err = 0.0;
  double val = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      [&](double t) { return std::exp(-lambda * t) * g(t) / t; }, lo,
      std::numeric_limits<double>::infinity(), 12, tol, &err);
  require(std::isfinite(val) && err < 100 * tol * std::max(1.0, std::abs(val)),
          Errc::quadrature_failure, "trivial-loop quadrature did not converge");
  return val;
}

/// E1(x): the exponential integral of the trivial-loop tail,
/// integral over (x, infinity) of t^{-1} e^{-t} dt.
inline double expint_e1(double x) {
  require(x > 0.0, Errc::out_of_domain, "E1 needs a positive argument");
  return -std::expint(-x);
}

}  // namespace loopsoup
