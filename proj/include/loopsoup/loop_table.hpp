#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "loopsoup/chain.hpp"
#include "loopsoup/random.hpp"

namespace loopsoup {

/// Discrete skeleton decomposition of the nontrivial part of the loop
/// measure: rooted skeletons of length n >= 2 carry total intensity
/// nu_n = trace(P^n)/n, and conditional on length n a skeleton (x_1..x_n)
/// has probability prod_i P(x_i, x_{i+1 mod n}) / trace(P^n).
/// Lengths above n_max are dropped; tail_bound certifies the discarded
/// intensity (alpha included).
struct DiscreteLoopTable {
  std::vector<Matrix> powers;  // powers[j] = P^j, j = 0..n_max
  std::vector<double> nu;      // nu[n] = trace(P^n)/n, n = 2..n_max (nu[0], nu[1] unused = 0)
  double total_intensity = 0;  // sum of nu (alpha excluded)
  double tail_bound = 0;       // certified bound on alpha * sum_{n > n_max} trace(P^n)/n
  double sigma_hat = 1;        // spectral-radius upper bound from matrix norms
  double alpha = 1;

  int n_max() const { return static_cast<int>(powers.size()) - 1; }
};

/// Builds the table so that a certified geometric tail drops below eps_tail.
/// Rows of P are substochastic, so ||P^r||_inf <= 1 for every filler power;
/// for any j with s_j := ||P^j||_inf < 1 and any n >= j,
///   trace(P^n) <= dim * s_j^floor(n/j) <= dim * sigma_j^(n-j+1),
/// where sigma_j = s_j^(1/j). Hence the intensity dropped beyond N is at most
///   tail_j(N) = alpha * dim * sigma_j^(N+2-j) / ((N+1)(1-sigma_j)),
/// and the certificate minimizes tail_j(N) over every computed power j <= N.
/// (Minimizing matters: fixing j = 1 wastes slowly mixing chains, while the
/// largest j alone has sigma_j near the spectral radius but no exponent
/// left to spend.) A vanishing power P^j = 0 certifies a tail of exactly 0.
inline DiscreteLoopTable build_loop_table(const Chain& chain, double alpha, double eps_tail = 1e-6,
                                          int hard_cap = 400) {
  require(alpha > 0.0, Errc::out_of_domain, "alpha must be positive");
  require(eps_tail > 0.0 && eps_tail < 1.0, Errc::out_of_domain, "eps_tail must be in (0,1)");

  const int dim = chain.size();
  const Matrix& p = chain.jump_matrix();
  DiscreteLoopTable table;
  table.alpha = alpha;
  table.powers.push_back(Matrix::Identity(dim, dim));
  table.powers.push_back(p);
  table.nu.assign(2, 0.0);

  std::vector<double> norms = {1.0, p.rowwise().sum().maxCoeff()};  // norms[j] = ||P^j||_inf

  // Best certified bound on alpha * sum_{n > N} trace(P^n)/n, with the
  // sigma_j that attains it; {0, 0} when some power vanishes identically.
  auto tail = [&](int n_cut) -> std::pair<double, double> {
    double best = std::numeric_limits<double>::infinity();
    double best_sigma = 1.0;
    for (int j = 1; j <= n_cut; ++j) {
      const double sj = norms[static_cast<std::size_t>(j)];
      if (sj == 0.0) return {0.0, 0.0};
      const double sigma = std::pow(sj, 1.0 / j);
      if (sigma >= 1.0) continue;
      const double t =
          alpha * dim * std::pow(sigma, n_cut + 2 - j) / ((n_cut + 1) * (1.0 - sigma));
      if (t < best) {
        best = t;
        best_sigma = sigma;
      }
    }
    return {best, best_sigma};
  };

  for (int n = 2; n <= hard_cap; ++n) {
    table.powers.push_back((table.powers.back() * p).eval());
    norms.push_back(table.powers.back().rowwise().sum().maxCoeff());
    double nu_n = table.powers.back().trace() / n;
    table.nu.push_back(nu_n);
    table.total_intensity += nu_n;
    const auto [bound, sigma] = tail(n);
    if (bound < eps_tail) {
      table.tail_bound = bound;
      table.sigma_hat = sigma;
      return table;
    }
  }
  fail(Errc::no_decay, "no certified spectral decay within the power cap");
}

/// Draws a rooted skeleton of length n exactly from the cyclic weights:
/// the root x_1 with probability (P^n)(x,x)/trace(P^n), then sequentially
/// x_{i+1} with weight P(x_i, y) * (P^{n-i})(y, x_1) — the bridge of the
/// remaining n-i return steps.
inline std::vector<int> sample_skeleton(const DiscreteLoopTable& table, int n, Rng& rng) {
  require(n >= 2 && n <= table.n_max(), Errc::out_of_domain, "skeleton length out of range");
  require(table.nu[static_cast<std::size_t>(n)] > 0.0, Errc::zero_intensity,
          "no loops of this length");
  const int dim = static_cast<int>(table.powers[0].rows());
  std::vector<double> w(static_cast<std::size_t>(dim));
  const Matrix& pn = table.powers[static_cast<std::size_t>(n)];
  for (int x = 0; x < dim; ++x) w[static_cast<std::size_t>(x)] = pn(x, x);
  std::vector<int> skel(static_cast<std::size_t>(n));
  skel[0] = rng.categorical(w.data(), dim);

  const Matrix& p = table.powers[1];
  for (int i = 1; i < n; ++i) {
    const Matrix& back = table.powers[static_cast<std::size_t>(n - i)];
    for (int y = 0; y < dim; ++y)
      w[static_cast<std::size_t>(y)] = p(skel[static_cast<std::size_t>(i - 1)], y) * back(y, skel[0]);
    skel[static_cast<std::size_t>(i)] = rng.categorical(w.data(), dim);
  }
  return skel;
}

}  // namespace loopsoup
