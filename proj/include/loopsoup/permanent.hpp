#pragma once

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "loopsoup/chain.hpp"
#include "loopsoup/errors.hpp"

namespace loopsoup {

/// Hard cap on permanent-style enumerations (k! terms).
inline constexpr int kMaxPermanentOrder = 10;

namespace detail {

inline void check_order(std::size_t k) {
  require(k <= static_cast<std::size_t>(kMaxPermanentOrder), Errc::too_large,
          "permanent order exceeds the enumeration cap");
}

/// Visits every permutation of {0..k-1} as (perm, cycle_count).
template <class F>
void for_each_permutation(int k, F&& visit) {
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::array<bool, kMaxPermanentOrder> seen{};
  do {
    seen.fill(false);
    int cycles = 0;
    for (int i = 0; i < k; ++i) {
      if (seen[static_cast<std::size_t>(i)]) continue;
      ++cycles;
      for (int j = i; !seen[static_cast<std::size_t>(j)]; j = perm[static_cast<std::size_t>(j)])
        seen[static_cast<std::size_t>(j)] = true;
    }
    visit(perm, cycles);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

}  // namespace detail

/// alpha-permanent: sum over permutations pi of alpha^{#cycles(pi)} *
/// prod_j A(j, pi(j)). alpha = 1 is the classical permanent.
inline double alpha_permanent(const Matrix& a, double alpha) {
  require(a.rows() == a.cols(), Errc::out_of_domain, "matrix must be square");
  const int k = static_cast<int>(a.rows());
  detail::check_order(static_cast<std::size_t>(k));
  if (k == 0) return 1.0;
  double total = 0.0;
  detail::for_each_permutation(k, [&](const std::vector<int>& perm, int cycles) {
    double prod = std::pow(alpha, cycles);
    for (int j = 0; j < k; ++j) prod *= a(j, perm[static_cast<std::size_t>(j)]);
    total += prod;
  });
  return total;
}

/// Joint moment of a permanental family with kernel u at the (possibly
/// repeated) points pts: E prod_j theta(pts_j) = alpha-permanent of the
/// submatrix u(pts_i, pts_j).
inline double permanental_moment(const Matrix& u, const std::vector<int>& pts, double alpha) {
  detail::check_order(pts.size());
  const int k = static_cast<int>(pts.size());
  Matrix sub(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      sub(i, j) = u(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)]);
  return alpha_permanent(sub, alpha);
}

/// Moment of the product of local times at x, pts..., y under the (x -> y)
/// bridge measure of total mass u(x,y): sum over orderings of pts of
/// u(x, p_1) u(p_1, p_2) ... u(p_k, y). Empty pts gives u(x,y).
inline double q_moment(const Matrix& u, int x, int y, const std::vector<int>& pts) {
  detail::check_order(pts.size() + 1);
  const int k = static_cast<int>(pts.size());
  if (k == 0) return u(x, y);
  double total = 0.0;
  detail::for_each_permutation(k, [&](const std::vector<int>& perm, int) {
    double prod = u(x, pts[static_cast<std::size_t>(perm[0])]);
    for (int j = 0; j + 1 < k; ++j)
      prod *= u(pts[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])],
                pts[static_cast<std::size_t>(perm[static_cast<std::size_t>(j + 1)])]);
    prod *= u(pts[static_cast<std::size_t>(perm[static_cast<std::size_t>(k - 1)])], y);
    total += prod;
  });
  return total;
}

/// Loop-measure moment of a product of local times: sum over cyclic
/// arrangements of the points of the cyclic product of kernel values.
/// One point gives u(p,p).
inline double cyclic_mu_moment(const Matrix& u, const std::vector<int>& pts) {
  require(!pts.empty(), Errc::out_of_domain, "need at least one point");
  detail::check_order(pts.size());
  std::vector<int> head(pts.begin(), pts.end() - 1);
  return q_moment(u, pts.back(), pts.back(), head);
}

namespace detail {

inline double stable_det(const Matrix& a) { return a.partialPivLu().determinant(); }

inline double spectral_radius(const Matrix& a) {
  return a.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Exact joint moment generating function of soup local times at distinct
/// points: E exp(sum z_j Lhat(p_j)) = det(I - U diag(z))^{-alpha}, valid when
/// the spectral radius of U diag(z) is below 1.
inline double soup_mgf_exact(const Matrix& u, const std::vector<int>& pts, const Vector& z,
                             double alpha) {
  const int k = static_cast<int>(pts.size());
  require(z.size() == k, Errc::out_of_domain, "z must match pts");
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < i; ++j)
      require(pts[static_cast<std::size_t>(i)] != pts[static_cast<std::size_t>(j)],
              Errc::out_of_domain, "points must be distinct");
  Matrix a(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      a(i, j) = u(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)]) * z(j);
  require(detail::spectral_radius(a) < 1.0 - 1e-12, Errc::out_of_domain,
          "z outside the convergence domain (spectral radius >= 1)");
  return std::pow(detail::stable_det(Matrix::Identity(k, k) - a), -alpha);
}

/// Exact Laplace transform of the full local-time field:
/// E exp(-<c, Lhat>) = det(I + U diag(c))^{-alpha}, c >= 0, U the full kernel.
inline double soup_laplace_exact(const Matrix& u, const Vector& c, double alpha) {
  const int n = static_cast<int>(u.rows());
  require(c.size() == n, Errc::out_of_domain, "c must have one entry per state");
  require((c.array() >= 0.0).all(), Errc::out_of_domain, "c must be nonnegative");
  Matrix a = u.array().rowwise() * c.transpose().array();
  return std::pow(detail::stable_det(Matrix::Identity(n, n) + a), -alpha);
}

/// Log of the mgf via the trace-log series: alpha * sum_{r>=1} tr((U diag z)^r)/r.
/// Independent route used to gate the determinant identity.
inline double soup_log_mgf_series(const Matrix& u, const std::vector<int>& pts, const Vector& z,
                                  double alpha, double tol = 1e-14, int max_terms = 10000) {
  const int k = static_cast<int>(pts.size());
  Matrix a(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      a(i, j) = u(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)]) * z(j);
  require(detail::spectral_radius(a) < 1.0 - 1e-9, Errc::out_of_domain,
          "series requires spectral radius < 1");
  Matrix pw = a;
  double sum = 0.0;
  for (int r = 1; r <= max_terms; ++r) {
    double term = pw.trace() / r;
    sum += term;
    if (std::abs(term) < tol && r > 3) return alpha * sum;
    pw = (pw * a).eval();
  }
  fail(Errc::quadrature_failure, "trace-log series did not converge");
}

}  // namespace loopsoup
