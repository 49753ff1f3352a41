#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "loopsoup/errors.hpp"

namespace loopsoup {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raw description of a finite-state continuous-time Markov chain with
/// killing: off-diagonal jump rates q, killing rates k, and the base measure
/// m that local times are measured against.
struct ChainSpec {
  std::vector<std::string> states;
  Matrix q;  // q(x,y) >= 0 for x != y, zero diagonal
  Vector k;  // k(x) >= 0
  Vector m;  // m(x) > 0
};

/// A validated transient chain with its derived objects cached:
/// total rates lambda, generator L, jump matrix P, the fundamental matrix
/// G = (-L)^{-1} (expected occupation times), and the Green kernel
/// u(x,y) = G(x,y)/m(y), which is the density of G against m.
class Chain {
 public:
  static Chain validate(ChainSpec spec) {
    const auto n = static_cast<Eigen::Index>(spec.states.size());
    require(n > 0, Errc::bad_rates, "chain needs at least one state");
    require(spec.q.rows() == n && spec.q.cols() == n, Errc::bad_rates, "q must be n x n");
    require(spec.k.size() == n && spec.m.size() == n, Errc::bad_rates, "k, m must have length n");
    for (Eigen::Index x = 0; x < n; ++x) {
      require(spec.q(x, x) == 0.0, Errc::bad_rates, "q must have zero diagonal");
      for (Eigen::Index y = 0; y < n; ++y)
        require(spec.q(x, y) >= 0.0, Errc::bad_rates, "q must be nonnegative");
      require(spec.k(x) >= 0.0, Errc::bad_rates, "killing rates must be nonnegative");
      require(spec.m(x) > 0.0, Errc::bad_rates, "base measure must be strictly positive");
    }

    Chain c;
    c.spec_ = std::move(spec);
    c.lambda_ = c.spec_.q.rowwise().sum() + c.spec_.k;
    for (Eigen::Index x = 0; x < n; ++x)
      require(c.lambda_(x) > 0.0, Errc::bad_rates, "every state needs a positive total rate");

    c.generator_ = c.spec_.q;
    c.generator_.diagonal() = -c.lambda_;
    c.jump_ = c.spec_.q.array().colwise() / c.lambda_.array();

    // Transience <=> (-L) invertible with a nonnegative inverse.
    Eigen::FullPivLU<Matrix> lu(-c.generator_);
    require(lu.isInvertible(), Errc::singular_generator, "generator is singular: chain is not transient");
    c.green_ = lu.inverse();
    const double scale = c.green_.cwiseAbs().maxCoeff();
    require((c.green_.array() >= -1e-12 * scale).all(), Errc::singular_generator,
            "(-L)^{-1} has negative entries: chain is not transient");
    c.green_ = c.green_.cwiseMax(0.0);
    c.irreducible_ = (c.green_.array() > 1e-14 * scale).all();
    c.kernel_ = c.green_.array().rowwise() / c.spec_.m.transpose().array();
    return c;
  }

  int size() const { return static_cast<int>(spec_.states.size()); }
  const std::vector<std::string>& states() const { return spec_.states; }
  const ChainSpec& spec() const { return spec_; }
  const Matrix& q() const { return spec_.q; }
  const Vector& k() const { return spec_.k; }
  const Vector& m() const { return spec_.m; }
  const Vector& lambda() const { return lambda_; }
  const Matrix& generator() const { return generator_; }
  /// P(x,y) = q(x,y)/lambda(x); rows are substochastic, deficit = death prob.
  const Matrix& jump_matrix() const { return jump_; }
  double death_prob(int x) const { return spec_.k(x) / lambda_(x); }
  /// G = (-L)^{-1}: G(x,y) is the expected total time spent in y from x.
  const Matrix& green_matrix() const { return green_; }
  /// u(x,y) = G(x,y)/m(y); symmetric when q is and m is reversing.
  const Matrix& green_kernel() const { return kernel_; }
  bool irreducible() const { return irreducible_; }
  /// E^x[lifetime] = sum_y u(x,y) m(y) = row sums of G.
  Vector expected_lifetime() const { return green_.rowwise().sum(); }

  int index_of(std::string_view label) const {
    for (int i = 0; i < size(); ++i)
      if (spec_.states[static_cast<std::size_t>(i)] == label) return i;
    fail(Errc::bad_chain, "unknown state label: " + std::string(label));
  }

 private:
  Chain() = default;
  ChainSpec spec_;
  Vector lambda_;
  Matrix generator_, jump_, green_, kernel_;
  bool irreducible_ = false;
};

/// beta-resolvent kernel u_beta(x,y) = [(beta I - L)^{-1}](x,y) / m(y).
/// Decreases to 0 as beta -> infinity and increases to u as beta -> 0.
inline Matrix resolvent_kernel(const Chain& chain, double beta) {
  require(beta >= 0.0, Errc::out_of_domain, "resolvent parameter must be nonnegative");
  Matrix a = beta * Matrix::Identity(chain.size(), chain.size()) - chain.generator();
  Matrix g = a.partialPivLu().inverse();
  return g.array().rowwise() / chain.m().transpose().array();
}

/// Transition density p_t(x,y) = [exp(tL)](x,y) / m(y) against m:
/// p_0 = diag(1/m), semigroup property p_s M p_t = p_{s+t}, and
/// u = integral of p_t over t >= 0.
inline Matrix transition_density(const Chain& chain, double t) {
  require(t >= 0.0, Errc::out_of_domain, "time must be nonnegative");
  Matrix e = (t * chain.generator()).exp();
  return e.array().rowwise() / chain.m().transpose().array();
}

/// Green kernel of the chain additionally killed at rate c(x)/m(x) in state x,
/// i.e. u_c = [(-L + diag(c/m))^{-1}] / m. u_0 = u.
inline Matrix perturbed_kernel(const Chain& chain, const Vector& c) {
  require(c.size() == chain.size(), Errc::out_of_domain, "c must have one entry per state");
  require((c.array() >= 0.0).all(), Errc::out_of_domain, "c must be nonnegative");
  Matrix a = -chain.generator();
  a.diagonal() += (c.array() / chain.m().array()).matrix();
  Matrix g = a.partialPivLu().inverse();
  return g.array().rowwise() / chain.m().transpose().array();
}

/// The chain killed on exiting the state subset B: jumps out of B become
/// killing. Returns the sub-chain (states keep their labels and relative
/// order) together with the index map into the parent.
struct KilledChain {
  Chain chain;
  std::vector<int> subset;  // parent index of each killed-chain state
};

inline KilledChain killed_chain(const Chain& parent, const std::vector<int>& subset) {
  require(!subset.empty(), Errc::empty_subset, "subset must be nonempty");
  const int nb = static_cast<int>(subset.size());
  std::vector<char> seen(static_cast<std::size_t>(parent.size()), 0);
  for (int x : subset) {
    require(x >= 0 && x < parent.size(), Errc::out_of_domain, "subset index out of range");
    require(!seen[static_cast<std::size_t>(x)], Errc::out_of_domain, "subset has duplicates");
    seen[static_cast<std::size_t>(x)] = 1;
  }

  ChainSpec sub;
  sub.states.reserve(static_cast<std::size_t>(nb));
  for (int x : subset) sub.states.push_back(parent.states()[static_cast<std::size_t>(x)]);
  sub.q.resize(nb, nb);
  sub.k.resize(nb);
  sub.m.resize(nb);
  for (int i = 0; i < nb; ++i) {
    const int x = subset[static_cast<std::size_t>(i)];
    double out = parent.k()(x);
    for (int y = 0; y < parent.size(); ++y)
      if (!seen[static_cast<std::size_t>(y)]) out += parent.q()(x, y);
    sub.k(i) = out;
    sub.m(i) = parent.m()(x);
    for (int j = 0; j < nb; ++j) sub.q(i, j) = parent.q()(x, subset[static_cast<std::size_t>(j)]);
  }
  return KilledChain{Chain::validate(std::move(sub)), subset};
}

/// Killed Green kernel computed from the parent's kernel alone:
/// u_B(x,y) = u(x,y) - sum_z H(x,z) u(z,y), where H(x,z) is the probability
/// that the parent chain started in x in B first leaves B by jumping to
/// z outside B (paths that die inside B never leave). Dual route to
/// killed_chain(...).chain.green_kernel() — the two must agree.
inline Matrix killed_green_via_hitting(const Chain& parent, const std::vector<int>& subset) {
  require(!subset.empty(), Errc::empty_subset, "subset must be nonempty");
  const int n = parent.size();
  const int nb = static_cast<int>(subset.size());
  std::vector<char> inb(static_cast<std::size_t>(n), 0);
  for (int x : subset) inb[static_cast<std::size_t>(x)] = 1;
  std::vector<int> outside;
  for (int y = 0; y < n; ++y)
    if (!inb[static_cast<std::size_t>(y)]) outside.push_back(y);
  const int nc = static_cast<int>(outside.size());

  const Matrix& p = parent.jump_matrix();
  Matrix pbb(nb, nb), pbc(nb, nc);
  for (int i = 0; i < nb; ++i) {
    for (int j = 0; j < nb; ++j) pbb(i, j) = p(subset[static_cast<std::size_t>(i)], subset[static_cast<std::size_t>(j)]);
    for (int j = 0; j < nc; ++j) pbc(i, j) = p(subset[static_cast<std::size_t>(i)], outside[static_cast<std::size_t>(j)]);
  }
  // (I - P_BB) H = P_{B,B^c}; invertibility follows from transience of the sub-chain.
  Matrix h = nc > 0 ? (Matrix::Identity(nb, nb) - pbb).partialPivLu().solve(pbc).eval() : Matrix(nb, 0);

  const Matrix& u = parent.green_kernel();
  Matrix ub(nb, nb);
  for (int i = 0; i < nb; ++i)
    for (int j = 0; j < nb; ++j) {
      double v = u(subset[static_cast<std::size_t>(i)], subset[static_cast<std::size_t>(j)]);
      for (int z = 0; z < nc; ++z)
        v -= h(i, z) * u(outside[static_cast<std::size_t>(z)], subset[static_cast<std::size_t>(j)]);
      ub(i, j) = v;
    }
  return ub;
}

/// h(x) = u(x,y)/u(y,y) = probability of ever hitting y from x.
inline Vector hitting_h(const Chain& chain, int y) {
  require(y >= 0 && y < chain.size(), Errc::out_of_domain, "state index out of range");
  const Matrix& u = chain.green_kernel();
  require(u(y, y) > 0.0, Errc::out_of_domain, "target state has zero diagonal kernel");
  return u.col(y) / u(y, y);
}

}  // namespace loopsoup
