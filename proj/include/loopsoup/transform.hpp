#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "loopsoup/chain.hpp"

namespace loopsoup {

/// Relabel states through a bijection; labels missing from the map stay as
/// they are. The relabeled spec lists states in sorted label order. Returns
/// the new chain together with the index map (new_index[old_index]), under
/// which every derived object transports entrywise: in particular
/// u'(sigma x, sigma y) = u(x, y).
inline std::pair<Chain, std::vector<int>> relabeled_chain(
    const Chain& chain, const std::map<std::string, std::string>& sigma) {
  const int n = chain.size();
  std::vector<std::string> target(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) {
    const std::string& old = chain.states()[static_cast<std::size_t>(x)];
    auto it = sigma.find(old);
    target[static_cast<std::size_t>(x)] = it == sigma.end() ? old : it->second;
  }
  for (const auto& [from, to] : sigma) {
    (void)to;
    chain.index_of(from);  // throws bad_chain on unknown source labels
  }

  std::vector<std::string> sorted = target;
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), Errc::not_a_bijection,
          "relabeling map collapses two states onto one label");

  std::vector<int> new_index(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), target[static_cast<std::size_t>(x)]);
    new_index[static_cast<std::size_t>(x)] = static_cast<int>(it - sorted.begin());
  }

  ChainSpec spec;
  spec.states = sorted;
  spec.q = Matrix::Zero(n, n);
  spec.k = Vector::Zero(n);
  spec.m = Vector::Zero(n);
  for (int x = 0; x < n; ++x) {
    const int i = new_index[static_cast<std::size_t>(x)];
    spec.k(i) = chain.k()(x);
    spec.m(i) = chain.m()(x);
    for (int y = 0; y < n; ++y) spec.q(i, new_index[static_cast<std::size_t>(y)]) = chain.q()(x, y);
  }
  return {Chain::validate(std::move(spec)), new_index};
}

/// Time change by a positive density h against the running clock: holding
/// rates divide by h(x) and the base measure multiplies by h(x). The Green
/// kernel is invariant: u'(x,y) = u(x,y).
inline Chain time_changed_density(const Chain& chain, const Vector& h) {
  require(h.size() == chain.size(), Errc::bad_density, "density must have one entry per state");
  require((h.array() > 0.0).all(), Errc::bad_density, "density must be strictly positive");
  ChainSpec spec = chain.spec();
  spec.q = spec.q.array().colwise() / h.array();
  spec.k = spec.k.array() / h.array();
  spec.m = spec.m.array() * h.array();
  return Chain::validate(std::move(spec));
}

/// Time change onto the support of a finite atomic measure sum_x w(x) delta_x:
/// the watched process on the support has Green matrix G_Y(i,j) =
/// u(s_i, s_j) w(j) and generator L_Y = -G_Y^{-1}, again a transient
/// sub-Markov generator. Its kernel against the new base measure w is the
/// parent kernel restricted to the support.
struct MeasureChange {
  Chain chain;
  std::vector<int> support;  // parent index of each new state
};

inline MeasureChange time_changed_measure(const Chain& chain, const std::vector<int>& support,
                                          const Vector& w) {
  require(!support.empty(), Errc::bad_support, "support must be nonempty");
  std::vector<char> seen(static_cast<std::size_t>(chain.size()), 0);
  for (int x : support) {
    require(x >= 0 && x < chain.size(), Errc::bad_support, "support index out of range");
    require(!seen[static_cast<std::size_t>(x)], Errc::bad_support, "support has duplicates");
    seen[static_cast<std::size_t>(x)] = 1;
  }
  const int ns = static_cast<int>(support.size());
  require(w.size() == ns, Errc::bad_density, "weights must match the support");
  require((w.array() > 0.0).all(), Errc::bad_density, "weights must be strictly positive");

  const Matrix& u = chain.green_kernel();
  Matrix gy(ns, ns);
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < ns; ++j)
      gy(i, j) = u(support[static_cast<std::size_t>(i)], support[static_cast<std::size_t>(j)]) * w(j);
  Eigen::FullPivLU<Matrix> lu(gy);
  require(lu.isInvertible(), Errc::bad_support, "time-changed Green matrix is singular");
  Matrix ly = -Matrix(lu.inverse());

  // -L_Y must be an honest sub-Markov generator up to numerical dust.
  const double scale = ly.cwiseAbs().maxCoeff();
  ChainSpec spec;
  spec.q = Matrix::Zero(ns, ns);
  spec.k = Vector::Zero(ns);
  spec.m = w;
  for (int i = 0; i < ns; ++i) {
    spec.states.push_back(chain.states()[static_cast<std::size_t>(support[static_cast<std::size_t>(i)])]);
    double lambda = -ly(i, i);
    require(lambda > 0.0, Errc::bad_support, "time-changed generator has a nonpositive rate");
    double row = 0.0;
    for (int j = 0; j < ns; ++j) {
      if (j == i) continue;
      require(ly(i, j) >= -1e-12 * scale, Errc::bad_support,
              "time-changed generator has a negative jump rate");
      spec.q(i, j) = std::max(0.0, ly(i, j));
      row += spec.q(i, j);
    }
    require(lambda - row >= -1e-12 * scale, Errc::bad_support,
            "time-changed generator rows must be substochastic");
    spec.k(i) = std::max(0.0, lambda - row);
  }
  return MeasureChange{Chain::validate(std::move(spec)), support};
}

}  // namespace loopsoup
