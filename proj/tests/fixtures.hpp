#pragma once

#include <loopsoup/chain.hpp>

namespace fixtures {

using loopsoup::Chain;
using loopsoup::ChainSpec;
using loopsoup::Matrix;
using loopsoup::Vector;

/// Two states, symmetric unit jump rates, unit killing, unit base measure.
/// Green kernel (1/3) [[2,1],[1,2]].
inline Chain c2() {
  ChainSpec s;
  s.states = {"a", "b"};
  s.q = Matrix::Zero(2, 2);
  s.q(0, 1) = 1.0;
  s.q(1, 0) = 1.0;
  s.k = Vector::Ones(2);
  s.m = Vector::Ones(2);
  return Chain::validate(std::move(s));
}

/// Same rates as c2 but base measure (2,1): kernel [[1/3,1/3],[1/6,2/3]].
inline Chain c2_weighted() {
  ChainSpec s;
  s.states = {"a", "b"};
  s.q = Matrix::Zero(2, 2);
  s.q(0, 1) = 1.0;
  s.q(1, 0) = 1.0;
  s.k = Vector::Ones(2);
  s.m = Vector::Ones(2);
  s.m(0) = 2.0;
  return Chain::validate(std::move(s));
}

/// Directed 3-cycle a->b->c->a with unit rates and unit killing:
/// (-L)^{-1} = (1/7) [[4,2,1],[1,4,2],[2,1,4]].
inline Chain cycle3() {
  ChainSpec s;
  s.states = {"a", "b", "c"};
  s.q = Matrix::Zero(3, 3);
  s.q(0, 1) = 1.0;
  s.q(1, 2) = 1.0;
  s.q(2, 0) = 1.0;
  s.k = Vector::Ones(3);
  s.m = Vector::Ones(3);
  return Chain::validate(std::move(s));
}

/// One absorbing-free state with unit killing: u = 1, lifetime Exp(1).
inline Chain single() {
  ChainSpec s;
  s.states = {"a"};
  s.q = Matrix::Zero(1, 1);
  s.k = Vector::Ones(1);
  s.m = Vector::Ones(1);
  return Chain::validate(std::move(s));
}

/// Asymmetric 3-state chain with unequal holding rates and uneven base
/// measure; exercises everything the symmetric fixtures cannot see.
inline Chain askew() {
  ChainSpec s;
  s.states = {"a", "b", "c"};
  s.q = Matrix::Zero(3, 3);
  s.q(0, 1) = 2.0;
  s.q(0, 2) = 0.5;
  s.q(1, 0) = 1.0;
  s.q(2, 0) = 0.3;
  s.q(2, 1) = 0.7;
  s.k = Vector::Zero(3);
  s.k(0) = 0.5;
  s.k(1) = 1.0;
  s.k(2) = 1.0;
  s.m = Vector::Ones(3);
  s.m(1) = 0.7;
  s.m(2) = 2.0;
  return Chain::validate(std::move(s));
}

/// Deterministically scrambled-but-valid random chain for property tests.
/// Retries until validation passes (killing must be reachable everywhere).
inline Chain random_chain(loopsoup::Rng& rng, int n) {
  for (;;) {
    ChainSpec s;
    s.q = Matrix::Zero(n, n);
    s.k = Vector::Zero(n);
    s.m = Vector::Zero(n);
    for (int x = 0; x < n; ++x) {
      s.states.push_back("s" + std::to_string(x));
      for (int y = 0; y < n; ++y)
        if (x != y && rng.uniform() < 0.8) s.q(x, y) = 0.05 + 2.0 * rng.uniform();
      s.k(x) = rng.uniform() < 0.3 ? 0.0 : 0.1 + rng.uniform();
      s.m(x) = 0.25 + 2.0 * rng.uniform();
    }
    s.k(0) = std::max(s.k(0), 0.5);
    for (int x = 0; x < n; ++x) {
      if (s.q.row(x).sum() == 0.0 && n > 1) s.q(x, (x + 1) % n) = 0.5;  // keep killing reachable
      if (s.q.row(x).sum() + s.k(x) <= 0.0) s.k(x) = 0.5;
    }
    try {
      return Chain::validate(std::move(s));
    } catch (const loopsoup::Error&) {
      continue;
    }
  }
}

}  // namespace fixtures
