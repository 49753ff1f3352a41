#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "loopsoup/chain.hpp"
#include "loopsoup/random.hpp"

namespace loopsoup {

/// A cadlag step path: states[i] is held for holds[i] time units, then the
/// path either jumps to states[i+1] or (after the last interval) dies.
/// Consecutive states differ; ends may coincide (a loop rooted inside a
/// holding interval splits that interval across the seam).
struct Path {
  std::vector<int> states;
  std::vector<double> holds;

  bool empty() const { return states.empty(); }
  std::size_t jumps() const { return states.empty() ? 0 : states.size() - 1; }

  double zeta() const {
    double t = 0.0;
    for (double h : holds) t += h;
    return t;
  }

  /// State occupied at time t; -1 (cemetery) for t < 0 or t >= zeta.
  int state_at(double t) const {
    if (t < 0.0) return -1;
    double acc = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
      acc += holds[i];
      if (t < acc) return states[i];
    }
    return -1;
  }
};

/// Local times against m: L(x) = (total time held in x) / m(x), so that
/// integral of f(X_s) ds = sum_x f(x) L(x) m(x) exactly.
inline Vector local_times(const Path& path, const Vector& m) {
  Vector lt = Vector::Zero(m.size());
  for (std::size_t i = 0; i < path.states.size(); ++i) lt(path.states[i]) += path.holds[i];
  lt.array() /= m.array();
  return lt;
}

/// Kill the path at time t (right-open intervals: a hold ending exactly at t
/// is kept whole and the next state is dropped). t = 0 gives the empty path;
/// t >= zeta gives a copy.
inline Path truncate(const Path& path, double t) {
  require(t >= 0.0, Errc::out_of_domain, "truncation time must be nonnegative");
  Path out;
  if (t == 0.0) return out;
  double acc = 0.0;
  for (std::size_t i = 0; i < path.states.size(); ++i) {
    if (t <= acc) break;
    double keep = std::min(path.holds[i], t - acc);
    out.states.push_back(path.states[i]);
    out.holds.push_back(keep);
    acc += path.holds[i];
  }
  return out;
}

/// Loop rotation: read the trajectory cyclically starting at time v mod zeta
/// (the representative in [0, zeta)). Preserves zeta and local times; a seam
/// that lands inside a holding interval splits it, and previously split
/// intervals merge back when their two halves become adjacent.
inline Path rotate(const Path& path, double v) {
  if (path.empty()) return path;
  if (path.states.size() == 1) return path;  // a constant loop is rotation-invariant exactly
  const double zeta = path.zeta();
  double w = std::fmod(v, zeta);
  if (w < 0.0) w += zeta;
  if (w == 0.0) return path;

  // interval containing w
  std::size_t i = 0;
  double start = 0.0;
  for (; i + 1 < path.states.size(); ++i) {
    if (w < start + path.holds[i]) break;
    start += path.holds[i];
  }
  const double offset = w - start;  // in [0, holds[i])

  Path out;
  out.states.reserve(path.states.size() + 1);
  out.holds.reserve(path.holds.size() + 1);
  auto push = [&out](int s, double h) {
    if (h <= 0.0) return;
    if (!out.states.empty() && out.states.back() == s) {
      out.holds.back() += h;  // merge a previously split interval
    } else {
      out.states.push_back(s);
      out.holds.push_back(h);
    }
  };

  push(path.states[i], path.holds[i] - offset);
  for (std::size_t j = i + 1; j < path.states.size(); ++j) push(path.states[j], path.holds[j]);
  for (std::size_t j = 0; j < i; ++j) push(path.states[j], path.holds[j]);
  if (offset > 0.0) push(path.states[i], offset);
  return out;
}

/// Run the chain from x until it dies: hold ~ Exp(lambda), then die with
/// probability k/lambda or jump according to the jump matrix row.
inline Path sample_path(const Chain& chain, int x, Rng& rng) {
  require(x >= 0 && x < chain.size(), Errc::out_of_domain, "start state out of range");
  Path path;
  const Matrix& p = chain.jump_matrix();
  int cur = x;
  for (std::size_t steps = 0;; ++steps) {
    require(steps < 100000000, Errc::too_large, "path failed to terminate");
    path.states.push_back(cur);
    path.holds.push_back(rng.exponential(chain.lambda()(cur)));
    if (rng.uniform() < chain.death_prob(cur)) return path;
    // jump: conditional on surviving, target y with probability p(cur,y)/(1-death)
    double target = rng.uniform() * (1.0 - chain.death_prob(cur));
    double acc = 0.0;
    int next = -1;
    for (int y = 0; y < chain.size(); ++y) {
      acc += p(cur, y);
      if (target < acc) {
        next = y;
        break;
      }
    }
    if (next < 0) return path;  // fp slack at the boundary: treat as death
    cur = next;
  }
}

/// One draw from the normalized bridge-type measure from x to y: run the
/// chain from x and keep the part up to the last exit from y (the full final
/// holding interval at y included). Paths that never hit y are rejected;
/// the acceptance probability is h(x) = u(x,y)/u(y,y), and conditional on
/// acceptance the law is the h-transform of the chain, i.e. the measure with
/// total mass u(x,y), normalized.
inline std::optional<Path> sample_q_path(const Chain& chain, int x, int y, Rng& rng) {
  require(y >= 0 && y < chain.size(), Errc::out_of_domain, "target state out of range");
  Path path = sample_path(chain, x, rng);
  std::size_t last = path.states.size();
  for (std::size_t i = path.states.size(); i-- > 0;) {
    if (path.states[i] == y) {
      last = i;
      break;
    }
  }
  if (last == path.states.size()) return std::nullopt;
  path.states.resize(last + 1);
  path.holds.resize(last + 1);
  return path;
}

}  // namespace loopsoup
