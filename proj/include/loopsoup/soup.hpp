#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "loopsoup/loop_table.hpp"
#include "loopsoup/path.hpp"

namespace loopsoup {

/// One draw of the Poisson loop soup at intensity alpha * (loop measure).
/// Trivial (jumpless) loops are aggregated: their total local time at x is a
/// Gamma(alpha, lambda(x) m(x)) variable, the sum of the points of a Poisson
/// process with intensity alpha t^{-1} e^{-lambda(x) t} dt on lifetimes.
/// Nontrivial loops are materialized individually, rooted per the loop
/// measure (root uniform in time along the loop).
struct SoupRealization {
  double alpha = 1.0;
  Vector trivial_lt;        // aggregated trivial-loop local times, one per state
  std::vector<Path> loops;  // nontrivial rooted loops
};

/// Draw order per realization (fixed; determinism contract): trivial Gammas
/// by state index, then lengths n = 2..n_max ascending with a Poisson count
/// each, then per loop: skeleton, holding times by position, re-rooting
/// uniform. The re-rooting step makes the rooted law match the loop measure
/// exactly: skeleton sampling roots uniformly over the n jump points, while
/// the loop measure roots uniformly in time — a distinction visible to
/// root-sensitive functionals whenever holding rates differ across states.
inline SoupRealization sample_soup(const Chain& chain, const DiscreteLoopTable& table, Rng& rng) {
  SoupRealization real;
  real.alpha = table.alpha;
  real.trivial_lt = Vector::Zero(chain.size());
  for (int x = 0; x < chain.size(); ++x)
    real.trivial_lt(x) = rng.gamma(table.alpha) / (chain.lambda()(x) * chain.m()(x));

  for (int n = 2; n <= table.n_max(); ++n) {
    const double nu_n = table.nu[static_cast<std::size_t>(n)];
    if (nu_n <= 0.0) continue;
    const std::uint64_t count = rng.poisson(table.alpha * nu_n);
    for (std::uint64_t c = 0; c < count; ++c) {
      Path loop;
      loop.states = sample_skeleton(table, n, rng);
      loop.holds.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        loop.holds[static_cast<std::size_t>(i)] =
            rng.exponential(chain.lambda()(loop.states[static_cast<std::size_t>(i)]));
      real.loops.push_back(rotate(loop, rng.uniform() * loop.zeta()));
    }
  }
  return real;
}

/// Total soup local-time field: aggregated trivial part plus the local times
/// of every materialized loop.
inline Vector soup_local_times(const SoupRealization& real, const Chain& chain) {
  Vector lt = real.trivial_lt;
  for (const Path& loop : real.loops) lt += local_times(loop, chain.m());
  return lt;
}

/// Keep exactly the loops living inside the subset, reindexed to the killed
/// chain's state order. By the restriction property this is a soup draw for
/// the chain killed on exiting the subset.
inline SoupRealization restrict_soup(const SoupRealization& real, const Chain& parent,
                                     const std::vector<int>& subset) {
  require(!subset.empty(), Errc::empty_subset, "subset must be nonempty");
  std::vector<int> to_sub(static_cast<std::size_t>(parent.size()), -1);
  for (std::size_t i = 0; i < subset.size(); ++i) to_sub[static_cast<std::size_t>(subset[i])] = static_cast<int>(i);

  SoupRealization out;
  out.alpha = real.alpha;
  out.trivial_lt = Vector::Zero(static_cast<Eigen::Index>(subset.size()));
  for (std::size_t i = 0; i < subset.size(); ++i) out.trivial_lt(static_cast<Eigen::Index>(i)) = real.trivial_lt(subset[i]);

  for (const Path& loop : real.loops) {
    bool inside = true;
    for (int s : loop.states)
      if (to_sub[static_cast<std::size_t>(s)] < 0) {
        inside = false;
        break;
      }
    if (!inside) continue;
    Path mapped = loop;
    for (int& s : mapped.states) s = to_sub[static_cast<std::size_t>(s)];
    out.loops.push_back(std::move(mapped));
  }
  return out;
}

}  // namespace loopsoup
