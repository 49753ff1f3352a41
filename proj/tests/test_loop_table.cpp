#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <loopsoup/loop_table.hpp>
#include <map>
#include <vector>

#include "fixtures.hpp"

using namespace loopsoup;

namespace {

/// Brute-force skeleton distribution: every length-n state sequence with its
/// cyclic jump-probability weight, normalized by trace(P^n).
std::map<std::vector<int>, double> skeleton_law(const Chain& c, int n) {
  std::map<std::vector<int>, double> law;
  const Matrix& p = c.jump_matrix();
  const int dim = c.size();
  std::vector<int> seq(static_cast<std::size_t>(n), 0);
  double total = 0.0;
  for (;;) {
    double w = 1.0;
    for (int i = 0; i < n; ++i) w *= p(seq[static_cast<std::size_t>(i)], seq[static_cast<std::size_t>((i + 1) % n)]);
    if (w > 0.0) law[seq] = w;
    total += w;
    int i = n - 1;
    while (i >= 0 && seq[static_cast<std::size_t>(i)] == dim - 1) seq[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) break;
    ++seq[static_cast<std::size_t>(i)];
  }
  for (auto& [k, v] : law) v /= total;
  return law;
}

void chisq_skeletons(const Chain& c, int n, std::uint64_t seed, int draws) {
  DiscreteLoopTable table = build_loop_table(c, 1.0);
  auto law = skeleton_law(c, n);
  REQUIRE(!law.empty());
  std::map<std::vector<int>, int> counts;
  Rng rng(seed);
  for (int i = 0; i < draws; ++i) ++counts[sample_skeleton(table, n, rng)];
  // every sampled skeleton must have positive weight
  for (const auto& [skel, cnt] : counts) REQUIRE(law.count(skel) == 1);
  double chi = 0.0;
  int dof = -1;
  for (const auto& [skel, prob] : law) {
    double expect = prob * draws;
    if (expect < 5.0) continue;
    double obs = counts.count(skel) ? counts[skel] : 0.0;
    chi += (obs - expect) * (obs - expect) / expect;
    ++dof;
  }
  REQUIRE(dof >= 1);
  REQUIRE(chi < dof + 4.0 * std::sqrt(2.0 * dof) + 10.0);
}

}  // namespace

TEST_CASE("two-state table: frozen intensities and the log series total") {
  Chain c = fixtures::c2();
  DiscreteLoopTable t = build_loop_table(c, 2.0, 1e-8);
  REQUIRE_THAT(t.nu[2], Catch::Matchers::WithinAbs(0.25, 1e-14));
  REQUIRE_THAT(t.nu[3], Catch::Matchers::WithinAbs(0.0, 1e-14));
  REQUIRE_THAT(t.nu[4], Catch::Matchers::WithinAbs(1.0 / 32.0, 1e-14));
  // total nontrivial intensity = -log det(I - P) = log(4/3)
  REQUIRE_THAT(t.total_intensity, Catch::Matchers::WithinAbs(std::log(4.0 / 3.0), 1e-7));
  REQUIRE(t.tail_bound < 1e-8);
  REQUIRE(t.sigma_hat <= 0.5 + 1e-12);
}

TEST_CASE("three-cycle table: only multiples of three") {
  Chain c = fixtures::cycle3();
  DiscreteLoopTable t = build_loop_table(c, 1.0);
  REQUIRE_THAT(t.nu[3], Catch::Matchers::WithinAbs(1.0 / 8.0, 1e-14));
  REQUIRE(t.nu[2] == 0.0);
  REQUIRE(t.nu[4] == 0.0);
  REQUIRE_THAT(t.nu[6], Catch::Matchers::WithinAbs(3.0 / (64.0 * 6.0), 1e-14));
  Rng rng(1);
  REQUIRE_THROWS_AS(sample_skeleton(t, 4, rng), Error);  // zero intensity at length 4
}

TEST_CASE("single state has no nontrivial loops") {
  Chain c = fixtures::single();
  DiscreteLoopTable t = build_loop_table(c, 1.0);
  REQUIRE(t.total_intensity == 0.0);
  REQUIRE(t.tail_bound == 0.0);
}

TEST_CASE("tail certificate really bounds the dropped intensity") {
  Chain c = fixtures::askew();
  DiscreteLoopTable coarse = build_loop_table(c, 1.5, 1e-3);
  DiscreteLoopTable fine = build_loop_table(c, 1.5, 1e-12);
  double dropped = 1.5 * (fine.total_intensity - coarse.total_intensity);
  REQUIRE(dropped <= coarse.tail_bound + 1e-12);
  REQUIRE(coarse.tail_bound < 1e-3);
}

TEST_CASE("no certified decay raises") {
  Chain c = fixtures::askew();
  REQUIRE_THROWS_AS(build_loop_table(c, 1.0, 1e-6, 1), Error);
}

TEST_CASE("skeleton sampler is exact (chi-squared against cyclic weights)") {
  chisq_skeletons(fixtures::c2(), 2, 21, 20000);
  chisq_skeletons(fixtures::c2(), 4, 22, 20000);
  chisq_skeletons(fixtures::cycle3(), 3, 23, 20000);
  chisq_skeletons(fixtures::askew(), 2, 24, 40000);
  chisq_skeletons(fixtures::askew(), 3, 25, 40000);
  chisq_skeletons(fixtures::askew(), 4, 26, 40000);
}

TEST_CASE("skeleton sampler guards its arguments") {
  DiscreteLoopTable t = build_loop_table(fixtures::c2(), 1.0);
  Rng rng(2);
  REQUIRE_THROWS_AS(sample_skeleton(t, 1, rng), Error);
  REQUIRE_THROWS_AS(sample_skeleton(t, t.n_max() + 1, rng), Error);
}
