#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "loopsoup/estimator.hpp"
#include "loopsoup/permanent.hpp"
#include "loopsoup/report.hpp"
#include "loopsoup/soup.hpp"
#include "loopsoup/transform.hpp"

namespace loopsoup {

/// Fully resolved input of one experiment run. `params` carries optional
/// experiment-specific knobs; anything absent falls back to chain-derived
/// defaults so that every experiment runs meaningfully on any valid chain.
struct ExperimentInput {
  std::string name;
  std::string chain_label;
  Chain chain;
  double alpha = 1.0;
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  int workers = 1;
  nlohmann::json params;
};

namespace detail {

/// Randomness layout: every experiment seed splits into role streams
/// (0 = primary soup, 1 = secondary sampler, 2 = tertiary), and a role stream
/// splits into one stream per realization index. Workers only partition the
/// index range, so any worker count produces the identical report.
inline std::uint64_t role_seed(const ExperimentInput& in, std::uint64_t role) {
  return derive_stream(in.seed, role);
}

inline std::vector<SoupRealization> draw_realizations(const Chain& chain,
                                                      const DiscreteLoopTable& table,
                                                      std::size_t samples, std::uint64_t stream,
                                                      int workers) {
  std::vector<SoupRealization> out(samples);
  const int w = std::max(1, workers);
  if (w == 1 || samples < 128) {
    for (std::size_t i = 0; i < samples; ++i) {
      Rng rng(derive_stream(stream, i));
      out[i] = sample_soup(chain, table, rng);
    }
    return out;
  }
  std::atomic<std::size_t> next{0};
  constexpr std::size_t kChunk = 256;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(w));
  for (int t = 0; t < w; ++t)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(kChunk);
        if (i >= samples) return;
        const std::size_t end = std::min(samples, i + kChunk);
        for (; i < end; ++i) {
          Rng rng(derive_stream(stream, i));
          out[i] = sample_soup(chain, table, rng);
        }
      }
    });
  for (std::thread& th : pool) th.join();
  return out;
}

/// Primary soup batch shared by the rows of one experiment.
struct SoupBatch {
  DiscreteLoopTable table;
  std::vector<SoupRealization> soups;
  std::vector<Vector> lts;  // local-time field per realization
};

inline SoupBatch make_batch(const Chain& chain, double alpha, std::size_t samples,
                            std::uint64_t stream, int workers) {
  SoupBatch b{build_loop_table(chain, alpha), {}, {}};
  b.soups = draw_realizations(chain, b.table, samples, stream, workers);
  b.lts.reserve(samples);
  for (const SoupRealization& s : b.soups) b.lts.push_back(soup_local_times(s, chain));
  return b;
}

inline MuEstimate mc_from_values(const std::vector<double>& values) {
  require(!values.empty(), Errc::out_of_domain, "need at least one value");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const std::size_t n = values.size();
  double se = n > 1 ? std::sqrt(ss / (static_cast<double>(n) * static_cast<double>(n - 1))) : 0.0;
  return MuEstimate{mean, se, n};
}

/// Monte Carlo row that degrades gracefully: when the estimator carries no
/// randomness at all (zero standard error — e.g. every realization produced
/// the same deterministic value), a z-gate is meaningless, so the row becomes
/// a deterministic comparison at `det_tol` instead.
inline Row estimate_row(std::string label, double exact, const MuEstimate& est, double gate,
                        double det_tol) {
  if (est.stderror == 0.0)
    return exact_row(std::move(label) + " (deterministic)", exact, est.mean, det_tol);
  return mc_row(std::move(label), exact, est, gate);
}

inline ExperimentReport begin_report(const ExperimentInput& in) {
  ExperimentReport rep;
  rep.name = in.name;
  rep.chain = in.chain_label;
  rep.alpha = in.alpha;
  rep.seed = in.seed;
  rep.samples = in.samples;
  return rep;
}

inline void note_table(ExperimentReport& rep, const DiscreteLoopTable& t) {
  rep.notes.push_back("loop table: n_max=" + std::to_string(t.n_max()) +
                      ", certified dropped intensity <= " + fmt("%.3e", t.tail_bound));
}

inline bool has_param(const ExperimentInput& in, const char* key) {
  return in.params.is_object() && in.params.contains(key);
}

inline double num_param(const ExperimentInput& in, const char* key, double fallback) {
  if (!has_param(in, key)) return fallback;
  require(in.params.at(key).is_number(), Errc::schema_error,
          std::string("parameter '") + key + "' must be a number");
  return in.params.at(key).get<double>();
}

inline double z_gate(const ExperimentInput& in) { return num_param(in, "z_gate", 4.0); }

inline int state_from_json(const Chain& chain, const nlohmann::json& j) {
  if (j.is_string()) return chain.index_of(j.get<std::string>());
  require(j.is_number_integer(), Errc::schema_error, "state must be a label or an index");
  const int x = j.get<int>();
  require(x >= 0 && x < chain.size(), Errc::schema_error, "state index out of range");
  return x;
}

inline int state_param(const ExperimentInput& in, const char* key, int fallback) {
  if (!has_param(in, key)) return fallback;
  return state_from_json(in.chain, in.params.at(key));
}

inline std::vector<int> states_from_json(const Chain& chain, const nlohmann::json& j) {
  require(j.is_array(), Errc::schema_error, "expected an array of states");
  std::vector<int> out;
  for (const auto& e : j) out.push_back(state_from_json(chain, e));
  return out;
}

inline Vector vector_from_json(const nlohmann::json& j, int n, const char* what) {
  require(j.is_array() && static_cast<int>(j.size()) == n, Errc::schema_error,
          std::string(what) + " must be an array with one entry per state");
  Vector v(n);
  for (int i = 0; i < n; ++i) {
    require(j[static_cast<std::size_t>(i)].is_number(), Errc::schema_error,
            std::string(what) + " entries must be numbers");
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

inline const std::string& state_name(const Chain& chain, int x) {
  return chain.states()[static_cast<std::size_t>(x)];
}

/// "L(a)^2 L(b)" for a point multiset, grouping equal consecutive points.
inline std::string pts_label(const Chain& chain, const std::vector<int>& pts) {
  std::string out;
  for (std::size_t i = 0; i < pts.size();) {
    std::size_t j = i;
    while (j < pts.size() && pts[j] == pts[i]) ++j;
    if (!out.empty()) out += " ";
    out += "L(" + state_name(chain, pts[i]) + ")";
    if (j - i > 1) out += "^" + std::to_string(j - i);
    i = j;
  }
  return out.empty() ? "1" : out;
}

inline std::string vec_label(const Vector& v) {
  std::string out = "(";
  for (int i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt("%g", v(i));
  return out + ")";
}

}  // namespace detail

// ---------------------------------------------------------------------------
// moments: soup local-time joint moments against alpha-permanents.
// ---------------------------------------------------------------------------

inline ExperimentReport exp_moments(const ExperimentInput& in) {
  ExperimentReport rep = detail::begin_report(in);
  detail::SoupBatch batch =
      detail::make_batch(in.chain, in.alpha, in.samples, detail::role_seed(in, 0), in.workers);
  detail::note_table(rep, batch.table);
  const double gate = detail::z_gate(in);
  const int max_order =
      std::clamp(static_cast<int>(detail::num_param(in, "max_order", 3.0)), 1, kMaxPermanentOrder);
  const Matrix& u = in.chain.green_kernel();
  const int n = in.chain.size();

  std::vector<std::vector<int>> multisets;
  std::vector<int> cur;
  std::function<void(int)> extend = [&](int start) {
    if (!cur.empty()) multisets.push_back(cur);
    if (static_cast<int>(cur.size()) == max_order) return;
    for (int x = start; x < n; ++x) {
      cur.push_back(x);
      extend(x);
      cur.pop_back();
    }
  };
  extend(0);

  std::vector<double> values(in.samples);
  for (const std::vector<int>& pts : multisets) {
    for (std::size_t i = 0; i < in.samples; ++i) {
      double v = 1.0;
      for (int p : pts) v *= batch.lts[i](p);
      values[i] = v;
    }
    MuEstimate est = detail::mc_from_values(values);
    rep.rows.push_back(mc_row("E[" + detail::pts_label(in.chain, pts) + "]",
                              permanental_moment(u, pts, in.alpha), est, gate));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// mgf: determinant identities for the joint mgf / Laplace transform.
// ---------------------------------------------------------------------------

inline ExperimentReport exp_mgf(const ExperimentInput& in) {
  ExperimentReport rep = detail::begin_report(in);
  detail::SoupBatch batch =
      detail::make_batch(in.chain, in.alpha, in.samples, detail::role_seed(in, 0), in.workers);
  detail::note_table(rep, batch.table);
  const double gate = detail::z_gate(in);
  const Matrix& u = in.chain.green_kernel();
  const int n = in.chain.size();
  std::vector<int> pts(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pts[static_cast<std::size_t>(i)] = i;

  // Scale the all-ones direction by the critical value: rho(U diag(tstar 1)) = 1.
  const double tstar = 1.0 / detail::spectral_radius(u);
  Vector z_exact = detail::has_param(in, "z")
                       ? detail::vector_from_json(in.params.at("z"), n, "z")
                       : Vector(0.5 * tstar * Vector::Ones(n));
  // The Monte Carlo row needs a finite second moment, i.e. rho(U diag(2z)) < 1.
  Vector z_mc = detail::has_param(in, "z_mc")
                    ? detail::vector_from_json(in.params.at("z_mc"), n, "z_mc")
                    : Vector(0.25 * tstar * Vector::Ones(n));
  rep.notes.push_back("z=" + detail::vec_label(z_exact) + ", z_mc=" + detail::vec_label(z_mc) +
                      ", critical scale=" + detail::fmt("%.6g", tstar));

  const double det_val = soup_mgf_exact(u, pts, z_exact, in.alpha);
  const double series_val = std::exp(soup_log_mgf_series(u, pts, z_exact, in.alpha));
  rep.rows.push_back(exact_row("mgf determinant vs trace-log series, z=" + detail::vec_label(z_exact),
                               det_val, series_val, 1e-8));

  std::vector<double> values(in.samples);
  for (std::size_t i = 0; i < in.samples; ++i)
    values[i] = std::exp(z_mc.dot(batch.lts[i]));
  rep.rows.push_back(mc_row("E[exp<z,L>] z=" + detail::vec_label(z_mc),
                            soup_mgf_exact(u, pts, z_mc, in.alpha),
                            detail::mc_from_values(values), gate));

  Vector c = detail::has_param(in, "c") ? detail::vector_from_json(in.params.at("c"), n, "c")
                                        : Vector(Vector::Unit(n, 0));
  for (std::size_t i = 0; i < in.samples; ++i) values[i] = std::exp(-c.dot(batch.lts[i]));
  rep.rows.push_back(mc_row("E[exp-<c,L>] c=" + detail::vec_label(c),
                            soup_laplace_exact(u, c, in.alpha), detail::mc_from_values(values),
                            gate));

  const Vector zero = Vector::Zero(n);
  for (std::size_t i = 0; i < in.samples; ++i) values[i] = std::exp(-zero.dot(batch.lts[i]));
  rep.rows.push_back(mc_row("E[exp-<0,L>] is exactly 1", soup_laplace_exact(u, zero, in.alpha),
                            detail::mc_from_values(values), gate));
  return rep;
}

// ---------------------------------------------------------------------------
// isomorphism: L(x) e^{-<c,L>} against the perturbed kernel, three ways.
// ---------------------------------------------------------------------------

inline ExperimentReport exp_isomorphism(const ExperimentInput& in) {
  ExperimentReport rep = detail::begin_report(in);
  detail::SoupBatch batch =
      detail::make_batch(in.chain, in.alpha, in.samples, detail::role_seed(in, 0), in.workers);
  detail::note_table(rep, batch.table);
  const double gate = detail::z_gate(in);
  const Matrix& u = in.chain.green_kernel();
  const int n = in.chain.size();
  const int x0 = detail::state_param(in, "x", 0);

  std::vector<Vector> cs;
  if (detail::has_param(in, "cs")) {
    require(in.params.at("cs").is_array(), Errc::schema_error, "cs must be an array of vectors");
    for (const auto& e : in.params.at("cs")) cs.push_back(detail::vector_from_json(e, n, "cs entry"));
  } else {
    cs.push_back(Vector::Unit(n, x0));
    cs.push_back(0.5 * Vector::Ones(n));
    Vector graded(n);
    for (int i = 0; i < n; ++i) graded(i) = 0.3 * (i + 1);
    cs.push_back(graded);
  }

  std::vector<double> values(in.samples);
  for (const Vector& c : cs) {
    const std::string tag = ", c=" + detail::vec_label(c);
    const Matrix uc = perturbed_kernel(in.chain, c);
    const double lap = soup_laplace_exact(u, c, in.alpha);
    const double lhs_exact = uc(x0, x0) * lap;

    // central finite difference of the Laplace transform in the c(x0) slot
    require(c(x0) > 0.0, Errc::out_of_domain,
            "isomorphism check needs c(x) > 0 for the finite difference");
    const double h = std::min(1e-6 * std::max(1.0, c(x0)), 0.5 * c(x0));
    Vector cp = c, cm = c;
    cp(x0) += h;
    cm(x0) -= h;
    const double rhs_fd = -(soup_laplace_exact(u, cp, in.alpha) -
                            soup_laplace_exact(u, cm, in.alpha)) /
                          (2.0 * h * in.alpha);
    rep.rows.push_back(
        exact_row("u_c(x,x) det^{-a} vs -d/dc Laplace" + tag, lhs_exact, rhs_fd, 1e-4));

    for (std::size_t i = 0; i < in.samples; ++i)
      values[i] = batch.lts[i](x0) * std::exp(-c.dot(batch.lts[i])) / in.alpha;
    rep.rows.push_back(
        mc_row("E[L(x) exp-<c,L>]/a" + tag, lhs_exact, detail::mc_from_values(values), gate));

    for (std::size_t i = 0; i < in.samples; ++i)
      values[i] = (batch.lts[i](x0) / in.alpha - uc(x0, x0)) * std::exp(-c.dot(batch.lts[i]));
    rep.rows.push_back(
        mc_row("paired difference" + tag, 0.0, detail::mc_from_values(values), gate));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// qmu: bridge-measure moments, by bridge sampling and by the soup route.
// ---------------------------------------------------------------------------

inline ExperimentReport exp_qmu(const ExperimentInput& in) {
  ExperimentReport rep = detail::begin_report(in);
  detail::SoupBatch batch =
      detail::make_batch(in.chain, in.alpha, in.samples, detail::role_seed(in, 0), in.workers);
  detail::note_table(rep, batch.table);
  const double gate = detail::z_gate(in);
  const Matrix& u = in.chain.green_kernel();
  const int n = in.chain.size();

  std::vector<std::pair<int, int>> pairs;
  if (detail::has_param(in, "pairs")) {
    require(in.params.at("pairs").is_array(), Errc::schema_error, "pairs must be an array");
    for (const auto& e : in.params.at("pairs")) {
      std::vector<int> p = detail::states_from_json(in.chain, e);
      require(p.size() == 2, Errc::schema_error, "each pair needs exactly two states");
      pairs.emplace_back(p[0], p[1]);
    }
  } else {
    pairs.emplace_back(0, 0);
    if (n > 1) pairs.emplace_back(0, n - 1);
  }

  std::vector<std::vector<int>> hs;
  if (detail::has_param(in, "functionals")) {
    require(in.params.at("functionals").is_array(), Errc::schema_error,
            "functionals must be an array of point lists");
    for (const auto& e : in.params.at("functionals"))
      hs.push_back(detail::states_from_json(in.chain, e));
  } else {
    hs.push_back({});
    hs.push_back({0});
    if (n > 1) hs.push_back({n - 1});
  }

  const std::uint64_t qseed = detail::role_seed(in, 1);
  for (std::size_t pi = 0; pi < pairs.size(); ++pi) {
    const auto [x, y] = pairs[pi];
    const std::string pair_tag =
        "Q(" + detail::state_name(in.chain, x) + "," + detail::state_name(in.chain, y) + ")";
    // one bridge path per realization, reused by every functional
    std::vector<std::vector<double>> qvals(hs.size(), std::vector<double>(in.samples, 0.0));
    const std::uint64_t pair_seed = derive_stream(qseed, pi);
    for (std::size_t i = 0; i < in.samples; ++i) {
      Rng rng(derive_stream(pair_seed, i));
      std::optional<Path> path = sample_q_path(in.chain, x, y, rng);
      if (!path) continue;
      Vector lt = local_times(*path, in.chain.m());
      for (std::size_t hi = 0; hi < hs.size(); ++hi) {
        double v = u(y, y);
        for (int p : hs[hi]) v *= lt(p);
        qvals[hi][i] = v;
      }
    }
    for (std::size_t hi = 0; hi < hs.size(); ++hi) {
      const std::vector<int>& pts = hs[hi];
      const double exact = q_moment(u, x, y, pts);
      const std::string flab = "[" + detail::pts_label(in.chain, pts) + "]";
      if (x == y && pts.empty()) {
        // the start state is its own last exit: every draw is accepted, and
        // the mass identity Q(x,x)[1] = u(x,x) holds by construction
        rep.rows.push_back(
            exact_row("bridge sampler: " + pair_tag + flab + " always accepts", exact, u(y, y), 0.0));
      } else {
        rep.rows.push_back(mc_row("bridge sampler: " + pair_tag + flab, exact,
                                  detail::mc_from_values(qvals[hi]), gate));
      }
      if (x != y) continue;
      // Palm identity: Q(x,x)[H] = mu(H L(x)); trivial loops only contribute
      // when every point sits at x.
      LoopFunctional f;
      f.nontrivial = [&](const Path& loop) {
        Vector lt = local_times(loop, in.chain.m());
        double v = lt(x);
        for (int p : pts) v *= lt(p);
        return v;
      };
      if (std::all_of(pts.begin(), pts.end(), [&](int p) { return p == x; }))
        f.trivial_exact = trivial_monomial_mu(in.chain, x, 1 + static_cast<int>(pts.size()));
      rep.rows.push_back(detail::estimate_row(
          "soup route: mu(" + detail::pts_label(in.chain, pts) + " L(" +
              detail::state_name(in.chain, x) + "))",
          exact, campbell_estimate(batch.soups, f, in.alpha), gate, 1e-12));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// rotation: the rooted loop law is invariant under time rotation.
// ---------------------------------------------------------------------------

inline ExperimentReport exp_rotation(const ExperimentInput& in) {
  ExperimentReport rep = detail::begin_report(in);
  detail::SoupBatch batch =
      detail::make_batch(in.chain, in.alpha, in.samples, detail::role_seed(in, 0), in.workers);
  detail::note_table(rep, batch.table);
  const double gate = detail::z_gate(in);
  const int x0 = detail::state_param(in, "x", 0);
  const int y1 = in.chain.size() - 1;

  std::vector<double> shifts = {0.3, 1.7};
  if (detail::has_param(in, "shifts")) {
    shifts.clear();
    require(in.params.at("shifts").is_array(), Errc::schema_error, "shifts must be an array");
    for (const auto& e : in.params.at("shifts")) shifts.push_back(e.get<double>());
  }

  using RootFn = std::function<double(int)>;
  using LoopFn = std::function<double(const Path&)>;
  const std::vector<std::pair<std::string, RootFn>> roots = {
      {"1{root=" + detail::state_name(in.chain, x0) + "}",
       [x0](int s) { return s == x0 ? 1.0 : 0.0; }},
      {"lambda(root)", [&](int s) { return in.chain.lambda()(s); }},
  };
  const std::vector<std::pair<std::string, LoopFn>> bodies = {
      {"zeta", [](const Path& p) { return p.zeta(); }},
      {"L(" + detail::state_name(in.chain, y1) + ")",
       [&, y1](const Path& p) { return local_times(p, in.chain.m())(y1); }},
      {"first hold", [](const Path& p) { return p.holds.front(); }},
  };

  std::vector<double> values(in.samples);
  for (double v : shifts) {
    for (const auto& [rlab, rfn] : roots) {
      for (const auto& [blab, bfn] : bodies) {
        for (std::size_t i = 0; i < in.samples; ++i) {
          double d = 0.0;
          for (const Path& loop : batch.soups[i].loops) {
            Path rot = rotate(loop, v);
            d += rfn(rot.states.front()) * bfn(rot) - rfn(loop.states.front()) * bfn(loop);
          }
          values[i] = d / in.alpha;
        }
        rep.rows.push_back(mc_row("shift " + detail::fmt("%g", v) + ": d E[" + rlab + " * " +
                                      blab + "]",
                                  0.0, detail::mc_from_values(values), gate));
      }
    }
  }

  // Constant loops are fixed points of rotation — exactly, not just in law.
  double drift = 0.0;
  for (int x = 0; x < in.chain.size(); ++x) {
    for (double t : {0.25, 1.0}) {
      Path triv{{x}, {t}};
      for (double v : shifts) {
        Path rot = rotate(triv, v);
        for (const auto& [rlab, rfn] : roots) {
          (void)rlab;
          for (const auto& [blab, bfn] : bodies) {
            (void)blab;
            drift += std::abs(rfn(rot.states.front()) * bfn(rot) -
                              rfn(triv.states.front()) * bfn(triv));
          }
        }
      }
    }
  }
  rep.rows.push_back(exact_row("trivial loops rotate to themselves", 0.0, drift, 0.0));
  return rep;
}

// ---------------------------------------------------------------------------
// restriction: soup loops inside a subset form the killed chain's soup.
// ---------------------------------------------------------------------------

inline ExperimentReport exp_restriction(const ExperimentInput& in) {
  ExperimentReport rep = detail::begin_report(in);
  const int n = in.chain.size();
  std::vector<int> subset;
  if (detail::has_param(in, "subset")) {
    subset = detail::states_from_json(in.chain, in.params.at("subset"));
  } else {
    for (int x = 0; x < std::max(1, n - 1); ++x) subset.push_back(x);
  }

  KilledChain killed = killed_chain(in.chain, subset);
  const Matrix dual = killed_green_via_hitting(in.chain, subset);
  const double kernel_diff = (killed.chain.green_kernel() - dual).cwiseAbs().maxCoeff();
  rep.rows.push_back(
      exact_row("killed kernel: generator route vs hitting route", 0.0, kernel_diff, 1e-10));

  const double gate = detail::z_gate(in);
  detail::SoupBatch parent =
      detail::make_batch(in.chain, in.alpha, in.samples, detail::role_seed(in, 0), in.workers);
  detail::note_table(rep, parent.table);
  std::vector<Vector> restricted;
  restricted.reserve(in.samples);
  for (const SoupRealization& s : parent.soups)
    restricted.push_back(soup_local_times(restrict_soup(s, in.chain, subset), killed.chain));

  detail::SoupBatch direct = detail::make_batch(killed.chain, in.alpha, in.samples,
                                                detail::role_seed(in, 1), in.workers);

  const Matrix& uk = killed.chain.green_kernel();
  const int nb = static_cast<int>(subset.size());
  std::vector<std::vector<int>> ptsets = {{0}, {0, 0}};
  if (nb > 1) ptsets.push_back({0, 1});

  std::vector<double> values(in.samples);
  for (const std::vector<int>& pts : ptsets) {
    const double exact = permanental_moment(uk, pts, in.alpha);
    const std::string flab = "E[" + detail::pts_label(killed.chain, pts) + "]";
    for (std::size_t i = 0; i < in.samples; ++i) {
      double v = 1.0;
      for (int p : pts) v *= restricted[i](p);
      values[i] = v;
    }
    rep.rows.push_back(
        mc_row("restricted parent soup: " + flab, exact, detail::mc_from_values(values), gate));
    for (std::size_t i = 0; i < in.samples; ++i) {
      double v = 1.0;
      for (int p : pts) v *= direct.lts[i](p);
      values[i] = v;
    }
    rep.rows.push_back(
        mc_row("killed chain soup: " + flab, exact, detail::mc_from_values(values), gate));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// spacemap: relabeling transports every object entrywise.
// ---------------------------------------------------------------------------

inline ExperimentReport exp_spacemap(const ExperimentInput& in) {
  ExperimentReport rep = detail::begin_report(in);
  const int n = in.chain.size();
  std::map<std::string, std::string> sigma;
  if (detail::has_param(in, "map")) {
    require(in.params.at("map").is_object(), Errc::schema_error, "map must be an object");
    for (const auto& [from, to] : in.params.at("map").items()) {
      require(to.is_string(), Errc::schema_error, "map targets must be labels");
      sigma[from] = to.get<std::string>();
    }
  } else {
    for (int x = 0; x < n; ++x)
      sigma[detail::state_name(in.chain, x)] = detail::state_name(in.chain, n - 1 - x);
  }

  auto [mapped, idx] = relabeled_chain(in.chain, sigma);
  const Matrix& u = in.chain.green_kernel();
  const Matrix& um = mapped.green_kernel();
  double kernel_diff = 0.0, rate_diff = 0.0;
  for (int x = 0; x < n; ++x) {
    rate_diff = std::max(rate_diff, std::abs(mapped.lambda()(idx[static_cast<std::size_t>(x)]) -
                                             in.chain.lambda()(x)));
    for (int y = 0; y < n; ++y)
      kernel_diff = std::max(kernel_diff, std::abs(um(idx[static_cast<std::size_t>(x)],
                                                      idx[static_cast<std::size_t>(y)]) -
                                                   u(x, y)));
  }
  rep.rows.push_back(exact_row("kernel transport u'(sx,sy) = u(x,y)", 0.0, kernel_diff, 1e-12));
  rep.rows.push_back(exact_row("rate transport lambda'(sx) = lambda(x)", 0.0, rate_diff, 1e-12));

  const double gate = detail::z_gate(in);
  detail::SoupBatch batch =
      detail::make_batch(mapped, in.alpha, in.samples, detail::role_seed(in, 0), in.workers);
  detail::note_table(rep, batch.table);
  std::vector<double> values(in.samples);
  const int mx = idx[0];
  for (std::size_t i = 0; i < in.samples; ++i) values[i] = batch.lts[i](mx);
  rep.rows.push_back(mc_row("mapped soup: E[L'(s " + detail::state_name(in.chain, 0) + ")]",
                            in.alpha * u(0, 0), detail::mc_from_values(values), gate));
  if (n > 1) {
    const int my = idx[1];
    for (std::size_t i = 0; i < in.samples; ++i) values[i] = batch.lts[i](mx) * batch.lts[i](my);
    rep.rows.push_back(mc_row("mapped soup: joint moment transports",
                              permanental_moment(u, {0, 1}, in.alpha),
                              detail::mc_from_values(values), gate));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// timechange: clock changes by a density and by an atomic measure.
// ---------------------------------------------------------------------------

inline ExperimentReport exp_timechange(const ExperimentInput& in) {
  ExperimentReport rep = detail::begin_report(in);
  const int n = in.chain.size();
  const Matrix& u = in.chain.green_kernel();
  const double gate = detail::z_gate(in);

  Vector h(n);
  for (int i = 0; i < n; ++i) h(i) = 0.75 + 0.25 * (i + 1);
  if (detail::has_param(in, "h")) h = detail::vector_from_json(in.params.at("h"), n, "h");
  Chain tc = time_changed_density(in.chain, h);
  rep.rows.push_back(exact_row("density change h=" + detail::vec_label(h) + ": kernel invariant",
                               0.0, (tc.green_kernel() - u).cwiseAbs().maxCoeff(), 1e-12));

  detail::SoupBatch tcb =
      detail::make_batch(tc, in.alpha, in.samples, detail::role_seed(in, 0), in.workers);
  detail::note_table(rep, tcb.table);
  std::vector<double> values(in.samples);
  for (std::size_t i = 0; i < in.samples; ++i) values[i] = tcb.lts[i](0);
  rep.rows.push_back(mc_row("density-changed soup: E[L(" + detail::state_name(in.chain, 0) + ")]",
                            in.alpha * u(0, 0), detail::mc_from_values(values), gate));

  std::vector<int> support = {0};
  if (detail::has_param(in, "support"))
    support = detail::states_from_json(in.chain, in.params.at("support"));
  Vector w = Vector::Ones(static_cast<Eigen::Index>(support.size()));
  if (detail::has_param(in, "weights"))
    w = detail::vector_from_json(in.params.at("weights"), static_cast<int>(support.size()),
                                 "weights");
  MeasureChange mc = time_changed_measure(in.chain, support, w);
  const int ns = static_cast<int>(support.size());
  Matrix gy(ns, ns);
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < ns; ++j)
      gy(i, j) = u(support[static_cast<std::size_t>(i)], support[static_cast<std::size_t>(j)]) * w(j);
  rep.rows.push_back(exact_row("measure change: Green identity (-L_Y)^{-1} = U w", 0.0,
                               (mc.chain.green_matrix() - gy).cwiseAbs().maxCoeff(), 1e-10));
  if (ns == 1) {
    const int s = support[0];
    rep.rows.push_back(exact_row("single-atom support: rate = 1/(u(s,s) w)",
                                 1.0 / (u(s, s) * w(0)), mc.chain.lambda()(0), 1e-12));
  }

  detail::SoupBatch mcb =
      detail::make_batch(mc.chain, in.alpha, in.samples, detail::role_seed(in, 1), in.workers);
  for (std::size_t i = 0; i < in.samples; ++i) values[i] = mcb.lts[i](0);
  rep.rows.push_back(
      mc_row("measure-changed soup: E[L_Y(" + detail::state_name(in.chain, support[0]) + ")]",
             in.alpha * u(support[0], support[0]), detail::mc_from_values(values), gate));
  return rep;
}

// ---------------------------------------------------------------------------
// unitweight: mu(zeta H) = sum_x m(x) Q(x,x)[H], soup and bridge routes.
// ---------------------------------------------------------------------------

inline ExperimentReport exp_unitweight(const ExperimentInput& in) {
  ExperimentReport rep = detail::begin_report(in);
  detail::SoupBatch batch =
      detail::make_batch(in.chain, in.alpha, in.samples, detail::role_seed(in, 0), in.workers);
  detail::note_table(rep, batch.table);
  const double gate = detail::z_gate(in);
  const Matrix& u = in.chain.green_kernel();
  const int n = in.chain.size();
  const int x0 = detail::state_param(in, "x", 0);
  const std::string xl = detail::state_name(in.chain, x0);

  auto zeta_exact = [&](const std::vector<int>& pts) {
    double total = 0.0;
    for (int x = 0; x < n; ++x) total += in.chain.m()(x) * q_moment(u, x, x, pts);
    return total;
  };

  // per-realization bridge values: one path per anchor state per realization
  const std::uint64_t qseed = detail::role_seed(in, 1);
  std::vector<double> bridge2(in.samples);
  double mass_sum = 0.0;
  for (int x = 0; x < n; ++x) mass_sum += in.chain.m()(x) * u(x, x);
  for (std::size_t i = 0; i < in.samples; ++i) {
    Rng rng(derive_stream(qseed, i));
    double v2 = 0.0;
    for (int x = 0; x < n; ++x) {
      std::optional<Path> path = sample_q_path(in.chain, x, x, rng);  // always accepts
      Vector lt = local_times(*path, in.chain.m());
      v2 += in.chain.m()(x) * u(x, x) * lt(x0);
    }
    bridge2[i] = v2;
  }

  {  // F = zeta
    LoopFunctional f;
    f.nontrivial = [](const Path& loop) { return loop.zeta(); };
    f.trivial_aggregate = [&](const Vector& lt) { return lt.dot(in.chain.m()); };
    const double exact = zeta_exact({});
    rep.rows.push_back(
        mc_row("soup route: mu(zeta)", exact, campbell_estimate(batch.soups, f, in.alpha), gate));
    // every draw from x is accepted (the start is its own last exit), so the
    // bridge route degenerates to the exact mass identity
    rep.rows.push_back(exact_row("bridge route: sum_x m Q(x,x)[1]", exact, mass_sum, 0.0));
  }
  {  // F = zeta * L(x0)
    LoopFunctional f;
    f.nontrivial = [&](const Path& loop) {
      return loop.zeta() * local_times(loop, in.chain.m())(x0);
    };
    f.trivial_exact = in.chain.m()(x0) * trivial_monomial_mu(in.chain, x0, 2);
    const double exact = zeta_exact({x0});
    rep.rows.push_back(detail::estimate_row("soup route: mu(zeta L(" + xl + "))", exact,
                                            campbell_estimate(batch.soups, f, in.alpha), gate,
                                            1e-12));
    rep.rows.push_back(mc_row("bridge route: sum_x m Q(x,x)[L(" + xl + ")]", exact,
                              detail::mc_from_values(bridge2), gate));
  }
  {  // F = L(x0)
    LoopFunctional f;
    f.nontrivial = [&](const Path& loop) { return local_times(loop, in.chain.m())(x0); };
    f.trivial_aggregate = [x0](const Vector& lt) { return lt(x0); };
    const double exact = q_moment(u, x0, x0, {});
    rep.rows.push_back(mc_row("soup route: mu(L(" + xl + "))", exact,
                              campbell_estimate(batch.soups, f, in.alpha), gate));
    rep.rows.push_back(exact_row("bridge route: Q(" + xl + "," + xl + ") always accepts", exact,
                                 u(x0, x0), 0.0));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// bridge: finite-dimensional loop-measure probabilities by quadrature.
// ---------------------------------------------------------------------------

/// mu(X at times t_1<..<t_k equals a_1..a_k) =
///   prod_{j>=2} [p_{t_j - t_{j-1}}(a_{j-1}, a_j) m(a_j)] *
///   m(a_1) * integral over s in (t_1, inf) of (s + t_k - t_1)^{-1} p_s(a_k, a_1) ds.
/// The tail beyond T is certified by (T + t_k - t_1)^{-1} [G e^{TL}](a_k, a_1).
inline double bridge_fdd_exact(const Chain& chain, const std::vector<double>& times,
                               const std::vector<int>& sts) {
  const std::size_t k = times.size();
  require(k >= 1 && sts.size() == k, Errc::out_of_domain,
          "need equally many times and states, at least one");
  require(times[0] > 0.0, Errc::out_of_domain, "times must be positive");
  for (std::size_t j = 1; j < k; ++j)
    require(times[j] > times[j - 1], Errc::out_of_domain, "times must be strictly increasing");

  double prefix = 1.0;
  for (std::size_t j = 1; j < k; ++j)
    prefix *= transition_density(chain, times[j] - times[j - 1])(sts[j - 1], sts[j]) *
              chain.m()(sts[j]);
  if (prefix == 0.0) return 0.0;

  const double c = times.back() - times.front();
  const int ak = sts.back(), a1 = sts.front();
  const Matrix& el = chain.generator();
  double t1 = times.front();
  double big = std::max(2.0 * t1, 1.0);
  for (;;) {
    const double tail =
        (chain.green_matrix() * (big * el).exp().eval())(ak, a1) / (big + c);
    if (tail < 1e-12) break;
    big *= 2.0;
    require(big < 1e9, Errc::quadrature_failure, "integral tail does not decay");
  }
  double err = 0.0;
  const double val = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      [&](double s) { return ((s * el).exp().eval())(ak, a1) / (s + c); }, t1, big, 12, 1e-10,
      &err);
  require(std::isfinite(val) && err < 1e-6 * std::max(1.0, std::abs(val)),
          Errc::quadrature_failure, "bridge quadrature did not converge");
  return prefix * val;
}

inline ExperimentReport exp_bridge(const ExperimentInput& in) {
  ExperimentReport rep = detail::begin_report(in);
  detail::SoupBatch batch =
      detail::make_batch(in.chain, in.alpha, in.samples, detail::role_seed(in, 0), in.workers);
  detail::note_table(rep, batch.table);
  const double gate = detail::z_gate(in);
  const int n = in.chain.size();

  struct Case {
    std::vector<double> times;
    std::vector<int> sts;
  };
  std::vector<Case> cases;
  if (detail::has_param(in, "cases")) {
    require(in.params.at("cases").is_array(), Errc::schema_error, "cases must be an array");
    for (const auto& e : in.params.at("cases")) {
      Case cs;
      require(e.is_object() && e.contains("times") && e.contains("path"), Errc::schema_error,
              "each case needs times and path");
      for (const auto& t : e.at("times")) cs.times.push_back(t.get<double>());
      cs.sts = detail::states_from_json(in.chain, e.at("path"));
      cases.push_back(std::move(cs));
    }
  } else {
    cases.push_back({{0.7}, {0}});
    if (n > 1) {
      cases.push_back({{0.4, 1.0}, {0, 1}});
      cases.push_back({{0.4, 1.0}, {0, 0}});
    }
  }

  std::vector<double> values(in.samples);
  for (const Case& cs : cases) {
    std::string lab = "[";
    for (std::size_t j = 0; j < cs.times.size(); ++j)
      lab += (j ? ", " : "") + detail::state_name(in.chain, cs.sts[j]) + "@" +
             detail::fmt("%g", cs.times[j]);
    lab += "]";

    const double exact = bridge_fdd_exact(in.chain, cs.times, cs.sts);
    if (n == 1)
      rep.rows.push_back(exact_row("quadrature vs E1 closed form " + lab,
                                   expint_e1(in.chain.lambda()(0) * cs.times.back()), exact,
                                   1e-6));

    const bool all_equal =
        std::all_of(cs.sts.begin(), cs.sts.end(), [&](int s) { return s == cs.sts[0]; });
    LoopFunctional f;
    f.nontrivial = [&](const Path& loop) {
      for (std::size_t j = 0; j < cs.times.size(); ++j)
        if (loop.state_at(cs.times[j]) != cs.sts[j]) return 0.0;
      return 1.0;
    };
    if (all_equal)
      f.trivial_exact = expint_e1(in.chain.lambda()(cs.sts[0]) * cs.times.back());
    // on a chain with no nontrivial loops the soup side is the closed-form
    // trivial term, compared against the quadrature at quadrature accuracy
    rep.rows.push_back(detail::estimate_row("soup occupation " + lab, exact,
                                            campbell_estimate(batch.soups, f, in.alpha), gate,
                                            1e-6));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {
      "moments",     "mgf",      "isomorphism", "qmu",        "rotation",
      "restriction", "spacemap", "timechange",  "unitweight", "bridge"};
  return names;
}

inline ExperimentReport run_experiment(const ExperimentInput& in) {
  using Fn = ExperimentReport (*)(const ExperimentInput&);
  static const std::map<std::string, Fn> registry = {
      {"moments", exp_moments},         {"mgf", exp_mgf},
      {"isomorphism", exp_isomorphism}, {"qmu", exp_qmu},
      {"rotation", exp_rotation},       {"restriction", exp_restriction},
      {"spacemap", exp_spacemap},       {"timechange", exp_timechange},
      {"unitweight", exp_unitweight},   {"bridge", exp_bridge}};
  auto it = registry.find(in.name);
  require(it != registry.end(), Errc::unknown_experiment, "unknown experiment: " + in.name);
  require(in.samples > 0, Errc::out_of_domain, "samples must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep = it->second(in);
  rep.runtime_sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::size_t mc_rows = 0;
  for (const Row& r : rep.rows)
    if (r.mc) ++mc_rows;
  if (mc_rows > 20)
    rep.notes.push_back("multiple comparisons: " + std::to_string(mc_rows) +
                        " Monte Carlo rows share one z gate; rare isolated excursions are "
                        "statistically expected");
  return rep;
}

}  // namespace loopsoup
