// Acceptance harness: exercises the ten advertised guarantees end to end and
// prints one PASS/FAIL line per criterion.
//
// Usage: acceptance <loopsoup-cli-binary> <configs-dir>

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <loopsoup/config.hpp>
#include <loopsoup/estimator.hpp>
#include <loopsoup/experiments.hpp>
#include <loopsoup/report.hpp>
#include <loopsoup/transform.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"

namespace {

using namespace loopsoup;
namespace fs = std::filesystem;

struct Checker {
  bool ok = true;
  std::string detail;
  void expect(bool cond, const std::string& msg) {
    if (!cond && ok) {
      ok = false;
      detail = msg;
    }
  }
  void expect_near(double got, double want, double tol, const std::string& what) {
    expect(std::abs(got - want) <= tol,
           what + ": got " + std::to_string(got) + ", want " + std::to_string(want));
  }
  void expect_report(const ExperimentReport& rep) {
    if (rep.passed()) return;
    for (const Row& r : rep.rows)
      if (!r.passed) {
        expect(false, rep.name + "/" + rep.chain + " row failed: " + r.label);
        return;
      }
    expect(false, rep.name + "/" + rep.chain + " failed without rows");
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ExperimentInput make_input(std::string name, const Chain& chain, std::string label, double alpha,
                           std::size_t samples, std::uint64_t seed,
                           nlohmann::json params = nlohmann::json::object()) {
  return ExperimentInput{.name = std::move(name),
                         .chain_label = std::move(label),
                         .chain = chain,
                         .alpha = alpha,
                         .samples = samples,
                         .seed = seed,
                         .workers = 4,
                         .params = std::move(params)};
}

const Row* find_row(const ExperimentReport& rep, const std::string& needle) {
  for (const Row& r : rep.rows)
    if (r.label.find(needle) != std::string::npos) return &r;
  return nullptr;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream out;
  out << f.rdbuf();
  return out.str();
}

int run_cli(const std::string& cli, const std::string& args, const fs::path& stdout_file) {
  const std::string cmd =
      "\"" + cli + "\" " + args + " > \"" + stdout_file.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

int failures = 0;

template <class F>
void criterion(int idx, const std::string& label, F&& body) {
  Checker c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  const double dt = seconds_since(t0);
  std::printf("[%s] %2d. %s (%.2fs)%s\n", c.ok ? "PASS" : "FAIL", idx, label.c_str(), dt,
              c.ok ? "" : (" -- " + c.detail).c_str());
  std::fflush(stdout);
  if (!c.ok) ++failures;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::fprintf(stderr, "usage: acceptance <loopsoup-cli-binary> <configs-dir>\n");
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path configs = argv[2];
  const fs::path tmp = fs::temp_directory_path() / "loopsoup-acceptance";
  fs::create_directories(tmp);
  const auto wall0 = std::chrono::steady_clock::now();

  // 1. Exact kernel algebra on a spread of random chains.
  criterion(1, "kernel algebra: (-L)G = I and the resolvent identity on 50 random chains",
            [&](Checker& c) {
              const auto t0 = std::chrono::steady_clock::now();
              Rng rng(11);
              for (int i = 0; i < 50; ++i) {
                const int n = 1 + static_cast<int>(rng.bits() % 6);
                const Chain ch = fixtures::random_chain(rng, n);
                const Matrix id = Matrix::Identity(n, n);
                c.expect(((-ch.generator()) * ch.green_matrix() - id).cwiseAbs().maxCoeff() < 1e-10,
                         "(-L)G != I");
                const double a = 0.4, b = 1.3;
                const Matrix ua = resolvent_kernel(ch, a), ub = resolvent_kernel(ch, b);
                const Matrix res = ua - ub - (b - a) * ua * ch.m().asDiagonal() * ub;
                c.expect(res.cwiseAbs().maxCoeff() < 1e-10, "resolvent identity residual > 1e-10");
                c.expect((resolvent_kernel(ch, 0.0) - ch.green_kernel()).cwiseAbs().maxCoeff() <
                             1e-10,
                         "beta=0 resolvent != u");
              }
              c.expect(seconds_since(t0) < 1.0, "kernel algebra took >= 1s");
            });

  // 2. Local times form a permanental field: all moments up to order 3.
  criterion(2, "permanental moments of soup local times (3 chains x alpha in {0.5,1,2})",
            [&](Checker& c) {
              const struct {
                const char* label;
                Chain chain;
              } chains[] = {{"c2", fixtures::c2()},
                            {"cycle3", fixtures::cycle3()},
                            {"one", fixtures::single()}};
              std::uint64_t seed = 4200;
              for (const auto& [label, chain] : chains) {
                const auto t0 = std::chrono::steady_clock::now();
                for (double alpha : {0.5, 1.0, 2.0}) {
                  const auto rep =
                      run_experiment(make_input("moments", chain, label, alpha, 100000, seed++));
                  c.expect_report(rep);
                  if (label == std::string("c2") && alpha == 1.0) {
                    const Row* r = find_row(rep, "E[L(a) L(b)]");
                    c.expect(r != nullptr, "no E[L(a) L(b)] row");
                    if (r) c.expect_near(r->exact, 5.0 / 9.0, 1e-12, "E[L(a) L(b)] anchor");
                  }
                }
                c.expect(seconds_since(t0) < 60.0, std::string(label) + " moments took >= 60s");
              }
              c.expect_near(permanental_moment(fixtures::c2().green_kernel(), {0, 1}, 1.0),
                            5.0 / 9.0, 1e-12, "alpha-permanent closed form");
            });

  // 3. Exponential moments: determinant identities and their MC counterparts.
  criterion(3, "moment generating function and Laplace determinant identities", [&](Checker& c) {
    const Chain c2 = fixtures::c2();
    Vector c10(2);
    c10 << 1.0, 0.0;
    c.expect_near(soup_laplace_exact(c2.green_kernel(), c10, 1.0), 3.0 / 5.0, 1e-12,
                  "Laplace anchor det(I+U diag(1,0))^{-1}");

    const auto rep = run_experiment(make_input("mgf", c2, "c2", 1.0, 100000, 4300));
    c.expect_report(rep);
    const Row* series = find_row(rep, "trace-log");
    c.expect(series != nullptr && series->tol == 1e-8, "trace-log series row at 1e-8 missing");
    const Row* lap = find_row(rep, "E[exp-<c,L>] c=(1,0)");
    c.expect(lap != nullptr, "Laplace MC row missing");
    if (lap) c.expect_near(lap->exact, 3.0 / 5.0, 1e-12, "Laplace row anchor");

    const auto rep1 = run_experiment(
        make_input("mgf", fixtures::single(), "one", 1.0, 100000, 4301,
                   nlohmann::json{{"z", {0.5}}}));
    c.expect_report(rep1);
    const Row* det = find_row(rep1, "mgf determinant");
    c.expect(det != nullptr, "determinant row missing");
    if (det) c.expect_near(det->exact, 2.0, 1e-12, "E[exp(L/2)] = 2 anchor");
  });

  // 4. Isomorphism between the perturbed kernel and the Laplace derivative.
  criterion(4, "isomorphism: u_c(x,x) vs normalized derivative of the Laplace functional",
            [&](Checker& c) {
              const auto t0 = std::chrono::steady_clock::now();
              const Chain c2 = fixtures::c2();
              Vector c10(2);
              c10 << 1.0, 0.0;
              const Matrix uc = perturbed_kernel(c2, c10);
              c.expect_near(uc(0, 0), 2.0 / 5.0, 1e-12, "perturbed kernel u_c(a,a)");
              c.expect_near(uc(0, 0) * soup_laplace_exact(c2.green_kernel(), c10, 1.0), 6.0 / 25.0,
                            1e-12, "isomorphism LHS anchor at c=(1,0)");

              std::uint64_t seed = 4400;
              for (double alpha : {1.0, 2.0})
                for (const char* x : {"a", "b"}) {
                  const auto rep = run_experiment(make_input("isomorphism", c2, "c2", alpha, 100000,
                                                             seed++, nlohmann::json{{"x", x}}));
                  c.expect_report(rep);
                }
              c.expect_report(run_experiment(
                  make_input("isomorphism", fixtures::askew(), "askew", 1.0, 100000, seed)));
              c.expect(seconds_since(t0) < 120.0, "isomorphism took >= 120s");
            });

  // 5. Rooted-loop moments: Campbell route, bridge sampler, closed form.
  criterion(5, "rooted loop measure moments agree across three routes", [&](Checker& c) {
    const Chain c2 = fixtures::c2();
    const Matrix& u = c2.green_kernel();
    c.expect_near(cyclic_mu_moment(u, {0}), 2.0 / 3.0, 1e-12, "mu[L(a)] anchor");
    c.expect_near(cyclic_mu_moment(u, {0, 1}), 1.0 / 9.0, 1e-12, "mu[L(a)L(b)] anchor");
    c.expect_near(q_moment(u, 0, 0, {0}), 4.0 / 9.0, 1e-12, "Q(a,a)[L(a)] anchor");

    c.expect_report(run_experiment(make_input("qmu", fixtures::c2(), "c2", 1.0, 100000, 4500)));
    c.expect_report(
        run_experiment(make_input("qmu", fixtures::askew(), "askew", 1.0, 100000, 4501)));
  });

  // 6. The loop measure does not see the choice of root time.
  criterion(6, "rotation invariance of loop functionals", [&](Checker& c) {
    for (const auto& [label, chain] :
         {std::pair<const char*, Chain>{"c2", fixtures::c2()},
          std::pair<const char*, Chain>{"askew", fixtures::askew()}}) {
      const auto rep = run_experiment(make_input("rotation", chain, label, 1.0, 100000,
                                                 label == std::string("c2") ? 4600 : 4601));
      c.expect_report(rep);
      int mc_rows = 0;
      for (const Row& r : rep.rows)
        if (r.mc) ++mc_rows;
      c.expect(mc_rows >= 6, "fewer than 6 rotation combinations");
      const Row* triv = find_row(rep, "rotate to themselves");
      c.expect(triv != nullptr && triv->estimate == 0.0 && triv->passed,
               "one-visit loops not exactly rotation-fixed");
    }
  });

  // 7. Restriction: the soup inside a subdomain is the subdomain's soup.
  criterion(7, "restriction to a subdomain matches the killed chain's soup", [&](Checker& c) {
    const Chain c2 = fixtures::c2();
    const KilledChain ka = killed_chain(c2, {0});
    c.expect_near(ka.chain.green_kernel()(0, 0), 0.5, 1e-12, "restricted kernel anchor");

    const Chain askew = fixtures::askew(), cycle3 = fixtures::cycle3();
    const struct {
      const Chain* chain;
      std::vector<int> subset;
    } fixture_cuts[] = {{&c2, {0}}, {&askew, {0, 1}}, {&askew, {1, 2}}, {&cycle3, {0, 2}}};
    for (const auto& [chain, subset] : fixture_cuts)
      c.expect((killed_chain(*chain, subset).chain.green_kernel() -
                killed_green_via_hitting(*chain, subset))
                       .cwiseAbs()
                       .maxCoeff() < 1e-10,
               "killed Green dual-route residual > 1e-10 on a fixture");

    Rng rng(77);
    for (int i = 0; i < 20; ++i) {
      const Chain ch = fixtures::random_chain(rng, 3 + static_cast<int>(rng.bits() % 3));
      std::vector<int> subset;
      for (int x = 0; x < ch.size(); ++x)
        if (x == 0 || rng.uniform() < 0.5) subset.push_back(x);
      const Matrix direct = killed_chain(ch, subset).chain.green_kernel();
      const Matrix hitting = killed_green_via_hitting(ch, subset);
      const double scale = std::max(1.0, hitting.cwiseAbs().maxCoeff());
      c.expect((direct - hitting).cwiseAbs().maxCoeff() < 1e-10 * scale,
               "killed Green dual-route relative residual > 1e-10");
    }

    c.expect_report(
        run_experiment(make_input("restriction", fixtures::askew(), "askew", 1.0, 100000, 4700)));
    c.expect_report(run_experiment(make_input("restriction", fixtures::cycle3(), "cycle3", 1.0,
                                              100000, 4701,
                                              nlohmann::json{{"subset", {"a", "b"}}})));
  });

  // 8. Transformations: space bijections, time changes, measure changes.
  criterion(8, "space-map, time-change, and measure-change transport", [&](Checker& c) {
    c.expect_report(
        run_experiment(make_input("spacemap", fixtures::askew(), "askew", 1.0, 100000, 4800)));
    c.expect_report(
        run_experiment(make_input("timechange", fixtures::askew(), "askew", 1.0, 100000, 4801)));
    c.expect_report(
        run_experiment(make_input("unitweight", fixtures::c2(), "c2", 1.0, 100000, 4802)));

    const Chain c2 = fixtures::c2();
    const MeasureChange tc = time_changed_measure(c2, {0}, Vector::Ones(1));
    c.expect_near(tc.chain.lambda()(0), 1.5, 1e-12, "single-atom trace chain rate");

    const Matrix& u = c2.green_kernel();
    double total = 0.0;
    for (int x = 0; x < 2; ++x) total += c2.m()(x) * q_moment(u, x, x, {0});
    c.expect_near(total, 5.0 / 9.0, 1e-12, "unit-weight occupation anchor");
  });

  // 9. Occupation-field time marginals via quadrature and via the soup.
  criterion(9, "bridge occupation laws: quadrature route vs sampled soups", [&](Checker& c) {
    const Chain one = fixtures::single();
    c.expect_near(bridge_fdd_exact(one, {0.7}, {0}), expint_e1(0.7), 1e-6,
                  "single-state closed form E1(0.7)");

    c.expect_report(run_experiment(make_input("bridge", one, "one", 1.0, 100000, 4900)));
    c.expect_report(run_experiment(make_input("bridge", fixtures::c2(), "c2", 1.0, 100000, 4901)));
  });

  // 10. The CLI round trip is exact, deterministic, and fast.
  criterion(10, "command line: validation, kernels, sampling, reproducible suite runs",
            [&](Checker& c) {
              const fs::path out = tmp / "cli_out.txt";
              const std::string chain = (configs / "c2.json").string();
              const std::string suite = (configs / "suite.json").string();

              c.expect(run_cli(cli, "validate \"" + chain + "\"", out) == 0, "validate exited nonzero");
              c.expect(slurp(out).find("chain OK") != std::string::npos,
                       "validate output missing summary");

              const fs::path csv = tmp / "u.csv";
              c.expect(run_cli(cli, "green \"" + chain + "\" --csv \"" + csv.string() + "\"", out) ==
                           0,
                       "green exited nonzero");
              c.expect(slurp(csv) ==
                           "state,a,b\na,0.666667,0.333333\nb,0.333333,0.666667\n",
                       "green CSV mismatch");

              const fs::path jsonl = tmp / "soup.jsonl";
              c.expect(run_cli(cli,
                               "sample-soup \"" + chain + "\" --alpha 1.0 --seed 3 "
                               "--realizations 5 --out \"" + jsonl.string() + "\"",
                               out) == 0,
                       "sample-soup exited nonzero");
              {
                std::ifstream f(jsonl);
                std::string line;
                int lines = 0;
                while (std::getline(f, line)) {
                  const auto doc = nlohmann::json::parse(line);
                  c.expect(doc.contains("index") && doc.contains("alpha") &&
                               doc.contains("trivial") && doc.contains("loops"),
                           "JSONL record missing keys");
                  ++lines;
                }
                c.expect(lines == 5, "expected 5 JSONL records");
              }

              const fs::path r1 = tmp / "r1.json", r2 = tmp / "r2.json";
              c.expect(run_cli(cli, "run \"" + suite + "\" --seed 42 --out \"" + r1.string() + "\"",
                               out) == 0,
                       "suite run 1 failed");
              c.expect(run_cli(cli, "run \"" + suite + "\" --seed 42 --out \"" + r2.string() + "\"",
                               out) == 0,
                       "suite run 2 failed");
              const std::string b1 = slurp(r1), b2 = slurp(r2);
              c.expect(!b1.empty() && b1 == b2, "seed-42 reports are not byte-identical");
              if (!b1.empty()) {
                const auto doc = nlohmann::json::parse(b1);
                c.expect(doc.at("passed").get<bool>(), "stored suite report records failures");
              }
              c.expect(run_cli(cli, "report \"" + r1.string() + "\"", out) == 0,
                       "report re-render failed");

              const fs::path bad = tmp / "bad.json";
              std::ofstream(bad) << "{ this is not json";
              c.expect(run_cli(cli, "validate \"" + bad.string() + "\"", out) == 2,
                       "malformed JSON should exit 2");

              nlohmann::json broken = nlohmann::json::parse(slurp(suite));
              broken["experiments"][0]["experiment"] = "frobnicate";
              const fs::path badsuite = tmp / "bad_suite.json";
              std::ofstream(badsuite) << broken.dump();
              c.expect(run_cli(cli, "run \"" + badsuite.string() + "\"", out) == 2,
                       "unknown experiment should exit 2");
            });

  const double wall = seconds_since(wall0);
  const bool in_budget = wall < 600.0;
  std::printf("%s acceptance: %d/10 criteria passed in %.1fs%s\n",
              failures == 0 && in_budget ? "[PASS]" : "[FAIL]", 10 - failures, wall,
              in_budget ? "" : " (budget 600s exceeded)");
  return failures == 0 && in_budget ? 0 : 1;
}
