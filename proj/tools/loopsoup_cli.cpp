// Command-line front end: validate chain files, print Green/resolvent
// kernels, draw loop-soup realizations, and run experiment suites.
//
// Exit codes: 0 success; 1 domain failure (invalid chain, failed experiment
// rows); 2 malformed input (JSON schema, unknown experiment, bad references,
// command-line usage).

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "loopsoup/config.hpp"
#include "loopsoup/report.hpp"

namespace {

using namespace loopsoup;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::schema_error:
    case Errc::unknown_experiment:
    case Errc::bad_chain:
      return 2;
    default:
      return 1;
  }
}

Chain load_chain(const std::string& path) {
  return Chain::validate(chain_spec_from_json(load_json_file(path)));
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  require(f.good(), Errc::schema_error, "cannot open file for writing: " + path);
  f << text;
  require(f.good(), Errc::schema_error, "failed writing file: " + path);
}

int cmd_validate(const std::string& chain_path) {
  const Chain chain = load_chain(chain_path);
  std::cout << "chain OK: " << chain.size() << " state" << (chain.size() == 1 ? "" : "s")
            << ", transient, " << (chain.irreducible() ? "irreducible" : "reducible") << "\n";
  std::cout << detail::pad("state", 12) << detail::pad("lambda", 14) << detail::pad("death-prob", 14)
            << detail::pad("E[lifetime]", 14) << "\n";
  const Vector life = chain.expected_lifetime();
  for (int x = 0; x < chain.size(); ++x)
    std::cout << detail::pad(chain.states()[static_cast<std::size_t>(x)], 12)
              << detail::pad(detail::fmt("%.6f", chain.lambda()(x)), 14)
              << detail::pad(detail::fmt("%.6f", chain.death_prob(x)), 14)
              << detail::pad(detail::fmt("%.6f", life(x)), 14) << "\n";
  return 0;
}

int cmd_green(const std::string& chain_path, std::optional<double> resolvent,
              const std::string& csv_path) {
  const Chain chain = load_chain(chain_path);
  const Matrix u = resolvent ? resolvent_kernel(chain, *resolvent) : chain.green_kernel();
  const std::string csv = kernel_csv(chain, u);
  std::cout << csv;
  if (!csv_path.empty()) write_text_file(csv_path, csv);
  return 0;
}

int cmd_sample_soup(const std::string& chain_path, double alpha, std::uint64_t seed,
                    std::size_t realizations, const std::string& out_path) {
  const Chain chain = load_chain(chain_path);
  const DiscreteLoopTable table = build_loop_table(chain, alpha);
  std::string out;
  for (std::size_t i = 0; i < realizations; ++i) {
    Rng rng(derive_stream(seed, i));
    const SoupRealization real = sample_soup(chain, table, rng);
    out += realization_to_json(real, chain, i).dump();
    out += "\n";
  }
  if (out_path.empty())
    std::cout << out;
  else
    write_text_file(out_path, out);
  return 0;
}

int cmd_run(const std::string& suite_path, std::optional<std::uint64_t> seed,
            std::optional<int> workers, const std::string& out_path) {
  const SuiteConfig cfg = suite_from_json(load_json_file(suite_path));
  const auto reps = run_suite(cfg, SuiteRunOptions{seed, workers});
  std::cout << render_suite(reps, /*with_runtime=*/true);
  if (!out_path.empty()) {
    write_text_file(out_path, suite_json(reps).dump(2) + "\n");
    std::cout << "report written to " << out_path << "\n";
  }
  for (const auto& rep : reps)
    if (!rep.passed()) return 1;
  return 0;
}

int cmd_report(const std::string& report_path) {
  const nlohmann::json j = load_json_file(report_path);
  std::vector<ExperimentReport> reps;
  try {
    if (j.is_object() && j.contains("experiments"))
      for (const auto& r : j.at("experiments")) reps.push_back(report_from_json(r));
    else
      reps.push_back(report_from_json(j));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::schema_error,
         "not a report document: " + report_path + " (" + std::string(e.what()) + ")");
  }
  std::cout << render_suite(reps, /*with_runtime=*/false);
  for (const auto& rep : reps)
    if (!rep.passed()) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "loop-soup toolkit for finite transient Markov chains: exact kernels,\n"
      "permanental moments, and Monte Carlo experiment suites"};
  app.require_subcommand(1);

  std::string chain_path, suite_path, report_path, csv_path, out_path;
  double alpha = 1.0, resolvent = 0.0;
  std::uint64_t seed = 1, run_seed = 0;
  std::size_t realizations = 10;
  int workers = 1;

  auto* validate = app.add_subcommand("validate", "check a chain file and print its summary");
  validate->add_option("chain", chain_path, "chain JSON file")->required();

  auto* green = app.add_subcommand("green", "print the Green kernel u(x,y) as CSV");
  green->add_option("chain", chain_path, "chain JSON file")->required();
  green->add_option("--resolvent", resolvent,
                    "print the beta-resolvent kernel for this beta instead of u");
  green->add_option("--csv", csv_path, "also write the CSV to this file");

  auto* sample = app.add_subcommand("sample-soup", "draw soup realizations as JSON lines");
  sample->add_option("chain", chain_path, "chain JSON file")->required();
  sample->add_option("--alpha", alpha, "soup intensity")->capture_default_str();
  sample->add_option("--seed", seed, "random seed")->capture_default_str();
  sample->add_option("--realizations", realizations, "number of realizations")
      ->capture_default_str();
  sample->add_option("--out", out_path, "write JSON lines to this file instead of stdout");

  auto* run = app.add_subcommand("run", "run an experiment suite and render the report");
  run->add_option("suite", suite_path, "suite JSON file")->required();
  run->add_option("--seed", run_seed, "master seed (overrides the suite defaults)");
  run->add_option("--workers", workers, "worker threads (overrides the suite defaults)");
  run->add_option("--out", out_path, "write the canonical JSON report to this file");

  auto* report = app.add_subcommand("report", "re-render a stored report file");
  report->add_option("report", report_path, "report JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate) return cmd_validate(chain_path);
    if (*green)
      return cmd_green(chain_path,
                       green->count("--resolvent") ? std::optional<double>(resolvent)
                                                   : std::nullopt,
                       csv_path);
    if (*sample) return cmd_sample_soup(chain_path, alpha, seed, realizations, out_path);
    if (*run)
      return cmd_run(suite_path,
                     run->count("--seed") ? std::optional<std::uint64_t>(run_seed) : std::nullopt,
                     run->count("--workers") ? std::optional<int>(workers) : std::nullopt,
                     out_path);
    if (*report) return cmd_report(report_path);
  } catch (const loopsoup::Error& e) {
    std::cerr << "error [" << loopsoup::errc_name(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
