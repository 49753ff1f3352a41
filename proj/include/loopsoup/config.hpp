#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "loopsoup/experiments.hpp"

namespace loopsoup {

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), Errc::schema_error, "cannot open file: " + path);
  try {
    nlohmann::json j;
    f >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::schema_error, "invalid JSON in " + path + ": " + e.what());
  }
}

/// Chain description document: {"states": [...], "q": [[...]], "k": [...],
/// "m": [...]}. Shape problems are schema errors; value problems (negative
/// rates, non-transience) surface later from Chain::validate.
inline ChainSpec chain_spec_from_json(const nlohmann::json& j) {
  require(j.is_object(), Errc::schema_error, "chain must be a JSON object");
  for (const char* key : {"states", "q", "k", "m"})
    require(j.contains(key), Errc::schema_error, std::string("chain is missing '") + key + "'");

  ChainSpec spec;
  require(j.at("states").is_array() && !j.at("states").empty(), Errc::schema_error,
          "states must be a nonempty array");
  for (const auto& s : j.at("states")) {
    require(s.is_string() && !s.get<std::string>().empty(), Errc::schema_error,
            "state labels must be nonempty strings");
    spec.states.push_back(s.get<std::string>());
  }
  const int n = static_cast<int>(spec.states.size());
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < i; ++l)
      require(spec.states[static_cast<std::size_t>(i)] != spec.states[static_cast<std::size_t>(l)],
              Errc::schema_error, "state labels must be unique");

  const auto& q = j.at("q");
  require(q.is_array() && static_cast<int>(q.size()) == n, Errc::schema_error,
          "q must be an n x n array");
  spec.q.resize(n, n);
  for (int x = 0; x < n; ++x) {
    const auto& row = q[static_cast<std::size_t>(x)];
    require(row.is_array() && static_cast<int>(row.size()) == n, Errc::schema_error,
            "q must be an n x n array");
    for (int y = 0; y < n; ++y) {
      require(row[static_cast<std::size_t>(y)].is_number(), Errc::schema_error,
              "q entries must be numbers");
      spec.q(x, y) = row[static_cast<std::size_t>(y)].get<double>();
    }
  }
  auto read_vector = [n](const nlohmann::json& arr, const char* what) {
    require(arr.is_array() && static_cast<int>(arr.size()) == n, Errc::schema_error,
            std::string(what) + " must be an array with one entry per state");
    Vector v(n);
    for (int i = 0; i < n; ++i) {
      require(arr[static_cast<std::size_t>(i)].is_number(), Errc::schema_error,
              std::string(what) + " entries must be numbers");
      v(i) = arr[static_cast<std::size_t>(i)].get<double>();
    }
    return v;
  };
  spec.k = read_vector(j.at("k"), "k");
  spec.m = read_vector(j.at("m"), "m");
  return spec;
}

inline nlohmann::json chain_spec_to_json(const ChainSpec& spec) {
  const int n = static_cast<int>(spec.states.size());
  nlohmann::json q = nlohmann::json::array();
  for (int x = 0; x < n; ++x) {
    nlohmann::json row = nlohmann::json::array();
    for (int y = 0; y < n; ++y) row.push_back(spec.q(x, y));
    q.push_back(row);
  }
  nlohmann::json k = nlohmann::json::array(), m = nlohmann::json::array();
  for (int x = 0; x < n; ++x) {
    k.push_back(spec.k(x));
    m.push_back(spec.m(x));
  }
  return nlohmann::json{{"states", spec.states}, {"q", q}, {"k", k}, {"m", m}};
}

namespace detail {
inline bool json_uint(const nlohmann::json& v, std::uint64_t& out) {
  if (v.is_number_unsigned()) {
    out = v.get<std::uint64_t>();
    return true;
  }
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    out = static_cast<std::uint64_t>(v.get<std::int64_t>());
    return true;
  }
  return false;
}
}  // namespace detail

struct SuiteDefaults {
  double alpha = 1.0;
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct SuiteEntry {
  std::string experiment;
  std::string chain;
  std::optional<double> alpha;
  std::optional<std::size_t> samples;
  std::optional<std::uint64_t> seed;
  nlohmann::json params;
};

struct SuiteConfig {
  std::map<std::string, ChainSpec> chains;
  SuiteDefaults defaults;
  std::vector<SuiteEntry> entries;
};

/// Suite document: {"chains": {name: chain...}, "defaults": {...},
/// "experiments": [{"experiment": ..., "chain": ..., ...}]}. Every entry must
/// name a known experiment and a chain defined in the document.
inline SuiteConfig suite_from_json(const nlohmann::json& j) {
  require(j.is_object(), Errc::schema_error, "suite must be a JSON object");
  require(j.contains("chains") && j.at("chains").is_object() && !j.at("chains").empty(),
          Errc::schema_error, "suite needs a nonempty 'chains' object");
  require(j.contains("experiments") && j.at("experiments").is_array() &&
              !j.at("experiments").empty(),
          Errc::schema_error, "suite needs a nonempty 'experiments' array");

  SuiteConfig cfg;
  for (const auto& [name, chain] : j.at("chains").items())
    cfg.chains.emplace(name, chain_spec_from_json(chain));

  if (j.contains("defaults")) {
    const auto& d = j.at("defaults");
    require(d.is_object(), Errc::schema_error, "defaults must be an object");
    if (d.contains("alpha")) {
      require(d.at("alpha").is_number(), Errc::schema_error, "defaults.alpha must be a number");
      cfg.defaults.alpha = d.at("alpha").get<double>();
    }
    std::uint64_t v = 0;
    if (d.contains("samples")) {
      require(detail::json_uint(d.at("samples"), v) && v > 0, Errc::schema_error,
              "defaults.samples must be a positive integer");
      cfg.defaults.samples = static_cast<std::size_t>(v);
    }
    if (d.contains("seed")) {
      require(detail::json_uint(d.at("seed"), v), Errc::schema_error,
              "defaults.seed must be a nonnegative integer");
      cfg.defaults.seed = v;
    }
    if (d.contains("workers")) {
      require(detail::json_uint(d.at("workers"), v) && v >= 1 && v <= 256, Errc::schema_error,
              "defaults.workers must be an integer in [1,256]");
      cfg.defaults.workers = static_cast<int>(v);
    }
  }

  const auto& names = experiment_names();
  for (const auto& e : j.at("experiments")) {
    require(e.is_object(), Errc::schema_error, "experiment entries must be objects");
    require(e.contains("experiment") && e.at("experiment").is_string(), Errc::schema_error,
            "experiment entries need an 'experiment' name");
    require(e.contains("chain") && e.at("chain").is_string(), Errc::schema_error,
            "experiment entries need a 'chain' label");
    SuiteEntry entry;
    entry.experiment = e.at("experiment").get<std::string>();
    require(std::find(names.begin(), names.end(), entry.experiment) != names.end(),
            Errc::unknown_experiment, "unknown experiment: " + entry.experiment);
    entry.chain = e.at("chain").get<std::string>();
    require(cfg.chains.count(entry.chain) == 1, Errc::bad_chain,
            "experiment references undefined chain: " + entry.chain);
    if (e.contains("alpha")) {
      require(e.at("alpha").is_number(), Errc::schema_error, "alpha must be a number");
      entry.alpha = e.at("alpha").get<double>();
    }
    std::uint64_t v = 0;
    if (e.contains("samples")) {
      require(detail::json_uint(e.at("samples"), v) && v > 0, Errc::schema_error,
              "samples must be a positive integer");
      entry.samples = static_cast<std::size_t>(v);
    }
    if (e.contains("seed")) {
      require(detail::json_uint(e.at("seed"), v), Errc::schema_error,
              "seed must be a nonnegative integer");
      entry.seed = v;
    }
    if (e.contains("params")) {
      require(e.at("params").is_object(), Errc::schema_error, "params must be an object");
      entry.params = e.at("params");
    }
    cfg.entries.push_back(std::move(entry));
  }
  return cfg;
}

struct SuiteRunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

/// Runs every entry. Each named chain is validated exactly once. Entry i runs
/// with seed derive_stream(master, i) — master is the CLI override or the
/// defaults seed — unless the entry pins its own seed explicitly.
inline std::vector<ExperimentReport> run_suite(const SuiteConfig& cfg,
                                               const SuiteRunOptions& opt = {}) {
  std::map<std::string, Chain> validated;
  for (const auto& [name, spec] : cfg.chains) validated.emplace(name, Chain::validate(spec));

  const std::uint64_t master = opt.seed.value_or(cfg.defaults.seed);
  const int workers = opt.workers.value_or(cfg.defaults.workers);

  std::vector<ExperimentReport> reps;
  reps.reserve(cfg.entries.size());
  for (std::size_t i = 0; i < cfg.entries.size(); ++i) {
    const SuiteEntry& e = cfg.entries[i];
    ExperimentInput in{
        .name = e.experiment,
        .chain_label = e.chain,
        .chain = validated.at(e.chain),
        .alpha = e.alpha.value_or(cfg.defaults.alpha),
        .samples = e.samples.value_or(cfg.defaults.samples),
        .seed = e.seed ? *e.seed : derive_stream(master, i),
        .workers = workers,
        .params = e.params,
    };
    reps.push_back(run_experiment(in));
  }
  return reps;
}

/// One soup realization as a JSON document (JSON-lines record): trivial
/// local times keyed by state label, loops as label/hold arrays.
inline nlohmann::json realization_to_json(const SoupRealization& real, const Chain& chain,
                                          std::size_t index) {
  nlohmann::json trivial = nlohmann::json::object();
  for (int x = 0; x < chain.size(); ++x)
    trivial[chain.states()[static_cast<std::size_t>(x)]] = real.trivial_lt(x);
  nlohmann::json loops = nlohmann::json::array();
  for (const Path& loop : real.loops) {
    nlohmann::json states = nlohmann::json::array();
    for (int s : loop.states) states.push_back(chain.states()[static_cast<std::size_t>(s)]);
    loops.push_back(nlohmann::json{{"states", states}, {"holds", loop.holds}});
  }
  return nlohmann::json{
      {"index", index}, {"alpha", real.alpha}, {"trivial", trivial}, {"loops", loops}};
}

inline SoupRealization realization_from_json(const nlohmann::json& j, const Chain& chain) {
  require(j.is_object() && j.contains("trivial") && j.contains("loops"), Errc::schema_error,
          "realization record needs 'trivial' and 'loops'");
  SoupRealization real;
  real.alpha = j.value("alpha", 1.0);
  real.trivial_lt = Vector::Zero(chain.size());
  for (const auto& [label, value] : j.at("trivial").items())
    real.trivial_lt(chain.index_of(label)) = value.get<double>();
  for (const auto& l : j.at("loops")) {
    Path loop;
    for (const auto& s : l.at("states")) loop.states.push_back(chain.index_of(s.get<std::string>()));
    for (const auto& h : l.at("holds")) loop.holds.push_back(h.get<double>());
    require(loop.states.size() == loop.holds.size(), Errc::schema_error,
            "loop states and holds must have equal length");
    real.loops.push_back(std::move(loop));
  }
  return real;
}

}  // namespace loopsoup
