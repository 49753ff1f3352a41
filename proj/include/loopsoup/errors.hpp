#pragma once

#include <stdexcept>
#include <string>

namespace loopsoup {

/// Error codes for everything that can go wrong below the CLI. Exit-code
/// mapping: schema/usage problems -> 2, everything else -> 1.
enum class Errc {
  // chain construction
  bad_rates,
  singular_generator,
  // domain / size guards
  out_of_domain,
  too_large,
  empty_subset,
  zero_intensity,
  no_decay,
  // transformations
  not_a_bijection,
  bad_density,
  bad_support,
  // config / CLI
  schema_error,
  unknown_experiment,
  bad_chain,
  // numerics
  quadrature_failure,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::bad_rates: return "bad_rates";
    case Errc::singular_generator: return "singular_generator";
    case Errc::out_of_domain: return "out_of_domain";
    case Errc::too_large: return "too_large";
    case Errc::empty_subset: return "empty_subset";
    case Errc::zero_intensity: return "zero_intensity";
    case Errc::no_decay: return "no_decay";
    case Errc::not_a_bijection: return "not_a_bijection";
    case Errc::bad_density: return "bad_density";
    case Errc::bad_support: return "bad_support";
    case Errc::schema_error: return "schema_error";
    case Errc::unknown_experiment: return "unknown_experiment";
    case Errc::bad_chain: return "bad_chain";
    case Errc::quadrature_failure: return "quadrature_failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) fail(code, what);
}

}  // namespace loopsoup
