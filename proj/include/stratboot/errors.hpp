#pragma once

#include <stdexcept>
#include <string>

namespace stratboot {

// Base for anything raised while maximizing a likelihood.
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The 1-d nuisance maximizer escaped to +-inf (boundary stratum, bad data).
struct StratumDiverged : FitError {
  int stratum;
  explicit StratumDiverged(int i)
      : FitError("stratum " + std::to_string(i + 1) + " diverged"), stratum(i) {}
};

struct AllStrataDiverged : FitError {
  AllStrataDiverged() : FitError("every stratum is degenerate") {}
  using FitError::FitError;
};

struct NoConvergence : FitError {
  using FitError::FitError;
};

// Curvature has the wrong sign where a statistic needs it positive.
struct NonPositiveInformation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Constrained maximum exceeded the unconstrained one beyond tolerance.
struct NegativeDeviance : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bootstrap refit failures exceeded the failure budget.
struct TooManyFailures : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bootstrap replicate statistics have zero spread; moments are meaningless.
struct DegenerateSample : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Model supplies no analytic two-point moments and Monte Carlo is disabled.
struct UnavailableExpectations : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed experiment spec or dataset file.
struct InvalidInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace stratboot
