#pragma once

#include <cstdint>
#include <string>

#include "stratboot/estimation.hpp"
#include "stratboot/model.hpp"

namespace stratboot {

struct RStarOptions {
  int mc_size = 2000;          // draws per correction-term estimate on the MC path
  bool force_mc = false;       // use the MC path even when closed forms exist
  std::uint64_t mc_seed = 0;
  std::uint64_t mc_stream = 0; // Rng stream for MC draws; fresh per evaluation
  double window = 0.05;        // |r| below this is bridged by interpolation
};

struct RStarResult {
  double rstar = 0.0;
  double r = 0.0;
  double correction = 0.0; // additive term rstar - r, i.e. log(u/r)/r off-window
  double u = 0.0;          // correction statistic; NaN when interpolated
  std::string method;      // "analytic-expectation" or "monte-carlo-expectation"
  std::string expectation; // where the score covariances are taken, see below
  int mc_size = 0;         // 0 on the analytic path
  bool interpolated = false;
};

// Modified signed root r + log(u/r)/r. The correction u replaces sample-space
// derivatives with covariances of scores and likelihood differences between
// the full and constrained fits, all taken under the full-fit parameter point.
// Closed-form expectations are used when the model provides them; otherwise
// draws are simulated at the constrained fit and reweighted observation by
// observation with the likelihood ratio exp(dl), which targets the same
// full-fit expectations. The `expectation` field records which estimator
// produced the covariances. Inside the window around r = 0 the value is a
// quadratic through three nearby (r, rstar) pairs, keeping the map continuous
// where the direct formula degenerates.
RStarResult rstar_at(const StratumModel& model, const StratifiedDataset& data, double psi0,
                     const FitResult& full, const FitResult& constrained,
                     const RStarOptions& opts = {});

RStarResult rstar(const StratumModel& model, const StratifiedDataset& data, double psi0,
                  const RStarOptions& opts = {});

}  // namespace stratboot
