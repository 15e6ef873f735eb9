#pragma once

#include <memory>
#include <string>

#include "stratboot/model.hpp"

namespace stratboot {

struct ModelConfig {
  // Stratum size of the matched-pairs design (must be even; the first half of
  // each stratum is treated, x=1, the rest control, x=0). Ignored elsewhere.
  int design_m = 0;
};

// Known names: gamma, beta, curved_normal, behrens_fisher, matched_pairs.
std::unique_ptr<StratumModel> make_model(const std::string& name,
                                         const ModelConfig& cfg = {});

// Seed-reproducible generating truth used by the simulation lab:
//   gamma           psi = log 2,   lambda_i = log of Exp(rate 1/2) draws
//   beta            psi = log 2,   lambda_i ~ N(0,1)
//   curved_normal   psi = log 1/2, lambda_i ~ N(0,1)
//   behrens_fisher  psi = 0,       lambda_i ~ U(0,1)
//   matched_pairs   psi = 1,       lambda_i ~ N(0,1)
ParamPoint default_truths(const std::string& name, int q, uint64_t seed);

// Per-observation sanity checks (support, covariate presence). Throws
// InvalidInput. Fit entry points call this once per dataset.
void validate_data(const StratumModel& model, const StratifiedDataset& data);

}  // namespace stratboot
