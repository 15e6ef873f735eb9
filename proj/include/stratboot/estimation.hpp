#pragma once

#include <vector>

#include "stratboot/model.hpp"

namespace stratboot {

struct FitOptions {
  double grad_tol = 1e-8;  // max |score component| at convergence
  int max_iter = 50;
  bool use_closed_form = true;     // take model-supplied exact nuisance solutions
  const ParamPoint* warm = nullptr;  // start from a previous fit
  bool check_data = true;          // skip support validation in inner loops
};

struct FitResult {
  ParamPoint theta;
  double loglik = 0.0;  // over retained strata
  int iterations = 0;
  bool converged = false;
  // 0-based indices of strata dropped as degenerate; their lambda slots hold
  // 0 and are excluded from every likelihood quantity.
  std::vector<int> dropped_strata;
};

// Degenerate strata for this dataset (empty for continuous models). The same
// set is dropped from null and alternative fits so their pivots compare
// likelihoods over identical data.
std::vector<int> degenerate_strata(const StratumModel& model,
                                   const StratifiedDataset& data);

// Maximize over the nuisances with psi held fixed.
FitResult fit_constrained(const StratumModel& model, const StratifiedDataset& data,
                          double psi, const FitOptions& opts = {});

// Full maximum likelihood via safeguarded Newton on the profile score.
FitResult fit_mle(const StratumModel& model, const StratifiedDataset& data,
                  const FitOptions& opts = {});

// Profile score U_p(psi) and profile observed information
// j_p(psi) = j_pp - sum_i j_pl_i^2 / j_ll_i, both at the constrained fit.
double profile_score(const StratumModel& model, const StratifiedDataset& data,
                     double psi, const FitOptions& opts = {});
double profile_info(const StratumModel& model, const StratifiedDataset& data,
                    double psi, const FitOptions& opts = {});

// Same quantities reusing an existing constrained fit (no refitting).
double profile_score_at(const StratumModel& model, const StratifiedDataset& data,
                        const FitResult& constrained);
double profile_info_at(const StratumModel& model, const StratifiedDataset& data,
                       const FitResult& constrained);

// Expected information for psi with the nuisances partialled out:
// i_pp - sum_i i_pl_i^2 / i_ll_i at theta, over strata not listed in dropped.
double partial_expected_info(const StratumModel& model, const StratifiedDataset& data,
                             const ParamPoint& theta,
                             const std::vector<int>* dropped = nullptr);

}  // namespace stratboot
