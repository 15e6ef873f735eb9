#pragma once

#include "stratboot/estimation.hpp"

namespace stratboot {

double norm_cdf(double x);
double norm_quantile(double p);  // domain error outside (0,1)

// Signed likelihood root R(psi0) = sign(psi_hat - psi0) sqrt(2 {l(th_hat) -
// l(th_hat_psi0)}). Both fits must share the retained-strata set.
double signed_root(double psi0, const FitResult& full, const FitResult& constrained);

// Score pivot S(psi0) = U_p(psi0) / sqrt(i_partial(th_hat_psi0)), with the
// expected information partialled over the nuisances.
double score_stat(const StratumModel& model, const StratifiedDataset& data,
                  const FitResult& constrained);

// Wald pivot T(psi0) = (psi_hat - psi0) sqrt(j_p(psi_hat)).
double wald_stat(const StratumModel& model, const StratifiedDataset& data,
                 double psi0, const FitResult& full);

struct PivotSet {
  double r = 0.0, s = 0.0, t = 0.0;
  double psi_hat = 0.0;
};

PivotSet compute_pivots(const StratumModel& model, const StratifiedDataset& data,
                        double psi0, const FitResult& full,
                        const FitResult& constrained);

// Location / location-scale recentering by simulated null moments.
struct MomentAdjustment {
  double mean = 0.0;
  double sd = 1.0;
};
enum class AdjustMode { Location, LocationScale };
double adjust(double stat, const MomentAdjustment& m, AdjustMode mode);

}  // namespace stratboot
