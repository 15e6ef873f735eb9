#include "stratboot/pivots.hpp"

#include <cmath>
#include <stdexcept>

#include "stratboot/errors.hpp"

namespace stratboot {

double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

// Wichura (1988), algorithm AS 241, routine PPND16.
double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("norm_quantile: p must lie in (0,1)");
  const double q = p - 0.5;
  double r;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    double num = ((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                      6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                    1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
                  1.3314166789178437745e+2) * r + 3.3871328727963666080e0;
    double den = ((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                      3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                    5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
                  4.2313330701600911252e+1) * r + 1.0;
    return q * num / den;
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    double num = ((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                      2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                    3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                  4.63033784615654529590e0) * r + 1.42343711074968357734e0;
    double den = ((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                      1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                    6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                  2.05319162663775882187e0) * r + 1.0;
    val = num / den;
  } else {
    r -= 5.0;
    double num = ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                      1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                    2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                  5.46378491116411436990e0) * r + 6.65790464350110377720e0;
    double den = ((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                      1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                    1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                  5.99832206555887937690e-1) * r + 1.0;
    val = num / den;
  }
  return q < 0.0 ? -val : val;
}

namespace {
void require_same_drops(const FitResult& full, const FitResult& constrained) {
  if (full.dropped_strata != constrained.dropped_strata)
    throw InvalidInput("pivot: fits disagree on the retained strata");
}
}  // namespace

double signed_root(double psi0, const FitResult& full, const FitResult& constrained) {
  require_same_drops(full, constrained);
  double dev = 2.0 * (full.loglik - constrained.loglik);
  double tol = 1e-8 * (1.0 + std::abs(full.loglik));
  if (dev < -tol)
    throw NegativeDeviance("constrained maximum exceeds the unconstrained one");
  if (dev < 0.0) dev = 0.0;
  double diff = full.theta.psi - psi0;
  if (diff == 0.0) return 0.0;
  return std::copysign(std::sqrt(dev), diff);
}

double score_stat(const StratumModel& model, const StratifiedDataset& data,
                  const FitResult& constrained) {
  double up = profile_score_at(model, data, constrained);
  double info = partial_expected_info(model, data, constrained.theta,
                                      &constrained.dropped_strata);
  if (!(info > 0.0))
    throw NonPositiveInformation("score pivot: partial expected information <= 0");
  return up / std::sqrt(info);
}

double wald_stat(const StratumModel& model, const StratifiedDataset& data,
                 double psi0, const FitResult& full) {
  double jp = profile_info_at(model, data, full);
  if (!(jp > 0.0))
    throw NonPositiveInformation("wald pivot: profile information <= 0 at psi_hat");
  return (full.theta.psi - psi0) * std::sqrt(jp);
}

PivotSet compute_pivots(const StratumModel& model, const StratifiedDataset& data,
                        double psi0, const FitResult& full,
                        const FitResult& constrained) {
  require_same_drops(full, constrained);
  PivotSet p;
  p.psi_hat = full.theta.psi;
  p.r = signed_root(psi0, full, constrained);
  p.s = score_stat(model, data, constrained);
  p.t = wald_stat(model, data, psi0, full);
  return p;
}

double adjust(double stat, const MomentAdjustment& m, AdjustMode mode) {
  if (mode == AdjustMode::Location) return stat - m.mean;
  if (!(m.sd > 0.0)) throw DegenerateSample("adjust: zero scale");
  return (stat - m.mean) / m.sd;
}

}  // namespace stratboot
