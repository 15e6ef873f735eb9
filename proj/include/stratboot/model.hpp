#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stratboot/dataset.hpp"
#include "stratboot/rng.hpp"

namespace stratboot {

struct ScorePair {
  double psi = 0.0;
  double lambda = 0.0;
};

// Negated second derivatives of one observation's log density.
struct InfoBlock {
  double psi_psi = 0.0;
  double psi_lambda = 0.0;
  double lambda_lambda = 0.0;
};

// Two-point expected moments of one observation's likelihood quantities,
// taken under the FIRST parameter point:
//   S2[r][c] = E1[ u_r(th1) u_c(th2) ],  q2[r] = E1[ u_r(th1) (l(th1)-l(th2)) ]
// with index 0 = psi, 1 = lambda. Feeds the r* adjustment.
struct PairMoments {
  double S2[2][2] = {{0, 0}, {0, 0}};
  double q2[2] = {0, 0};
};

// One stratum's contribution to a two-index model: scalar interest psi shared
// across strata, one nuisance lambda per stratum, observations independent
// given (psi, lambda). Implementations are immutable and thread-safe.
class StratumModel {
 public:
  virtual ~StratumModel() = default;

  virtual std::string name() const = 0;
  virtual bool discrete() const { return false; }
  virtual bool uses_covariate() const { return false; }

  virtual double log_density(double y, double x, double psi, double lam) const = 0;
  virtual ScorePair score(double y, double x, double psi, double lam) const = 0;
  virtual InfoBlock observed_info(double y, double x, double psi, double lam) const = 0;
  virtual InfoBlock expected_info(double x, double psi, double lam) const = 0;
  virtual double sample(double x, double psi, double lam, Rng& rng) const = 0;

  // Stratum aggregates. Defaults loop over observations; models override the
  // hot ones where sufficient statistics make that worthwhile.
  virtual double stratum_loglik(std::span<const double> y, std::span<const double> x,
                                double psi, double lam) const;
  virtual ScorePair stratum_score(std::span<const double> y, std::span<const double> x,
                                  double psi, double lam) const;
  virtual InfoBlock stratum_observed_info(std::span<const double> y,
                                          std::span<const double> x, double psi,
                                          double lam) const;
  virtual InfoBlock stratum_expected_info(std::span<const double> x, int m, double psi,
                                          double lam) const;

  // Starting value for the within-stratum nuisance search.
  virtual double nuisance_guess(std::span<const double> y, std::span<const double> x,
                                double psi) const = 0;
  // Exact constrained maximizer when one exists in closed form.
  virtual std::optional<double> nuisance_closed_form(std::span<const double> y,
                                                     std::span<const double> x,
                                                     double psi) const {
    (void)y;
    (void)x;
    (void)psi;
    return std::nullopt;
  }
  // Moment-based starting value for the interest parameter.
  virtual double interest_guess(const StratifiedDataset& data) const = 0;

  // True when the within-stratum likelihood has no interior maximum for any
  // psi (e.g. an all-0 or all-1 binary stratum). Such strata are dropped from
  // every likelihood quantity, for null and alternative fits alike.
  virtual bool stratum_degenerate(std::span<const double> y,
                                  std::span<const double> x) const {
    (void)y;
    (void)x;
    return false;
  }

  // Covariate handed to observation j of a simulated stratum of size m.
  virtual double design_covariate(int j, int m) const {
    (void)j;
    (void)m;
    return 0.0;
  }

  // Analytic two-point moments for r*; models without them return false and
  // the caller falls back to Monte Carlo.
  virtual bool has_pair_moments() const { return false; }
  virtual PairMoments pair_moments(double x, double psi1, double lam1, double psi2,
                                   double lam2) const;
};

double total_loglik(const StratumModel& model, const StratifiedDataset& data,
                    const ParamPoint& theta);

struct TotalScore {
  double psi = 0.0;
  std::vector<double> lambda;
};
TotalScore total_score(const StratumModel& model, const StratifiedDataset& data,
                       const ParamPoint& theta);

StratifiedDataset simulate_dataset(const StratumModel& model, const ParamPoint& theta,
                                   int q, int m, Rng& rng);

}  // namespace stratboot
