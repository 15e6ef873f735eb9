#include "stratboot/model.hpp"

#include <stdexcept>

#include "stratboot/errors.hpp"

namespace stratboot {

namespace {
inline double xat(std::span<const double> x, size_t j) {
  return x.empty() ? 0.0 : x[j];
}
}  // namespace

double StratumModel::stratum_loglik(std::span<const double> y,
                                    std::span<const double> x, double psi,
                                    double lam) const {
  double s = 0.0;
  for (size_t j = 0; j < y.size(); ++j) s += log_density(y[j], xat(x, j), psi, lam);
  return s;
}

ScorePair StratumModel::stratum_score(std::span<const double> y,
                                      std::span<const double> x, double psi,
                                      double lam) const {
  ScorePair acc;
  for (size_t j = 0; j < y.size(); ++j) {
    ScorePair u = score(y[j], xat(x, j), psi, lam);
    acc.psi += u.psi;
    acc.lambda += u.lambda;
  }
  return acc;
}

InfoBlock StratumModel::stratum_observed_info(std::span<const double> y,
                                              std::span<const double> x, double psi,
                                              double lam) const {
  InfoBlock acc;
  for (size_t j = 0; j < y.size(); ++j) {
    InfoBlock b = observed_info(y[j], xat(x, j), psi, lam);
    acc.psi_psi += b.psi_psi;
    acc.psi_lambda += b.psi_lambda;
    acc.lambda_lambda += b.lambda_lambda;
  }
  return acc;
}

InfoBlock StratumModel::stratum_expected_info(std::span<const double> x, int m,
                                              double psi, double lam) const {
  InfoBlock acc;
  for (int j = 0; j < m; ++j) {
    InfoBlock b = expected_info(xat(x, j), psi, lam);
    acc.psi_psi += b.psi_psi;
    acc.psi_lambda += b.psi_lambda;
    acc.lambda_lambda += b.lambda_lambda;
  }
  return acc;
}

PairMoments StratumModel::pair_moments(double, double, double, double, double) const {
  throw UnavailableExpectations("model '" + name() +
                                "' has no analytic two-point moments");
}

double total_loglik(const StratumModel& model, const StratifiedDataset& data,
                    const ParamPoint& theta) {
  data.validate();
  theta.validate(data.strata());
  double s = 0.0;
  for (int i = 0; i < data.strata(); ++i) {
    std::span<const double> xs =
        data.has_covariates() ? std::span<const double>(data.x[i])
                              : std::span<const double>();
    s += model.stratum_loglik(data.y[i], xs, theta.psi, theta.lambda[i]);
  }
  return s;
}

TotalScore total_score(const StratumModel& model, const StratifiedDataset& data,
                       const ParamPoint& theta) {
  data.validate();
  theta.validate(data.strata());
  TotalScore ts;
  ts.lambda.resize(data.strata());
  for (int i = 0; i < data.strata(); ++i) {
    std::span<const double> xs =
        data.has_covariates() ? std::span<const double>(data.x[i])
                              : std::span<const double>();
    ScorePair u = model.stratum_score(data.y[i], xs, theta.psi, theta.lambda[i]);
    ts.psi += u.psi;
    ts.lambda[i] = u.lambda;
  }
  return ts;
}

StratifiedDataset simulate_dataset(const StratumModel& model, const ParamPoint& theta,
                                   int q, int m, Rng& rng) {
  if (q < 1 || m < 2) throw InvalidInput("simulate_dataset: need q >= 1, m >= 2");
  theta.validate(q);
  StratifiedDataset d;
  d.y.resize(q);
  if (model.uses_covariate()) d.x.resize(q);
  for (int i = 0; i < q; ++i) {
    d.y[i].resize(m);
    if (model.uses_covariate()) d.x[i].resize(m);
    for (int j = 0; j < m; ++j) {
      double xv = model.design_covariate(j, m);
      if (model.uses_covariate()) d.x[i][j] = xv;
      d.y[i][j] = model.sample(xv, theta.psi, theta.lambda[i], rng);
    }
  }
  return d;
}

}  // namespace stratboot
