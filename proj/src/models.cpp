#include "stratboot/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stratboot/errors.hpp"
#include "stratboot/special.hpp"

namespace stratboot {

namespace {

inline double log1pexp(double x) {
  // stable log(1 + e^x); cutoffs per the usual double-precision analysis
  if (x > 37.0) return x + std::exp(-x);
  if (x > 18.0) return x + std::log1p(std::exp(-x));
  if (x > -37.0) return std::log1p(std::exp(x));
  return std::exp(x);
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

inline double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_var(std::span<const double> v) {
  double m = mean_of(v);
  double s = 0.0;
  for (double u : v) s += (u - m) * (u - m);
  return s / static_cast<double>(v.size() - 1);
}

// ---------------------------------------------------------------------------
// Gamma with shared shape: y ~ Gamma(alpha, scale beta_i),
// psi = log alpha, lambda_i = log beta_i.
// ---------------------------------------------------------------------------
class GammaModel final : public StratumModel {
 public:
  std::string name() const override { return "gamma"; }

  double log_density(double y, double, double psi, double lam) const override {
    double a = std::exp(psi);
    return (a - 1.0) * std::log(y) - y * std::exp(-lam) - log_gamma(a) - a * lam;
  }

  ScorePair score(double y, double, double psi, double lam) const override {
    double a = std::exp(psi);
    return {a * (std::log(y) - lam - digamma(a)), y * std::exp(-lam) - a};
  }

  InfoBlock observed_info(double y, double, double psi, double lam) const override {
    double a = std::exp(psi);
    double u_psi = a * (std::log(y) - lam - digamma(a));
    return {a * a * trigamma(a) - u_psi, a, y * std::exp(-lam)};
  }

  InfoBlock expected_info(double, double psi, double lam) const override {
    (void)lam;
    double a = std::exp(psi);
    return {a * a * trigamma(a), a, a};
  }

  double sample(double, double psi, double lam, Rng& rng) const override {
    return rng.gamma(std::exp(psi)) * std::exp(lam);
  }

  // aggregates via sufficient statistics (sum log y, sum y)
  double stratum_loglik(std::span<const double> y, std::span<const double>,
                        double psi, double lam) const override {
    double a = std::exp(psi), inv_b = std::exp(-lam);
    double sw = 0.0, sy = 0.0;
    for (double v : y) {
      sw += std::log(v);
      sy += v;
    }
    double m = static_cast<double>(y.size());
    return (a - 1.0) * sw - sy * inv_b - m * (log_gamma(a) + a * lam);
  }

  ScorePair stratum_score(std::span<const double> y, std::span<const double>,
                          double psi, double lam) const override {
    double a = std::exp(psi), inv_b = std::exp(-lam);
    double sw = 0.0, sy = 0.0;
    for (double v : y) {
      sw += std::log(v);
      sy += v;
    }
    double m = static_cast<double>(y.size());
    return {a * (sw - m * lam - m * digamma(a)), sy * inv_b - m * a};
  }

  InfoBlock stratum_observed_info(std::span<const double> y, std::span<const double>,
                                  double psi, double lam) const override {
    double a = std::exp(psi), inv_b = std::exp(-lam);
    double sw = 0.0, sy = 0.0;
    for (double v : y) {
      sw += std::log(v);
      sy += v;
    }
    double m = static_cast<double>(y.size());
    double u_psi = a * (sw - m * lam - m * digamma(a));
    return {m * a * a * trigamma(a) - u_psi, m * a, sy * inv_b};
  }

  InfoBlock stratum_expected_info(std::span<const double>, int m, double psi,
                                  double lam) const override {
    (void)lam;
    double a = std::exp(psi);
    double md = static_cast<double>(m);
    return {md * a * a * trigamma(a), md * a, md * a};
  }

  double nuisance_guess(std::span<const double> y, std::span<const double>,
                        double psi) const override {
    return std::log(mean_of(y)) - psi;
  }

  std::optional<double> nuisance_closed_form(std::span<const double> y,
                                             std::span<const double>,
                                             double psi) const override {
    // d l / d lambda = sum(y) e^-lam - m alpha = 0  =>  beta = ybar / alpha
    return std::log(mean_of(y)) - psi;
  }

  double interest_guess(const StratifiedDataset& data) const override {
    double num = 0.0, den = 0.0;
    for (const auto& s : data.y) {
      double m = mean_of(s);
      num += m * m;
      den += sample_var(s);
    }
    return std::log(clamp(num / std::max(den, 1e-300), 0.02, 50.0));
  }

  bool has_pair_moments() const override { return true; }

  PairMoments pair_moments(double, double psi1, double lam1, double psi2,
                           double lam2) const override {
    // Under th1: Var(log Y) = psi'(a1), Var(Y) = a1 b1^2, Cov(Y, log Y) = b1.
    double a1 = std::exp(psi1), a2 = std::exp(psi2);
    double brat = std::exp(lam1 - lam2);  // b1 / b2
    double t1 = trigamma(a1);
    PairMoments pm;
    pm.S2[0][0] = a1 * a2 * t1;
    pm.S2[0][1] = a1 * brat;
    pm.S2[1][0] = a2;
    pm.S2[1][1] = a1 * brat;
    pm.q2[0] = a1 * ((a1 - a2) * t1 - (1.0 - brat));
    pm.q2[1] = (a1 - a2) - a1 * (1.0 - brat);
    return pm;
  }
};

// ---------------------------------------------------------------------------
// Beta with shared precision: y ~ Beta(mu_i phi, (1-mu_i) phi),
// psi = log phi, lambda_i = logit mu_i.
// ---------------------------------------------------------------------------
class BetaModel final : public StratumModel {
 public:
  std::string name() const override { return "beta"; }

  double log_density(double y, double, double psi, double lam) const override {
    double phi = std::exp(psi), mu = logistic(lam);
    double a = mu * phi, b = (1.0 - mu) * phi;
    return (a - 1.0) * std::log(y) + (b - 1.0) * std::log1p(-y) - log_beta(a, b);
  }

  ScorePair score(double y, double, double psi, double lam) const override {
    double phi = std::exp(psi), mu = logistic(lam);
    double a = mu * phi, b = (1.0 - mu) * phi, c = phi * mu * (1.0 - mu);
    double dab = digamma(a + b);
    double da = std::log(y) - digamma(a) + dab;
    double db = std::log1p(-y) - digamma(b) + dab;
    return {a * da + b * db, c * (da - db)};
  }

  InfoBlock observed_info(double y, double, double psi, double lam) const override {
    double phi = std::exp(psi), mu = logistic(lam);
    double a = mu * phi, b = (1.0 - mu) * phi, c = phi * mu * (1.0 - mu);
    double dab = digamma(a + b);
    double da = std::log(y) - digamma(a) + dab;
    double db = std::log1p(-y) - digamma(b) + dab;
    double ta = trigamma(a), tb = trigamma(b), tab = trigamma(a + b);
    double i_pp = a * a * ta + b * b * tb - (a + b) * (a + b) * tab;
    InfoBlock blk;
    blk.psi_psi = i_pp - (a * da + b * db);
    blk.psi_lambda = c * (a * ta - b * tb - (da - db));
    blk.lambda_lambda = c * c * (ta + tb) - (1.0 - 2.0 * mu) * c * (da - db);
    return blk;
  }

  InfoBlock expected_info(double, double psi, double lam) const override {
    double phi = std::exp(psi), mu = logistic(lam);
    double a = mu * phi, b = (1.0 - mu) * phi, c = phi * mu * (1.0 - mu);
    double ta = trigamma(a), tb = trigamma(b), tab = trigamma(a + b);
    return {a * a * ta + b * b * tb - (a + b) * (a + b) * tab,
            c * (a * ta - b * tb), c * c * (ta + tb)};
  }

  double sample(double, double psi, double lam, Rng& rng) const override {
    double phi = std::exp(psi), mu = logistic(lam);
    return rng.beta(mu * phi, (1.0 - mu) * phi);
  }

  double nuisance_guess(std::span<const double> y, std::span<const double>,
                        double) const override {
    double mu = clamp(mean_of(y), 1e-4, 1.0 - 1e-4);
    return std::log(mu / (1.0 - mu));
  }

  double interest_guess(const StratifiedDataset& data) const override {
    // var = mu(1-mu)/(1+phi) pooled across strata
    double num = 0.0, den = 0.0;
    for (const auto& s : data.y) {
      double mu = clamp(mean_of(s), 1e-4, 1.0 - 1e-4);
      num += mu * (1.0 - mu);
      den += sample_var(s);
    }
    double phi = num / std::max(den, 1e-300) - 1.0;
    return std::log(clamp(phi, 0.1, 500.0));
  }
};

// ---------------------------------------------------------------------------
// Curved exponential-family normal: y ~ N(e^lambda, e^{psi + lambda/2}).
// The variance is tied to the mean through psi.
// ---------------------------------------------------------------------------
class CurvedNormalModel final : public StratumModel {
 public:
  std::string name() const override { return "curved_normal"; }

  double log_density(double y, double, double psi, double lam) const override {
    double mu = std::exp(lam), v = std::exp(psi + 0.5 * lam);
    double r = y - mu;
    return -0.5 * std::log(2.0 * M_PI) - 0.5 * (psi + 0.5 * lam) - r * r / (2.0 * v);
  }

  ScorePair score(double y, double, double psi, double lam) const override {
    double mu = std::exp(lam), v = std::exp(psi + 0.5 * lam);
    double r = y - mu;
    return {-0.5 + r * r / (2.0 * v), -0.25 + r * mu / v + r * r / (4.0 * v)};
  }

  InfoBlock observed_info(double y, double, double psi, double lam) const override {
    double mu = std::exp(lam), v = std::exp(psi + 0.5 * lam);
    double r = y - mu;
    return {r * r / (2.0 * v), r * mu / v + r * r / (4.0 * v),
            mu * mu / v + r * r / (8.0 * v)};
  }

  InfoBlock expected_info(double, double psi, double lam) const override {
    double mu = std::exp(lam), v = std::exp(psi + 0.5 * lam);
    return {0.5, 0.25, mu * mu / v + 0.125};
  }

  double sample(double, double psi, double lam, Rng& rng) const override {
    return std::exp(lam) + std::exp(0.5 * (psi + 0.5 * lam)) * rng.normal();
  }

  double nuisance_guess(std::span<const double> y, std::span<const double>,
                        double) const override {
    return std::log(std::max(mean_of(y), 0.05));
  }

  double interest_guess(const StratifiedDataset& data) const override {
    double acc = 0.0;
    for (const auto& s : data.y) {
      double mu = std::max(mean_of(s), 0.05);
      double v = std::max(sample_var(s), 1e-8);
      acc += std::log(v) - 0.5 * std::log(mu);
    }
    return clamp(acc / static_cast<double>(data.strata()), -10.0, 10.0);
  }
};

// ---------------------------------------------------------------------------
// Behrens-Fisher: y ~ N(psi, e^lambda_i); common mean, stratum variances.
// psi and lambda are information-orthogonal here.
// ---------------------------------------------------------------------------
class BehrensFisherModel final : public StratumModel {
 public:
  std::string name() const override { return "behrens_fisher"; }

  double log_density(double y, double, double psi, double lam) const override {
    double r = y - psi;
    return -0.5 * std::log(2.0 * M_PI) - 0.5 * lam -
           r * r * 0.5 * std::exp(-lam);
  }

  ScorePair score(double y, double, double psi, double lam) const override {
    double inv_v = std::exp(-lam), r = y - psi;
    return {r * inv_v, -0.5 + r * r * 0.5 * inv_v};
  }

  InfoBlock observed_info(double y, double, double psi, double lam) const override {
    double inv_v = std::exp(-lam), r = y - psi;
    return {inv_v, r * inv_v, r * r * 0.5 * inv_v};
  }

  InfoBlock expected_info(double, double, double lam) const override {
    return {std::exp(-lam), 0.0, 0.5};
  }

  double sample(double, double psi, double lam, Rng& rng) const override {
    return psi + std::exp(0.5 * lam) * rng.normal();
  }

  double nuisance_guess(std::span<const double> y, std::span<const double>,
                        double psi) const override {
    double s = 0.0;
    for (double v : y) s += (v - psi) * (v - psi);
    return std::log(std::max(s / static_cast<double>(y.size()), 1e-300));
  }

  std::optional<double> nuisance_closed_form(std::span<const double> y,
                                             std::span<const double>,
                                             double psi) const override {
    double s = 0.0;
    for (double v : y) s += (v - psi) * (v - psi);
    double msq = s / static_cast<double>(y.size());
    if (msq <= 0.0) return std::nullopt;  // degenerate; let the caller object
    return std::log(msq);
  }

  double interest_guess(const StratifiedDataset& data) const override {
    double acc = 0.0;
    long n = 0;
    for (const auto& s : data.y) {
      for (double v : s) acc += v;
      n += static_cast<long>(s.size());
    }
    return acc / static_cast<double>(n);
  }

  bool has_pair_moments() const override { return true; }

  PairMoments pair_moments(double, double psi1, double lam1, double psi2,
                           double lam2) const override {
    double inv_v2 = std::exp(-lam2);
    double vrat = std::exp(lam1 - lam2);  // sigma1^2 / sigma2^2
    double delta = psi1 - psi2;
    PairMoments pm;
    pm.S2[0][0] = inv_v2;
    pm.S2[0][1] = delta * inv_v2;
    pm.S2[1][0] = 0.0;
    pm.S2[1][1] = 0.5 * vrat;
    pm.q2[0] = delta * inv_v2;
    pm.q2[1] = 0.5 * vrat - 0.5;
    return pm;
  }
};

// ---------------------------------------------------------------------------
// Matched pairs: y ~ Bernoulli(p), logit p = lambda_i + psi x, with x = 1 on
// the first half of each stratum and 0 on the second half.
// ---------------------------------------------------------------------------
class MatchedPairsModel final : public StratumModel {
 public:
  explicit MatchedPairsModel(int design_m) : design_m_(design_m) {}

  std::string name() const override { return "matched_pairs"; }
  bool discrete() const override { return true; }
  bool uses_covariate() const override { return true; }

  double log_density(double y, double x, double psi, double lam) const override {
    double eta = lam + psi * x;
    return y * eta - log1pexp(eta);
  }

  ScorePair score(double y, double x, double psi, double lam) const override {
    double p = logistic(lam + psi * x);
    return {x * (y - p), y - p};
  }

  InfoBlock observed_info(double y, double x, double psi, double lam) const override {
    (void)y;
    double p = logistic(lam + psi * x);
    double w = p * (1.0 - p);
    return {x * x * w, x * w, w};
  }

  InfoBlock expected_info(double x, double psi, double lam) const override {
    double p = logistic(lam + psi * x);
    double w = p * (1.0 - p);
    return {x * x * w, x * w, w};
  }

  double sample(double x, double psi, double lam, Rng& rng) const override {
    return rng.bernoulli(logistic(lam + psi * x)) ? 1.0 : 0.0;
  }

  double design_covariate(int j, int m) const override {
    if (m % 2 != 0)
      throw InvalidInput("matched_pairs design requires an even stratum size");
    return j < m / 2 ? 1.0 : 0.0;
  }

  bool stratum_degenerate(std::span<const double> y,
                          std::span<const double>) const override {
    // interior maximum in lambda exists iff the stratum mixes 0s and 1s
    double s = std::accumulate(y.begin(), y.end(), 0.0);
    return s == 0.0 || s == static_cast<double>(y.size());
  }

  double nuisance_guess(std::span<const double> y, std::span<const double> x,
                        double psi) const override {
    double m = static_cast<double>(y.size());
    double pbar = clamp(mean_of(y), 0.5 / m, 1.0 - 0.5 / m);
    double xbar = x.empty() ? 0.0 : mean_of(x);
    return std::log(pbar / (1.0 - pbar)) - psi * xbar;
  }

  double interest_guess(const StratifiedDataset& data) const override {
    double n1 = 0, s1 = 0, n0 = 0, s0 = 0;
    for (size_t i = 0; i < data.y.size(); ++i)
      for (size_t j = 0; j < data.y[i].size(); ++j) {
        if (data.x[i][j] >= 0.5) {
          n1 += 1;
          s1 += data.y[i][j];
        } else {
          n0 += 1;
          s0 += data.y[i][j];
        }
      }
    double p1 = clamp(s1 / std::max(n1, 1.0), 0.5 / (n1 + 1), 1 - 0.5 / (n1 + 1));
    double p0 = clamp(s0 / std::max(n0, 1.0), 0.5 / (n0 + 1), 1 - 0.5 / (n0 + 1));
    return std::log(p1 / (1.0 - p1)) - std::log(p0 / (1.0 - p0));
  }

 private:
  int design_m_;
};

}  // namespace

std::unique_ptr<StratumModel> make_model(const std::string& name,
                                         const ModelConfig& cfg) {
  if (name == "gamma") return std::make_unique<GammaModel>();
  if (name == "beta") return std::make_unique<BetaModel>();
  if (name == "curved_normal") return std::make_unique<CurvedNormalModel>();
  if (name == "behrens_fisher") return std::make_unique<BehrensFisherModel>();
  if (name == "matched_pairs") {
    if (cfg.design_m < 2 || cfg.design_m % 2 != 0)
      throw InvalidInput("matched_pairs requires an even design size m >= 2");
    return std::make_unique<MatchedPairsModel>(cfg.design_m);
  }
  throw InvalidInput("unknown model '" + name + "'");
}

ParamPoint default_truths(const std::string& name, int q, uint64_t seed) {
  if (q < 1) throw InvalidInput("default_truths: q must be positive");
  Rng rng = Rng(seed).child(0);  // dedicated truth stream
  ParamPoint th;
  th.lambda.resize(q);
  if (name == "gamma") {
    th.psi = std::log(2.0);
    for (int i = 0; i < q; ++i) th.lambda[i] = std::log(2.0 * rng.exponential());
  } else if (name == "beta") {
    th.psi = std::log(2.0);
    for (int i = 0; i < q; ++i) th.lambda[i] = rng.normal();
  } else if (name == "curved_normal") {
    th.psi = std::log(0.5);
    for (int i = 0; i < q; ++i) th.lambda[i] = rng.normal();
  } else if (name == "behrens_fisher") {
    th.psi = 0.0;
    for (int i = 0; i < q; ++i) th.lambda[i] = rng.uniform();
  } else if (name == "matched_pairs") {
    th.psi = 1.0;
    for (int i = 0; i < q; ++i) th.lambda[i] = rng.normal();
  } else {
    throw InvalidInput("unknown model '" + name + "'");
  }
  return th;
}

void validate_data(const StratumModel& model, const StratifiedDataset& data) {
  data.validate();
  const std::string n = model.name();
  if (model.uses_covariate() && !data.has_covariates())
    throw InvalidInput("model '" + n + "' needs a covariate column");
  for (int i = 0; i < data.strata(); ++i) {
    for (size_t j = 0; j < data.y[i].size(); ++j) {
      double y = data.y[i][j];
      bool ok = std::isfinite(y);
      if (ok) {
        if (n == "gamma") ok = y > 0.0;
        else if (n == "beta") ok = y > 0.0 && y < 1.0;
        else if (n == "matched_pairs") ok = y == 0.0 || y == 1.0;
      }
      if (!ok)
        throw InvalidInput("stratum " + std::to_string(i + 1) +
                           ": observation out of support for model '" + n + "'");
    }
  }
}

}  // namespace stratboot
