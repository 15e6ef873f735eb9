#include "stratboot/rstar.hpp"

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "stratboot/errors.hpp"
#include "stratboot/pivots.hpp"

namespace stratboot {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::span<const double> stratum_x(const StratifiedDataset& data, int i) {
  if (data.x.empty()) return {};
  return {data.x[i].data(), data.x[i].size()};
}

// Arrowhead symmetric matrix: scalar psi block, per-stratum borders and
// diagonal. All r* linear algebra stays O(q) through this shape.
struct InfoArrow {
  double pp = 0.0;
  std::vector<double> border; // (psi, lam_i)
  std::vector<double> diag;   // (lam_i, lam_i)

  double schur() const {
    double s = pp;
    for (size_t i = 0; i < diag.size(); ++i) s -= border[i] * border[i] / diag[i];
    return s;
  }
};

// Two-point score covariance S and likelihood-difference vector q under the
// full-fit expectation: rows indexed by the score at hat, columns by the score
// at tilde, and q pairs the hat score with l(hat)-l(tilde). Both the closed
// form and the Monte Carlo estimator target these same moments.
struct CovArrow {
  double pp = 0.0;
  std::vector<double> top;  // (psi row, lam_i col)
  std::vector<double> left; // (lam_i row, psi col)
  std::vector<double> diag; // (lam_i, lam_i)
  double q_psi = 0.0;
  std::vector<double> q_lam;
};

std::vector<int> retained_strata(const StratifiedDataset& data, const FitResult& fit) {
  std::vector<char> dropped(data.strata(), 0);
  for (int i : fit.dropped_strata) dropped[i] = 1;
  std::vector<int> keep;
  for (int i = 0; i < data.strata(); ++i)
    if (!dropped[i]) keep.push_back(i);
  if (keep.empty()) throw AllStrataDiverged("no strata retained");
  return keep;
}

InfoArrow observed_arrow(const StratumModel& model, const StratifiedDataset& data,
                         const ParamPoint& theta, const std::vector<int>& keep) {
  InfoArrow j;
  j.border.reserve(keep.size());
  j.diag.reserve(keep.size());
  for (int i : keep) {
    InfoBlock b = model.stratum_observed_info({data.y[i].data(), data.y[i].size()},
                                              stratum_x(data, i), theta.psi, theta.lambda[i]);
    if (!(b.lambda_lambda > 0.0))
      throw NonPositiveInformation("observed nuisance information not positive");
    j.pp += b.psi_psi;
    j.border.push_back(b.psi_lambda);
    j.diag.push_back(b.lambda_lambda);
  }
  return j;
}

// Closed-form expectations under the full fit; the constrained fit supplies
// the second parameter point.
CovArrow analytic_cov(const StratumModel& model, const StratifiedDataset& data,
                      const ParamPoint& hat, const ParamPoint& tilde,
                      const std::vector<int>& keep) {
  CovArrow c;
  c.top.reserve(keep.size());
  for (int i : keep) {
    double top = 0, left = 0, diag = 0, qp = 0, ql = 0;
    auto add = [&](double x, double w) {
      PairMoments pm = model.pair_moments(x, hat.psi, hat.lambda[i], tilde.psi, tilde.lambda[i]);
      c.pp += w * pm.S2[0][0];
      top += w * pm.S2[0][1];
      left += w * pm.S2[1][0];
      diag += w * pm.S2[1][1];
      qp += w * pm.q2[0];
      ql += w * pm.q2[1];
    };
    if (model.uses_covariate()) {
      for (double xv : data.x[i]) add(xv, 1.0);
    } else {
      add(0.0, static_cast<double>(data.y[i].size()));
    }
    c.top.push_back(top);
    c.left.push_back(left);
    c.diag.push_back(diag);
    c.q_psi += qp;
    c.q_lam.push_back(ql);
  }
  return c;
}

// Monte Carlo estimate of the same full-fit expectations the closed forms
// supply. Draws are simulated at the constrained fit and reweighted by the
// observationwise likelihood ratio exp(dl) = f(y; hat)/f(y; tilde). Each
// (stratum, observation) slot is self-normalised by its weight sum: the
// determinant later multiplies one moment per stratum, so common-mode weight
// noise would otherwise compound across strata. Structural zeros of the
// arrowhead are imposed, not estimated.
CovArrow mc_cov(const StratumModel& model, const StratifiedDataset& data,
                const ParamPoint& hat, const ParamPoint& tilde,
                const std::vector<int>& keep, int mc_size, Rng rng) {
  if (mc_size < 2) throw InvalidInput("mc_size must be at least 2");
  int nk = static_cast<int>(keep.size());
  CovArrow c;
  c.top.assign(nk, 0.0);
  c.left.assign(nk, 0.0);
  c.diag.assign(nk, 0.0);
  c.q_lam.assign(nk, 0.0);
  for (int k = 0; k < nk; ++k) {
    int i = keep[k];
    size_t m = data.y[i].size();
    for (size_t j = 0; j < m; ++j) {
      double xv = data.x.empty() ? 0.0 : data.x[i][j];
      double sw = 0.0, spp = 0.0, stp = 0.0, slf = 0.0, sdg = 0.0, sqp = 0.0, sql = 0.0;
      for (int t = 0; t < mc_size; ++t) {
        double yd = model.sample(xv, tilde.psi, tilde.lambda[i], rng);
        ScorePair uh = model.score(yd, xv, hat.psi, hat.lambda[i]);
        ScorePair ut = model.score(yd, xv, tilde.psi, tilde.lambda[i]);
        double dl = model.log_density(yd, xv, hat.psi, hat.lambda[i]) -
                    model.log_density(yd, xv, tilde.psi, tilde.lambda[i]);
        double w = std::exp(dl);
        sw += w;
        spp += w * uh.psi * ut.psi;
        stp += w * uh.psi * ut.lambda;
        slf += w * uh.lambda * ut.psi;
        sdg += w * uh.lambda * ut.lambda;
        sqp += w * uh.psi * dl;
        sql += w * uh.lambda * dl;
      }
      if (!(sw > 0.0) || !std::isfinite(sw))
        throw FitError("degenerate importance weights in r*");
      c.pp += spp / sw;
      c.top[k] += stp / sw;
      c.left[k] += slf / sw;
      c.diag[k] += sdg / sw;
      c.q_psi += sqp / sw;
      c.q_lam[k] += sql / sw;
    }
  }
  return c;
}

// u = det([(jhat S^-1 q)' ; lambda rows of S]) / sqrt(|jtilde_lambda| * |jhat|),
// in log magnitude and sign. The top row approximates the sample-space
// derivative difference l_;hat(hat) - l_;hat(tilde); the lambda rows of S,
// read column-first so they pair the tilde nuisance score with the hat score,
// approximate l_{lambda;hat}(tilde).
double assemble_u(const CovArrow& s, const InfoArrow& jhat, const std::vector<double>& jt_diag) {
  size_t nk = jhat.diag.size();
  // Solve S z = q via the arrowhead Schur complement; both are hat-row aligned.
  double schur = s.pp;
  double rhs = s.q_psi;
  for (size_t i = 0; i < nk; ++i) {
    double tp = s.top[i];  // (psi, lam_i) of S
    double lf = s.left[i]; // (lam_i, psi) of S
    if (s.diag[i] == 0.0) throw FitError("singular score covariance in r*");
    schur -= tp * lf / s.diag[i];
    rhs -= tp * s.q_lam[i] / s.diag[i];
  }
  if (schur == 0.0) throw FitError("singular score covariance in r*");
  double z_psi = rhs / schur;
  std::vector<double> z_lam(nk);
  for (size_t i = 0; i < nk; ++i)
    z_lam[i] = (s.q_lam[i] - s.left[i] * z_psi) / s.diag[i];
  // a = jhat z, the top row of the determinant.
  double a_psi = jhat.pp * z_psi;
  for (size_t i = 0; i < nk; ++i) a_psi += jhat.border[i] * z_lam[i];
  std::vector<double> a_lam(nk);
  for (size_t i = 0; i < nk; ++i)
    a_lam[i] = jhat.border[i] * z_psi + jhat.diag[i] * z_lam[i];
  // Remaining rows: lambda rows of the tilde-oriented covariance.
  double lead = a_psi;
  double logabs = 0.0;
  double sign = 1.0;
  for (size_t i = 0; i < nk; ++i) {
    double mpsi = s.top[i];
    double mlam = s.diag[i];
    if (mlam == 0.0) throw FitError("singular score covariance in r*");
    lead -= a_lam[i] * mpsi / mlam;
    sign *= mlam > 0.0 ? 1.0 : -1.0;
    logabs += std::log(std::fabs(mlam));
  }
  if (lead == 0.0) return 0.0;
  sign *= lead > 0.0 ? 1.0 : -1.0;
  logabs += std::log(std::fabs(lead));
  // Normalize by the observed information determinants.
  double jp = jhat.schur();
  if (!(jp > 0.0)) throw NonPositiveInformation("profile information not positive at the MLE");
  double log_jhat = std::log(jp);
  for (size_t i = 0; i < nk; ++i) log_jhat += std::log(jhat.diag[i]);
  double log_jt = 0.0;
  for (double d : jt_diag) {
    if (!(d > 0.0))
      throw NonPositiveInformation("constrained nuisance information not positive");
    log_jt += std::log(d);
  }
  return sign * std::exp(logabs - 0.5 * (log_jt + log_jhat));
}

struct DirectEval {
  double r = 0.0;
  double u = 0.0;
  double rstar = 0.0;
};

// r and u at one constrained fit; throws when the correction is undefined.
DirectEval direct_eval(const StratumModel& model, const StratifiedDataset& data, double psi0,
                       const FitResult& full, const FitResult& con, const RStarOptions& opts,
                       bool use_mc) {
  DirectEval out;
  out.r = signed_root(psi0, full, con);
  std::vector<int> keep = retained_strata(data, full);
  InfoArrow jhat = observed_arrow(model, data, full.theta, keep);
  std::vector<double> jt_diag;
  jt_diag.reserve(keep.size());
  for (int i : keep) {
    InfoBlock b = model.stratum_observed_info({data.y[i].data(), data.y[i].size()},
                                              stratum_x(data, i), con.theta.psi,
                                              con.theta.lambda[i]);
    jt_diag.push_back(b.lambda_lambda);
  }
  CovArrow cov =
      use_mc ? mc_cov(model, data, full.theta, con.theta, keep, opts.mc_size,
                      Rng(opts.mc_seed, opts.mc_stream))
             : analytic_cov(model, data, full.theta, con.theta, keep);
  out.u = assemble_u(cov, jhat, jt_diag);
  double ratio = out.u / out.r;
  if (!(ratio > 0.0) || !std::isfinite(ratio))
    throw FitError("r* correction undefined: u/r not positive");
  out.rstar = out.r + std::log(ratio) / out.r;
  return out;
}

}  // namespace

RStarResult rstar_at(const StratumModel& model, const StratifiedDataset& data, double psi0,
                     const FitResult& full, const FitResult& constrained,
                     const RStarOptions& opts) {
  if (!(opts.window > 0.0)) throw InvalidInput("window must be positive");
  bool use_mc = opts.force_mc || !model.has_pair_moments();

  RStarResult res;
  res.method = use_mc ? "monte-carlo-expectation" : "analytic-expectation";
  res.expectation = use_mc ? "constrained-draws-reweighted-to-mle" : "closed-form-under-mle";
  res.mc_size = use_mc ? opts.mc_size : 0;
  res.r = signed_root(psi0, full, constrained);

  if (std::fabs(res.r) >= opts.window) {
    DirectEval d = direct_eval(model, data, psi0, full, constrained, opts, use_mc);
    res.u = d.u;
    res.rstar = d.rstar;
    res.correction = d.rstar - d.r;
    return res;
  }

  // Bridge the removable singularity at r = 0: evaluate the direct formula at
  // three nearby roots and pass a quadratic through the (r, rstar) pairs.
  res.interpolated = true;
  res.u = kNaN;
  std::vector<int> keep = retained_strata(data, full);
  InfoArrow jhat = observed_arrow(model, data, full.theta, keep);
  double jp = jhat.schur();
  if (!(jp > 0.0)) throw NonPositiveInformation("profile information not positive at the MLE");
  double scale = 1.0 / std::sqrt(jp);
  double psi_hat = full.theta.psi;

  const double targets[3] = {-opts.window, opts.window, 2.0 * opts.window};
  double rn[3], yn[3];
  FitOptions copt;
  copt.warm = &full.theta;
  copt.check_data = false;
  for (int t = 0; t < 3; ++t) {
    double target = targets[t];
    // Secant search for R(psi) = target, seeded by the Wald step.
    double x0 = psi_hat - target * scale;
    double x1 = psi_hat - 1.15 * target * scale;
    FitResult c0 = fit_constrained(model, data, x0, copt);
    double f0 = signed_root(x0, full, c0) - target;
    FitResult best = c0;
    double best_psi = x0, best_f = f0;
    for (int it = 0; it < 12 && std::fabs(best_f) > 0.1 * opts.window; ++it) {
      FitResult c1;
      double f1;
      try {
        c1 = fit_constrained(model, data, x1, copt);
        f1 = signed_root(x1, full, c1) - target;
      } catch (const std::exception&) {
        break; // overshot into a bad region; settle for the best node so far
      }
      if (std::fabs(f1) < std::fabs(best_f)) {
        best = c1;
        best_psi = x1;
        best_f = f1;
      }
      if (f1 == f0) break;
      double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
      x0 = x1;
      f0 = f1;
      x1 = x2;
    }
    DirectEval d = direct_eval(model, data, best_psi, full, best, opts, use_mc);
    rn[t] = d.r;
    yn[t] = d.rstar;
  }
  if (std::fabs(rn[0] - rn[1]) < 1e-9 || std::fabs(rn[0] - rn[2]) < 1e-9 ||
      std::fabs(rn[1] - rn[2]) < 1e-9)
    throw FitError("r* interpolation nodes collapsed");
  double v = 0.0;
  for (int k = 0; k < 3; ++k) {
    double term = yn[k];
    for (int j = 0; j < 3; ++j)
      if (j != k) term *= (res.r - rn[j]) / (rn[k] - rn[j]);
    v += term;
  }
  res.rstar = v;
  res.correction = res.rstar - res.r;
  return res;
}

RStarResult rstar(const StratumModel& model, const StratifiedDataset& data, double psi0,
                  const RStarOptions& opts) {
  FitResult full = fit_mle(model, data);
  FitOptions copt;
  copt.warm = &full.theta;
  FitResult con = fit_constrained(model, data, psi0, copt);
  return rstar_at(model, data, psi0, full, con, opts);
}

}  // namespace stratboot
