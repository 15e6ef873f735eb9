#include "stratboot/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stratboot/errors.hpp"
#include "stratboot/models.hpp"

namespace stratboot {

namespace {

constexpr double LAM_MAX = 350.0;  // |lambda| beyond this counts as escaped
constexpr double PSI_MAX = 350.0;

inline std::span<const double> xspan(const StratifiedDataset& d, int i) {
  return d.has_covariates() ? std::span<const double>(d.x[i])
                            : std::span<const double>();
}

std::vector<char> keep_mask(const StratifiedDataset& data,
                            const std::vector<int>& dropped) {
  std::vector<char> keep(data.strata(), 1);
  for (int i : dropped) keep[i] = 0;
  return keep;
}

// 1-d safeguarded Newton for the within-stratum nuisance: solve u(lam) = 0
// where u is the lambda score. Keeps a sign-change bracket and falls back to
// bisection or doubling expansion whenever the Newton step is unusable.
double solve_lambda(const StratumModel& model, std::span<const double> y,
                    std::span<const double> x, double psi, double guess,
                    const FitOptions& opts, int stratum) {
  if (opts.use_closed_form) {
    if (auto cf = model.nuisance_closed_form(y, x, psi)) {
      if (!std::isfinite(*cf)) throw StratumDiverged(stratum);
      return *cf;
    }
  }
  double lam = std::isfinite(guess) ? guess : 0.0;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double expand = 1.0;
  double l_cur = model.stratum_loglik(y, x, psi, lam);

  for (int it = 0; it < opts.max_iter; ++it) {
    double u = model.stratum_score(y, x, psi, lam).lambda;
    if (std::abs(u) <= opts.grad_tol) return lam;
    if (u > 0.0)
      lo = std::max(lo, lam);
    else
      hi = std::min(hi, lam);

    double j = model.stratum_observed_info(y, x, psi, lam).lambda_lambda;
    double cand = std::numeric_limits<double>::quiet_NaN();
    if (j > 0.0) cand = lam + u / j;
    if (!std::isfinite(cand) || cand <= lo || cand >= hi) {
      if (std::isfinite(lo) && std::isfinite(hi)) {
        cand = 0.5 * (lo + hi);
      } else {
        cand = lam + (u > 0.0 ? expand : -expand);
        expand *= 2.0;
      }
    }
    // step halving when the candidate loses likelihood
    double l_cand = model.stratum_loglik(y, x, psi, cand);
    for (int h = 0; h < 30 && !(l_cand >= l_cur - 1e-10 * (1.0 + std::abs(l_cur)));
         ++h) {
      cand = 0.5 * (cand + lam);
      l_cand = model.stratum_loglik(y, x, psi, cand);
    }
    lam = cand;
    l_cur = l_cand;
    if (std::abs(lam) > LAM_MAX) throw StratumDiverged(stratum);
  }
  throw NoConvergence("stratum " + std::to_string(stratum + 1) +
                      ": nuisance search did not converge");
}

struct ProfileState {
  double psi = 0.0;
  std::vector<double> lambda;  // full length; dropped slots hold 0
  double lp = 0.0;             // profile loglik over retained strata
  int inner_iters = 0;
};

ProfileState eval_profile(const StratumModel& model, const StratifiedDataset& data,
                          const std::vector<char>& keep, double psi,
                          const std::vector<double>* warm, const FitOptions& opts) {
  ProfileState st;
  st.psi = psi;
  st.lambda.assign(data.strata(), 0.0);
  for (int i = 0; i < data.strata(); ++i) {
    if (!keep[i]) continue;
    auto ys = std::span<const double>(data.y[i]);
    auto xs = xspan(data, i);
    double guess = warm ? (*warm)[i] : model.nuisance_guess(ys, xs, psi);
    st.lambda[i] = solve_lambda(model, ys, xs, psi, guess, opts, i);
    st.lp += model.stratum_loglik(ys, xs, psi, st.lambda[i]);
  }
  return st;
}

double profile_score_masked(const StratumModel& model, const StratifiedDataset& data,
                            const std::vector<char>& keep, double psi,
                            const std::vector<double>& lambda) {
  double up = 0.0;
  for (int i = 0; i < data.strata(); ++i)
    if (keep[i])
      up += model.stratum_score(data.y[i], xspan(data, i), psi, lambda[i]).psi;
  return up;
}

double profile_info_masked(const StratumModel& model, const StratifiedDataset& data,
                           const std::vector<char>& keep, double psi,
                           const std::vector<double>& lambda) {
  double jpp = 0.0, adj = 0.0;
  for (int i = 0; i < data.strata(); ++i) {
    if (!keep[i]) continue;
    InfoBlock b =
        model.stratum_observed_info(data.y[i], xspan(data, i), psi, lambda[i]);
    if (!(b.lambda_lambda > 0.0))
      throw NonPositiveInformation("stratum " + std::to_string(i + 1) +
                                   ": nuisance curvature not positive");
    jpp += b.psi_psi;
    adj += b.psi_lambda * b.psi_lambda / b.lambda_lambda;
  }
  return jpp - adj;
}

}  // namespace

std::vector<int> degenerate_strata(const StratumModel& model,
                                   const StratifiedDataset& data) {
  std::vector<int> dropped;
  if (!model.discrete()) return dropped;
  for (int i = 0; i < data.strata(); ++i)
    if (model.stratum_degenerate(data.y[i], xspan(data, i))) dropped.push_back(i);
  return dropped;
}

FitResult fit_constrained(const StratumModel& model, const StratifiedDataset& data,
                          double psi, const FitOptions& opts) {
  if (opts.check_data) validate_data(model, data);
  if (!std::isfinite(psi)) throw InvalidInput("fit_constrained: psi not finite");
  FitResult r;
  r.dropped_strata = degenerate_strata(model, data);
  if (static_cast<int>(r.dropped_strata.size()) == data.strata())
    throw AllStrataDiverged();
  auto keep = keep_mask(data, r.dropped_strata);
  const std::vector<double>* warm = nullptr;
  if (opts.warm && static_cast<int>(opts.warm->lambda.size()) == data.strata())
    warm = &opts.warm->lambda;
  ProfileState st = eval_profile(model, data, keep, psi, warm, opts);
  r.theta.psi = psi;
  r.theta.lambda = std::move(st.lambda);
  r.loglik = st.lp;
  r.iterations = 1;
  r.converged = true;
  return r;
}

FitResult fit_mle(const StratumModel& model, const StratifiedDataset& data,
                  const FitOptions& opts) {
  if (opts.check_data) validate_data(model, data);
  FitResult r;
  r.dropped_strata = degenerate_strata(model, data);
  if (static_cast<int>(r.dropped_strata.size()) == data.strata())
    throw AllStrataDiverged();
  auto keep = keep_mask(data, r.dropped_strata);

  double psi = opts.warm ? opts.warm->psi : model.interest_guess(data);
  const std::vector<double>* warm0 = nullptr;
  if (opts.warm && static_cast<int>(opts.warm->lambda.size()) == data.strata())
    warm0 = &opts.warm->lambda;
  ProfileState cur = eval_profile(model, data, keep, psi, warm0, opts);

  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double expand = 0.5;
  // Iterative inner solves each leave O(grad_tol) noise in the profile
  // score, so the outer test has to scale with the retained stratum count.
  long n_kept = std::count(keep.begin(), keep.end(), char(1));
  double tol = opts.grad_tol * (1.0 + static_cast<double>(n_kept));

  for (int it = 1; it <= opts.max_iter; ++it) {
    double up = profile_score_masked(model, data, keep, cur.psi, cur.lambda);
    bool resolved = hi - lo < 1e-11 * (1.0 + std::abs(cur.psi));
    if (std::abs(up) <= tol || resolved) {
      r.theta.psi = cur.psi;
      r.theta.lambda = cur.lambda;
      r.loglik = cur.lp;
      r.iterations = it;
      r.converged = true;
      return r;
    }
    if (up > 0.0)
      lo = std::max(lo, cur.psi);
    else
      hi = std::min(hi, cur.psi);

    double cand = std::numeric_limits<double>::quiet_NaN();
    double jp;
    try {
      jp = profile_info_masked(model, data, keep, cur.psi, cur.lambda);
    } catch (const NonPositiveInformation&) {
      jp = -1.0;  // force a safeguarded step
    }
    if (jp > 0.0) cand = cur.psi + up / jp;
    if (!std::isfinite(cand) || cand <= lo || cand >= hi) {
      if (std::isfinite(lo) && std::isfinite(hi)) {
        cand = 0.5 * (lo + hi);
      } else {
        cand = cur.psi + (up > 0.0 ? expand : -expand);
        expand *= 2.0;
      }
    }
    ProfileState nxt = eval_profile(model, data, keep, cand, &cur.lambda, opts);
    for (int h = 0; h < 30 && !(nxt.lp >= cur.lp - 1e-10 * (1.0 + std::abs(cur.lp)));
         ++h) {
      cand = 0.5 * (cand + cur.psi);
      nxt = eval_profile(model, data, keep, cand, &cur.lambda, opts);
    }
    cur = std::move(nxt);
    if (std::abs(cur.psi) > PSI_MAX)
      throw NoConvergence("psi escaped during maximization");
  }
  throw NoConvergence("profile maximization did not converge");
}

double profile_score(const StratumModel& model, const StratifiedDataset& data,
                     double psi, const FitOptions& opts) {
  FitResult c = fit_constrained(model, data, psi, opts);
  return profile_score_at(model, data, c);
}

double profile_info(const StratumModel& model, const StratifiedDataset& data,
                    double psi, const FitOptions& opts) {
  FitResult c = fit_constrained(model, data, psi, opts);
  return profile_info_at(model, data, c);
}

double profile_score_at(const StratumModel& model, const StratifiedDataset& data,
                        const FitResult& constrained) {
  auto keep = keep_mask(data, constrained.dropped_strata);
  return profile_score_masked(model, data, keep, constrained.theta.psi,
                              constrained.theta.lambda);
}

double profile_info_at(const StratumModel& model, const StratifiedDataset& data,
                       const FitResult& constrained) {
  auto keep = keep_mask(data, constrained.dropped_strata);
  return profile_info_masked(model, data, keep, constrained.theta.psi,
                             constrained.theta.lambda);
}

double partial_expected_info(const StratumModel& model, const StratifiedDataset& data,
                             const ParamPoint& theta,
                             const std::vector<int>* dropped) {
  theta.validate(data.strata());
  std::vector<char> keep(data.strata(), 1);
  if (dropped)
    for (int i : *dropped) keep[i] = 0;
  double ipp = 0.0, adj = 0.0;
  for (int i = 0; i < data.strata(); ++i) {
    if (!keep[i]) continue;
    InfoBlock b = model.stratum_expected_info(
        xspan(data, i), static_cast<int>(data.y[i].size()), theta.psi,
        theta.lambda[i]);
    if (!(b.lambda_lambda > 0.0))
      throw NonPositiveInformation("stratum " + std::to_string(i + 1) +
                                   ": expected nuisance information not positive");
    ipp += b.psi_psi;
    adj += b.psi_lambda * b.psi_lambda / b.lambda_lambda;
  }
  return ipp - adj;
}

}  // namespace stratboot
