#include "stratboot/bootstrap.hpp"

#include <cmath>
#include <cstdio>

#include "stratboot/errors.hpp"
#include "parallel.hpp"

namespace stratboot {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Observed layout with dropped strata removed; replicates are simulated and
// refit on this reduced shape only.
struct ReducedLayout {
  std::vector<std::vector<double>> x; // empty when the model has no covariate
  std::vector<int> sizes;
  ParamPoint theta;
};

ReducedLayout reduce(const StratifiedDataset& data, const FitResult& fit, bool covariates) {
  ReducedLayout out;
  out.theta.psi = fit.theta.psi;
  std::vector<char> dropped(data.strata(), 0);
  for (int i : fit.dropped_strata) dropped[i] = 1;
  for (int i = 0; i < data.strata(); ++i) {
    if (dropped[i]) continue;
    out.sizes.push_back(static_cast<int>(data.y[i].size()));
    out.theta.lambda.push_back(fit.theta.lambda[i]);
    if (covariates) out.x.push_back(data.x[i]);
  }
  if (out.sizes.empty()) throw AllStrataDiverged("no strata retained by the observed fit");
  return out;
}

StratifiedDataset simulate_like(const StratumModel& model, const ReducedLayout& lay, Rng& rng) {
  StratifiedDataset d;
  int q = static_cast<int>(lay.sizes.size());
  d.y.resize(q);
  if (!lay.x.empty()) d.x = lay.x;
  for (int i = 0; i < q; ++i) {
    d.y[i].resize(lay.sizes[i]);
    for (int j = 0; j < lay.sizes[i]; ++j) {
      double xv = lay.x.empty() ? 0.0 : lay.x[i][j];
      d.y[i][j] = model.sample(xv, lay.theta.psi, lay.theta.lambda[i], rng);
    }
  }
  return d;
}

}  // namespace

const char* variant_name(Variant v) {
  return v == Variant::Constrained ? "constrained" : "unconstrained";
}

const char* stat_name(StatKind s) {
  switch (s) {
    case StatKind::R: return "r";
    case StatKind::S: return "s";
    default: return "t";
  }
}

BootstrapRun run_bootstrap(const StratumModel& model, const StratifiedDataset& data,
                           double psi0, const FitResult& full, const FitResult& constrained,
                           const BootstrapPlan& plan, const Rng& base) {
  if (plan.k < 1) throw InvalidInput("bootstrap replicate count must be positive");
  if (!(plan.fail_budget >= 0.0 && plan.fail_budget <= 1.0))
    throw InvalidInput("fail_budget must lie in [0, 1]");

  BootstrapRun run;
  run.variant = plan.variant;
  run.k = plan.k;
  run.stats.assign(plan.k, {kNaN, kNaN, kNaN});

  const FitResult& gen = plan.variant == Variant::Unconstrained ? full : constrained;
  run.eval_psi = plan.variant == Variant::Unconstrained ? full.theta.psi : psi0;
  ReducedLayout lay = reduce(data, gen, model.uses_covariate());

  FitOptions fopt;
  fopt.check_data = false; // replicate draws are in-support by construction
  fopt.warm = &lay.theta;

  detail::parallel_for(plan.k, plan.workers, [&](long r) {
    Rng rng = base.child(static_cast<std::uint64_t>(r));
    StratifiedDataset rep = simulate_like(model, lay, rng);
    FitResult rfull, rcon;
    try {
      rfull = fit_mle(model, rep, fopt);
      rcon = fit_constrained(model, rep, run.eval_psi, fopt);
    } catch (const std::exception&) {
      return; // refit failed: all three statistics stay NaN
    }
    auto& slot = run.stats[r];
    try { slot[0] = signed_root(run.eval_psi, rfull, rcon); } catch (const std::exception&) {}
    try { slot[1] = score_stat(model, rep, rcon); } catch (const std::exception&) {}
    try { slot[2] = wald_stat(model, rep, run.eval_psi, rfull); } catch (const std::exception&) {}
  });
  return run;
}

BootstrapResult extract_pvalue(const BootstrapRun& run, StatKind stat, double observed,
                               double fail_budget) {
  BootstrapResult res;
  res.variant = run.variant;
  res.stat = stat;
  res.observed = observed;
  res.k = run.k;
  res.replicate_stats.reserve(run.k);
  int idx = static_cast<int>(stat);
  long at_or_below = 0;
  for (const auto& triple : run.stats) {
    double v = triple[idx];
    if (!std::isfinite(v)) continue;
    res.replicate_stats.push_back(v);
    if (v <= observed) ++at_or_below; // ties count against the null
  }
  res.n_success = static_cast<int>(res.replicate_stats.size());
  res.failures = run.k - res.n_success;
  if (res.failures > fail_budget * run.k || res.n_success == 0) {
    char msg[128];
    std::snprintf(msg, sizeof msg, "%d of %d bootstrap replicates failed for statistic %s",
                  res.failures, run.k, stat_name(stat));
    throw TooManyFailures(msg);
  }
  res.pvalue = static_cast<double>(at_or_below) / res.n_success;
  return res;
}

namespace {

BootstrapResult pvalue_impl(const StratumModel& model, const StratifiedDataset& data,
                            double psi0, StatKind stat, const BootstrapPlan& plan,
                            Variant variant) {
  FitResult full = fit_mle(model, data);
  FitOptions copt;
  copt.warm = &full.theta;
  FitResult con = fit_constrained(model, data, psi0, copt);

  double observed;
  switch (stat) {
    case StatKind::R: observed = signed_root(psi0, full, con); break;
    case StatKind::S: observed = score_stat(model, data, con); break;
    default: observed = wald_stat(model, data, psi0, full); break;
  }

  BootstrapPlan p = plan;
  p.variant = variant;
  Rng base = Rng(p.seed).child(variant == Variant::Constrained ? 1 : 2);
  BootstrapRun run = run_bootstrap(model, data, psi0, full, con, p, base);
  return extract_pvalue(run, stat, observed, p.fail_budget);
}

}  // namespace

BootstrapResult constrained_pvalue(const StratumModel& model, const StratifiedDataset& data,
                                   double psi0, StatKind stat, const BootstrapPlan& plan) {
  return pvalue_impl(model, data, psi0, stat, plan, Variant::Constrained);
}

BootstrapResult unconstrained_pvalue(const StratumModel& model, const StratifiedDataset& data,
                                     double psi0, StatKind stat, const BootstrapPlan& plan) {
  return pvalue_impl(model, data, psi0, stat, plan, Variant::Unconstrained);
}

MomentAdjustment bootstrap_moments(const BootstrapResult& result) {
  const auto& v = result.replicate_stats;
  long n = static_cast<long>(v.size());
  if (n < 2) throw DegenerateSample("need at least two successful replicates for moments");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  double sd = std::sqrt(ss / (n - 1));
  if (!(sd > 0.0)) throw DegenerateSample("bootstrap replicates are constant");
  return {mean, sd};
}

}  // namespace stratboot
