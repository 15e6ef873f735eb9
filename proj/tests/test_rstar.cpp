#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "stratboot/errors.hpp"
#include "stratboot/models.hpp"
#include "stratboot/pivots.hpp"
#include "stratboot/rng.hpp"
#include "stratboot/rstar.hpp"

using namespace stratboot;

namespace {

StratifiedDataset draw_data(const StratumModel& model, const ParamPoint& th, int q,
                            int m, uint64_t seed) {
  Rng rng = Rng(seed).child(1).child(0).child(0);
  return simulate_dataset(model, th, q, m, rng);
}

}  // namespace

TEST_CASE("analytic and Monte Carlo corrections agree") {
  // Models with closed-form two-point moments let both paths run on the same
  // inputs; the MC estimate must land on the analytic value within its own
  // sampling error.
  for (const char* name : {"gamma", "behrens_fisher"}) {
    CAPTURE(name);
    auto model = make_model(name);
    ParamPoint th = default_truths(name, 5, 13);
    StratifiedDataset data = draw_data(*model, th, 5, 8, 13);
    double psi0 = th.psi - 0.45;

    RStarOptions analytic;
    RStarResult a = rstar(*model, data, psi0, analytic);
    REQUIRE(a.method == "analytic-expectation");
    REQUIRE_FALSE(a.interpolated);
    CHECK(a.mc_size == 0);

    RStarOptions mc;
    mc.force_mc = true;
    mc.mc_size = 40000;
    mc.mc_seed = 99;
    mc.mc_stream = 5;
    RStarResult b = rstar(*model, data, psi0, mc);
    REQUIRE(b.method == "monte-carlo-expectation");
    CHECK(b.mc_size == 40000);
    CHECK(a.r == doctest::Approx(b.r).epsilon(1e-12));
    // u is a smooth functional of O(q m) averaged moments; 40k draws put the
    // MC error well under 5% here
    CHECK(b.u == doctest::Approx(a.u).epsilon(0.05));
    CHECK(b.rstar == doctest::Approx(a.rstar).epsilon(0.02));
  }
}

TEST_CASE("Monte Carlo path is deterministic in its stream") {
  auto model = make_model("beta");
  ParamPoint th = default_truths("beta", 4, 23);
  StratifiedDataset data = draw_data(*model, th, 4, 6, 23);
  double psi0 = th.psi - 0.4;

  RStarOptions mc;
  mc.mc_size = 4000;
  mc.mc_seed = 7;
  mc.mc_stream = 3;
  RStarResult a = rstar(*model, data, psi0, mc);
  RStarResult b = rstar(*model, data, psi0, mc);
  // beta has no closed-form moments, so MC engages without force_mc
  CHECK(a.method == "monte-carlo-expectation");
  CHECK(a.rstar == b.rstar);
  CHECK(a.u == b.u);

  mc.mc_stream = 4;
  RStarResult c = rstar(*model, data, psi0, mc);
  CHECK(a.u != c.u);
  CHECK(a.r == c.r);
}

TEST_CASE("Monte Carlo precision improves with the draw count") {
  auto model = make_model("gamma");
  ParamPoint th = default_truths("gamma", 4, 29);
  StratifiedDataset data = draw_data(*model, th, 4, 6, 29);
  double psi0 = th.psi - 0.5;

  RStarOptions analytic;
  double truth = rstar(*model, data, psi0, analytic).u;

  auto spread = [&](int size) {
    double lo = 1e300, hi = -1e300;
    for (uint64_t stream = 0; stream < 8; ++stream) {
      RStarOptions mc;
      mc.force_mc = true;
      mc.mc_size = size;
      mc.mc_seed = 31;
      mc.mc_stream = 100 + stream;
      double u = rstar(*model, data, psi0, mc).u;
      lo = std::min(lo, u);
      hi = std::max(hi, u);
    }
    return hi - lo;
  };
  double small = spread(500);
  double large = spread(32000);
  CHECK(large < small);           // 64x the draws shrinks the spread
  CHECK(large < 0.2 * std::abs(truth) + 1e-12);
}

TEST_CASE("rstar shrinks the signed root toward its normal scale") {
  // q strata of small m leave R visibly biased; the corrected statistic has
  // to track the exact tail far better at the generating truth.
  auto model = make_model("gamma");
  const int q = 10, m = 16, n_reps = 2000;
  ParamPoint th = default_truths("gamma", q, 37);

  int r_below = 0, rs_below = 0, rs_above = 0, total = 0;
  Rng base = Rng(37).child(1);
  for (int rep = 0; rep < n_reps; ++rep) {
    Rng rng = base.child(rep).child(0);
    StratifiedDataset data = simulate_dataset(*model, th, q, m, rng);
    try {
      FitResult full = fit_mle(*model, data);
      FitOptions warm;
      warm.warm = &full.theta;
      FitResult con = fit_constrained(*model, data, th.psi, warm);
      RStarResult rs = rstar_at(*model, data, th.psi, full, con);
      ++total;
      if (norm_cdf(rs.r) <= 0.05) ++r_below;
      if (norm_cdf(rs.rstar) <= 0.05) ++rs_below;
      if (norm_cdf(rs.rstar) >= 0.95) ++rs_above;
    } catch (const FitError&) {
    }
  }
  REQUIRE(total > 1980);
  double r_freq = 100.0 * r_below / total;
  double rs_freq = 100.0 * rs_below / total;
  double rs_hi = 100.0 * rs_above / total;
  CAPTURE(r_freq);
  CAPTURE(rs_freq);
  CAPTURE(rs_hi);
  // corrected tail within 2 points of nominal on both sides
  CHECK(std::abs(rs_freq - 5.0) < 2.0);
  CHECK(std::abs(rs_hi - 5.0) < 2.0);
  // and the correction matters: plain R is at least 2.5x further off
  CHECK(std::abs(r_freq - 5.0) > 2.5 * std::abs(rs_freq - 5.0));
}

TEST_CASE("interpolation bridges the window around r = 0") {
  auto model = make_model("gamma");
  ParamPoint th = default_truths("gamma", 6, 41);
  StratifiedDataset data = draw_data(*model, th, 6, 8, 41);
  FitResult full = fit_mle(*model, data);

  // dead center: r = 0 exactly, the direct formula is undefined there
  {
    FitOptions warm;
    warm.warm = &full.theta;
    FitResult con = fit_constrained(*model, data, full.theta.psi, warm);
    RStarResult rs = rstar_at(*model, data, full.theta.psi, full, con);
    CHECK(rs.interpolated);
    CHECK(std::isfinite(rs.rstar));
    CHECK(std::isnan(rs.u));
    // the r -> 0 limit is the location part of the correction, a few tenths
    // at q/m = 6/8; the scan below ties the interpolant to the direct branch
    CHECK(std::abs(rs.rstar) < 1.0);
    CHECK(rs.correction == rs.rstar - rs.r);
  }

  // continuity where the direct evaluation hands over to the interpolant:
  // scan psi0 from outside the window to inside and record the largest jump
  double prev = 0.0;
  bool have_prev = false, saw_switch = false;
  double max_jump = 0.0;
  for (int i = 0; i <= 60; ++i) {
    double psi0 = full.theta.psi - 0.12 + 0.004 * i;
    FitOptions warm;
    warm.warm = &full.theta;
    FitResult con = fit_constrained(*model, data, psi0, warm);
    RStarResult rs = rstar_at(*model, data, psi0, full, con);
    if (rs.interpolated) saw_switch = true;
    if (have_prev) max_jump = std::max(max_jump, std::abs(rs.rstar - prev));
    prev = rs.rstar;
    have_prev = true;
  }
  CHECK(saw_switch);
  // steps of 0.004 in psi move rstar by ~0.02; a handover glitch would show
  // up as a jump an order of magnitude larger
  CHECK(max_jump < 0.05);
}

TEST_CASE("metadata reports the path taken") {
  auto gamma = make_model("gamma");
  ParamPoint th = default_truths("gamma", 4, 43);
  StratifiedDataset data = draw_data(*gamma, th, 4, 6, 43);
  RStarResult a = rstar(*gamma, data, th.psi - 0.6);
  CHECK(a.method == "analytic-expectation");
  CHECK(a.expectation == "closed-form-under-mle");
  CHECK(a.mc_size == 0);
  CHECK_FALSE(a.interpolated);
  CHECK(std::isfinite(a.u));
  CHECK(a.rstar == doctest::Approx(a.r + std::log(a.u / a.r) / a.r).epsilon(1e-12));
  CHECK(a.correction == doctest::Approx(std::log(a.u / a.r) / a.r).epsilon(1e-9));

  // curved_normal lacks closed forms: MC engages automatically
  auto curved = make_model("curved_normal");
  ParamPoint tc = default_truths("curved_normal", 4, 44);
  StratifiedDataset dc = draw_data(*curved, tc, 4, 8, 44);
  RStarOptions opts;
  opts.mc_size = 3000;
  RStarResult b = rstar(*curved, dc, tc.psi - 0.5, opts);
  CHECK(b.method == "monte-carlo-expectation");
  CHECK(b.expectation == "constrained-draws-reweighted-to-mle");
  CHECK(b.mc_size == 3000);
}
