#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "stratboot/errors.hpp"
#include "stratboot/models.hpp"
#include "stratboot/pivots.hpp"
#include "stratboot/rng.hpp"

using namespace stratboot;

namespace {

struct Ref {
  double x;
  double value;
};

// Reference values computed with mpmath at 50 digits (tests/oracle/gen_reference.py).
const Ref NORM_CDF_REF[] = {
    {-37.0, 5.7255712225245768e-300}, {-8.0, 6.2209605742717841e-16},
    {-5.0, 2.8665157187919391e-7},    {-2.0, 0.022750131948179207},
    {-1.0, 0.15865525393145705},      {-0.5, 0.3085375387259869},
    {0.0, 0.5},                       {0.5, 0.6914624612740131},
    {1.0, 0.84134474606854295},       {2.0, 0.97724986805182079},
    {5.0, 0.99999971334842812},       {8.0, 0.99999999999999938},
};

const Ref NORM_QUANTILE_REF[] = {
    {1e-12, -7.0344838253011319},  {1e-9, -5.9978070150076869},
    {0.0005, -3.2905267314918948}, {0.025, -1.9599639845400542},
    {0.3, -0.52440051270804078},   {0.5, 0.0},
    {0.7, 0.52440051270804078},    {0.975, 1.9599639845400542},
    {0.9995, 3.2905267314918948},
};

}  // namespace

TEST_CASE("normal cdf matches high precision references") {
  for (const auto& ref : NORM_CDF_REF) {
    CAPTURE(ref.x);
    double got = norm_cdf(ref.x);
    CHECK(std::abs(got - ref.value) <= 1e-14 * std::max(1.0, std::abs(ref.value)) +
                                           1e-15 * ref.value);
    // relative accuracy even deep in the tail
    CHECK(got == doctest::Approx(ref.value).epsilon(1e-12));
  }
  for (double x : {-3.0, -1.2, 0.0, 0.4, 2.7}) {
    CHECK(norm_cdf(x) + norm_cdf(-x) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("normal quantile matches high precision references") {
  for (const auto& ref : NORM_QUANTILE_REF) {
    CAPTURE(ref.x);
    CHECK(norm_quantile(ref.x) == doctest::Approx(ref.value).epsilon(1e-13));
  }
  CHECK_THROWS_AS(norm_quantile(0.0), std::domain_error);
  CHECK_THROWS_AS(norm_quantile(1.0), std::domain_error);
  CHECK_THROWS_AS(norm_quantile(-0.2), std::domain_error);
  CHECK_THROWS_AS(norm_quantile(1.7), std::domain_error);
}

TEST_CASE("quantile and cdf are mutual inverses") {
  for (double x = -6.0; x <= 6.0; x += 0.25) {
    CHECK(std::abs(norm_quantile(norm_cdf(x)) - x) <= 1e-8);
  }
  for (double p : {1e-10, 1e-4, 0.2, 0.5, 0.77, 1 - 1e-6}) {
    CHECK(norm_cdf(norm_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  }
}

TEST_CASE("hand worked common mean example") {
  // One stratum, y = {0, 2}: psi_hat = 1, sigma^2_hat = 1, and at psi0 = 0
  // the three pivots come out in closed form.
  auto model = make_model("behrens_fisher");
  StratifiedDataset data;
  data.y = {{0.0, 2.0}};
  FitResult full = fit_mle(*model, data);
  REQUIRE(full.converged);
  CHECK(full.theta.psi == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(full.theta.lambda[0] == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(full.loglik == doctest::Approx(-2.8378770664093453).epsilon(1e-12));

  FitResult con = fit_constrained(*model, data, 0.0);
  CHECK(con.theta.lambda[0] == doctest::Approx(std::log(2.0)).epsilon(1e-10));

  PivotSet p = compute_pivots(*model, data, 0.0, full, con);
  CHECK(p.r == doctest::Approx(std::sqrt(2.0 * std::log(2.0))).epsilon(1e-9));
  CHECK(p.s == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(p.t == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(p.psi_hat == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("single stratum identity links r and t for the common mean model") {
  // With one stratum of size m, r^2 = m log(1 + t^2 / m) exactly.
  Rng rng(7, 0);
  auto model = make_model("behrens_fisher");
  for (int rep = 0; rep < 10; ++rep) {
    const int m = 4 + rep;
    StratifiedDataset data;
    data.y.resize(1);
    for (int j = 0; j < m; ++j) data.y[0].push_back(rng.normal() * 1.3 + 0.4);
    FitResult full = fit_mle(*model, data);
    double psi0 = full.theta.psi - 0.8 * rng.uniform();
    FitResult con = fit_constrained(*model, data, psi0);
    PivotSet p = compute_pivots(*model, data, psi0, full, con);
    CAPTURE(rep);
    CHECK(p.r * p.r ==
          doctest::Approx(m * std::log1p(p.t * p.t / m)).epsilon(1e-7));
    CHECK(std::signbit(p.r) == std::signbit(p.t));
  }
}

TEST_CASE("pivots vanish at the MLE and decrease in psi0") {
  auto model = make_model("gamma");
  ParamPoint th = default_truths("gamma", 5, 17);
  Rng rng = Rng(17).child(1).child(0).child(0);
  StratifiedDataset data = simulate_dataset(*model, th, 5, 6, rng);
  FitResult full = fit_mle(*model, data);
  REQUIRE(full.converged);

  FitResult at_hat = fit_constrained(*model, data, full.theta.psi);
  PivotSet p0 = compute_pivots(*model, data, full.theta.psi, full, at_hat);
  CHECK(p0.r == 0.0);
  CHECK(p0.t == 0.0);
  CHECK(std::abs(p0.s) < 1e-4);

  double last_r = 1e300, last_s = 1e300;
  for (double d : {-0.6, -0.3, 0.0, 0.3, 0.6}) {
    double psi0 = full.theta.psi + d;
    FitResult con = fit_constrained(*model, data, psi0);
    PivotSet p = compute_pivots(*model, data, psi0, full, con);
    CHECK(p.r < last_r);
    CHECK(p.s < last_s);
    last_r = p.r;
    last_s = p.s;
    if (d != 0.0) {
      CHECK(std::signbit(p.r) == std::signbit(-d));
      CHECK(std::signbit(p.t) == std::signbit(-d));
      CHECK(std::abs(p.r) > 0.0);
    }
  }
}

TEST_CASE("moment adjustment semantics") {
  MomentAdjustment m;
  m.mean = 0.4;
  m.sd = 2.0;
  CHECK(adjust(1.4, m, AdjustMode::Location) == doctest::Approx(1.0));
  CHECK(adjust(1.4, m, AdjustMode::LocationScale) == doctest::Approx(0.5));
  MomentAdjustment degenerate;
  degenerate.mean = 0.0;
  degenerate.sd = 0.0;
  CHECK(adjust(1.0, degenerate, AdjustMode::Location) == doctest::Approx(1.0));
  CHECK_THROWS_AS(adjust(1.0, degenerate, AdjustMode::LocationScale),
                  DegenerateSample);
}

TEST_CASE("defensive checks on crafted fits") {
  auto model = make_model("behrens_fisher");
  StratifiedDataset data;
  data.y = {{0.0, 2.0}};
  FitResult full = fit_mle(*model, data);
  FitResult con = fit_constrained(*model, data, 0.0);

  // constrained "maximum" above the unconstrained one is impossible
  FitResult bogus = con;
  bogus.loglik = full.loglik + 1.0;
  CHECK_THROWS_AS(signed_root(0.0, full, bogus), NegativeDeviance);

  // tiny negative deviance from roundoff is forgiven
  FitResult nearly = con;
  nearly.loglik = full.loglik + 1e-12;
  CHECK(signed_root(full.theta.psi, full, nearly) == 0.0);

  // fits must agree on which strata were retained
  FitResult mismatched = con;
  mismatched.dropped_strata = {0};
  CHECK_THROWS_AS(signed_root(0.0, full, mismatched), InvalidInput);
  CHECK_THROWS_AS(compute_pivots(*model, data, 0.0, full, mismatched),
                  InvalidInput);
}
