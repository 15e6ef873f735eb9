#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "stratboot/estimation.hpp"
#include "stratboot/model.hpp"
#include "stratboot/pivots.hpp"
#include "stratboot/rng.hpp"

namespace stratboot {

enum class Variant { Constrained, Unconstrained };
enum class StatKind { R = 0, S = 1, T = 2 };

const char* variant_name(Variant v);
const char* stat_name(StatKind s);

struct BootstrapPlan {
  Variant variant = Variant::Constrained;
  int k = 1000;              // replicate count
  std::uint64_t seed = 0;    // ignored by the parent-Rng overload
  double fail_budget = 0.01; // fraction of k allowed to fail per statistic
  int workers = 1;
};

// Raw engine output: one (R, S, T) triple per replicate, NaN where that
// statistic could not be evaluated. Slot order is the replicate index, so
// every downstream reduction is independent of the worker count.
struct BootstrapRun {
  Variant variant = Variant::Constrained;
  double eval_psi = 0.0; // psi at which replicate statistics were evaluated
  int k = 0;
  std::vector<std::array<double, 3>> stats;
};

struct BootstrapResult {
  Variant variant = Variant::Constrained;
  StatKind stat = StatKind::R;
  double observed = 0.0; // statistic at psi0 on the original data
  double pvalue = 0.0;   // #{replicate <= observed} / n_success
  int k = 0;
  int failures = 0;
  int n_success = 0;
  std::vector<double> replicate_stats; // successful replicates, replicate order
};

// Simulates k datasets matching the observed layout (same strata sizes and
// covariates, dropped strata excluded), refits each, and evaluates all three
// pivots. Constrained variant simulates at `constrained.theta` and evaluates
// at psi0; unconstrained simulates at `full.theta` and evaluates at psi_hat.
// Replicate r draws from base.child(r).
BootstrapRun run_bootstrap(const StratumModel& model, const StratifiedDataset& data,
                           double psi0, const FitResult& full, const FitResult& constrained,
                           const BootstrapPlan& plan, const Rng& base);

// Applies the failure budget and tie-inclusive counting rule for one
// statistic. Throws TooManyFailures past the budget.
BootstrapResult extract_pvalue(const BootstrapRun& run, StatKind stat, double observed,
                               double fail_budget);

// Convenience wrappers that fit the observed data themselves. The observed
// statistic is always evaluated at psi0. Streams: Rng(plan.seed).child(1)
// for the constrained variant, child(2) for the unconstrained one.
BootstrapResult constrained_pvalue(const StratumModel& model, const StratifiedDataset& data,
                                   double psi0, StatKind stat, const BootstrapPlan& plan);
BootstrapResult unconstrained_pvalue(const StratumModel& model, const StratifiedDataset& data,
                                     double psi0, StatKind stat, const BootstrapPlan& plan);

// Mean and sd (k-1 divisor) of the successful replicates. Throws
// DegenerateSample when fewer than two replicates survive or the sd is zero.
MomentAdjustment bootstrap_moments(const BootstrapResult& result);

}  // namespace stratboot
