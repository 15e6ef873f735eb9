#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stratboot/bootstrap.hpp"
#include "stratboot/models.hpp"
#include "stratboot/rstar.hpp"

namespace stratboot {

// One requested statistic. Names:
//   r, s, t          raw pivots
//   rstar            modified signed root
//   r_c, s_c, t_c    normal quantile of the constrained bootstrap p-value
//   r_u, s_u, t_u    same, unconstrained
//   r_l_c, r_ls_c    location / location-scale adjusted pivot, moments from
//   ... s_*, t_*     the constrained (_c) or unconstrained (_u) bootstrap
struct StatRequest {
  enum class Family { Pivot, RStar, BootstrapP, Adjusted };
  std::string name;
  Family family = Family::Pivot;
  StatKind base = StatKind::R;
  Variant variant = Variant::Constrained;
  AdjustMode mode = AdjustMode::Location;
};

StatRequest parse_statistic(const std::string& name);

struct ExperimentSpec {
  std::string model;
  int q = 0;
  int m = 0;
  int n_reps = 0;
  int k_bootstrap = 1;
  std::vector<std::string> statistics;
  std::vector<double> levels = {1.0, 2.5, 5.0, 95.0, 97.5, 99.0}; // percent
  std::uint64_t seed = 0;
  double fail_budget = 0.005;  // allowed failing fraction per statistic
  int rstar_mc_size = 2000;
  bool rstar_force_mc = false;

  static ExperimentSpec from_json_text(const std::string& text);
  static ExperimentSpec from_json_file(const std::string& path);
  void validate() const;
  // Fixed key order and number formatting, so the hash identifies the config.
  std::string canonical_json() const;
  std::uint64_t config_hash() const; // FNV-1a 64 of canonical_json
};

struct TailCell {
  double freq = 0.0; // percent
  double se = 0.0;   // binomial SE of freq, percent
  long n_eff = 0;
};

struct TailReport {
  std::string model;
  int q = 0;
  int m = 0;
  std::vector<std::string> statistics;
  std::vector<double> levels;
  std::vector<std::vector<TailCell>> cells; // [statistic][level]
  long n_reps = 0;
  std::vector<long> failures; // per statistic
  std::uint64_t seed = 0;
  std::uint64_t spec_hash = 0;
  double runtime_seconds = 0.0; // metadata only, never in the report CSV
};

struct ReplicateRecord {
  long replicate = 0;
  std::string statistic;
  double value = 0.0;  // normal-scale value
  double pvalue = 0.0; // p-scale value; tail counting always uses this column
};

struct ExperimentResult {
  TailReport report;
  std::vector<ReplicateRecord> archive; // replicate-major, request order within
  ParamPoint theta0;
  bool budget_breached = false;
};

// Simulates n_reps datasets at the seeded generating truth, evaluates every
// requested statistic against psi0 = true psi, and tabulates tail frequencies:
// freq at level l is the percentage of p-scale values <= l/100. Identical
// output bytes for any worker count.
ExperimentResult run_experiment(const ExperimentSpec& spec, int workers = 1);

void write_tail_report_csv(const TailReport& rep, const std::string& path);
void write_metadata_json(const TailReport& rep, const ExperimentSpec& spec,
                         const std::string& path);
void write_archive_gz(const std::vector<ReplicateRecord>& rows, const std::string& path);
std::vector<ReplicateRecord> read_archive_gz(const std::string& path);

// Pure recomputation of the tail table from archived rows; reproduces the
// original report exactly because values round-trip at full precision. Row
// order follows `order` when given (the metadata statistic list), otherwise
// first appearance in the archive.
TailReport report_from_archive(const std::vector<ReplicateRecord>& rows,
                               const std::string& model, int q, int m,
                               const std::vector<double>& levels,
                               const std::vector<std::string>* order = nullptr);

// Aligned text table, one row per statistic, 1-decimal frequencies.
std::string render_table(const TailReport& rep);

struct MomentDiagnostic {
  double mean = 0.0;
  double variance = 0.0;
  double se_mean = 0.0;
  double se_variance = 0.0;
  long n = 0;
};

// Mean and variance of one pivot under theta0 across fresh replicates, with
// Monte Carlo standard errors. Shares the experiment stream layout, so
// replicate r here sees the same data as replicate r of run_experiment.
MomentDiagnostic moment_diagnostic(const std::string& model_name, const ParamPoint& theta0,
                                   int q, int m, StatKind stat, int n_reps,
                                   std::uint64_t seed, int workers = 1);

struct DensitySummary {
  // Gaussian KDE of the normal-scale values (Silverman bandwidth).
  std::vector<double> grid, density;
  // Normal QQ of the values: theoretical vs empirical quantiles.
  std::vector<double> qq_theoretical, qq_empirical;
  // p-scale views: histogram density on (0,1) and KDE of the normal quantile
  // of p, with p clamped away from {0,1} before transforming.
  std::vector<double> p_grid, p_density;
  std::vector<double> z_grid, z_density;
};

DensitySummary density_summary(const std::vector<ReplicateRecord>& rows,
                               const std::string& statistic, int grid_size = 101);
// Long-format CSV: series,x,y with series in
// {value_density, value_qq, pvalue_hist, pvalue_z_density}.
void write_density_csv(const DensitySummary& d, const std::string& path);

}  // namespace stratboot
