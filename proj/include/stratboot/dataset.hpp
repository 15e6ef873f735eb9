#pragma once

#include <string>
#include <vector>

namespace stratboot {

// Full parameter point: scalar interest psi plus one nuisance per stratum.
struct ParamPoint {
  double psi = 0.0;
  std::vector<double> lambda;

  int dim() const { return 1 + static_cast<int>(lambda.size()); }
  void validate(int q) const;  // q strata expected, all components finite
};

// Stratified observations. y[i][j] is observation j of stratum i; x mirrors
// the shape of y when the model carries a per-observation covariate and is
// empty otherwise.
struct StratifiedDataset {
  std::vector<std::vector<double>> y;
  std::vector<std::vector<double>> x;

  int strata() const { return static_cast<int>(y.size()); }
  long total_obs() const;
  bool has_covariates() const { return !x.empty(); }
  void validate() const;

  // Format: header "stratum,y" or "stratum,y,x", strata indexed 1..q.
  static StratifiedDataset load_csv(const std::string& path);
  void save_csv(const std::string& path) const;
};

}  // namespace stratboot
