#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace stratboot {

// Command bodies take plain argument structs so tests can drive them without
// a terminal. Each returns the process exit code: 0 success, 1 user or fit
// error, 2 failure-budget breach.

struct FitArgs {
  std::string model;
  std::string data_path;
  std::string out_dir = ".";
};
int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err);

struct PvalueArgs {
  std::string model;
  std::string data_path;
  double psi0 = 0.0;
  int k = 1000;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out_dir; // empty: stdout only
  std::string variant = "both"; // constrained | unconstrained | both
  int rstar_mc_size = 2000;
  bool rstar_force_mc = false;
};
int cmd_pvalue(const PvalueArgs& args, std::ostream& out, std::ostream& err);

struct SimulateArgs {
  std::string spec_path;
  std::uint64_t seed = 0; // required at the flag level; overrides the spec
  int workers = 1;
  std::string out_dir = ".";
};
int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);

struct ReportArgs {
  std::string archive_path;
  std::string metadata_path; // empty: metadata.json next to the archive
  std::string out_path;      // empty: stdout only
};
int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err);

}  // namespace stratboot
