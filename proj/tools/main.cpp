#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "stratboot/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"stratboot: higher-order inference for stratified models"};
  app.require_subcommand(1);

  stratboot::FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Maximum likelihood fit of a stratified dataset");
  fit->add_option("--model", fit_args.model,
                  "gamma | beta | curved_normal | behrens_fisher | matched_pairs")
      ->required();
  fit->add_option("--data", fit_args.data_path, "Dataset CSV (stratum,y[,x])")->required();
  fit->add_option("--out", fit_args.out_dir, "Output directory for fit.json");

  stratboot::PvalueArgs pv_args;
  auto* pv = app.add_subcommand("pvalue", "Pivots, r*, bootstrap p-values and adjusted "
                                          "statistics for a null value of psi");
  pv->add_option("--model", pv_args.model, "Model name")->required();
  pv->add_option("--data", pv_args.data_path, "Dataset CSV")->required();
  pv->add_option("--psi0", pv_args.psi0, "Null value of the interest parameter")->required();
  pv->add_option("--k", pv_args.k, "Bootstrap replicates per variant");
  pv->add_option("--seed", pv_args.seed, "RNG seed (required)")->required();
  pv->add_option("--workers", pv_args.workers, "Worker threads");
  pv->add_option("--out", pv_args.out_dir, "Also write pvalue.csv here");
  pv->add_option("--variant", pv_args.variant, "constrained | unconstrained | both");
  pv->add_option("--rstar-mc-size", pv_args.rstar_mc_size, "Draws for the r* MC path");
  pv->add_flag("--rstar-force-mc", pv_args.rstar_force_mc,
               "Use the MC path even when closed forms exist");

  stratboot::SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo experiment from a JSON spec");
  sim->add_option("spec", sim_args.spec_path, "Experiment spec JSON")->required();
  sim->add_option("--seed", sim_args.seed, "RNG seed (required; overrides the spec)")
      ->required();
  sim->add_option("--workers", sim_args.workers, "Worker threads");
  sim->add_option("--out", sim_args.out_dir, "Output directory");

  stratboot::ReportArgs rep_args;
  auto* rep = app.add_subcommand("report", "Recompute a tail report from an archive");
  rep->add_option("archive", rep_args.archive_path, "archive.csv.gz from simulate")
      ->required();
  rep->add_option("--metadata", rep_args.metadata_path,
                  "metadata.json (default: next to the archive)");
  rep->add_option("--out", rep_args.out_path, "Also write the report CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (fit->parsed()) return stratboot::cmd_fit(fit_args, std::cout, std::cerr);
  if (pv->parsed()) return stratboot::cmd_pvalue(pv_args, std::cout, std::cerr);
  if (sim->parsed()) return stratboot::cmd_simulate(sim_args, std::cout, std::cerr);
  if (rep->parsed()) return stratboot::cmd_report(rep_args, std::cout, std::cerr);
  return 1;
}
