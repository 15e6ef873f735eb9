#include "stratboot/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "stratboot/errors.hpp"
#include "stratboot/pivots.hpp"
#include "stratboot/rstar.hpp"
#include "stratboot/simlab.hpp"

namespace stratboot {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ModelConfig cli_config(const std::string& model) {
  ModelConfig cfg;
  // Only the simulated design needs the stratum size; fitting real data takes
  // covariates from the file, so any valid placeholder works here.
  if (model == "matched_pairs") cfg.design_m = 2;
  return cfg;
}

void ensure_dir(const std::string& dir) {
  if (dir.empty() || dir == ".") return;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create output directory: " + dir);
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  return (std::filesystem::path(dir) / name).string();
}

}  // namespace

int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err) {
  try {
    auto model = make_model(args.model, cli_config(args.model));
    StratifiedDataset data = StratifiedDataset::load_csv(args.data_path);
    FitResult fit = fit_mle(*model, data);

    out << "model " << args.model << "\n";
    out << "psi_hat " << g17(fit.theta.psi) << "\n";
    out << "loglik " << g17(fit.loglik) << "\n";
    out << "iterations " << fit.iterations << "\n";
    out << "dropped_strata";
    for (int i : fit.dropped_strata) out << ' ' << (i + 1);
    out << "\n";

    ensure_dir(args.out_dir);
    ordered_json j;
    j["model"] = args.model;
    j["q"] = data.strata();
    j["psi_hat"] = fit.theta.psi;
    j["lambda_hat"] = fit.theta.lambda;
    j["loglik"] = fit.loglik;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    std::vector<int> dropped1;
    for (int i : fit.dropped_strata) dropped1.push_back(i + 1);
    j["dropped_strata"] = dropped1; // 1-based, matching the CSV stratum column
    std::string path = join_path(args.out_dir, "fit.json");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot write " + path);
    f << j.dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

namespace {

struct PvalueRow {
  std::string statistic;
  double value;
  double pvalue;
};

double clamp_p(double p, long k) {
  double lo = 0.5 / std::max<long>(k, 1);
  return std::min(std::max(p, lo), 1.0 - lo);
}

}  // namespace

int cmd_pvalue(const PvalueArgs& args, std::ostream& out, std::ostream& err) {
  bool breached = false;
  try {
    if (args.k < 1) throw InvalidInput("bootstrap size k must be at least 1");
    if (args.workers < 1) throw InvalidInput("workers must be at least 1");
    bool want_c = args.variant == "both" || args.variant == "constrained";
    bool want_u = args.variant == "both" || args.variant == "unconstrained";
    if (!want_c && !want_u)
      throw InvalidInput("variant must be constrained, unconstrained or both");

    auto model = make_model(args.model, cli_config(args.model));
    StratifiedDataset data = StratifiedDataset::load_csv(args.data_path);
    FitResult full = fit_mle(*model, data);
    FitOptions copt;
    copt.warm = &full.theta;
    FitResult con = fit_constrained(*model, data, args.psi0, copt);

    std::optional<double> obs[3];
    try { obs[0] = signed_root(args.psi0, full, con); }
    catch (const std::exception& e) { err << "warning: r unavailable: " << e.what() << "\n"; }
    try { obs[1] = score_stat(*model, data, con); }
    catch (const std::exception& e) { err << "warning: s unavailable: " << e.what() << "\n"; }
    try { obs[2] = wald_stat(*model, data, args.psi0, full); }
    catch (const std::exception& e) { err << "warning: t unavailable: " << e.what() << "\n"; }

    std::vector<PvalueRow> rows;
    const char* base_names[3] = {"r", "s", "t"};
    for (int b = 0; b < 3; ++b)
      if (obs[b]) rows.push_back({base_names[b], *obs[b], norm_cdf(*obs[b])});

    try {
      RStarOptions ropts;
      ropts.mc_size = args.rstar_mc_size;
      ropts.force_mc = args.rstar_force_mc;
      ropts.mc_seed = args.seed;
      ropts.mc_stream = Rng(args.seed).child(3).stream_id();
      RStarResult rs = rstar_at(*model, data, args.psi0, full, con, ropts);
      rows.push_back({"rstar", rs.rstar, norm_cdf(rs.rstar)});
    } catch (const std::exception& e) {
      err << "warning: rstar unavailable: " << e.what() << "\n";
    }

    BootstrapPlan plan;
    plan.k = args.k;
    plan.workers = args.workers;
    auto add_variant = [&](Variant v, const char* suffix, const Rng& base) {
      plan.variant = v;
      BootstrapRun run = run_bootstrap(*model, data, args.psi0, full, con, plan, base);
      for (int b = 0; b < 3; ++b) {
        if (!obs[b]) continue;
        StatKind kind = static_cast<StatKind>(b);
        std::string name = base_names[b];
        try {
          BootstrapResult br = extract_pvalue(run, kind, *obs[b], plan.fail_budget);
          rows.push_back({name + "_" + suffix,
                          norm_quantile(clamp_p(br.pvalue, br.n_success)), br.pvalue});
          MomentAdjustment ma = bootstrap_moments(br);
          double vl = adjust(*obs[b], ma, AdjustMode::Location);
          rows.push_back({name + "_l_" + suffix, vl, norm_cdf(vl)});
          double vls = adjust(*obs[b], ma, AdjustMode::LocationScale);
          rows.push_back({name + "_ls_" + suffix, vls, norm_cdf(vls)});
        } catch (const TooManyFailures& e) {
          breached = true;
          err << "warning: " << name << "_" << suffix << " family: " << e.what() << "\n";
        } catch (const std::exception& e) {
          err << "warning: " << name << "_" << suffix << " family: " << e.what() << "\n";
        }
      }
    };
    if (want_c) add_variant(Variant::Constrained, "c", Rng(args.seed).child(1));
    if (want_u) add_variant(Variant::Unconstrained, "u", Rng(args.seed).child(2));

    std::ostringstream csv;
    csv << "statistic,value,pvalue\n";
    for (const auto& r : rows)
      csv << r.statistic << ',' << g17(r.value) << ',' << g17(r.pvalue) << '\n';
    out << csv.str();
    if (!args.out_dir.empty()) {
      ensure_dir(args.out_dir);
      std::string path = join_path(args.out_dir, "pvalue.csv");
      std::ofstream f(path, std::ios::binary);
      if (!f) throw InvalidInput("cannot write " + path);
      f << csv.str();
    }
    return breached ? 2 : 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.workers < 1) throw InvalidInput("workers must be at least 1");
    ExperimentSpec spec = ExperimentSpec::from_json_file(args.spec_path);
    spec.seed = args.seed; // the flag is authoritative over the file
    ExperimentResult result = run_experiment(spec, args.workers);

    ensure_dir(args.out_dir);
    write_tail_report_csv(result.report, join_path(args.out_dir, "tail_report.csv"));
    write_metadata_json(result.report, spec, join_path(args.out_dir, "metadata.json"));
    write_archive_gz(result.archive, join_path(args.out_dir, "archive.csv.gz"));
    for (const auto& stat : spec.statistics) {
      try {
        DensitySummary d = density_summary(result.archive, stat);
        write_density_csv(d, join_path(args.out_dir, "density_" + stat + ".csv"));
      } catch (const InvalidInput&) {
        // statistic failed on every replicate; density has nothing to show
      }
    }

    out << render_table(result.report);
    if (result.budget_breached) {
      err << "error: per-statistic failure budget exceeded\n";
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err) {
  try {
    std::string meta_path = args.metadata_path;
    if (meta_path.empty())
      meta_path =
          (std::filesystem::path(args.archive_path).parent_path() / "metadata.json").string();
    std::ifstream mf(meta_path, std::ios::binary);
    if (!mf) throw InvalidInput("cannot open metadata: " + meta_path);
    ordered_json meta;
    try {
      meta = ordered_json::parse(mf);
    } catch (const std::exception& e) {
      throw InvalidInput(std::string("metadata: ") + e.what());
    }

    auto rows = read_archive_gz(args.archive_path);
    auto order = meta.at("statistics").get<std::vector<std::string>>();
    TailReport rep = report_from_archive(rows, meta.at("model").get<std::string>(),
                                         meta.at("q").get<int>(), meta.at("m").get<int>(),
                                         meta.at("levels").get<std::vector<double>>(), &order);
    out << render_table(rep);
    if (!args.out_path.empty()) write_tail_report_csv(rep, args.out_path);
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace stratboot
