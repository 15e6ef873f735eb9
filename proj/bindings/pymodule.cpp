#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "stratboot/errors.hpp"
#include "stratboot/pivots.hpp"
#include "stratboot/rstar.hpp"
#include "stratboot/simlab.hpp"

namespace py = pybind11;
using namespace stratboot;

namespace {

std::unique_ptr<StratumModel> model_for(const std::string& name, int design_m) {
  ModelConfig cfg;
  cfg.design_m = design_m;
  return make_model(name, cfg);
}

StatKind kind_of(const std::string& s) {
  if (s == "r") return StatKind::R;
  if (s == "s") return StatKind::S;
  if (s == "t") return StatKind::T;
  throw InvalidInput("statistic must be r, s or t");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Higher-order inference for stratified models (C++ core)";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);

  py::class_<StratifiedDataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("y", &StratifiedDataset::y)
      .def_readwrite("x", &StratifiedDataset::x)
      .def("strata", &StratifiedDataset::strata)
      .def("total_obs", &StratifiedDataset::total_obs)
      .def_static("load_csv", &StratifiedDataset::load_csv, py::arg("path"))
      .def("save_csv", &StratifiedDataset::save_csv, py::arg("path"));

  py::class_<ParamPoint>(m, "ParamPoint")
      .def(py::init<>())
      .def(py::init([](double psi, std::vector<double> lam) {
             ParamPoint p;
             p.psi = psi;
             p.lambda = std::move(lam);
             return p;
           }),
           py::arg("psi"), py::arg("lambda"))
      .def_readwrite("psi", &ParamPoint::psi)
      .def_readwrite("lambda_", &ParamPoint::lambda);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("theta", &FitResult::theta)
      .def_readonly("loglik", &FitResult::loglik)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("dropped_strata", &FitResult::dropped_strata)
      .def_property_readonly("psi_hat",
                             [](const FitResult& f) { return f.theta.psi; });

  py::class_<PivotSet>(m, "PivotSet")
      .def_readonly("r", &PivotSet::r)
      .def_readonly("s", &PivotSet::s)
      .def_readonly("t", &PivotSet::t)
      .def_readonly("psi_hat", &PivotSet::psi_hat);

  py::class_<BootstrapResult>(m, "BootstrapResult")
      .def_readonly("observed", &BootstrapResult::observed)
      .def_readonly("pvalue", &BootstrapResult::pvalue)
      .def_readonly("k", &BootstrapResult::k)
      .def_readonly("failures", &BootstrapResult::failures)
      .def_readonly("n_success", &BootstrapResult::n_success)
      .def_readonly("replicate_stats", &BootstrapResult::replicate_stats)
      .def_property_readonly(
          "variant", [](const BootstrapResult& b) { return variant_name(b.variant); })
      .def_property_readonly(
          "statistic", [](const BootstrapResult& b) { return stat_name(b.stat); });

  py::class_<RStarResult>(m, "RStarResult")
      .def_readonly("rstar", &RStarResult::rstar)
      .def_readonly("r", &RStarResult::r)
      .def_readonly("correction", &RStarResult::correction)
      .def_readonly("u", &RStarResult::u)
      .def_readonly("method", &RStarResult::method)
      .def_readonly("expectation", &RStarResult::expectation)
      .def_readonly("mc_size", &RStarResult::mc_size)
      .def_readonly("interpolated", &RStarResult::interpolated);

  m.def(
      "fit_mle",
      [](const std::string& model, const StratifiedDataset& data, int design_m) {
        return fit_mle(*model_for(model, design_m), data);
      },
      py::arg("model"), py::arg("data"), py::arg("design_m") = 2);

  m.def(
      "fit_constrained",
      [](const std::string& model, const StratifiedDataset& data, double psi0, int design_m) {
        return fit_constrained(*model_for(model, design_m), data, psi0);
      },
      py::arg("model"), py::arg("data"), py::arg("psi0"), py::arg("design_m") = 2);

  m.def(
      "pivots",
      [](const std::string& model, const StratifiedDataset& data, double psi0, int design_m) {
        auto mod = model_for(model, design_m);
        FitResult full = fit_mle(*mod, data);
        FitOptions copt;
        copt.warm = &full.theta;
        FitResult con = fit_constrained(*mod, data, psi0, copt);
        return compute_pivots(*mod, data, psi0, full, con);
      },
      py::arg("model"), py::arg("data"), py::arg("psi0"), py::arg("design_m") = 2);

  auto pvalue_fn = [](const std::string& model, const StratifiedDataset& data, double psi0,
                      const std::string& stat, int k, std::uint64_t seed, int workers,
                      int design_m, bool constrained) {
    auto mod = model_for(model, design_m);
    BootstrapPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.workers = workers;
    return constrained ? constrained_pvalue(*mod, data, psi0, kind_of(stat), plan)
                       : unconstrained_pvalue(*mod, data, psi0, kind_of(stat), plan);
  };
  m.def(
      "constrained_pvalue",
      [pvalue_fn](const std::string& model, const StratifiedDataset& data, double psi0,
                  const std::string& stat, int k, std::uint64_t seed, int workers,
                  int design_m) {
        return pvalue_fn(model, data, psi0, stat, k, seed, workers, design_m, true);
      },
      py::arg("model"), py::arg("data"), py::arg("psi0"), py::arg("stat") = "r",
      py::arg("k") = 1000, py::arg("seed") = 0, py::arg("workers") = 1,
      py::arg("design_m") = 2);
  m.def(
      "unconstrained_pvalue",
      [pvalue_fn](const std::string& model, const StratifiedDataset& data, double psi0,
                  const std::string& stat, int k, std::uint64_t seed, int workers,
                  int design_m) {
        return pvalue_fn(model, data, psi0, stat, k, seed, workers, design_m, false);
      },
      py::arg("model"), py::arg("data"), py::arg("psi0"), py::arg("stat") = "r",
      py::arg("k") = 1000, py::arg("seed") = 0, py::arg("workers") = 1,
      py::arg("design_m") = 2);

  m.def(
      "rstar",
      [](const std::string& model, const StratifiedDataset& data, double psi0, int mc_size,
         bool force_mc, std::uint64_t seed, int design_m) {
        RStarOptions opts;
        opts.mc_size = mc_size;
        opts.force_mc = force_mc;
        opts.mc_seed = seed;
        opts.mc_stream = Rng(seed).child(3).stream_id();
        return rstar(*model_for(model, design_m), data, psi0, opts);
      },
      py::arg("model"), py::arg("data"), py::arg("psi0"), py::arg("mc_size") = 2000,
      py::arg("force_mc") = false, py::arg("seed") = 0, py::arg("design_m") = 2);

  m.def("default_truths", &default_truths, py::arg("model"), py::arg("q"), py::arg("seed"));

  m.def(
      "simulate",
      [](const std::string& model, const ParamPoint& theta, int q, int m,
         std::uint64_t seed) {
        ModelConfig cfg;
        cfg.design_m = m;
        auto mod = make_model(model, cfg);
        Rng rng = Rng(seed).child(1).child(0).child(0);
        return simulate_dataset(*mod, theta, q, m, rng);
      },
      py::arg("model"), py::arg("theta"), py::arg("q"), py::arg("m"), py::arg("seed") = 0);

  m.def(
      "run_experiment_json",
      [](const std::string& spec_json, int workers) {
        ExperimentSpec spec = ExperimentSpec::from_json_text(spec_json);
        ExperimentResult res = run_experiment(spec, workers);
        py::dict out;
        out["table"] = render_table(res.report);
        out["statistics"] = res.report.statistics;
        out["levels"] = res.report.levels;
        std::vector<std::vector<double>> freq;
        for (const auto& row : res.report.cells) {
          std::vector<double> fr;
          for (const auto& c : row) fr.push_back(c.freq);
          freq.push_back(std::move(fr));
        }
        out["freq"] = freq;
        out["failures"] = res.report.failures;
        out["budget_breached"] = res.budget_breached;
        return out;
      },
      py::arg("spec_json"), py::arg("workers") = 1);
}
