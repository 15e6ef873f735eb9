#include "stratboot/simlab.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include <zlib.h>

#include "json.hpp"
#include "stratboot/errors.hpp"
#include "stratboot/pivots.hpp"
#include "parallel.hpp"

namespace stratboot {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string gshort(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

const char* kKnownModels[] = {"gamma", "beta", "curved_normal", "behrens_fisher",
                              "matched_pairs"};

bool known_model(const std::string& name) {
  for (const char* m : kKnownModels)
    if (name == m) return true;
  return false;
}

}  // namespace

StatRequest parse_statistic(const std::string& name) {
  StatRequest req;
  req.name = name;
  std::vector<std::string> parts;
  std::string cur;
  for (char c : name) {
    if (c == '_') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);

  auto fail = [&]() -> StatRequest& {
    throw InvalidInput("unknown statistic name: " + name);
  };

  if (parts[0] == "rstar") {
    if (parts.size() != 1) fail();
    req.family = StatRequest::Family::RStar;
    return req;
  }
  if (parts[0] == "r") req.base = StatKind::R;
  else if (parts[0] == "s") req.base = StatKind::S;
  else if (parts[0] == "t") req.base = StatKind::T;
  else fail();

  if (parts.size() == 1) {
    req.family = StatRequest::Family::Pivot;
    return req;
  }
  auto parse_variant = [&](const std::string& v) {
    if (v == "c") return Variant::Constrained;
    if (v == "u") return Variant::Unconstrained;
    fail();
    return Variant::Constrained;
  };
  if (parts.size() == 2) {
    req.family = StatRequest::Family::BootstrapP;
    req.variant = parse_variant(parts[1]);
    return req;
  }
  if (parts.size() == 3) {
    req.family = StatRequest::Family::Adjusted;
    if (parts[1] == "l") req.mode = AdjustMode::Location;
    else if (parts[1] == "ls") req.mode = AdjustMode::LocationScale;
    else fail();
    req.variant = parse_variant(parts[2]);
    return req;
  }
  fail();
  return req;
}

ExperimentSpec ExperimentSpec::from_json_text(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw InvalidInput(std::string("experiment spec: ") + e.what());
  }
  if (!j.is_object()) throw InvalidInput("experiment spec: top level must be an object");

  static const char* allowed[] = {"model", "q", "m", "n_reps", "k_bootstrap", "statistics",
                                  "levels", "seed", "fail_budget", "rstar_mc_size",
                                  "rstar_force_mc"};
  for (auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed)
      if (item.key() == k) ok = true;
    if (!ok) throw InvalidInput("experiment spec: unknown key \"" + item.key() + "\"");
  }

  ExperimentSpec spec;
  try {
    spec.model = j.at("model").get<std::string>();
    spec.q = j.at("q").get<int>();
    spec.m = j.at("m").get<int>();
    spec.n_reps = j.at("n_reps").get<int>();
    spec.statistics = j.at("statistics").get<std::vector<std::string>>();
    if (j.contains("k_bootstrap")) spec.k_bootstrap = j["k_bootstrap"].get<int>();
    if (j.contains("levels")) spec.levels = j["levels"].get<std::vector<double>>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("fail_budget")) spec.fail_budget = j["fail_budget"].get<double>();
    if (j.contains("rstar_mc_size")) spec.rstar_mc_size = j["rstar_mc_size"].get<int>();
    if (j.contains("rstar_force_mc")) spec.rstar_force_mc = j["rstar_force_mc"].get<bool>();
  } catch (const InvalidInput&) {
    throw;
  } catch (const std::exception& e) {
    throw InvalidInput(std::string("experiment spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

ExperimentSpec ExperimentSpec::from_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open experiment spec: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void ExperimentSpec::validate() const {
  if (!known_model(model)) throw InvalidInput("unknown model: " + model);
  if (q < 1) throw InvalidInput("q must be at least 1");
  if (m < 2) throw InvalidInput("m must be at least 2");
  if (model == "matched_pairs" && m % 2 != 0)
    throw InvalidInput("matched_pairs requires even m");
  if (n_reps < 1) throw InvalidInput("n_reps must be at least 1");
  if (k_bootstrap < 1) throw InvalidInput("k_bootstrap must be at least 1");
  if (!(fail_budget >= 0.0 && fail_budget <= 1.0))
    throw InvalidInput("fail_budget must lie in [0, 1]");
  if (rstar_mc_size < 2) throw InvalidInput("rstar_mc_size must be at least 2");
  if (statistics.empty()) throw InvalidInput("statistics must be non-empty");
  for (const auto& s : statistics) parse_statistic(s);
  if (levels.empty()) throw InvalidInput("levels must be non-empty");
  double prev = 0.0;
  for (double l : levels) {
    if (!(l > 0.0 && l < 100.0)) throw InvalidInput("levels must lie in (0, 100)");
    if (!(l > prev)) throw InvalidInput("levels must be strictly increasing");
    prev = l;
  }
}

std::string ExperimentSpec::canonical_json() const {
  ordered_json j;
  j["model"] = model;
  j["q"] = q;
  j["m"] = m;
  j["n_reps"] = n_reps;
  j["k_bootstrap"] = k_bootstrap;
  j["statistics"] = statistics;
  j["levels"] = levels;
  j["seed"] = seed;
  j["fail_budget"] = fail_budget;
  j["rstar_mc_size"] = rstar_mc_size;
  j["rstar_force_mc"] = rstar_force_mc;
  return j.dump();
}

std::uint64_t ExperimentSpec::config_hash() const {
  std::string s = canonical_json();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

struct CellValue {
  double value = 0.0;
  double pvalue = 0.0;
  bool ok = false;
};

double clamp_p(double p, long k) {
  double lo = 0.5 / std::max<long>(k, 1);
  return std::min(std::max(p, lo), 1.0 - lo);
}

// One replicate worth of statistics. Failures are per statistic; a failed
// observed fit fails everything for this replicate.
void evaluate_replicate(const StratumModel& model, const ExperimentSpec& spec,
                        const std::vector<StatRequest>& reqs, const ParamPoint& theta0,
                        long rep_index, const Rng& rep_rng, std::vector<CellValue>& out) {
  double psi0 = theta0.psi;
  Rng data_rng = rep_rng.child(0);
  StratifiedDataset data = simulate_dataset(model, theta0, spec.q, spec.m, data_rng);

  FitOptions fopt;
  fopt.check_data = false;
  fopt.warm = &theta0;
  FitResult full;
  FitResult con;
  try {
    full = fit_mle(model, data, fopt);
    FitOptions copt;
    copt.check_data = false;
    copt.warm = &full.theta;
    con = fit_constrained(model, data, psi0, copt);
  } catch (const std::exception&) {
    return; // every statistic stays failed
  }

  // Observed pivots at psi0, each allowed to fail independently.
  std::optional<double> obs[3];
  try { obs[0] = signed_root(psi0, full, con); } catch (const std::exception&) {}
  try { obs[1] = score_stat(model, data, con); } catch (const std::exception&) {}
  try { obs[2] = wald_stat(model, data, psi0, full); } catch (const std::exception&) {}

  bool need_c = false, need_u = false;
  for (const auto& r : reqs) {
    if (r.family == StatRequest::Family::BootstrapP ||
        r.family == StatRequest::Family::Adjusted) {
      (r.variant == Variant::Constrained ? need_c : need_u) = true;
    }
  }

  BootstrapPlan plan;
  plan.k = spec.k_bootstrap;
  plan.workers = 1; // parallelism lives at the replicate level
  std::optional<BootstrapRun> run_c, run_u;
  if (need_c) {
    plan.variant = Variant::Constrained;
    try {
      run_c = run_bootstrap(model, data, psi0, full, con, plan, rep_rng.child(1));
    } catch (const std::exception&) {}
  }
  if (need_u) {
    plan.variant = Variant::Unconstrained;
    try {
      run_u = run_bootstrap(model, data, psi0, full, con, plan, rep_rng.child(2));
    } catch (const std::exception&) {}
  }

  for (size_t i = 0; i < reqs.size(); ++i) {
    const StatRequest& req = reqs[i];
    CellValue& cell = out[i];
    try {
      switch (req.family) {
        case StatRequest::Family::Pivot: {
          int b = static_cast<int>(req.base);
          if (!obs[b]) break;
          cell.value = *obs[b];
          cell.pvalue = norm_cdf(cell.value);
          cell.ok = true;
          break;
        }
        case StatRequest::Family::RStar: {
          RStarOptions ropts;
          ropts.mc_size = spec.rstar_mc_size;
          ropts.force_mc = spec.rstar_force_mc;
          ropts.mc_seed = spec.seed;
          ropts.mc_stream = rep_rng.child(3).stream_id();
          RStarResult rs = rstar_at(model, data, psi0, full, con, ropts);
          cell.value = rs.rstar;
          cell.pvalue = norm_cdf(rs.rstar);
          cell.ok = true;
          break;
        }
        case StatRequest::Family::BootstrapP: {
          const auto& run = req.variant == Variant::Constrained ? run_c : run_u;
          int b = static_cast<int>(req.base);
          if (!run || !obs[b]) break;
          BootstrapResult br = extract_pvalue(*run, req.base, *obs[b], 0.01);
          cell.pvalue = br.pvalue;
          cell.value = norm_quantile(clamp_p(br.pvalue, br.n_success));
          cell.ok = true;
          break;
        }
        case StatRequest::Family::Adjusted: {
          const auto& run = req.variant == Variant::Constrained ? run_c : run_u;
          int b = static_cast<int>(req.base);
          if (!run || !obs[b]) break;
          BootstrapResult br = extract_pvalue(*run, req.base, *obs[b], 0.01);
          MomentAdjustment ma = bootstrap_moments(br);
          cell.value = adjust(*obs[b], ma, req.mode);
          cell.pvalue = norm_cdf(cell.value);
          cell.ok = true;
          break;
        }
      }
    } catch (const std::exception&) {
      cell.ok = false;
    }
  }
  (void)rep_index;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, int workers) {
  spec.validate();
  if (workers < 1) throw InvalidInput("workers must be at least 1");
  auto t0 = std::chrono::steady_clock::now();

  ModelConfig cfg;
  cfg.design_m = spec.m;
  auto model = make_model(spec.model, cfg);
  ParamPoint theta0 = default_truths(spec.model, spec.q, spec.seed);

  std::vector<StatRequest> reqs;
  reqs.reserve(spec.statistics.size());
  for (const auto& s : spec.statistics) reqs.push_back(parse_statistic(s));

  std::vector<std::vector<CellValue>> rows(spec.n_reps,
                                           std::vector<CellValue>(reqs.size()));
  Rng rep_base = Rng(spec.seed).child(1);
  detail::parallel_for(spec.n_reps, workers, [&](long r) {
    try {
      evaluate_replicate(*model, spec, reqs, theta0, r, rep_base.child(r), rows[r]);
    } catch (const std::exception&) {
      for (auto& c : rows[r]) c.ok = false;
    }
  });

  ExperimentResult result;
  result.theta0 = theta0;
  TailReport& rep = result.report;
  rep.model = spec.model;
  rep.q = spec.q;
  rep.m = spec.m;
  rep.statistics = spec.statistics;
  rep.levels = spec.levels;
  rep.n_reps = spec.n_reps;
  rep.seed = spec.seed;
  rep.spec_hash = spec.config_hash();
  rep.failures.assign(reqs.size(), 0);
  rep.cells.assign(reqs.size(), std::vector<TailCell>(spec.levels.size()));

  for (long r = 0; r < spec.n_reps; ++r) {
    for (size_t i = 0; i < reqs.size(); ++i) {
      const CellValue& c = rows[r][i];
      if (!c.ok) {
        ++rep.failures[i];
        continue;
      }
      result.archive.push_back({r, spec.statistics[i], c.value, c.pvalue});
    }
  }

  for (size_t i = 0; i < reqs.size(); ++i) {
    long n_eff = spec.n_reps - rep.failures[i];
    for (size_t l = 0; l < spec.levels.size(); ++l) {
      long count = 0;
      for (long r = 0; r < spec.n_reps; ++r)
        if (rows[r][i].ok && rows[r][i].pvalue <= spec.levels[l] / 100.0) ++count;
      TailCell& cell = rep.cells[i][l];
      cell.n_eff = n_eff;
      if (n_eff > 0) {
        double phat = static_cast<double>(count) / n_eff;
        cell.freq = 100.0 * phat;
        cell.se = 100.0 * std::sqrt(phat * (1.0 - phat) / n_eff);
      }
    }
    if (rep.failures[i] > spec.fail_budget * spec.n_reps) result.budget_breached = true;
  }

  rep.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

void write_tail_report_csv(const TailReport& rep, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write tail report: " + path);
  out << "model,q,m,statistic,level,freq,se,n_eff\n";
  for (size_t i = 0; i < rep.statistics.size(); ++i) {
    for (size_t l = 0; l < rep.levels.size(); ++l) {
      const TailCell& c = rep.cells[i][l];
      out << rep.model << ',' << rep.q << ',' << rep.m << ',' << rep.statistics[i] << ','
          << gshort(rep.levels[l]) << ',' << g17(c.freq) << ',' << g17(c.se) << ','
          << c.n_eff << '\n';
    }
  }
}

void write_metadata_json(const TailReport& rep, const ExperimentSpec& spec,
                         const std::string& path) {
  char hash_hex[24];
  std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                static_cast<unsigned long long>(rep.spec_hash));
  ordered_json j;
  j["spec_hash"] = hash_hex;
  j["seed"] = rep.seed;
  j["model"] = rep.model;
  j["q"] = rep.q;
  j["m"] = rep.m;
  j["n_reps"] = rep.n_reps;
  j["levels"] = rep.levels;
  j["statistics"] = rep.statistics;
  ordered_json fails;
  for (size_t i = 0; i < rep.statistics.size(); ++i)
    fails[rep.statistics[i]] = rep.failures[i];
  j["failures"] = fails;
  j["runtime_seconds"] = rep.runtime_seconds;
  j["spec"] = ordered_json::parse(spec.canonical_json());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write metadata: " + path);
  out << j.dump(2) << '\n';
}

void write_archive_gz(const std::vector<ReplicateRecord>& rows, const std::string& path) {
  std::string buf = "replicate,statistic,value,pvalue\n";
  for (const auto& r : rows) {
    buf += std::to_string(r.replicate);
    buf += ',';
    buf += r.statistic;
    buf += ',';
    buf += g17(r.value);
    buf += ',';
    buf += g17(r.pvalue);
    buf += '\n';
  }
  gzFile f = gzopen(path.c_str(), "wb");
  if (!f) throw InvalidInput("cannot write archive: " + path);
  size_t off = 0;
  while (off < buf.size()) {
    unsigned chunk = static_cast<unsigned>(std::min<size_t>(buf.size() - off, 1u << 20));
    int n = gzwrite(f, buf.data() + off, chunk);
    if (n <= 0) {
      gzclose(f);
      throw InvalidInput("gzip write failed: " + path);
    }
    off += n;
  }
  gzclose(f);
}

std::vector<ReplicateRecord> read_archive_gz(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw InvalidInput("cannot open archive: " + path);
  std::string buf;
  char chunk[1 << 16];
  int n;
  while ((n = gzread(f, chunk, sizeof chunk)) > 0) buf.append(chunk, n);
  bool bad = n < 0;
  gzclose(f);
  if (bad) throw InvalidInput("gzip read failed: " + path);

  std::vector<ReplicateRecord> rows;
  size_t pos = 0;
  long line_no = 0;
  while (pos < buf.size()) {
    size_t end = buf.find('\n', pos);
    if (end == std::string::npos) end = buf.size();
    std::string line = buf.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "replicate,statistic,value,pvalue")
        throw InvalidInput("archive header mismatch: " + path);
      continue;
    }
    ReplicateRecord rec;
    std::array<std::string, 4> fields;
    size_t fi = 0, start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (fi >= 4) throw InvalidInput("archive line " + std::to_string(line_no) +
                                        ": too many fields");
        fields[fi++] = line.substr(start, i - start);
        start = i + 1;
      }
    }
    if (fi != 4)
      throw InvalidInput("archive line " + std::to_string(line_no) + ": expected 4 fields");
    try {
      rec.replicate = std::stol(fields[0]);
      rec.statistic = fields[1];
      rec.value = std::stod(fields[2]);
      rec.pvalue = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw InvalidInput("archive line " + std::to_string(line_no) + ": parse error");
    }
    rows.push_back(std::move(rec));
  }
  return rows;
}

TailReport report_from_archive(const std::vector<ReplicateRecord>& rows,
                               const std::string& model, int q, int m,
                               const std::vector<double>& levels,
                               const std::vector<std::string>* order) {
  if (rows.empty()) throw InvalidInput("archive is empty");
  TailReport rep;
  rep.model = model;
  rep.q = q;
  rep.m = m;
  rep.levels = levels;
  std::vector<std::vector<const ReplicateRecord*>> groups;
  if (order) {
    rep.statistics = *order;
    groups.resize(order->size());
  }
  for (const auto& r : rows) {
    size_t i = 0;
    for (; i < rep.statistics.size(); ++i)
      if (rep.statistics[i] == r.statistic) break;
    if (i == rep.statistics.size()) {
      rep.statistics.push_back(r.statistic);
      groups.emplace_back();
    }
    groups[i].push_back(&r);
    rep.n_reps = std::max(rep.n_reps, r.replicate + 1);
  }
  rep.failures.assign(rep.statistics.size(), 0);
  rep.cells.assign(rep.statistics.size(), std::vector<TailCell>(levels.size()));
  for (size_t i = 0; i < groups.size(); ++i) {
    long n_eff = static_cast<long>(groups[i].size());
    rep.failures[i] = rep.n_reps - n_eff;
    for (size_t l = 0; l < levels.size(); ++l) {
      TailCell& cell = rep.cells[i][l];
      cell.n_eff = n_eff;
      if (n_eff == 0) continue;
      long count = 0;
      for (const auto* r : groups[i])
        if (r->pvalue <= levels[l] / 100.0) ++count;
      double phat = static_cast<double>(count) / n_eff;
      cell.freq = 100.0 * phat;
      cell.se = 100.0 * std::sqrt(phat * (1.0 - phat) / n_eff);
    }
  }
  return rep;
}

std::string render_table(const TailReport& rep) {
  std::ostringstream out;
  out << "model=" << rep.model << " q=" << rep.q << " m=" << rep.m
      << " n_reps=" << rep.n_reps << "\n";
  size_t name_w = 9;
  for (const auto& s : rep.statistics) name_w = std::max(name_w, s.size());
  out << std::string(name_w, ' ');
  char buf[32];
  for (double l : rep.levels) {
    std::snprintf(buf, sizeof buf, "%7.1f", l);
    out << buf;
  }
  out << '\n';
  for (size_t i = 0; i < rep.statistics.size(); ++i) {
    out << rep.statistics[i]
        << std::string(name_w - rep.statistics[i].size(), ' ');
    for (size_t l = 0; l < rep.levels.size(); ++l) {
      std::snprintf(buf, sizeof buf, "%7.1f", rep.cells[i][l].freq);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

MomentDiagnostic moment_diagnostic(const std::string& model_name, const ParamPoint& theta0,
                                   int q, int m, StatKind stat, int n_reps,
                                   std::uint64_t seed, int workers) {
  if (n_reps < 2) throw InvalidInput("n_reps must be at least 2");
  theta0.validate(q);
  ModelConfig cfg;
  cfg.design_m = m;
  auto model = make_model(model_name, cfg);
  double psi0 = theta0.psi;

  std::vector<double> vals(n_reps, std::numeric_limits<double>::quiet_NaN());
  Rng rep_base = Rng(seed).child(1);
  detail::parallel_for(n_reps, workers, [&](long r) {
    try {
      Rng data_rng = rep_base.child(r).child(0);
      StratifiedDataset data = simulate_dataset(*model, theta0, q, m, data_rng);
      FitOptions fopt;
      fopt.check_data = false;
      fopt.warm = &theta0;
      FitResult full = fit_mle(*model, data, fopt);
      FitOptions copt;
      copt.check_data = false;
      copt.warm = &full.theta;
      FitResult con = fit_constrained(*model, data, psi0, copt);
      switch (stat) {
        case StatKind::R: vals[r] = signed_root(psi0, full, con); break;
        case StatKind::S: vals[r] = score_stat(*model, data, con); break;
        default: vals[r] = wald_stat(*model, data, psi0, full); break;
      }
    } catch (const std::exception&) {
    }
  });

  std::vector<double> good;
  good.reserve(n_reps);
  for (double v : vals)
    if (std::isfinite(v)) good.push_back(v);
  long n = static_cast<long>(good.size());
  if (n < 2) throw TooManyFailures("moment diagnostic: fewer than two usable replicates");

  MomentDiagnostic d;
  d.n = n;
  for (double v : good) d.mean += v;
  d.mean /= n;
  double m2 = 0, m4 = 0;
  for (double v : good) {
    double c = v - d.mean;
    m2 += c * c;
    m4 += c * c * c * c;
  }
  d.variance = m2 / (n - 1);
  m2 /= n;
  m4 /= n;
  d.se_mean = std::sqrt(d.variance / n);
  double var_of_var = (m4 - m2 * m2) / n;
  d.se_variance = var_of_var > 0 ? std::sqrt(var_of_var) : 0.0;
  return d;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  double idx = p * (sorted.size() - 1);
  size_t lo = static_cast<size_t>(idx);
  size_t hi = std::min(lo + 1, sorted.size() - 1);
  double w = idx - lo;
  return (1 - w) * sorted[lo] + w * sorted[hi];
}

void kde(const std::vector<double>& xs, int grid_size, std::vector<double>& grid,
         std::vector<double>& density) {
  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  long n = static_cast<long>(xs.size());
  double mean = 0;
  for (double v : xs) mean += v;
  mean /= n;
  double ss = 0;
  for (double v : xs) ss += (v - mean) * (v - mean);
  double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
  double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  double spread = sd;
  if (iqr > 0) spread = std::min(spread, iqr / 1.34);
  // Silverman's rule; degenerate samples get a token positive bandwidth.
  double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  if (!(h > 0)) h = std::max(1e-3, 1e-3 * std::fabs(mean));
  double lo = sorted.front() - 3 * h, hi = sorted.back() + 3 * h;
  grid.resize(grid_size);
  density.assign(grid_size, 0.0);
  const double inv = 1.0 / (n * h * std::sqrt(2.0 * M_PI));
  for (int g = 0; g < grid_size; ++g) {
    double x = lo + (hi - lo) * g / (grid_size - 1);
    grid[g] = x;
    double acc = 0;
    for (double v : xs) {
      double z = (x - v) / h;
      acc += std::exp(-0.5 * z * z);
    }
    density[g] = acc * inv;
  }
}

}  // namespace

DensitySummary density_summary(const std::vector<ReplicateRecord>& rows,
                               const std::string& statistic, int grid_size) {
  if (grid_size < 2) throw InvalidInput("grid_size must be at least 2");
  std::vector<double> values, pvals;
  for (const auto& r : rows) {
    if (r.statistic != statistic) continue;
    values.push_back(r.value);
    pvals.push_back(r.pvalue);
  }
  if (values.empty())
    throw InvalidInput("statistic not present in archive: " + statistic);

  DensitySummary d;
  kde(values, grid_size, d.grid, d.density);

  long n = static_cast<long>(values.size());
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  d.qq_theoretical.resize(n);
  d.qq_empirical = sorted;
  for (long i = 0; i < n; ++i)
    d.qq_theoretical[i] = norm_quantile((i + 0.5) / n);

  const int bins = 20;
  d.p_grid.resize(bins);
  d.p_density.assign(bins, 0.0);
  for (int b = 0; b < bins; ++b) d.p_grid[b] = (b + 0.5) / bins;
  for (double p : pvals) {
    int b = std::min(bins - 1, std::max(0, static_cast<int>(p * bins)));
    d.p_density[b] += 1.0;
  }
  for (int b = 0; b < bins; ++b) d.p_density[b] *= static_cast<double>(bins) / n;

  std::vector<double> zs(n);
  for (long i = 0; i < n; ++i) zs[i] = norm_quantile(clamp_p(pvals[i], n));
  kde(zs, grid_size, d.z_grid, d.z_density);
  return d;
}

void write_density_csv(const DensitySummary& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write density summary: " + path);
  out << "series,x,y\n";
  for (size_t i = 0; i < d.grid.size(); ++i)
    out << "value_density," << g17(d.grid[i]) << ',' << g17(d.density[i]) << '\n';
  for (size_t i = 0; i < d.qq_theoretical.size(); ++i)
    out << "value_qq," << g17(d.qq_theoretical[i]) << ',' << g17(d.qq_empirical[i]) << '\n';
  for (size_t i = 0; i < d.p_grid.size(); ++i)
    out << "pvalue_hist," << g17(d.p_grid[i]) << ',' << g17(d.p_density[i]) << '\n';
  for (size_t i = 0; i < d.z_grid.size(); ++i)
    out << "pvalue_z_density," << g17(d.z_grid[i]) << ',' << g17(d.z_density[i]) << '\n';
}

}  // namespace stratboot
