// Command-line front end: model loading, subcommand dispatch, CSV output.
// Exit codes: 0 success, 2 invalid input or flags, 3 numerical failure
// (with a diagnostics file in the output directory).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smm/fixed_point.hpp"
#include "smm/model_io.hpp"
#include "smm/perf.hpp"
#include "smm/simulator.hpp"
#include "smm/validate.hpp"
#include "smm/version.hpp"

namespace {

namespace fs = std::filesystem;

// Relative output paths land in $SMM_OUT_DIR when it is set.
fs::path out_path(const std::string& name) {
  fs::path p(name);
  if (p.is_absolute()) return p;
  const char* dir = std::getenv("SMM_OUT_DIR");
  if (dir && *dir) p = fs::path(dir) / p;
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  return p;
}

std::ofstream open_csv(const fs::path& p) {
  std::ofstream os(p);
  if (!os)
    throw smm::ResourceError("cannot open output file " + p.string());
  os << std::setprecision(17);
  return os;
}

void provenance(std::ostream& os, const std::string& model_hash,
                const std::string& seed) {
  os << "# smmcli " << smm::kVersion << " model=" << model_hash
     << " seed=" << seed << "\n";
}

smm::ModelSpec load_with_override(const std::string& path, int d_override) {
  smm::ModelSpec m = smm::load_model(path);
  if (d_override > 0) {
    m.d = d_override;
    smm::validate_model(m);
  }
  return m;
}

void run_fixed_point(const std::string& model_path, int d, int K, double tol,
                     const std::string& out) {
  smm::ModelSpec m = load_with_override(model_path, d);
  smm::FixedPointSolution sol = smm::solve_pi(m, K, tol);
  const fs::path p = out_path(out);
  std::ofstream os = open_csv(p);
  provenance(os, smm::model_hash(m), "-");
  os << "level,tail,tail_law,zeta";
  for (Eigen::Index j = 0; j < sol.pi[0].size(); ++j) os << ",e" << j;
  os << "\n";
  for (int k = 1; k <= sol.K; ++k) {
    os << k << "," << sol.pi[size_t(k - 1)].sum() << ","
       << smm::tail_law(sol.rho, m.d, k) << "," << sol.zeta[size_t(k - 1)];
    for (Eigen::Index j = 0; j < sol.pi[size_t(k - 1)].size(); ++j)
      os << "," << sol.pi[size_t(k - 1)](j);
    os << "\n";
  }
  std::cout << std::setprecision(12) << "rho=" << sol.rho << " K=" << sol.K
            << " residual=" << sol.residual << " convention="
            << (sol.convention == 0 ? "aligned" : "shifted")
            << " refinements=" << sol.refinements
            << " tail_dev_rel=" << sol.tail_dev_rel << "\nwrote "
            << p.string() << "\n";
}

void run_mean_field(const std::string& model_path, int d, double t_end,
                    const std::string& ic, int samples, double rtol,
                    const std::string& out) {
  smm::ModelSpec m = load_with_override(model_path, d);
  smm::FractionVector g;
  smm::FixedPointSolution sol;
  bool have_sol = false;
  if (ic == "empty") {
    g = smm::empty_state(m);
  } else if (ic == "law" || ic == "stationary") {
    sol = smm::solve_pi(m);
    have_sol = true;
    if (ic == "stationary") {
      g = smm::FractionVector{sol.pi0, sol.pi};
    } else {
      g.u0 = sol.pi0;
      smm::RowVec oa(m.ma() * m.mb());
      for (Eigen::Index i = 0; i < m.ma(); ++i)
        oa.segment(i * m.mb(), m.mb()) = sol.pi0(i) * m.ph.alpha;
      for (int k = 1; k <= 60; ++k) {
        const double tl = smm::tail_law(sol.rho, m.d, k);
        if (tl < 1e-14) break;
        g.levels.push_back(tl * oa);
      }
    }
  } else {
    throw smm::ValidationError("mean-field: --ic must be empty|law|stationary");
  }

  smm::IntegrateOptions opts;
  opts.rtol = rtol;
  for (int i = 1; i < samples; ++i)
    opts.sample_times.push_back(t_end * double(i) / double(samples));
  smm::Trajectory traj = smm::integrate(m, g, t_end, opts);

  size_t kshow = 1;
  for (const auto& u : traj.u)
    for (size_t k = u.levels.size(); k >= 1; --k)
      if (u.levels[k - 1].sum() > 1e-12) {
        kshow = std::max(kshow, k);
        break;
      }
  kshow = std::min<size_t>(kshow + 1, 24);

  const fs::path p = out_path(out);
  std::ofstream os = open_csv(p);
  provenance(os, smm::model_hash(m), "-");
  os << "t";
  for (Eigen::Index i = 0; i < m.ma(); ++i) os << ",u0_" << i;
  for (size_t k = 1; k <= kshow; ++k) os << ",tail_" << k;
  os << "\n";
  for (size_t s = 0; s < traj.t.size(); ++s) {
    os << traj.t[s];
    for (Eigen::Index i = 0; i < m.ma(); ++i) os << "," << traj.u[s].u0(i);
    for (size_t k = 1; k <= kshow; ++k)
      os << "," << smm::aggregate_tail(traj.u[s], k);
    os << "\n";
  }
  std::cout << std::setprecision(12) << "steps=" << traj.steps
            << " rejected=" << traj.rejected << " clamped=" << traj.clamped
            << " depth=" << traj.final_depth
            << " drift=" << std::abs(traj.u.back().u0.sum() - 1.0);
  if (!have_sol) {
    smm::Intensity in = smm::traffic_intensity(m);
    if (in.stable) {
      sol = smm::solve_pi(m);
      have_sol = true;
    }
  }
  if (have_sol) {
    smm::FractionVector target{sol.pi0, sol.pi};
    std::cout << " dist_to_fixed_point=" << smm::metric(traj.u.back(), target);
  }
  std::cout << "\nwrote " << p.string() << "\n";
}

void run_simulate(const std::string& model_path, int d, long N, double horizon,
                  double warmup, uint64_t seed, int reps, int samples,
                  bool no_replacement, const std::string& prefix) {
  smm::SimConfig cfg;
  cfg.model = smm::load_model(model_path);
  cfg.d_override = d;
  cfg.N = N;
  cfg.horizon = horizon;
  cfg.warmup = warmup;
  cfg.seed = seed;
  cfg.replications = reps;
  cfg.with_replacement = !no_replacement;
  for (int i = 1; i <= samples; ++i)
    cfg.sample_times.push_back(horizon * double(i) / double(samples + 1));
  smm::SimResult res = smm::run(cfg);

  const std::string hash = smm::model_hash(cfg.model);
  const std::string seed_s = std::to_string(seed);
  {
    const fs::path p = out_path(prefix + "_summary.csv");
    std::ofstream os = open_csv(p);
    provenance(os, hash, seed_s);
    os << "rep,rep_seed,avg_total,arrivals,departures,events";
    for (int k = 1; k <= 8; ++k) os << ",avg_tail_" << k;
    os << "\n";
    for (size_t r = 0; r < res.reps.size(); ++r) {
      const auto& rep = res.reps[r];
      os << r << "," << smm::detail::rep_seed_of(seed, int(r)) << ","
         << rep.avg_total << "," << rep.arrivals << "," << rep.departures
         << "," << rep.events;
      for (size_t k = 0; k < 8; ++k)
        os << "," << (k < rep.avg_tails.size() ? rep.avg_tails[k] : 0.0);
      os << "\n";
    }
    std::cout << "wrote " << p.string() << "\n";
  }
  if (samples > 0) {
    const fs::path p = out_path(prefix + "_timeseries.csv");
    std::ofstream os = open_csv(p);
    provenance(os, hash, seed_s);
    os << "rep,t,map_phase,total_per_server";
    for (int k = 1; k <= 12; ++k) os << ",tail_" << k;
    os << "\n";
    for (size_t r = 0; r < res.reps.size(); ++r)
      for (const auto& snap : res.reps[r].snapshots) {
        os << r << "," << snap.t << "," << snap.map_phase << "," << snap.total;
        for (size_t k = 1; k <= 12; ++k)
          os << ","
             << (k <= snap.tails_by_phase.size()
                     ? snap.tails_by_phase[k - 1].sum()
                     : 0.0);
        os << "\n";
      }
    std::cout << "wrote " << p.string() << "\n";
  }
  std::cout << std::setprecision(12) << "avg_total=" << res.mean_total
            << " +-" << res.half_width_total << " (95% over " << reps
            << " replications)\n";
}

void run_couple(const std::string& model_path, std::vector<int> d_list, long N,
                double horizon, double warmup, uint64_t seed, int reps,
                const std::string& out) {
  smm::SimConfig cfg;
  cfg.model = smm::load_model(model_path);
  cfg.N = N;
  cfg.horizon = horizon;
  cfg.warmup = warmup;
  cfg.seed = seed;
  cfg.replications = reps;
  smm::CoupledResult cr = smm::coupled_run(cfg, d_list);

  const fs::path p = out_path(out);
  std::ofstream os = open_csv(p);
  provenance(os, smm::model_hash(cfg.model), std::to_string(seed));
  os << "rep";
  for (int d : cr.d_list) os << ",avg_total_d" << d;
  os << ",monotone\n";
  for (size_t r = 0; r < cr.totals.size(); ++r) {
    os << r;
    for (double v : cr.totals[r]) os << "," << v;
    os << "," << (cr.monotone[r] ? 1 : 0) << "\n";
  }
  std::cout << std::setprecision(12) << "monotone fraction "
            << cr.frac_monotone << " over " << reps << " replications\nwrote "
            << p.string() << "\n";
}

void run_perf(int example, double rho, int d, const std::string& model_path,
              const std::string& out) {
  if (example > 0) {
    smm::PerfTable t = smm::example_table(example);
    const fs::path p =
        out_path(out.empty() ? "perf_example" + std::to_string(example) + ".csv"
                             : out);
    std::ofstream os = open_csv(p);
    provenance(os, "-", "-");
    for (size_t c = 0; c < t.columns.size(); ++c)
      os << (c ? "," : "") << t.columns[c];
    os << "\n";
    for (const auto& row : t.rows) {
      for (size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
      os << "\n";
    }
    std::cout << "wrote " << p.string() << " (" << t.rows.size() << " rows)\n";
    return;
  }
  if (!model_path.empty()) {
    smm::ModelSpec m = load_with_override(model_path, d > 0 ? d : 0);
    smm::PerfReport r =
        smm::perf_report(m.ph, smm::map_rate(m.map), m.d);
    std::cout << std::setprecision(12) << "rho=" << r.rho << " d=" << r.d
              << " EQ=" << r.EQ << " ET=" << r.ET << " EX=" << r.EX
              << " EXR=" << r.EXR << " trunc_level=" << r.trunc_level
              << " trunc_bound=" << r.trunc_bound << "\n";
    return;
  }
  if (rho >= 0.0) {
    if (d < 1) throw smm::ValidationError("perf: --d must be >= 1");
    std::cout << std::setprecision(12) << "EQ=" << smm::mean_queue_length(rho, d)
              << "\n";
    return;
  }
  throw smm::ValidationError("perf: give --example, --model, or --rho/--d");
}

void run_validate(const std::string& model_path, std::vector<int> criteria) {
  if (!model_path.empty()) {
    smm::ModelSpec m = smm::load_model(model_path);
    smm::ModelSpec rt = smm::model_from_json(smm::model_to_json(m));
    const bool same = rt.d == m.d && rt.map.C == m.map.C && rt.map.D == m.map.D &&
                      rt.ph.alpha == m.ph.alpha && rt.ph.T == m.ph.T;
    if (!same)
      throw smm::NumericalError("validate: serialization round trip drifted");
    smm::Intensity in = smm::traffic_intensity(m);
    std::cout << std::setprecision(12) << "model ok: d=" << m.d
              << " map_rate=" << smm::map_rate(m.map)
              << " mean_service=" << smm::ph_mean(m.ph) << " rho=" << in.rho
              << (in.stable ? " (stable)" : " (unstable)") << "\n";
    if (in.stable) {
      smm::FixedPointSolution sol = smm::solve_pi(m);
      std::cout << "fixed point: K=" << sol.K << " residual=" << sol.residual
                << " tail_dev_rel=" << sol.tail_dev_rel << "\n";
    }
    std::cout << "round trip: exact\n";
    return;
  }
  std::vector<smm::validate::CriterionResult> results =
      smm::validate::run_all(criteria);
  bool all = true;
  for (const auto& r : results) {
    std::cout << "CRITERION " << r.id << ": " << (r.pass ? "PASS" : "FAIL")
              << " [" << r.name << ", " << std::fixed << std::setprecision(1)
              << r.seconds << "s] " << r.detail << "\n";
    std::cout.unsetf(std::ios::fixed);
    all &= r.pass;
  }
  if (!all) throw smm::NumericalError("validate: criteria failed");
  std::cout << "all criteria passed\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field and simulation tools for randomized load "
               "balancing with Markovian input and phase-type service"};
  app.set_version_flag("--version", smm::kVersion);
  app.require_subcommand(1);

  std::string model, out, ic = "empty", prefix = "sim";
  int d = 0, K = 0, samples = 0, reps = 1, example = 0;
  long N = 100;
  double tol = 1e-8, t_end = 50.0, rtol = 1e-8, horizon = 100.0, warmup = 0.0;
  double rho = -1.0;
  uint64_t seed = 1;
  bool no_replacement = false;
  std::vector<int> d_list{1, 2, 5, 10};
  std::vector<int> criteria;

  CLI::App* fp = app.add_subcommand("fixed-point",
                                    "solve the stationary fraction vector");
  fp->add_option("--model", model, "model JSON file")->required();
  fp->add_option("--d", d, "override the number of choices");
  fp->add_option("--K", K, "truncation depth (0: automatic)");
  fp->add_option("--tol", tol, "residual tolerance");
  fp->add_option("--out", out, "output CSV");
  fp->callback([&] {
    run_fixed_point(model, d, K, tol, out.empty() ? "fixed_point.csv" : out);
  });

  CLI::App* mf = app.add_subcommand("mean-field",
                                    "integrate the mean-field dynamics");
  mf->add_option("--model", model, "model JSON file")->required();
  mf->add_option("--d", d, "override the number of choices");
  mf->add_option("--t-end", t_end, "integration horizon")->capture_default_str();
  mf->add_option("--ic", ic, "initial condition: empty|law|stationary")
      ->capture_default_str();
  mf->add_option("--samples", samples, "interior sample count");
  mf->add_option("--rtol", rtol, "relative tolerance")->capture_default_str();
  mf->add_option("--out", out, "output CSV");
  mf->callback([&] {
    run_mean_field(model, d, t_end, ic, std::max(samples, 1), rtol,
                   out.empty() ? "mean_field.csv" : out);
  });

  CLI::App* sim = app.add_subcommand("simulate",
                                     "event-driven finite-N simulation");
  sim->add_option("--model", model, "model JSON file")->required();
  sim->add_option("--d", d, "override the number of choices");
  sim->add_option("--N", N, "number of servers")->capture_default_str();
  sim->add_option("--horizon", horizon, "simulated time")->capture_default_str();
  sim->add_option("--warmup", warmup, "measurement warmup")->capture_default_str();
  sim->add_option("--seed", seed, "root seed")->capture_default_str();
  sim->add_option("--reps", reps, "replications")->capture_default_str();
  sim->add_option("--samples", samples, "snapshot count (0: none)");
  sim->add_flag("--no-replacement", no_replacement,
                "sample d distinct servers");
  sim->add_option("--out", prefix, "output file prefix")->capture_default_str();
  sim->callback([&] {
    run_simulate(model, d, N, horizon, warmup, seed, reps, samples,
                 no_replacement, prefix);
  });

  CLI::App* cp = app.add_subcommand("couple",
                                    "coupled runs across choice counts");
  cp->add_option("--model", model, "model JSON file")->required();
  cp->add_option("--d-list", d_list, "choice counts, ascending from 1")
      ->delimiter(',')
      ->capture_default_str();
  cp->add_option("--N", N, "number of servers")->capture_default_str();
  cp->add_option("--horizon", horizon, "simulated time")->capture_default_str();
  cp->add_option("--warmup", warmup, "measurement warmup")->capture_default_str();
  cp->add_option("--seed", seed, "root seed")->capture_default_str();
  cp->add_option("--reps", reps, "replications")->capture_default_str();
  cp->add_option("--out", out, "output CSV");
  cp->callback([&] {
    run_couple(model, d_list, N, horizon, warmup, seed, reps,
               out.empty() ? "couple.csv" : out);
  });

  CLI::App* pf = app.add_subcommand("perf", "closed-form performance measures");
  pf->add_option("--example", example, "emit study table 1..4");
  pf->add_option("--rho", rho, "traffic intensity for a direct query");
  pf->add_option("--d", d, "number of choices");
  pf->add_option("--model", model, "model JSON file for a full report");
  pf->add_option("--out", out, "output CSV (table mode)");
  pf->callback([&] { run_perf(example, rho, d, model, out); });

  CLI::App* va = app.add_subcommand("validate",
                                    "acceptance suite or model checkup");
  va->add_option("--model", model,
                 "model JSON file (runs model checks only)");
  va->add_option("--criteria", criteria, "criterion ids to run")
      ->delimiter(',');
  va->callback([&] { run_validate(model, criteria); });

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const smm::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    try {
      std::ofstream os(out_path("smmcli_diagnostics.txt"));
      os << "smmcli " << smm::kVersion << "\n" << e.what() << "\n";
      std::cerr << "diagnostics written to "
                << out_path("smmcli_diagnostics.txt").string() << "\n";
    } catch (...) {
    }
    return 3;
  }
}
