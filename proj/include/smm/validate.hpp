#pragma once

#include <chrono>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "smm/fixed_point.hpp"
#include "smm/model_io.hpp"
#include "smm/perf.hpp"
#include "smm/simulator.hpp"

namespace smm::validate {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
};

namespace detail {

inline ModelSpec poisson_exp(double lambda, double mu, int d) {
  return make_model(poisson_map(lambda), exponential_ph(mu), d);
}
inline ModelSpec poisson_ph2(double lambda, int d) {
  return make_model(poisson_map(lambda), two_phase_ph(), d);
}
inline ModelSpec map_exp(double lambda, double mu, int d) {
  return make_model(two_phase_map(lambda), exponential_ph(mu), d);
}
inline ModelSpec map_ph2(double lambda, int d) {
  return make_model(two_phase_map(lambda), two_phase_ph(), d);
}

// Random monotone level pair: cur dominated entrywise by prev.
inline LevelPair random_pair(std::mt19937_64& rng, int ma, int mb) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  RowVec prev(ma * mb), cur(ma * mb);
  double sum = 0.0;
  for (int t = 0; t < ma * mb; ++t) {
    prev(t) = uni(rng) + 1e-6;
    sum += prev(t);
  }
  const double scale = (0.1 + 0.9 * uni(rng)) / sum;
  for (int t = 0; t < ma * mb; ++t) {
    prev(t) *= scale;
    cur(t) = prev(t) * uni(rng);
  }
  return make_level_pair(prev, cur, ma, mb);
}

// Random admissible state with strict per-phase monotone aggregates.
inline FractionVector random_state(std::mt19937_64& rng, const ModelSpec& m,
                                   int K) {
  std::uniform_real_distribution<double> uni(0.05, 0.95);
  const Eigen::Index ma = m.ma(), mb = m.mb();
  FractionVector u;
  u.u0 = RowVec::Zero(ma);
  double s = 0.0;
  for (Eigen::Index i = 0; i < ma; ++i) {
    u.u0(i) = uni(rng) + 0.05;
    s += u.u0(i);
  }
  u.u0 /= s;
  RowVec lvl(ma * mb);
  for (Eigen::Index i = 0; i < ma; ++i) {
    RowVec split = RowVec::Zero(mb);
    double q = 0.0;
    for (Eigen::Index j = 0; j < mb; ++j) {
      split(j) = uni(rng);
      q += split(j);
    }
    lvl.segment(i * mb, mb) = u.u0(i) * uni(rng) * split / q;
  }
  for (int k = 1; k <= K; ++k) {
    u.levels.push_back(lvl);
    for (Eigen::Index t = 0; t < lvl.size(); ++t) lvl(t) *= uni(rng);
  }
  return u;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

template <typename F>
inline CriterionResult timed(int id, const std::string& name, F&& body) {
  CriterionResult r;
  r.id = id;
  r.name = name;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail += std::string(" EXCEPTION: ") + e.what();
  }
  r.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return r;
}

}  // namespace detail

// 1: the combinatorial environment factor is MAP-phase invariant and equals
// the closed form on 1000 random monotone pairs.
inline CriterionResult criterion1() {
  return detail::timed(1, "environment factor invariance", [](CriterionResult& r) {
    std::mt19937_64 rng(12345);
    std::uniform_int_distribution<int> size_d(1, 3), choice_d(1, 4);
    double worst = 0.0;
    for (int it = 0; it < 1000; ++it) {
      const int ma = size_d(rng), mb = size_d(rng), d = choice_d(rng);
      LevelPair pair = detail::random_pair(rng, ma, mb);
      InvarianceReport rep = check_invariance(pair, d);
      worst = std::max(worst, rep.max_rel_err);
    }
    r.pass = worst <= 1e-10;
    r.detail = "worst rel err " + detail::fmt(worst) + " over 1000 pairs";
  });
}

// 2: printed constants of the study models.
inline CriterionResult criterion2() {
  return detail::timed(2, "printed model constants", [](CriterionResult& r) {
    std::ostringstream os;
    bool ok = true;
    const double mu = 1.0 / ph_mean(two_phase_ph());
    ok &= std::abs(mu - 3.4118) <= 1e-4;
    os << "mu=" << mu;
    const double rho_ref[3] = {0.2931, 0.3636, 0.4250};
    for (int v = 1; v <= 3; ++v) {
      const double rho = 1.0 * ph_mean(two_phase_family(v));
      ok &= std::abs(rho - rho_ref[v - 1]) <= 1e-4;
      os << " rho(" << v << ")=" << rho;
    }
    for (double lambda : {0.3, 0.5, 0.9}) {
      MapDescriptor m = two_phase_map(lambda);
      RowVec om = stationary_vector(m.C + m.D);
      ok &= std::abs(om(0) - 7.0 / 12.0) <= 1e-12 &&
            std::abs(om(1) - 5.0 / 12.0) <= 1e-12;
      ok &= std::abs(map_rate(m) - lambda) <= 1e-12;
    }
    os << " omega/rate checks at lambda in {0.3,0.5,0.9}";
    r.pass = ok;
    r.detail = os.str();
  });
}

namespace detail {

inline std::vector<std::pair<std::string, ModelSpec>> tail_matrix() {
  std::vector<std::pair<std::string, ModelSpec>> out;
  for (int d : {1, 2, 3}) {
    out.push_back({"poisson/exp d=" + std::to_string(d),
                   poisson_exp(0.5, 1.0, d)});
    out.push_back({"poisson/ph2 d=" + std::to_string(d), poisson_ph2(1.0, d)});
    out.push_back({"map/exp d=" + std::to_string(d), map_exp(0.5, 1.0, d)});
  }
  return out;
}

}  // namespace detail

// 3: solved tail versus the doubly exponential law, 1e-6 relative, on the
// model matrix.
inline CriterionResult criterion3() {
  return detail::timed(3, "doubly exponential tail law", [](CriterionResult& r) {
    std::ostringstream os;
    bool ok = true;
    for (auto& [name, m] : detail::tail_matrix()) {
      const auto start = std::chrono::steady_clock::now();
      FixedPointSolution sol = solve_pi(m);
      const double secs = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - start)
                              .count();
      const bool model_ok = sol.tail_dev_rel <= 1e-6 && secs <= 10.0;
      ok &= model_ok;
      os << name << " dev=" << detail::fmt(sol.tail_dev_rel)
         << (model_ok ? " ok; " : " FAIL; ");
    }
    r.pass = ok;
    r.detail = os.str();
  });
}

// 4: the explicit Poisson-input recursion matches the general solver
// componentwise for MAP order 1.
inline CriterionResult criterion4() {
  return detail::timed(4, "explicit recursion equivalence", [](CriterionResult& r) {
    std::ostringstream os;
    double worst = 0.0;
    for (int d : {1, 2, 3}) {
      for (int which : {0, 1}) {
        const double lambda = which == 0 ? 0.5 : 1.0;
        ModelSpec m = which == 0 ? detail::poisson_exp(lambda, 1.0, d)
                                 : detail::poisson_ph2(lambda, d);
        FixedPointSolution sol = solve_pi(m);
        std::vector<RowVec> px = poisson_explicit(m.ph, lambda, d, sol.K);
        for (int k = 0; k < sol.K; ++k)
          worst = std::max(worst,
                           inf_norm(RowVec(px[size_t(k)] - sol.pi[size_t(k)])));
      }
    }
    os << "worst componentwise gap " << detail::fmt(worst);
    r.pass = worst <= 1e-8;
    r.detail = os.str();
  });
}

// 5: stationary residual of the solver and exactness of the reassembled
// censored factorization on the truncated generator.
inline CriterionResult criterion5() {
  return detail::timed(5, "residual and factorization", [](CriterionResult& r) {
    std::ostringstream os;
    bool ok = true;
    double worst_res = 0.0, worst_fact = 0.0;
    for (auto& [name, m] : detail::tail_matrix()) {
      FixedPointSolution sol = solve_pi(m);
      worst_res = std::max(worst_res, sol.residual);

      const int K = 30;
      smm::detail::QbdParts p(m);
      Measures meas = solve_measures(m, K);
      const Eigen::Index mm = p.w.m;
      auto Z = [&](int k) { return zeta_law(p.rho, m.d, k); };
      // Truncated generator: censored frontier at level K.
      Matrix QT = Matrix::Zero(K * mm, K * mm);
      for (int k = 1; k <= K; ++k) {
        Matrix diag = (k < K) ? p.diag_block(Z(k)) : meas.U[size_t(K - 1)];
        QT.block((k - 1) * mm, (k - 1) * mm, mm, mm) = diag;
        if (k < K)
          QT.block((k - 1) * mm, k * mm, mm, mm) = Z(k + 1) * p.w.DI;
        if (k > 1) QT.block((k - 1) * mm, (k - 2) * mm, mm, mm) = p.w.TA;
      }
      Matrix RU = Matrix::Identity(K * mm, K * mm);
      Matrix UD = Matrix::Zero(K * mm, K * mm);
      Matrix GL = Matrix::Identity(K * mm, K * mm);
      for (int k = 1; k <= K; ++k) {
        UD.block((k - 1) * mm, (k - 1) * mm, mm, mm) = meas.U[size_t(k - 1)];
        if (k < K) {
          RU.block((k - 1) * mm, k * mm, mm, mm) = -meas.R[size_t(k)];
          GL.block(k * mm, (k - 1) * mm, mm, mm) = -meas.G[size_t(k)];
        }
      }
      worst_fact = std::max(worst_fact, inf_norm(Matrix(RU * UD * GL - QT)));
    }
    ok = worst_res <= 1e-8 && worst_fact <= 1e-8;
    os << "worst residual " << detail::fmt(worst_res)
       << ", worst factorization gap " << detail::fmt(worst_fact);
    r.pass = ok;
    r.detail = os.str();
  });
}

// 6: trajectories from three starting states reach the fixed point.
inline CriterionResult criterion6() {
  return detail::timed(6, "trajectory convergence", [](CriterionResult& r) {
    std::ostringstream os;
    bool ok = true;
    std::vector<std::pair<std::string, ModelSpec>> models = {
        {"poisson/exp rho=.5 d=2", detail::poisson_exp(0.5, 1.0, 2)},
        {"poisson/ph2 d=2", detail::poisson_ph2(1.0, 2)},
        {"map/exp rho=.5 d=2", detail::map_exp(0.5, 1.0, 2)},
        {"poisson/exp rho=.9 d=2", detail::poisson_exp(0.9, 1.0, 2)},
        {"poisson/exp rho=.5 d=1", detail::poisson_exp(0.5, 1.0, 1)},
        {"map/exp rho=.3 d=3", detail::map_exp(0.3, 1.0, 3)},
    };
    for (auto& [name, m] : models) {
      FixedPointSolution sol = solve_pi(m);
      FractionVector target{sol.pi0, sol.pi};
      const double mu = 1.0 / ph_mean(m.ph);
      const double t_end = 200.0 / mu;
      RowVec omega = stationary_vector(m.map.C + m.map.D);
      RowVec oa(m.ma() * m.mb());
      for (Eigen::Index i = 0; i < m.ma(); ++i)
        oa.segment(i * m.mb(), m.mb()) = omega(i) * m.ph.alpha;

      std::vector<FractionVector> ics;
      ics.push_back(empty_state(m));
      FractionVector law, half;
      law.u0 = omega;
      half.u0 = omega;
      for (int k = 1; k <= 30; ++k) {
        const double tl = tail_law(sol.rho, m.d, k);
        if (tl < 1e-12) break;
        law.levels.push_back(tl * oa);
        half.levels.push_back(tl * std::pow(0.5, k) * oa);
      }
      ics.push_back(law);
      ics.push_back(half);

      double worst = 0.0, drift = 0.0;
      for (const auto& ic : ics) {
        Trajectory traj = integrate(m, ic, t_end);
        worst = std::max(worst, metric(traj.u.back(), target));
        drift = std::max(drift, std::abs(traj.u.back().u0.sum() - 1.0));
      }
      const bool model_ok = worst <= 1e-5 && drift <= 1e-9;
      ok &= model_ok;
      os << name << " dist=" << detail::fmt(worst) << " drift="
         << detail::fmt(drift) << (model_ok ? " ok; " : " FAIL; ");
    }
    r.pass = ok;
    r.detail = os.str();
  });
}

// 7: finite-difference agreement of the Jacobian and the sampled
// operator-norm bound.
inline CriterionResult criterion7() {
  return detail::timed(7, "jacobian and drift bound", [](CriterionResult& r) {
    std::ostringstream os;
    std::mt19937_64 rng(777);
    ModelSpec fd_model = detail::map_ph2(0.5, 2);
    DriftWorkspace w(fd_model);
    double worst_fd = 0.0;
    const int K = 6;
    for (int it = 0; it < 100; ++it) {
      FractionVector u = detail::random_state(rng, fd_model, K);
      Matrix J = jacobian_dense(u, fd_model, w);
      const Eigen::Index n = J.rows();
      Vector x = smm::detail::FlatState::pack(u, w.ma, w.m, K);
      const double h = 1e-6;
      Matrix Jfd(n, n);
      for (Eigen::Index c = 0; c < n; ++c) {
        Vector xp = x, xm = x;
        xp(c) += h;
        xm(c) -= h;
        smm::detail::FlatState sp{w.ma, w.m, xp, K}, sm{w.ma, w.m, xm, K};
        Vector fp = smm::detail::FlatState::pack(rhs(sp.unpack(), fd_model, w),
                                                 w.ma, w.m, K);
        Vector fm = smm::detail::FlatState::pack(rhs(sm.unpack(), fd_model, w),
                                                 w.ma, w.m, K);
        Jfd.col(c) = (fp - fm) / (2.0 * h);
      }
      worst_fd = std::max(
          worst_fd, inf_norm(Matrix(J - Jfd)) / std::max(1.0, inf_norm(J)));
    }

    int violations = 0;
    double worst_margin = -1e300;
    std::vector<ModelSpec> models = {
        detail::poisson_exp(0.5, 2.0, 2), detail::map_exp(0.5, 1.0, 2),
        detail::map_ph2(0.5, 3), detail::poisson_ph2(1.0, 1)};
    for (auto& m : models) {
      DriftWorkspace wm(m);
      const double M = lipschitz_bound(m);
      for (int it = 0; it < 125; ++it) {
        FractionVector u = detail::random_state(rng, m, 8);
        const double nrm = inf_norm(jacobian_dense(u, m, wm));
        if (nrm > M) ++violations;
        worst_margin = std::max(worst_margin, nrm - M);
      }
    }
    os << "worst FD rel err " << detail::fmt(worst_fd) << "; bound violations "
       << violations << " (closest margin " << detail::fmt(worst_margin)
       << ")";
    r.pass = worst_fd <= 1e-6 && violations == 0;
    r.detail = os.str();
  });
}

// 8: simulation approaches the deterministic trajectory as N grows.
inline CriterionResult criterion8() {
  return detail::timed(8, "simulation vs mean field", [](CriterionResult& r) {
    std::ostringstream os;
    bool ok = true;
    int decreases = 0, pairs = 0;
    for (int which : {0, 1}) {
      ModelSpec m = which == 0 ? detail::poisson_exp(0.5, 1.0, 2)
                               : detail::map_exp(0.5, 1.0, 2);
      SimConfig cfg;
      cfg.model = m;
      cfg.N = 1000;
      cfg.horizon = 40.0;
      cfg.seed = 2024 + uint64_t(which);
      cfg.replications = 10;
      for (int i = 1; i <= 20; ++i) cfg.sample_times.push_back(2.0 * i);

      InitAssignment init = realize_init(m, cfg.init, cfg.N);
      IntegrateOptions iopts;
      iopts.sample_times = cfg.sample_times;
      Trajectory traj = integrate(m, init.realized, cfg.horizon, iopts);

      GapResult g1000 = meanfield_gap_detail(cfg, traj);
      SimConfig cfg100 = cfg;
      cfg100.N = 100;
      GapResult g100 = meanfield_gap_detail(cfg100, traj);
      for (size_t i = 0; i < g1000.per_rep.size(); ++i) {
        ++pairs;
        if (g1000.per_rep[i] < g100.per_rep[i]) ++decreases;
      }
      ok &= g1000.mean <= 0.05;
      os << (which == 0 ? "poisson/exp" : "map/exp") << " gap(N=1000)="
         << detail::fmt(g1000.mean) << " gap(N=100)=" << detail::fmt(g100.mean)
         << "; ";
    }
    os << decreases << "/" << pairs << " paired decreases";
    ok &= decreases * 10 >= pairs * 9;
    r.pass = ok;
    r.detail = os.str();
  });
}

// 9: more choices never increase the time-averaged population, replication
// by replication, under common random numbers.
inline CriterionResult criterion9() {
  return detail::timed(9, "choice dominance", [](CriterionResult& r) {
    std::ostringstream os;
    bool ok = true;
    for (int which : {0, 1}) {
      ModelSpec m = which == 0 ? detail::poisson_exp(0.5, 1.0, 1)
                               : detail::map_exp(0.5, 1.0, 1);
      SimConfig cfg;
      cfg.model = m;
      cfg.N = 100;
      cfg.horizon = 400.0;
      cfg.warmup = 100.0;
      cfg.seed = 555 + uint64_t(which);
      cfg.replications = 30;
      CoupledResult cr = coupled_run(cfg, {1, 2, 5, 10});
      ok &= cr.frac_monotone == 1.0;
      os << (which == 0 ? "poisson/exp" : "map/exp") << " monotone in "
         << int(cr.frac_monotone * cfg.replications) << "/"
         << cfg.replications << " replications; ";
    }
    r.pass = ok;
    r.detail = os.str();
  });
}

// 10: closed-form measures and the monotone structure of the study tables.
inline CriterionResult criterion10() {
  return detail::timed(10, "performance formulas", [](CriterionResult& r) {
    std::ostringstream os;
    bool ok = true;
    const double eq = mean_queue_length(0.5, 1);
    const double et = mean_sojourn(exponential_ph(1.0), 0.5, 1);
    ok &= std::abs(eq - 1.0) <= 1e-12;
    ok &= std::abs(et - 2.0) <= 1e-12;
    ok &= std::abs(et - eq / 0.5) <= 1e-12;
    os << "EQ(0.5,1)=" << eq << " ET=" << et << ";";

    // Table 1: EQ increases with rho (decreases with eta) in every group.
    {
      PerfTable t = example_table(1);
      for (size_t i = 1; i < t.rows.size(); ++i) {
        const auto& a = t.rows[i - 1];
        const auto& b = t.rows[i];
        if (a[0] == b[0] && a[1] == b[1]) ok &= b[5] > a[5] && b[2] < a[2];
      }
      // And decreasing in d at matched (m, rho): compare (2,2) vs (2,10).
      for (size_t i = 0; i < 19; ++i)
        ok &= t.rows[3 * 19 + i][5] <= t.rows[i][5];
      os << " table1 monotone;";
    }
    // Table 2: increasing in lambda, decreasing in d, for both services.
    {
      PerfTable t = example_table(2);
      auto find = [&](double lam, int d, int svc) -> const std::vector<double>& {
        for (auto& row : t.rows)
          if (std::abs(row[0] - lam) < 1e-12 && int(row[1]) == d &&
              int(row[2]) == svc)
            return row;
        throw StructuralError("table2 row missing");
      };
      for (int svc : {0, 1})
        for (int i = 0; i <= 20; ++i) {
          const double lam = 1.0 + 0.1 * i;
          const auto& r1 = find(lam, 1, svc);
          const auto& r2 = find(lam, 2, svc);
          if (r1[6] > 0 && r2[6] > 0) {
            ok &= r2[4] < r1[4] && r2[5] < r1[5];
          }
          if (i > 0) {
            const auto& p1 = find(lam - 0.1, 1, svc);
            if (r1[6] > 0 && p1[6] > 0) ok &= r1[4] > p1[4] && r1[5] > p1[5];
          }
        }
      os << " table2 monotone;";
    }
    // Table 3: ET increasing in lambda within variant; ordering at
    // lambda = 1.
    {
      PerfTable t = example_table(3);
      double et1 = 0, et2 = 0, et3 = 0;
      for (size_t i = 1; i < t.rows.size(); ++i) {
        const auto& a = t.rows[i - 1];
        const auto& b = t.rows[i];
        if (a[0] == b[0] && a[6] > 0 && b[6] > 0) ok &= b[5] > a[5];
      }
      for (auto& row : t.rows)
        if (std::abs(row[1] - 1.0) < 1e-12) {
          if (int(row[0]) == 1) et1 = row[5];
          if (int(row[0]) == 2) et2 = row[5];
          if (int(row[0]) == 3) et3 = row[5];
        }
      ok &= et1 < et2 && et2 < et3;
      os << " table3 ordering ET(1)=" << et1 << "<ET(2)=" << et2 << "<ET(3)="
         << et3 << ";";
    }
    // Table 4: increasing in lambda within d, decreasing in d within lambda.
    {
      PerfTable t = example_table(4);
      auto find = [&](double lam, int d) -> const std::vector<double>& {
        for (auto& row : t.rows)
          if (std::abs(row[0] - lam) < 1e-12 && int(row[1]) == d) return row;
        throw StructuralError("table4 row missing");
      };
      const int ds[4] = {1, 2, 5, 10};
      for (int i = 1; i <= 19; ++i) {
        const double lam = 0.05 * i;
        for (int a = 1; a < 4; ++a)
          ok &= find(lam, ds[a])[3] <= find(lam, ds[a - 1])[3] &&
                find(lam, ds[a])[4] <= find(lam, ds[a - 1])[4];
        if (i > 1)
          for (int d : ds)
            ok &= find(lam, d)[3] > find(lam - 0.05, d)[3] &&
                  find(lam, d)[4] > find(lam - 0.05, d)[4];
      }
      os << " table4 monotone";
    }
    r.pass = ok;
    r.detail = os.str();
  });
}

inline std::vector<CriterionResult> run_all(std::vector<int> ids = {}) {
  if (ids.empty()) ids = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<CriterionResult> out;
  for (int id : ids) {
    switch (id) {
      case 1: out.push_back(criterion1()); break;
      case 2: out.push_back(criterion2()); break;
      case 3: out.push_back(criterion3()); break;
      case 4: out.push_back(criterion4()); break;
      case 5: out.push_back(criterion5()); break;
      case 6: out.push_back(criterion6()); break;
      case 7: out.push_back(criterion7()); break;
      case 8: out.push_back(criterion8()); break;
      case 9: out.push_back(criterion9()); break;
      case 10: out.push_back(criterion10()); break;
      default:
        throw ValidationError("unknown criterion id " + std::to_string(id));
    }
  }
  return out;
}

}  // namespace smm::validate
