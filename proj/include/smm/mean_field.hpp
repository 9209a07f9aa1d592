#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "smm/env_factor.hpp"
#include "smm/map_ph.hpp"

namespace smm {

// Fraction vector: u0 is the MAP-phase occupancy (1 x ma); levels[k-1] is
// u_k, the fraction of servers with at least k customers resolved by
// (MAP phase, service phase), flattened with the service phase fastest.
struct FractionVector {
  RowVec u0;
  std::vector<RowVec> levels;

  size_t depth() const { return levels.size(); }
};

// Aggregate tail at level k (levels are 1-based; level 0 aggregates to 1).
inline double aggregate_tail(const FractionVector& u, size_t k) {
  if (k == 0) return u.u0.sum();
  if (k > u.levels.size()) return 0.0;
  return u.levels[k - 1].sum();
}

inline void validate_state(const FractionVector& u, const ModelSpec& m,
                           double tol = 1e-9) {
  const Eigen::Index ma = m.ma(), mb = m.mb();
  if (u.u0.size() != ma)
    throw ValidationError("state: u0 must have one entry per MAP phase");
  if (std::abs(u.u0.sum() - 1.0) > tol)
    throw ValidationError("state: u0 must sum to 1");
  if (u.u0.minCoeff() < -tol)
    throw ValidationError("state: u0 must be nonnegative");
  for (size_t k = 0; k < u.levels.size(); ++k) {
    if (u.levels[k].size() != ma * mb)
      throw ValidationError("state: level " + std::to_string(k + 1) +
                            " has wrong dimension");
    if (u.levels[k].minCoeff() < -tol)
      throw ValidationError("state: level " + std::to_string(k + 1) +
                            " has negative entries");
    for (Eigen::Index i = 0; i < ma; ++i) {
      double above = (k == 0) ? u.u0(i)
                              : u.levels[k - 1].segment(i * mb, mb).sum();
      double here = u.levels[k].segment(i * mb, mb).sum();
      if (here > above + tol)
        throw ValidationError("state: tails must be non-increasing in the "
                              "level (level " +
                              std::to_string(k + 1) + ", phase " +
                              std::to_string(i) + ")");
    }
  }
}

// Static matrices of the drift, precomputed once per model.
struct DriftWorkspace {
  Eigen::Index ma, mb, m;
  int d;
  Matrix DI;     // D (x) I
  Matrix dDeI;   // diag(De) (x) I
  Matrix S;      // [C + diag(De)] (+) T
  Matrix TA;     // I (x) (T0 alpha)
  Matrix PA;     // I (x) alpha, lifts u0 to u0 (x) alpha
  Matrix Q;      // C + D
  explicit DriftWorkspace(const ModelSpec& mod)
      : ma(mod.ma()), mb(mod.mb()), m(ma * mb), d(mod.d) {
    const Matrix I_b = Matrix::Identity(mb, mb);
    const Matrix I_a = Matrix::Identity(ma, ma);
    Vector de = mod.map.D.rowwise().sum();
    DI = kron_product(mod.map.D, I_b);
    dDeI = kron_product(Matrix(de.asDiagonal()), I_b);
    S = kron_sum(mod.map.C + Matrix(de.asDiagonal()), mod.ph.T);
    TA = kron_product(I_a, Matrix(mod.ph.exit() * mod.ph.alpha));
    PA = kron_product(I_a, Matrix(mod.ph.alpha));
    Q = mod.map.C + mod.map.D;
  }
};

// Drift of the mean-field dynamics. Level K+1 is treated as empty; the
// integrator grows K before that approximation matters.
inline FractionVector rhs(const FractionVector& u, const ModelSpec&,
                          const DriftWorkspace& w) {
  FractionVector f;
  f.u0 = u.u0 * w.Q;
  const size_t K = u.levels.size();
  f.levels.resize(K);
  if (K == 0) return f;
  RowVec lifted = u.u0 * w.PA;  // u0 (x) alpha
  for (size_t k = 1; k <= K; ++k) {
    const RowVec& prev = (k == 1) ? lifted : u.levels[k - 2];
    const RowVec& cur = u.levels[k - 1];
    // Clamp: embedded RK stages may dip a vanishing tail slightly below 0.
    const double a = std::max(prev.sum(), 0.0);
    const double b = std::clamp(cur.sum(), 0.0, a);
    const double L = env_factor_closed(a, b, w.d);
    RowVec val = (prev * w.DI - cur * w.dDeI) * L + cur * w.S;
    if (k < K) val += u.levels[k] * w.TA;
    f.levels[k - 1] = val;
  }
  return f;
}

inline FractionVector rhs(const FractionVector& u, const ModelSpec& mod) {
  return rhs(u, mod, DriftWorkspace(mod));
}

// Distance used for convergence statements: phase-resolved sup with level
// weight 1/(k+1), plus the u0 discrepancy.
inline double metric(const FractionVector& a, const FractionVector& b) {
  double dist = inf_norm(RowVec(a.u0 - b.u0));
  const size_t K = std::max(a.levels.size(), b.levels.size());
  for (size_t k = 1; k <= K; ++k) {
    double diff;
    if (k > a.levels.size())
      diff = inf_norm(b.levels[k - 1]);
    else if (k > b.levels.size())
      diff = inf_norm(a.levels[k - 1]);
    else
      diff = inf_norm(RowVec(a.levels[k - 1] - b.levels[k - 1]));
    dist = std::max(dist, diff / double(k + 1));
  }
  return dist;
}

// Dense Jacobian of the drift (standard convention J(i,j) = dF_i/dx_j) over
// the flattened state [u0, u_1, ..., u_K]. The environment factors make
// each block row depend on the two adjacent aggregate tails; those enter as
// rank-one corrections via the partial derivatives of L.
inline Matrix jacobian_dense(const FractionVector& u, const ModelSpec&,
                             const DriftWorkspace& w) {
  const size_t K = u.levels.size();
  const Eigen::Index n = w.ma + Eigen::Index(K) * w.m;
  // Row-vector convention first: dF_colblock = sum_r du_rowblock * B(r, c).
  Matrix J = Matrix::Zero(n, n);
  auto block = [&](Eigen::Index rb, Eigen::Index cb) {
    Eigen::Index r0 = rb == 0 ? 0 : w.ma + (rb - 1) * w.m;
    Eigen::Index c0 = cb == 0 ? 0 : w.ma + (cb - 1) * w.m;
    Eigen::Index rs = rb == 0 ? w.ma : w.m;
    Eigen::Index cs = cb == 0 ? w.ma : w.m;
    return J.block(r0, c0, rs, cs);
  };
  block(0, 0) = w.Q;
  if (K == 0) return J.transpose();

  RowVec lifted = u.u0 * w.PA;
  const Vector e_m = Vector::Ones(w.m);
  const Vector e_a = Vector::Ones(w.ma);
  for (size_t k = 1; k <= K; ++k) {
    const RowVec& prev = (k == 1) ? lifted : u.levels[k - 2];
    const RowVec& cur = u.levels[k - 1];
    const double hi = std::max(prev.sum(), 0.0);
    const double lo = std::clamp(cur.sum(), 0.0, hi);
    const double L = env_factor_closed(hi, lo, w.d);
    const double dLda = denv_da(hi, lo, w.d);
    const double dLdb = denv_db(hi, lo, w.d);
    const RowVec flow = prev * w.DI - cur * w.dDeI;

    // d(du_k)/d(u_k)
    block(k, k) = w.S - L * w.dDeI + dLdb * (e_m * flow);
    // d(du_k)/d(u_{k-1}); level 1 couples to u0 through the lift.
    if (k == 1)
      block(0, 1) = L * (w.PA * w.DI) + dLda * (e_a * flow);
    else
      block(k - 1, k) = L * w.DI + dLda * (e_m * flow);
    // d(du_k)/d(u_{k+1})
    if (k < K) block(k + 1, k) = w.TA;
  }
  return J.transpose();
}

inline Matrix jacobian_dense(const FractionVector& u, const ModelSpec& mod) {
  return jacobian_dense(u, mod, DriftWorkspace(mod));
}

// Global Lipschitz constant of the drift in the sup norm over the
// admissible region (all aggregate tails in [0, 1]).
inline double lipschitz_bound(const ModelSpec& mod) {
  Vector de = mod.map.D.rowwise().sum();
  Matrix cd = mod.map.C + Matrix(de.asDiagonal());
  Matrix t0a = mod.ph.exit() * mod.ph.alpha;
  const double d = double(mod.d);
  return inf_norm(cd) + 2.0 * (d + (d - 1.0) * (d - 2.0)) * inf_norm(mod.map.D) +
         inf_norm(mod.ph.T) + inf_norm(t0a);
}

struct IntegrateOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  double max_step = 1.0;
  double grow_eps = 1e-13;    // top-level mass that triggers deepening
  size_t max_levels = 4096;
  double clamp_eps = 1e-12;   // negatives above -clamp_eps are zeroed
  std::vector<double> sample_times;  // interior sample points (sorted)
};

struct Trajectory {
  std::vector<double> t;
  std::vector<FractionVector> u;
  size_t steps = 0;
  size_t rejected = 0;
  size_t clamped = 0;
  size_t final_depth = 0;
};

namespace detail {

struct FlatState {
  Eigen::Index ma, m;
  Vector y;
  size_t K;

  FractionVector unpack() const {
    FractionVector u;
    u.u0 = y.head(ma).transpose();
    u.levels.resize(K);
    for (size_t k = 0; k < K; ++k)
      u.levels[k] = y.segment(ma + Eigen::Index(k) * m, m).transpose();
    return u;
  }
  static Vector pack(const FractionVector& u, Eigen::Index ma, Eigen::Index m,
                     size_t K) {
    Vector y = Vector::Zero(ma + Eigen::Index(K) * m);
    y.head(ma) = u.u0.transpose();
    for (size_t k = 0; k < std::min(K, u.levels.size()); ++k)
      y.segment(ma + Eigen::Index(k) * m, m) = u.levels[k].transpose();
    return y;
  }
};

}  // namespace detail

// Adaptive Dormand-Prince RK45 with exact stops at sample times, automatic
// level growth, and clamping of integration noise below zero.
inline Trajectory integrate(const ModelSpec& mod, const FractionVector& g,
                            double t_end, const IntegrateOptions& opts = {}) {
  if (t_end <= 0.0) throw ValidationError("integrate: t_end must be positive");
  validate_state(g, mod);
  DriftWorkspace w(mod);

  size_t K = std::max<size_t>(g.levels.size() + 8, 12);
  Vector y = detail::FlatState::pack(g, w.ma, w.m, K);

  auto f = [&](const Vector& x) {
    detail::FlatState s{w.ma, w.m, x, K};
    FractionVector fx = rhs(s.unpack(), mod, w);
    return detail::FlatState::pack(fx, w.ma, w.m, K);
  };

  // Dormand-Prince coefficients.
  static const double A[7][6] = {
      {},
      {1.0 / 5},
      {3.0 / 40, 9.0 / 40},
      {44.0 / 45, -56.0 / 15, 32.0 / 9},
      {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
      {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176,
       -5103.0 / 18656},
      {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
  static const double E[7] = {71.0 / 57600,     0.0,         -71.0 / 16695,
                              71.0 / 1920,      -17253.0 / 339200,
                              22.0 / 525,       -1.0 / 40};

  std::vector<double> stops;
  for (double s : opts.sample_times)
    if (s > 0.0 && s < t_end) stops.push_back(s);
  std::sort(stops.begin(), stops.end());
  stops.push_back(t_end);

  Trajectory traj;
  traj.t.push_back(0.0);
  traj.u.push_back(detail::FlatState{w.ma, w.m, y, K}.unpack());

  double t = 0.0;
  double h = std::min(opts.max_step, t_end / 10.0);
  Vector k1 = f(y);
  std::vector<Vector> ks(7);

  for (double stop : stops) {
    while (t < stop) {
      const double h_use = std::min({h, opts.max_step, stop - t});
      if (h_use < 1e-14 * std::max(1.0, std::abs(t)))
        throw IntegrationError("integrate: step size underflow at t=" +
                               std::to_string(t));
      ks[0] = k1;
      for (int i = 1; i < 7; ++i) {
        Vector yi = y;
        for (int j = 0; j < i; ++j)
          if (A[i][j] != 0.0) yi += h_use * A[i][j] * ks[j];
        ks[i] = f(yi);
      }
      Vector ynew = y;
      for (int j = 0; j < 6; ++j)
        if (A[6][j] != 0.0) ynew += h_use * A[6][j] * ks[j];
      Vector errv = Vector::Zero(y.size());
      for (int j = 0; j < 7; ++j)
        if (E[j] != 0.0) errv += h_use * E[j] * ks[j];
      double err = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        double sc = opts.atol +
                    opts.rtol * std::max(std::abs(y(i)), std::abs(ynew(i)));
        err = std::max(err, std::abs(errv(i)) / sc);
      }
      const bool accepted = err <= 1.0;
      if (accepted) {
        t += h_use;
        y = std::move(ynew);
        // ks[6] is f at (t, y): FSAL.
        k1 = ks[6];
        bool reclamped = false;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
          if (y(i) < 0.0) {
            if (y(i) <= -opts.clamp_eps)
              throw IntegrationError(
                  "integrate: state left the admissible region (entry " +
                  std::to_string(i) + " = " + std::to_string(y(i)) + ")");
            y(i) = 0.0;
            ++traj.clamped;
            reclamped = true;
          }
        }
        ++traj.steps;
        // Deepen when mass reaches the last tracked level.
        double top = y.tail(w.m).sum();
        if (top > opts.grow_eps) {
          if (K + 10 > opts.max_levels)
            throw ResourceError("integrate: level cap exceeded");
          K += 10;
          Vector y2 = Vector::Zero(w.ma + Eigen::Index(K) * w.m);
          y2.head(y.size()) = y;
          y = std::move(y2);
          reclamped = true;
        }
        if (reclamped) k1 = f(y);
      } else {
        ++traj.rejected;
      }
      const double fac = std::clamp(
          0.9 * std::pow(std::max(err, 1e-10), -0.2), 0.2, 5.0);
      if (accepted && h_use < h)
        h = std::max(h, h_use * fac);  // boundary clip, keep controller value
      else
        h = h_use * fac;
    }
    traj.t.push_back(t);
    traj.u.push_back(detail::FlatState{w.ma, w.m, y, K}.unpack());
  }
  traj.final_depth = K;
  return traj;
}

// Canonical starting states.
inline FractionVector empty_state(const ModelSpec& mod, int map_phase = -1) {
  FractionVector u;
  u.u0 = RowVec::Zero(mod.ma());
  if (map_phase >= 0) {
    if (map_phase >= mod.ma())
      throw ValidationError("empty_state: phase out of range");
    u.u0(map_phase) = 1.0;
  } else {
    u.u0 = stationary_vector(mod.map.C + mod.map.D);
  }
  return u;
}

}  // namespace smm
