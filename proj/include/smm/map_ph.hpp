#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "smm/linalg.hpp"

namespace smm {

namespace detail {

// Strong connectivity of the directed graph with an edge i->j whenever
// adj(i,j) holds: forward and backward reachability from node 0.
inline bool strongly_connected(const std::vector<std::vector<bool>>& adj) {
  const size_t n = adj.size();
  auto reach = [&](bool forward) {
    std::vector<bool> seen(n, false);
    std::vector<size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      size_t v = stack.back();
      stack.pop_back();
      for (size_t w = 0; w < n; ++w) {
        bool edge = forward ? adj[v][w] : adj[w][v];
        if (edge && !seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
      }
    }
    for (bool s : seen)
      if (!s) return false;
    return true;
  };
  return reach(true) && reach(false);
}

}  // namespace detail

// Markovian arrival process descriptor (C, D): C holds phase transitions
// without arrivals, D the arrival-generating transitions; C + D is an
// irreducible conservative generator.
struct MapDescriptor {
  Matrix C;
  Matrix D;

  Eigen::Index order() const { return C.rows(); }
};

inline void validate_map(const MapDescriptor& m, double row_tol = 1e-10) {
  const Eigen::Index n = m.C.rows();
  if (n == 0 || m.C.cols() != n)
    throw ValidationError("MAP: C must be square and nonempty");
  if (m.D.rows() != n || m.D.cols() != n)
    throw ValidationError("MAP: D must match the order of C");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (m.C(i, i) >= 0.0)
      throw ValidationError("MAP: C diagonal must be negative (row " +
                            std::to_string(i) + ")");
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && m.C(i, j) < 0.0)
        throw ValidationError("MAP: C off-diagonal must be nonnegative (row " +
                              std::to_string(i) + ")");
      if (m.D(i, j) < 0.0)
        throw ValidationError("MAP: D must be nonnegative (row " +
                              std::to_string(i) + ")");
    }
  }
  if (m.D.cwiseAbs().sum() == 0.0)
    throw ValidationError("MAP: D must generate at least one arrival");
  Vector rows = (m.C + m.D).rowwise().sum();
  for (Eigen::Index i = 0; i < n; ++i)
    if (std::abs(rows(i)) > row_tol)
      throw ValidationError("MAP: (C+D) row " + std::to_string(i) +
                            " sums to " + std::to_string(rows(i)) +
                            ", expected 0");
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      adj[i][j] = (i != j && m.C(i, j) > 0.0) || m.D(i, j) > 0.0;
  if (!detail::strongly_connected(adj))
    throw ValidationError("MAP: C+D is not irreducible");
}

inline MapDescriptor make_map(Matrix C, Matrix D, double row_tol = 1e-10) {
  MapDescriptor m{std::move(C), std::move(D)};
  validate_map(m, row_tol);
  return m;
}

// Phase-type distribution (alpha, T); exit rates T0 = -T e.
struct PhDistribution {
  RowVec alpha;
  Matrix T;

  Eigen::Index order() const { return T.rows(); }
  Vector exit() const { return -T.rowwise().sum(); }
};

inline void validate_ph(const PhDistribution& p, double tol = 1e-10) {
  const Eigen::Index n = p.T.rows();
  if (n == 0 || p.T.cols() != n)
    throw ValidationError("PH: T must be square and nonempty");
  if (p.alpha.size() != n)
    throw ValidationError("PH: alpha must match the order of T");
  for (Eigen::Index j = 0; j < n; ++j)
    if (p.alpha(j) < 0.0)
      throw ValidationError("PH: alpha must be nonnegative (entry " +
                            std::to_string(j) + ")");
  if (std::abs(p.alpha.sum() - 1.0) > tol)
    throw ValidationError("PH: alpha must sum to 1, got " +
                          std::to_string(p.alpha.sum()));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p.T(i, i) >= 0.0)
      throw ValidationError("PH: T diagonal must be negative (row " +
                            std::to_string(i) + ")");
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j && p.T(i, j) < 0.0)
        throw ValidationError("PH: T off-diagonal must be nonnegative (row " +
                              std::to_string(i) + ")");
  }
  Vector t0 = p.exit();
  for (Eigen::Index i = 0; i < n; ++i)
    if (t0(i) < -tol)
      throw ValidationError("PH: row " + std::to_string(i) +
                            " of T has positive sum");
  if (t0.maxCoeff() <= 0.0)
    throw ValidationError("PH: no exit rate; absorption impossible");
  if (std::abs(p.T.fullPivLu().determinant()) < 1e-300)
    throw ValidationError("PH: T is singular; absorption not certain");
}

inline PhDistribution make_ph(RowVec alpha, Matrix T, double tol = 1e-10) {
  PhDistribution p{std::move(alpha), std::move(T)};
  validate_ph(p, tol);
  return p;
}

// Supermarket model: MAP arrivals, PH services, d choices per arrival.
struct ModelSpec {
  MapDescriptor map;
  PhDistribution ph;
  int d = 1;
  std::string name;

  Eigen::Index ma() const { return map.order(); }
  Eigen::Index mb() const { return ph.order(); }
};

inline void validate_model(const ModelSpec& m, double row_tol = 1e-10) {
  validate_map(m.map, row_tol);
  validate_ph(m.ph, row_tol);
  if (m.d < 1) throw ValidationError("model: d must be >= 1");
}

// Stationary arrival rate lambda = omega D e, omega stationary for C+D.
inline double map_rate(const MapDescriptor& m) {
  RowVec omega = stationary_vector(m.C + m.D);
  double lambda = omega * m.D.rowwise().sum();
  if (lambda <= 0.0)
    throw ValidationError("MAP: stationary arrival rate must be positive");
  return lambda;
}

// Mean of PH(alpha, T): alpha (-T)^{-1} e.
inline double ph_mean(const PhDistribution& p) {
  Vector ones = Vector::Ones(p.order());
  Vector sol = (-p.T).fullPivLu().solve(ones);
  return p.alpha * sol;
}

struct ResidualPh {
  RowVec theta;  // stationary phase of an in-progress service
  double mean;   // mean remaining service time
};

// Residual service time: theta solves theta (T + T0 alpha) = 0, theta e = 1;
// the remaining time is PH(theta, T). For a one-phase PH this collapses to
// the full service time (memorylessness).
inline ResidualPh ph_residual(const PhDistribution& p) {
  Matrix gen = p.T + p.exit() * p.alpha;
  RowVec theta = stationary_vector(gen);
  Vector ones = Vector::Ones(p.order());
  double mean = theta * (-p.T).fullPivLu().solve(ones);
  return {theta, mean};
}

struct Intensity {
  double rho;
  bool stable;
};

// rho = lambda E[X]; the system is stable iff rho < 1.
inline Intensity traffic_intensity(const ModelSpec& m) {
  double rho = map_rate(m.map) * ph_mean(m.ph);
  return {rho, rho < 1.0};
}

// N-server scaling: C(N) = C - (N-1) diag(De), D(N) = N D. The total
// arrival rate grows linearly in N while per-phase bookkeeping is kept.
inline MapDescriptor scaled_map(const MapDescriptor& m, long N) {
  if (N < 1) throw ValidationError("scaled_map: N must be >= 1");
  Vector de = m.D.rowwise().sum();
  MapDescriptor out;
  out.C = m.C - double(N - 1) * Matrix(de.asDiagonal());
  out.D = double(N) * m.D;
  return out;
}

}  // namespace smm
