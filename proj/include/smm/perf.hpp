#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "smm/fixed_point.hpp"
#include "smm/map_ph.hpp"

namespace smm {

// Mean stationary queue length per server: sum over k >= 1 of the tail law.
// d = 1 is the geometric closed form; for d >= 2 the terms decay doubly
// exponentially and the truncation error is below twice the first dropped
// term.
inline double mean_queue_length(double rho, int d, double eps = 1e-14) {
  if (rho < 0.0 || rho >= 1.0)
    throw ValidationError("mean_queue_length: need 0 <= rho < 1");
  if (d < 1) throw ValidationError("mean_queue_length: d must be >= 1");
  if (rho == 0.0) return 0.0;
  if (d == 1) return rho / (1.0 - rho);
  double sum = 0.0;
  for (long k = 1;; ++k) {
    const double term = tail_law(rho, d, k);
    if (term < eps) break;
    sum += term;
  }
  return sum;
}

// Mean sojourn time: the service of the arriving customer, the residual
// service it may wait behind, and the queue ahead of it:
// E[T] = E[X] + rho E[X_R] + E[X] sum_{k>=2} tail(k).
inline double mean_sojourn(const PhDistribution& ph, double lambda, int d,
                           double eps = 1e-14) {
  if (lambda < 0.0) throw ValidationError("mean_sojourn: lambda must be >= 0");
  if (d < 1) throw ValidationError("mean_sojourn: d must be >= 1");
  const double ex = ph_mean(ph);
  const double rho = lambda * ex;
  if (rho >= 1.0) throw ValidationError("mean_sojourn: model is unstable");
  if (lambda == 0.0) return ex;
  const double exr = ph_residual(ph).mean;
  double tail_sum;
  if (d == 1) {
    tail_sum = rho * rho / (1.0 - rho);
  } else {
    tail_sum = 0.0;
    for (long k = 2;; ++k) {
      const double term = tail_law(rho, d, k);
      if (term < eps) break;
      tail_sum += term;
    }
  }
  return ex + rho * exr + ex * tail_sum;
}

struct PerfReport {
  double rho = 0.0;
  int d = 1;
  double EQ = 0.0;
  double ET = 0.0;
  double EX = 0.0;
  double EXR = 0.0;
  long trunc_level = 0;
  double trunc_bound = 0.0;
};

inline PerfReport perf_report(const PhDistribution& ph, double lambda, int d,
                              double eps = 1e-14) {
  PerfReport r;
  r.EX = ph_mean(ph);
  r.EXR = ph_residual(ph).mean;
  r.rho = lambda * r.EX;
  r.d = d;
  r.EQ = mean_queue_length(r.rho, d, eps);
  r.ET = mean_sojourn(ph, lambda, d, eps);
  long k = 1;
  while (tail_law(r.rho, d, k) >= eps) ++k;
  r.trunc_level = k;
  r.trunc_bound = (d == 1) ? tail_law(r.rho, 1, k) / (1.0 - r.rho)
                           : 2.0 * tail_law(r.rho, d, k);
  return r;
}

struct PerfTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

// Data behind the four numerical studies. Unstable grid points are emitted
// with stable = 0 and NaN measures rather than aborting.
inline PerfTable example_table(int which) {
  PerfTable t;
  const double nan = std::nan("");
  switch (which) {
    case 1: {
      // Erlang services E[m, eta], lambda = 1, rho = m/eta; EQ vs eta for
      // (m, d) in {(2,2), (3,2), (4,2), (2,10)}.
      t.columns = {"m", "d", "eta", "lambda", "rho", "EQ", "stable"};
      const std::vector<std::pair<int, int>> pairs{{2, 2}, {3, 2}, {4, 2}, {2, 10}};
      for (auto [m, d] : pairs) {
        for (int i = 1; i <= 19; ++i) {
          const double rho = 0.05 * i;
          const double eta = double(m) / rho;
          t.rows.push_back({double(m), double(d), eta, 1.0, rho,
                            mean_queue_length(rho, d), 1.0});
        }
      }
      break;
    }
    case 2: {
      // Exponential vs two-phase service at the same mean, lambda in [1,3],
      // d in {1,2}; service = 0 is exponential, 1 the two-phase law.
      t.columns = {"lambda", "d", "service", "rho", "EQ", "ET", "stable"};
      PhDistribution ph = two_phase_ph();
      const double mu = 1.0 / ph_mean(ph);
      PhDistribution ex = exponential_ph(mu);
      for (int d : {1, 2}) {
        for (int i = 0; i <= 20; ++i) {
          const double lambda = 1.0 + 0.1 * i;
          for (int svc : {0, 1}) {
            const PhDistribution& s = svc == 0 ? ex : ph;
            const double rho = lambda * ph_mean(s);
            if (rho < 1.0)
              t.rows.push_back({lambda, double(d), double(svc), rho,
                                mean_queue_length(rho, d),
                                mean_sojourn(s, lambda, d), 1.0});
            else
              t.rows.push_back({lambda, double(d), double(svc), rho, nan, nan, 0.0});
          }
        }
      }
      break;
    }
    case 3: {
      // Two-phase service variants 1..3 at d = 2: ET vs lambda.
      t.columns = {"variant", "lambda", "d", "rho", "EQ", "ET", "stable"};
      for (int v = 1; v <= 3; ++v) {
        PhDistribution ph = two_phase_family(v);
        const double ex = ph_mean(ph);
        for (int i = 1; i <= 11; ++i) {
          const double lambda = 0.2 * i;
          const double rho = lambda * ex;
          if (rho < 1.0)
            t.rows.push_back({double(v), lambda, 2.0, rho,
                              mean_queue_length(rho, 2),
                              mean_sojourn(ph, lambda, 2), 1.0});
          else
            t.rows.push_back({double(v), lambda, 2.0, rho, nan, nan, 0.0});
        }
      }
      break;
    }
    case 4: {
      // Two-phase MAP input scaled to rate lambda, exponential service
      // mu = 1, so rho = lambda; EQ and ET over lambda in (0,1),
      // d in {1,2,5,10}.
      t.columns = {"lambda", "d", "rho", "EQ", "ET", "stable"};
      PhDistribution ex = exponential_ph(1.0);
      for (int d : {1, 2, 5, 10}) {
        for (int i = 1; i <= 19; ++i) {
          const double lambda = 0.05 * i;
          t.rows.push_back({lambda, double(d), lambda,
                            mean_queue_length(lambda, d),
                            mean_sojourn(ex, lambda, d), 1.0});
        }
      }
      break;
    }
    default:
      throw ValidationError("example_table: which must be 1..4");
  }
  return t;
}

}  // namespace smm
