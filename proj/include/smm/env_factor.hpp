#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "smm/linalg.hpp"

namespace smm {

// Environment factor L(a, b) = (a^d - b^d)/(a - b) for 0 <= b <= a: the
// selection-probability multiplier in the mean-field drift when the two
// adjacent aggregated tails are a and b. Near a = b the quotient switches
// to its limit d a^{d-1}.
inline double env_factor_closed(double a, double b, int d) {
  if (d < 1) throw ValidationError("env_factor: d must be >= 1");
  if (b < 0.0 || a < b)
    throw ValidationError("env_factor: need 0 <= b <= a");
  if (d == 1) return 1.0;
  if (std::abs(a - b) <= 1e-12 * std::max(1.0, a))
    return double(d) * std::pow(a, d - 1);
  return (std::pow(a, d) - std::pow(b, d)) / (a - b);
}

// dL/da with the same a ~ b switch; the limit is d(d-1)/2 a^{d-2}.
inline double denv_da(double a, double b, int d) {
  if (d == 1) return 0.0;
  if (std::abs(a - b) <= 1e-10 * std::max(1.0, a))
    return 0.5 * double(d) * double(d - 1) * std::pow(a, d - 2);
  const double diff = a - b;
  return (double(d) * std::pow(a, d - 1) * diff -
          (std::pow(a, d) - std::pow(b, d))) /
         (diff * diff);
}

// dL/db, limit d(d-1)/2 a^{d-2} as b -> a.
inline double denv_db(double a, double b, int d) {
  if (d == 1) return 0.0;
  if (std::abs(a - b) <= 1e-10 * std::max(1.0, a))
    return 0.5 * double(d) * double(d - 1) * std::pow(a, d - 2);
  const double diff = a - b;
  return ((std::pow(a, d) - std::pow(b, d)) -
          double(d) * std::pow(b, d - 1) * diff) /
         (diff * diff);
}

// Two adjacent levels of a fraction vector, resolved by (MAP phase, service
// phase), flattened row-major with the service phase fastest. prev must
// dominate cur phase-wise in aggregate: sum_j prev(i,j) >= sum_j cur(i,j).
struct LevelPair {
  RowVec prev;
  RowVec cur;
  Eigen::Index ma = 0;
  Eigen::Index mb = 0;
};

inline LevelPair make_level_pair(RowVec prev, RowVec cur, Eigen::Index ma,
                                 Eigen::Index mb) {
  if (ma < 1 || mb < 1 || prev.size() != ma * mb || cur.size() != ma * mb)
    throw ValidationError("LevelPair: dimensions do not match ma*mb");
  for (Eigen::Index i = 0; i < ma; ++i) {
    double dp = prev.segment(i * mb, mb).sum() - cur.segment(i * mb, mb).sum();
    if (dp < -1e-12)
      throw ValidationError("LevelPair: aggregate of prev must dominate cur");
  }
  for (Eigen::Index t = 0; t < prev.size(); ++t)
    if (prev(t) < -1e-12 || cur(t) < -1e-12)
      throw ValidationError("LevelPair: entries must be nonnegative");
  return {std::move(prev), std::move(cur), ma, mb};
}

namespace detail {

inline double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

inline double binom(int n, int k) {
  return factorial(n) / (factorial(k) * factorial(n - k));
}

// Enumerate compositions (r_1..r_m) of n into m nonnegative parts.
inline void compositions(int n, int m,
                         const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> r(m, 0);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == m - 1) {
      r[pos] = left;
      f(r);
      return;
    }
    for (int v = 0; v <= left; ++v) {
      r[pos] = v;
      rec(pos + 1, left - v);
    }
  };
  rec(0, n);
}

inline double multinomial(int n, const std::vector<int>& r) {
  double denom = 1.0;
  for (int ri : r) denom *= factorial(ri);
  return factorial(n) / denom;
}

}  // namespace detail

// Event-decomposition evaluation of the environment factor seen from MAP
// phase l (0-based). Enumerates how d independent choices split between
// "deep" mass (levels >= k, differences Delta_i) and "shallow" mass
// (levels >= k+1, b_i) across MAP phases. The value is independent of l
// and equals env_factor_closed(prev·e, cur·e, d); this function exists as
// an independently computable cross-check of that invariance.
inline double env_factor_combinatorial(const LevelPair& pair, int l, int d) {
  const int ma = int(pair.ma);
  if (l < 0 || l >= ma)
    throw ValidationError("env_factor_combinatorial: phase index out of range");
  if (d < 1) throw ValidationError("env_factor_combinatorial: d must be >= 1");
  // Work grows like d * compositions(d, ma) * compositions(d, ma); cap it.
  const double comps = detail::binom(d + ma - 1, ma - 1);
  if (d > 8 || comps * comps * (d + 1) > 5e6)
    throw ResourceError("env_factor_combinatorial: d or MAP order too large");

  std::vector<double> b(ma), delta(ma);
  for (int i = 0; i < ma; ++i) {
    b[i] = pair.cur.segment(i * pair.mb, pair.mb).sum();
    delta[i] = pair.prev.segment(i * pair.mb, pair.mb).sum() - b[i];
  }

  auto pow_prod = [&](const std::vector<double>& base,
                      const std::vector<int>& exp) {
    double p = 1.0;
    for (int i = 0; i < ma; ++i) p *= std::pow(base[i], exp[i]);
    return p;
  };

  // Part I: all non-tagged choices land on phase l's shallow mass.
  double part1 = 0.0;
  for (int m = 1; m <= d; ++m)
    part1 += detail::binom(d, m) * std::pow(delta[l], m - 1) *
             std::pow(b[l], d - m);

  // Part II: tagged stack on phase l, the rest spread with at least one
  // choice off phase l.
  double part2 = 0.0;
  for (int m = 1; m <= d - 1; ++m) {
    double inner = 0.0;
    detail::compositions(d - m, ma, [&](const std::vector<int>& r) {
      int off = 0;
      for (int i = 0; i < ma; ++i)
        if (i != l) off += r[i];
      if (off < 1) return;
      inner += detail::multinomial(d - m, r) * pow_prod(b, r);
    });
    part2 += detail::binom(d, m) * std::pow(delta[l], m - 1) * inner;
  }

  // Part III: the deep choices themselves split across phases, m1 of them
  // (the tagged one included) on phase l and the rest strictly elsewhere;
  // the tagged choice wins a fraction m1/m of the resulting ties.
  double part3 = 0.0;
  for (int m = 2; m <= d; ++m) {
    for (int m1 = 1; m1 <= m - 1; ++m1) {
      double deep = 0.0;
      detail::compositions(m - m1, ma, [&](const std::vector<int>& nvec) {
        if (nvec[size_t(l)] != 0) return;
        deep += detail::multinomial(m - m1, nvec) * pow_prod(delta, nvec);
      });
      double shallow = 0.0;
      detail::compositions(d - m, ma, [&](const std::vector<int>& r) {
        shallow += detail::multinomial(d - m, r) * pow_prod(b, r);
      });
      part3 += detail::binom(d, m) * (double(m1) / double(m)) *
               detail::binom(m, m1) * std::pow(delta[l], m1 - 1) * deep *
               shallow;
    }
  }

  return part1 + part2 + part3;
}

struct InvarianceReport {
  std::vector<double> per_phase;
  double closed = 0.0;
  double max_rel_err = 0.0;
};

// Evaluates the combinatorial form at every MAP phase and compares with the
// closed form; max_rel_err is the worst relative deviation.
inline InvarianceReport check_invariance(const LevelPair& pair, int d) {
  InvarianceReport rep;
  const double a = pair.prev.sum();
  const double b = pair.cur.sum();
  rep.closed = env_factor_closed(a, b, d);
  const double scale = std::max(std::abs(rep.closed), 1e-30);
  for (int l = 0; l < int(pair.ma); ++l) {
    double v = env_factor_combinatorial(pair, l, d);
    rep.per_phase.push_back(v);
    rep.max_rel_err =
        std::max(rep.max_rel_err, std::abs(v - rep.closed) / scale);
  }
  return rep;
}

}  // namespace smm
