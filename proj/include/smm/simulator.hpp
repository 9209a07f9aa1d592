#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <queue>
#include <vector>

#include "smm/mean_field.hpp"
#include "smm/rng.hpp"

namespace smm {

struct SimConfig {
  ModelSpec model;
  long N = 100;
  double horizon = 100.0;
  double warmup = 0.0;
  uint64_t seed = 1;
  int replications = 1;
  bool with_replacement = true;  // d-sampling mode; see choices stream
  int d_override = 0;            // 0: use model.d
  std::vector<double> sample_times;
  FractionVector init;  // empty u0 => all servers idle
};

inline void validate_sim_config(const SimConfig& cfg) {
  validate_model(cfg.model);
  if (cfg.N < 1) throw ValidationError("sim: N must be >= 1");
  if (cfg.horizon <= 0.0) throw ValidationError("sim: horizon must be > 0");
  if (cfg.warmup < 0.0 || cfg.warmup >= cfg.horizon)
    throw ValidationError("sim: need horizon > warmup >= 0");
  if (cfg.replications < 1)
    throw ValidationError("sim: replications must be >= 1");
  const int d = cfg.d_override > 0 ? cfg.d_override : cfg.model.d;
  if (d > 15)
    throw ValidationError("sim: at most 15 choices per arrival supported");
  if (!cfg.with_replacement && d > cfg.N)
    throw ValidationError("sim: without replacement requires d <= N");
}

// Deterministic integerization of a starting fraction vector: one MAP phase
// (the heaviest), queue lengths realizing the aggregate tails, head phases
// matching the level-1 phase mix by largest remainder.
struct InitAssignment {
  int map_phase = 0;
  std::vector<int> len;
  std::vector<int> phase;  // head service phase, meaningful when len >= 1
  FractionVector realized;
};

inline InitAssignment realize_init(const ModelSpec& model,
                                   const FractionVector& g, long N) {
  const Eigen::Index ma = model.ma(), mb = model.mb();
  InitAssignment out;
  out.len.assign(size_t(N), 0);
  out.phase.assign(size_t(N), 0);

  if (g.u0.size() == 0) {
    RowVec omega = stationary_vector(model.map.C + model.map.D);
    Eigen::Index best;
    omega.maxCoeff(&best);
    out.map_phase = int(best);
  } else {
    validate_state(g, model);
    Eigen::Index best;
    g.u0.maxCoeff(&best);
    out.map_phase = int(best);
  }

  // Aggregate tails -> non-increasing integer counts.
  std::vector<long> n_k;
  for (size_t k = 1; k <= g.levels.size(); ++k) {
    double tau = g.levels[k - 1].sum();
    long c = std::lround(double(N) * tau);
    c = std::min(c, n_k.empty() ? N : n_k.back());
    if (c <= 0) break;
    n_k.push_back(c);
  }
  for (size_t s = 0; s < size_t(N); ++s) {
    int l = 0;
    while (l < int(n_k.size()) && long(s) < n_k[size_t(l)]) ++l;
    out.len[s] = l;
  }
  const long busy = n_k.empty() ? 0 : n_k[0];
  if (busy > 0) {
    // Level-1 service phase mix.
    RowVec mix = RowVec::Zero(mb);
    for (Eigen::Index i = 0; i < ma; ++i)
      mix += g.levels[0].segment(i * mb, mb);
    const double tot = mix.sum();
    std::vector<long> cnt(size_t(mb), 0);
    if (tot > 0.0) {
      std::vector<std::pair<double, Eigen::Index>> rem;
      long assigned = 0;
      for (Eigen::Index j = 0; j < mb; ++j) {
        const double want = double(busy) * mix(j) / tot;
        cnt[size_t(j)] = long(std::floor(want));
        assigned += cnt[size_t(j)];
        rem.push_back({want - std::floor(want), j});
      }
      std::sort(rem.begin(), rem.end(), [](auto& a, auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
      });
      for (long r = 0; r < busy - assigned; ++r)
        ++cnt[size_t(rem[size_t(r) % rem.size()].second)];
    } else {
      cnt[0] = busy;
    }
    long s = 0;
    for (Eigen::Index j = 0; j < mb; ++j)
      for (long c = 0; c < cnt[size_t(j)]; ++c) out.phase[size_t(s++)] = int(j);
  }

  // Exact fraction vector of the integerized state.
  out.realized.u0 = RowVec::Zero(ma);
  out.realized.u0(out.map_phase) = 1.0;
  int maxlen = 0;
  for (long s = 0; s < N; ++s) maxlen = std::max(maxlen, out.len[size_t(s)]);
  out.realized.levels.assign(size_t(maxlen), RowVec::Zero(ma * mb));
  for (long s = 0; s < N; ++s)
    for (int k = 1; k <= out.len[size_t(s)]; ++k)
      out.realized.levels[size_t(k - 1)](out.map_phase * mb +
                                         out.phase[size_t(s)]) += 1.0 / double(N);
  return out;
}

struct SimSnapshot {
  double t = 0.0;
  int map_phase = 0;
  double total = 0.0;                // total customers / N
  std::vector<RowVec> tails_by_phase;  // k-1 -> fraction per service phase
};

struct RepResult {
  std::vector<SimSnapshot> snapshots;
  std::vector<double> avg_tails;  // time-averaged aggregate tails
  RowVec avg_u0;
  double avg_total = 0.0;  // time-averaged total customers (absolute count)
  uint64_t arrivals = 0;
  uint64_t departures = 0;
  uint64_t events = 0;
  double measured = 0.0;
};

struct SimResult {
  std::vector<RepResult> reps;
  double mean_total = 0.0;
  double half_width_total = 0.0;  // 95% normal interval across replications
  std::vector<double> mean_tails;
};

namespace detail {

struct PendingEvent {
  double t;
  long server;  // -1: MAP event
  uint64_t ver;
  bool operator>(const PendingEvent& o) const {
    if (t != o.t) return t > o.t;
    if (server != o.server) return server > o.server;
    return ver > o.ver;
  }
};

inline RepResult simulate_rep(const SimConfig& cfg, int d, uint64_t rep_seed,
                              const InitAssignment& init) {
  const ModelSpec& model = cfg.model;
  const Eigen::Index mb = model.mb();
  const long N = cfg.N;

  const MapDescriptor sm = scaled_map(model.map, N);
  const Eigen::Index ma = model.ma();
  // Per MAP phase: outgoing rate and cumulative transition table.
  struct MapChoice {
    double cum;
    int target;
    bool arrival;
  };
  std::vector<double> out_rate(static_cast<size_t>(ma));
  std::vector<std::vector<MapChoice>> table(static_cast<size_t>(ma));
  for (Eigen::Index i = 0; i < ma; ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < ma; ++j)
      if (j != i && sm.C(i, j) > 0.0) {
        acc += sm.C(i, j);
        table[size_t(i)].push_back({acc, int(j), false});
      }
    for (Eigen::Index j = 0; j < ma; ++j)
      if (sm.D(i, j) > 0.0) {
        acc += sm.D(i, j);
        table[size_t(i)].push_back({acc, int(j), true});
      }
    out_rate[size_t(i)] = acc;
  }

  const Matrix& T = model.ph.T;
  const RowVec& alpha = model.ph.alpha;
  std::vector<double> alpha_cum(static_cast<size_t>(mb));
  {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < mb; ++j) {
      acc += alpha(j);
      alpha_cum[size_t(j)] = acc;
    }
  }

  CounterRng map_rng = CounterRng::stream(rep_seed, "map");
  CounterRng choice_rng = CounterRng::stream(rep_seed, "choices");
  std::vector<CounterRng> svc;
  svc.reserve(size_t(N));
  for (long s = 0; s < N; ++s)
    svc.push_back(CounterRng::stream(rep_seed, "service", uint64_t(s)));

  std::vector<int> len = init.len;
  std::vector<int> phase = init.phase;
  int map_phase = init.map_phase;
  std::vector<uint64_t> ver(size_t(N), 0);
  std::priority_queue<PendingEvent, std::vector<PendingEvent>,
                      std::greater<PendingEvent>>
      heap;

  std::vector<long> tail_count{N};  // tail_count[k] = #servers with len >= k
  long total = 0;
  for (long s = 0; s < N; ++s) {
    total += len[size_t(s)];
    for (int k = 1; k <= len[size_t(s)]; ++k) {
      if (int(tail_count.size()) <= k) tail_count.push_back(0);
      ++tail_count[size_t(k)];
    }
  }

  auto draw_alpha = [&](CounterRng& r) {
    const double u = r.next_uniform();
    for (Eigen::Index j = 0; j < mb; ++j)
      if (u < alpha_cum[size_t(j)] || j == mb - 1) return int(j);
    return int(mb - 1);
  };
  auto schedule = [&](long s, double now) {
    const int j = phase[size_t(s)];
    const double h = svc[size_t(s)].next_exponential(-T(j, j));
    heap.push({now + h, s, ++ver[size_t(s)]});
  };

  for (long s = 0; s < N; ++s)
    if (len[size_t(s)] >= 1) schedule(s, 0.0);
  double next_map = map_rng.next_exponential(out_rate[size_t(map_phase)]);

  RepResult rep;
  rep.avg_u0 = RowVec::Zero(ma);
  std::vector<double> acc_tail;
  double acc_total = 0.0;
  uint64_t arrival_ordinal = 0;

  std::vector<double> samples = cfg.sample_times;
  std::sort(samples.begin(), samples.end());
  size_t next_sample = 0;
  while (next_sample < samples.size() && samples[next_sample] < 0.0)
    ++next_sample;

  double t = 0.0;
  auto advance_to = [&](double tn) {
    const double lo = std::max(t, cfg.warmup);
    const double hi = std::min(tn, cfg.horizon);
    if (hi > lo) {
      const double dt = hi - lo;
      acc_total += double(total) * dt;
      if (acc_tail.size() < tail_count.size())
        acc_tail.resize(tail_count.size(), 0.0);
      for (size_t k = 1; k < tail_count.size(); ++k)
        acc_tail[k] += double(tail_count[k]) * dt;
      rep.avg_u0(map_phase) += dt;
    }
    t = tn;
  };
  auto snapshot = [&]() {
    SimSnapshot snap;
    snap.t = t;
    snap.map_phase = map_phase;
    snap.total = double(total) / double(N);
    int maxlen = int(tail_count.size()) - 1;
    while (maxlen >= 1 && tail_count[size_t(maxlen)] == 0) --maxlen;
    std::vector<RowVec> tb(size_t(std::max(maxlen, 0)), RowVec::Zero(mb));
    for (long s = 0; s < N; ++s)
      for (int k = 1; k <= len[size_t(s)]; ++k)
        tb[size_t(k - 1)](phase[size_t(s)]) += 1.0 / double(N);
    snap.tails_by_phase = std::move(tb);
    rep.snapshots.push_back(std::move(snap));
  };

  auto pop_valid = [&]() {
    while (!heap.empty()) {
      PendingEvent e = heap.top();
      if (e.ver == ver[size_t(e.server)]) return e;
      heap.pop();
    }
    return PendingEvent{std::numeric_limits<double>::infinity(), -2, 0};
  };

  while (true) {
    PendingEvent se = pop_valid();
    const double tn = std::min(se.t, next_map);
    // Emit samples and stop at the horizon without skipping accumulation.
    while (next_sample < samples.size() &&
           samples[next_sample] <= std::min(tn, cfg.horizon)) {
      advance_to(samples[next_sample]);
      snapshot();
      ++next_sample;
    }
    if (tn >= cfg.horizon) {
      advance_to(cfg.horizon);
      break;
    }
    advance_to(tn);
    ++rep.events;

    if (next_map <= se.t) {
      // MAP jump: phase change, possibly tagged with an arrival.
      const double u = map_rng.next_uniform() * out_rate[size_t(map_phase)];
      const auto& row = table[size_t(map_phase)];
      size_t pick = row.size() - 1;
      for (size_t c = 0; c < row.size(); ++c)
        if (u < row[c].cum) {
          pick = c;
          break;
        }
      const bool arrival = row[pick].arrival;
      map_phase = row[pick].target;
      if (arrival) {
        const uint64_t base = arrival_ordinal * 16;
        ++arrival_ordinal;
        ++rep.arrivals;
        long chosen[16] = {0};
        int nchosen = 0;
        if (cfg.with_replacement) {
          for (int c = 0; c < d; ++c)
            chosen[nchosen++] =
                long(choice_rng.uniform_at(base + uint64_t(c)) * double(N)) %
                N;
        } else {
          // Rejection over the fixed slot budget, then a deterministic
          // fill for the (vanishingly rare) exhaustion case.
          for (uint64_t slot = 0; slot < 14 && nchosen < d; ++slot) {
            long cand =
                long(choice_rng.uniform_at(base + slot) * double(N)) % N;
            bool dup = false;
            for (int c = 0; c < nchosen; ++c)
              if (chosen[c] == cand) dup = true;
            if (!dup) chosen[nchosen++] = cand;
          }
          for (long cand = 0; nchosen < d && cand < N; ++cand) {
            bool dup = false;
            for (int c = 0; c < nchosen; ++c)
              if (chosen[c] == cand) dup = true;
            if (!dup) chosen[nchosen++] = cand;
          }
        }
        long best = chosen[0];
        int ties = 1;
        long tied[16] = {chosen[0]};
        for (int c = 1; c < nchosen; ++c) {
          if (len[size_t(chosen[c])] < len[size_t(best)]) {
            best = chosen[c];
            ties = 1;
            tied[0] = best;
          } else if (len[size_t(chosen[c])] == len[size_t(best)]) {
            tied[ties++] = chosen[c];
          }
        }
        if (ties > 1)
          best = tied[size_t(choice_rng.uniform_at(base + 15) * ties) % ties];
        const long s = best;
        ++len[size_t(s)];
        ++total;
        const int nl = len[size_t(s)];
        if (int(tail_count.size()) <= nl) tail_count.push_back(0);
        ++tail_count[size_t(nl)];
        if (nl == 1) {
          phase[size_t(s)] = draw_alpha(svc[size_t(s)]);
          schedule(s, t);
        }
      }
      next_map = t + map_rng.next_exponential(out_rate[size_t(map_phase)]);
    } else {
      // Service event at server se.server: phase move or completion.
      heap.pop();
      const long s = se.server;
      const int j = phase[size_t(s)];
      const double u = svc[size_t(s)].next_uniform() * (-T(j, j));
      double acc = 0.0;
      int target = -1;  // -1: completion
      for (Eigen::Index j2 = 0; j2 < mb; ++j2) {
        if (j2 == j) continue;
        acc += T(j, j2);
        if (u < acc) {
          target = int(j2);
          break;
        }
      }
      // Falling through the cumulative scan means completion (rate t0(j)).
      if (target >= 0) {
        phase[size_t(s)] = target;
        schedule(s, t);
      } else {
        --tail_count[size_t(len[size_t(s)])];
        --len[size_t(s)];
        --total;
        ++rep.departures;
        if (len[size_t(s)] >= 1) {
          phase[size_t(s)] = draw_alpha(svc[size_t(s)]);
          schedule(s, t);
        } else {
          ++ver[size_t(s)];  // cancel without rescheduling
        }
      }
    }
  }

  rep.measured = cfg.horizon - cfg.warmup;
  rep.avg_total = acc_total / rep.measured;
  rep.avg_u0 /= rep.measured;
  rep.avg_tails.clear();
  for (size_t k = 1; k < std::max<size_t>(acc_tail.size(), 1); ++k)
    rep.avg_tails.push_back(acc_tail[k] / (rep.measured * double(N)));
  return rep;
}

inline uint64_t rep_seed_of(uint64_t seed, int rep) {
  return CounterRng::mix(seed ^ CounterRng::mix(uint64_t(rep) + 1));
}

}  // namespace detail

// Event-driven simulation of the N-server system; replications run
// concurrently and are individually deterministic in (seed, replication).
inline SimResult run(const SimConfig& cfg) {
  validate_sim_config(cfg);
  const int d = cfg.d_override > 0 ? cfg.d_override : cfg.model.d;
  const InitAssignment init = realize_init(cfg.model, cfg.init, cfg.N);

  std::vector<std::future<RepResult>> futs;
  for (int r = 0; r < cfg.replications; ++r)
    futs.push_back(std::async(std::launch::async, [&, r] {
      return detail::simulate_rep(cfg, d, detail::rep_seed_of(cfg.seed, r),
                                  init);
    }));
  SimResult out;
  for (auto& f : futs) out.reps.push_back(f.get());

  const int R = cfg.replications;
  double mean = 0.0;
  for (const auto& rep : out.reps) mean += rep.avg_total;
  mean /= R;
  double var = 0.0;
  for (const auto& rep : out.reps) {
    const double e = rep.avg_total - mean;
    var += e * e;
  }
  out.mean_total = mean;
  out.half_width_total = R > 1 ? 1.96 * std::sqrt(var / (R - 1)) / std::sqrt(R)
                               : 0.0;
  size_t maxk = 0;
  for (const auto& rep : out.reps) maxk = std::max(maxk, rep.avg_tails.size());
  out.mean_tails.assign(maxk, 0.0);
  for (const auto& rep : out.reps)
    for (size_t k = 0; k < rep.avg_tails.size(); ++k)
      out.mean_tails[k] += rep.avg_tails[k] / R;
  return out;
}

struct GapResult {
  double mean = 0.0;
  std::vector<double> per_rep;
};

// Sup-over-time distance between the empirical MAP-phase-aggregated tails
// and the deterministic trajectory, per replication. A single realization
// occupies one MAP phase at a time, so the comparison aggregates phases on
// both sides; service phases stay resolved and levels carry weight 1/(k+1).
inline GapResult meanfield_gap_detail(const SimConfig& cfg,
                                      const Trajectory& traj) {
  validate_sim_config(cfg);
  if (cfg.sample_times.empty())
    throw ValidationError("meanfield_gap: sample_times must be nonempty");
  if (traj.u.empty() || traj.u[0].u0.size() != cfg.model.ma())
    throw ValidationError("meanfield_gap: trajectory does not match model");
  const Eigen::Index ma = cfg.model.ma(), mb = cfg.model.mb();

  // Locate each config sample inside the trajectory.
  std::vector<size_t> tidx;
  for (double s : cfg.sample_times) {
    bool found = false;
    for (size_t i = 0; i < traj.t.size(); ++i)
      if (std::abs(traj.t[i] - s) <= 1e-9 * std::max(1.0, s)) {
        tidx.push_back(i);
        found = true;
        break;
      }
    if (!found)
      throw ValidationError("meanfield_gap: trajectory lacks sample time " +
                            std::to_string(s));
  }

  SimResult sim = run(cfg);
  GapResult out;
  for (const auto& rep : sim.reps) {
    if (rep.snapshots.size() != tidx.size())
      throw ValidationError("meanfield_gap: snapshot/sample mismatch");
    double sup = 0.0;
    for (size_t si = 0; si < tidx.size(); ++si) {
      const FractionVector& u = traj.u[tidx[si]];
      const auto& snap = rep.snapshots[si];
      const size_t K = std::max(u.levels.size(), snap.tails_by_phase.size());
      for (size_t k = 1; k <= K; ++k) {
        RowVec ode = RowVec::Zero(mb);
        if (k <= u.levels.size())
          for (Eigen::Index i = 0; i < ma; ++i)
            ode += u.levels[k - 1].segment(i * mb, mb);
        RowVec emp = k <= snap.tails_by_phase.size()
                         ? snap.tails_by_phase[k - 1]
                         : RowVec::Zero(mb);
        sup = std::max(sup, inf_norm(RowVec(ode - emp)) / double(k + 1));
      }
    }
    out.per_rep.push_back(sup);
    out.mean += sup / sim.reps.size();
  }
  return out;
}

inline double meanfield_gap(const SimConfig& cfg, const Trajectory& traj) {
  return meanfield_gap_detail(cfg, traj).mean;
}

struct CoupledResult {
  std::vector<int> d_list;
  std::vector<std::vector<double>> totals;  // [replication][d index]
  std::vector<bool> monotone;               // per replication
  double frac_monotone = 0.0;
};

// One system per d, all driven by the same named random streams (shared
// MAP path, per-server service streams, shared choice draws): common
// random numbers make the per-replication comparison meaningful.
inline CoupledResult coupled_run(const SimConfig& cfg,
                                 const std::vector<int>& d_list) {
  validate_sim_config(cfg);
  if (d_list.empty() || d_list.front() != 1)
    throw ValidationError("coupled_run: d_list must start with 1");
  for (size_t i = 1; i < d_list.size(); ++i)
    if (d_list[i] <= d_list[i - 1])
      throw ValidationError("coupled_run: d_list must be strictly ascending");
  for (int d : d_list) {
    SimConfig probe = cfg;
    probe.d_override = d;
    validate_sim_config(probe);
  }

  const InitAssignment init = realize_init(cfg.model, cfg.init, cfg.N);
  CoupledResult out;
  out.d_list = d_list;
  out.totals.resize(size_t(cfg.replications));

  std::vector<std::future<std::vector<double>>> futs;
  for (int r = 0; r < cfg.replications; ++r)
    futs.push_back(std::async(std::launch::async, [&, r] {
      std::vector<double> row;
      const uint64_t rs = detail::rep_seed_of(cfg.seed, r);
      for (int d : d_list)
        row.push_back(detail::simulate_rep(cfg, d, rs, init).avg_total);
      return row;
    }));
  int mono_count = 0;
  for (int r = 0; r < cfg.replications; ++r) {
    out.totals[size_t(r)] = futs[size_t(r)].get();
    bool mono = true;
    for (size_t i = 1; i < d_list.size(); ++i)
      if (out.totals[size_t(r)][i] > out.totals[size_t(r)][i - 1]) mono = false;
    out.monotone.push_back(mono);
    if (mono) ++mono_count;
  }
  out.frac_monotone = double(mono_count) / cfg.replications;
  return out;
}

}  // namespace smm
