#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tardis/pricing.hpp"
#include "tardis/rng.hpp"
#include "tardis/score.hpp"
#include "tardis/trace.hpp"

namespace tardis {

class DispatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Start decision for one job: site index plus start time. Jobs never migrate
// or split, so one assignment fully places a job.
struct Assignment {
  std::int64_t job_id = 0;
  std::size_t site_index = 0;
  double start_time = 0.0;
};

struct RunningJob {
  std::int64_t id = 0;
  double start_time = 0.0;
  double end_time = 0.0;          // start + actual_runtime
  double estimate_end = 0.0;      // start + runtime_estimate (scheduler view)
  int nodes = 0;
  double predicted_kw = 0.0;      // powers feasibility decisions
  double true_kw = 0.0;           // powers metering
};

// Occupancy of one site. Power is always re-summed over the running list so
// the feasibility and metering paths see bit-identical totals under the
// oracle predictor.
struct SiteState {
  Site site;
  std::vector<RunningJob> running;

  int used_nodes() const {
    int n = 0;
    for (const auto& r : running) n += r.nodes;
    return n;
  }
  int free_nodes() const { return site.node_count - used_nodes(); }
  double committed_power_kw() const {
    double p = 0.0;
    for (const auto& r : running) p += r.predicted_kw;
    return p;
  }
  double metered_power_kw() const {
    double p = 0.0;
    for (const auto& r : running) p += r.true_kw;
    return p;
  }
};

using PredictionMap = std::map<std::int64_t, double>;

inline double score(const Job& job, const SiteState& state, double now,
                    double p_hat_kw, const ScoreWeights& weights) {
  return score(job, state.site, now, p_hat_kw, state.used_nodes(), weights);
}

struct DispatchOptions {
  ScoreWeights weights;
  bool budget_peak_hours_only = false;
};

namespace detail {

inline double predicted_for(const PredictionMap& pred, const Job& job) {
  auto it = pred.find(job.id);
  if (it == pred.end())
    throw DispatchError("predictor missing job " + std::to_string(job.id));
  return it->second;
}

// Mutable per-call view of each site: base occupancy plus jobs committed
// earlier in the same dispatch round.
struct SiteCursor {
  const SiteState* state;
  int free_nodes;
  double committed_kw;

  explicit SiteCursor(const SiteState& s)
      : state(&s), free_nodes(s.free_nodes()), committed_kw(s.committed_power_kw()) {}

  bool fits(const Job& job, double p_hat, double now,
            bool budget_peak_hours_only) const {
    if (free_nodes < job.nodes_requested) return false;
    if (budget_peak_hours_only && !is_peak(state->site, now)) return true;
    return committed_kw + p_hat <= state->site.power_budget_kw;
  }
  void commit(const Job& job, double p_hat) {
    free_nodes -= job.nodes_requested;
    committed_kw += p_hat;
  }
};

inline std::vector<SiteCursor> make_cursors(const std::vector<SiteState>& states) {
  std::vector<SiteCursor> cur;
  cur.reserve(states.size());
  for (const auto& s : states) cur.emplace_back(s);
  return cur;
}

}  // namespace detail

// Greedy score-maximizing dispatch: repeatedly commit the feasible
// (job, site) pair with the highest score, updating that site's occupancy,
// until nothing fits. Unassigned jobs stay queued for a later step. Ties
// break by earlier submit time, then lower job id, then site order.
inline std::vector<Assignment> dispatch_tardis(const JobTable& queue,
                                               const std::vector<SiteState>& states,
                                               double now,
                                               const PredictionMap& predictions,
                                               const DispatchOptions& opts) {
  opts.weights.validate();
  std::vector<Assignment> out;
  if (queue.empty() || states.empty()) return out;
  auto cursors = detail::make_cursors(states);
  std::vector<bool> taken(queue.size(), false);
  std::vector<double> p_hat(queue.size());
  for (std::size_t q = 0; q < queue.size(); ++q)
    p_hat[q] = detail::predicted_for(predictions, queue[q]);

  for (;;) {
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t best_q = 0, best_k = 0;
    bool found = false;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      if (taken[q]) continue;
      const Job& job = queue[q];
      for (std::size_t k = 0; k < cursors.size(); ++k) {
        if (!cursors[k].fits(job, p_hat[q], now, opts.budget_peak_hours_only))
          continue;
        int used = states[k].site.node_count - cursors[k].free_nodes;
        double s = score(job, states[k].site, now, p_hat[q], used, opts.weights);
        bool better = false;
        if (!found || s > best_score) {
          better = true;
        } else if (s == best_score) {
          const Job& cur = queue[best_q];
          if (job.submit_time != cur.submit_time)
            better = job.submit_time < cur.submit_time;
          else if (job.id != cur.id)
            better = job.id < cur.id;
          else
            better = k < best_k;
        }
        if (better) {
          best_score = s;
          best_q = q;
          best_k = k;
          found = true;
        }
      }
    }
    if (!found) break;
    cursors[best_k].commit(queue[best_q], p_hat[best_q]);
    taken[best_q] = true;
    out.push_back({queue[best_q].id, best_k, now});
  }
  return out;
}

// Strict first-come-first-serve: the queue is scanned in submit order and
// scanning stops at the first job that fits nowhere (head-of-line blocking).
inline std::vector<Assignment> dispatch_fcfs(const JobTable& queue,
                                             const std::vector<SiteState>& states,
                                             double now,
                                             const PredictionMap& predictions,
                                             const DispatchOptions& opts = {}) {
  std::vector<Assignment> out;
  auto cursors = detail::make_cursors(states);
  for (const Job& job : queue) {
    double p = detail::predicted_for(predictions, job);
    bool placed = false;
    for (std::size_t k = 0; k < cursors.size(); ++k) {
      if (cursors[k].fits(job, p, now, opts.budget_peak_hours_only)) {
        cursors[k].commit(job, p);
        out.push_back({job.id, k, now});
        placed = true;
        break;
      }
    }
    if (!placed) break;
  }
  return out;
}

// Smallest job first: FCFS over the queue reordered by ascending runtime
// estimate (ties keep submit order), still head-of-line blocking.
inline std::vector<Assignment> dispatch_sjf(const JobTable& queue,
                                            const std::vector<SiteState>& states,
                                            double now,
                                            const PredictionMap& predictions,
                                            const DispatchOptions& opts = {}) {
  JobTable ordered = queue;
  std::sort(ordered.begin(), ordered.end(), [](const Job& a, const Job& b) {
    if (a.runtime_estimate != b.runtime_estimate)
      return a.runtime_estimate < b.runtime_estimate;
    if (a.submit_time != b.submit_time) return a.submit_time < b.submit_time;
    return a.id < b.id;
  });
  return dispatch_fcfs(ordered, states, now, predictions, opts);
}

namespace detail {

// Earliest time >= now at which `job` fits on the site, assuming running and
// already-committed jobs release at their estimated ends. Returns +inf when
// the job can never fit even on the drained site.
struct Reservation {
  double start = std::numeric_limits<double>::infinity();
  int spare_nodes = 0;       // nodes left over once the head starts
  double spare_kw = 0.0;     // power headroom left once the head starts
};

inline Reservation earliest_fit(const SiteState& state, const SiteCursor& cursor,
                                const std::vector<RunningJob>& committed_here,
                                const Job& job, double p_hat, double now,
                                bool budget_peak_hours_only) {
  struct Release {
    double time;
    int nodes;
    double kw;
  };
  std::vector<Release> rel;
  for (const auto& r : state.running)
    rel.push_back({std::max(r.estimate_end, now), r.nodes, r.predicted_kw});
  for (const auto& r : committed_here)
    rel.push_back({std::max(r.estimate_end, now), r.nodes, r.predicted_kw});
  std::sort(rel.begin(), rel.end(),
            [](const Release& a, const Release& b) { return a.time < b.time; });

  int free_nodes = cursor.free_nodes;
  double committed = cursor.committed_kw;
  auto feasible_at = [&](double t) {
    if (free_nodes < job.nodes_requested) return false;
    if (budget_peak_hours_only && !is_peak(state.site, t)) return true;
    return committed + p_hat <= state.site.power_budget_kw;
  };
  if (feasible_at(now))
    return {now, free_nodes - job.nodes_requested,
            state.site.power_budget_kw - committed - p_hat};
  for (const auto& r : rel) {
    free_nodes += r.nodes;
    committed -= r.kw;
    if (feasible_at(r.time))
      return {r.time, free_nodes - job.nodes_requested,
              state.site.power_budget_kw - committed - p_hat};
  }
  return {};
}

}  // namespace detail

// EASY backfilling: FCFS until the head blocks, then a reservation is made
// for the head at its earliest feasible (site, time) and later jobs may run
// now only if they cannot delay that reservation — either they finish before
// it or they consume only capacity left spare once the head starts.
inline std::vector<Assignment> dispatch_backfill(const JobTable& queue,
                                                 const std::vector<SiteState>& states,
                                                 double now,
                                                 const PredictionMap& predictions,
                                                 const DispatchOptions& opts = {}) {
  std::vector<Assignment> out;
  if (queue.empty() || states.empty()) return out;
  auto cursors = detail::make_cursors(states);
  std::vector<std::vector<RunningJob>> committed(states.size());

  std::size_t head = 0;
  for (; head < queue.size(); ++head) {
    const Job& job = queue[head];
    double p = detail::predicted_for(predictions, job);
    bool placed = false;
    for (std::size_t k = 0; k < cursors.size(); ++k) {
      if (cursors[k].fits(job, p, now, opts.budget_peak_hours_only)) {
        cursors[k].commit(job, p);
        committed[k].push_back({job.id, now, 0.0, now + job.runtime_estimate,
                                job.nodes_requested, p, job.true_power});
        out.push_back({job.id, k, now});
        placed = true;
        break;
      }
    }
    if (!placed) break;
  }
  if (head >= queue.size()) return out;

  // Reserve the blocked head at the site where it can start soonest.
  const Job& head_job = queue[head];
  double head_p = detail::predicted_for(predictions, head_job);
  detail::Reservation res;
  std::size_t res_site = 0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    auto r = detail::earliest_fit(states[k], cursors[k], committed[k], head_job,
                                  head_p, now, opts.budget_peak_hours_only);
    if (r.start < res.start) {
      res = r;
      res_site = k;
    }
  }

  for (std::size_t q = head + 1; q < queue.size(); ++q) {
    const Job& job = queue[q];
    double p = detail::predicted_for(predictions, job);
    for (std::size_t k = 0; k < cursors.size(); ++k) {
      if (!cursors[k].fits(job, p, now, opts.budget_peak_hours_only)) continue;
      if (k == res_site && res.start < std::numeric_limits<double>::infinity()) {
        bool finishes_first = now + job.runtime_estimate <= res.start;
        bool within_spare =
            job.nodes_requested <= res.spare_nodes && p <= res.spare_kw;
        if (!finishes_first && !within_spare) continue;
        if (!finishes_first) {
          res.spare_nodes -= job.nodes_requested;
          res.spare_kw -= p;
        }
      }
      cursors[k].commit(job, p);
      committed[k].push_back({job.id, now, 0.0, now + job.runtime_estimate,
                              job.nodes_requested, p, job.true_power});
      out.push_back({job.id, k, now});
      break;
    }
  }
  return out;
}

// Each queued job draws one uniformly random site; it starts there if
// feasible and otherwise stays queued. Deterministic per (seed, step index).
inline std::vector<Assignment> dispatch_random(const JobTable& queue,
                                               const std::vector<SiteState>& states,
                                               double now,
                                               const PredictionMap& predictions,
                                               std::uint64_t seed,
                                               std::uint64_t step_index,
                                               const DispatchOptions& opts = {}) {
  std::vector<Assignment> out;
  if (states.empty()) return out;
  auto cursors = detail::make_cursors(states);
  Rng rng(derive_seed(seed, 0x72616e64ULL ^ (step_index * 0x9e3779b97f4a7c15ULL)));
  for (const Job& job : queue) {
    double p = detail::predicted_for(predictions, job);
    std::size_t k = rng.uniform_index(states.size());
    if (cursors[k].fits(job, p, now, opts.budget_peak_hours_only)) {
      cursors[k].commit(job, p);
      out.push_back({job.id, k, now});
    }
  }
  return out;
}

}  // namespace tardis
