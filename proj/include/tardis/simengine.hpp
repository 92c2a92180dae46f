#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tardis/dispatch.hpp"
#include "tardis/predictor.hpp"
#include "tardis/pricing.hpp"
#include "tardis/trace.hpp"

namespace tardis {

enum class Policy { Tardis, Fcfs, Sjf, Backfill, Random };

inline Policy policy_from_string(const std::string& s) {
  if (s == "tardis") return Policy::Tardis;
  if (s == "fcfs") return Policy::Fcfs;
  if (s == "sjf") return Policy::Sjf;
  if (s == "backfill") return Policy::Backfill;
  if (s == "random") return Policy::Random;
  throw std::invalid_argument("unknown policy '" + s + "'");
}

inline const char* to_string(Policy p) {
  switch (p) {
    case Policy::Tardis: return "tardis";
    case Policy::Fcfs: return "fcfs";
    case Policy::Sjf: return "sjf";
    case Policy::Backfill: return "backfill";
    default: return "random";
  }
}

struct SimConfig {
  double dt_seconds = 60.0;
  std::int64_t horizon_steps = 1;
  double start_time = 0.0;  // UTC epoch of step 0
  std::vector<Site> sites;
  Policy policy = Policy::Fcfs;
  ScoreWeights weights;
  bool budget_peak_hours_only = false;
  double budget_fraction = 1.0;  // metadata: fraction used to derive budgets
  std::uint64_t seed = 1;

  void validate() const {
    if (dt_seconds <= 0) throw std::invalid_argument("sim config: dt_seconds <= 0");
    if (horizon_steps < 1) throw std::invalid_argument("sim config: horizon_steps < 1");
    if (sites.empty()) throw std::invalid_argument("sim config: no sites");
    for (const auto& s : sites) s.validate();
  }
};

// One (step, site) accounting row.
struct StepRecord {
  std::int64_t step = 0;
  std::size_t site_index = 0;
  int running_jobs = 0;
  int nodes_used = 0;
  double power_kw = 0.0;   // metered from true job power
  double rate = 0.0;       // $/kWh at this site and step
  double cost = 0.0;       // power * (dt/3600) * rate
  std::size_t queue_length = 0;
  bool budget_violation = false;
};

struct JobOutcome {
  std::int64_t id = 0;
  std::size_t site_index = 0;
  double submit_time = 0.0;
  double start_time = 0.0;
  double end_time = 0.0;
  double wait_seconds = 0.0;
  bool started_in_peak = false;
  bool completed = false;
  PowerCategory category = PowerCategory::Low;
};

struct SiteMetrics {
  std::string name;
  double avg_utilization = 0.0;
  double max_utilization = 0.0;
  std::array<std::int64_t, 24> hourly_starts{};  // by site-local start hour
  double energy_kwh = 0.0;
  double cost = 0.0;
};

struct CategoryShares {
  // Index by PowerCategory cast to size_t; shares within a window sum to 1
  // when the window has any starts.
  std::array<double, 3> peak{};
  std::array<double, 3> off_peak{};
  std::int64_t peak_starts = 0;
  std::int64_t off_peak_starts = 0;
};

struct SimulationResult {
  double total_cost = 0.0;
  double peak_cost = 0.0;               // cost accrued during peak windows
  std::vector<double> daily_cost;       // by day index from start_time
  double avg_wait_seconds = 0.0;
  double p95_wait_seconds = 0.0;
  double cost_per_job = 0.0;            // total cost / completed jobs
  std::int64_t submitted = 0;
  std::int64_t started = 0;
  std::int64_t completed = 0;
  std::int64_t queued_at_end = 0;
  std::int64_t running_at_end = 0;
  std::vector<std::int64_t> rejected_ids;  // larger than every site
  std::int64_t budget_violations = 0;
  std::vector<SiteMetrics> site_metrics;
  CategoryShares category_shares;
  std::vector<JobOutcome> job_outcomes;    // started jobs, in start order
  std::vector<StepRecord> step_records;
};

// Share of started jobs per power category, split by whether the start fell
// in the assigned site's peak window.
inline CategoryShares peak_offpeak_distribution(
    const SimulationResult& result,
    const std::map<std::int64_t, PowerCategory>& categories) {
  CategoryShares s;
  std::array<std::int64_t, 3> peak_counts{};
  std::array<std::int64_t, 3> off_counts{};
  for (const auto& o : result.job_outcomes) {
    auto it = categories.find(o.id);
    if (it == categories.end()) continue;
    auto c = static_cast<std::size_t>(it->second);
    if (o.started_in_peak) {
      ++peak_counts[c];
      ++s.peak_starts;
    } else {
      ++off_counts[c];
      ++s.off_peak_starts;
    }
  }
  for (std::size_t c = 0; c < 3; ++c) {
    s.peak[c] = s.peak_starts > 0 ? static_cast<double>(peak_counts[c]) /
                                        static_cast<double>(s.peak_starts)
                                  : 0.0;
    s.off_peak[c] = s.off_peak_starts > 0
                        ? static_cast<double>(off_counts[c]) /
                              static_cast<double>(s.off_peak_starts)
                        : 0.0;
  }
  return s;
}

// Discrete-time trace replay. Per step: release finished jobs, admit
// arrivals, dispatch, then meter actual power and accumulate signed-rate
// cost. Deterministic for a fixed (trace, cfg, predictor).
inline SimulationResult run(const JobTable& trace, const SimConfig& cfg,
                            const Predictor& predictor) {
  cfg.validate();
  SimulationResult result;
  result.submitted = static_cast<std::int64_t>(trace.size());

  int max_site_nodes = 0;
  for (const auto& s : cfg.sites)
    max_site_nodes = std::max(max_site_nodes, s.node_count);

  DispatchOptions opts;
  opts.weights = cfg.weights;
  opts.budget_peak_hours_only = cfg.budget_peak_hours_only;
  if (opts.weights.p_max <= 0.0) {
    int pmax = 1;
    for (const Job& j : trace) pmax = std::max(pmax, j.priority);
    opts.weights.p_max = static_cast<double>(pmax);
  }

  std::map<std::int64_t, PowerCategory> categories;
  if (!trace.empty()) categories = categorize_power(trace);

  std::vector<SiteState> states;
  states.reserve(cfg.sites.size());
  for (const auto& s : cfg.sites) states.push_back({s, {}});

  JobTable queue;
  std::map<std::int64_t, Job> by_id;
  PredictionMap predictions;
  std::size_t next_arrival = 0;

  std::vector<double> waits;
  std::vector<double> util_sum(states.size(), 0.0);
  std::vector<double> util_max(states.size(), 0.0);
  std::vector<std::array<std::int64_t, 24>> hourly(states.size());
  for (auto& h : hourly) h.fill(0);
  std::vector<double> site_energy(states.size(), 0.0);
  std::vector<double> site_cost(states.size(), 0.0);
  std::map<std::int64_t, JobOutcome> outcomes;

  const double step_hours = cfg.dt_seconds / 3600.0;
  result.step_records.reserve(static_cast<std::size_t>(cfg.horizon_steps) *
                              states.size());

  for (std::int64_t step = 0; step < cfg.horizon_steps; ++step) {
    double now = cfg.start_time + static_cast<double>(step) * cfg.dt_seconds;

    // 1. Completions release nodes and power.
    for (auto& st : states) {
      auto it = std::remove_if(st.running.begin(), st.running.end(),
                               [&](const RunningJob& r) {
                                 if (r.end_time <= now) {
                                   outcomes[r.id].completed = true;
                                   return true;
                                 }
                                 return false;
                               });
      st.running.erase(it, st.running.end());
    }

    // 2. Admit arrivals; jobs larger than every site are rejected once.
    JobTable admitted;
    while (next_arrival < trace.size() &&
           trace[next_arrival].submit_time <= now) {
      const Job& j = trace[next_arrival];
      if (j.nodes_requested > max_site_nodes) {
        result.rejected_ids.push_back(j.id);
      } else {
        admitted.push_back(j);
      }
      ++next_arrival;
    }
    if (!admitted.empty()) {
      auto preds = predictor.predict_window(admitted);
      predictions.insert(preds.begin(), preds.end());
      for (Job& j : admitted) {
        by_id.emplace(j.id, j);
        queue.push_back(std::move(j));
      }
    }

    // 3. Dispatch.
    std::vector<Assignment> assignments;
    if (!queue.empty()) {
      switch (cfg.policy) {
        case Policy::Tardis:
          assignments = dispatch_tardis(queue, states, now, predictions, opts);
          break;
        case Policy::Fcfs:
          assignments = dispatch_fcfs(queue, states, now, predictions, opts);
          break;
        case Policy::Sjf:
          assignments = dispatch_sjf(queue, states, now, predictions, opts);
          break;
        case Policy::Backfill:
          assignments = dispatch_backfill(queue, states, now, predictions, opts);
          break;
        case Policy::Random:
          assignments = dispatch_random(queue, states, now, predictions,
                                        cfg.seed,
                                        static_cast<std::uint64_t>(step), opts);
          break;
      }
    }
    for (const auto& a : assignments) {
      const Job& j = by_id.at(a.job_id);
      SiteState& st = states[a.site_index];
      st.running.push_back({j.id, now, now + j.actual_runtime,
                            now + j.runtime_estimate, j.nodes_requested,
                            predictions.at(j.id), j.true_power});
      JobOutcome o;
      o.id = j.id;
      o.site_index = a.site_index;
      o.submit_time = j.submit_time;
      o.start_time = now;
      o.end_time = now + j.actual_runtime;
      o.wait_seconds = now - j.submit_time;
      o.started_in_peak = is_peak(st.site, now);
      auto cit = categories.find(j.id);
      if (cit != categories.end()) o.category = cit->second;
      outcomes[j.id] = o;
      waits.push_back(o.wait_seconds);
      int hour = static_cast<int>(local_hour(st.site, now));
      ++hourly[a.site_index][std::clamp(hour, 0, 23)];
      queue.erase(std::find_if(queue.begin(), queue.end(),
                               [&](const Job& q) { return q.id == a.job_id; }));
    }

    // 4. Meter actual power and accumulate cost.
    std::size_t day = static_cast<std::size_t>(
        std::floor((now - cfg.start_time) / 86400.0));
    if (result.daily_cost.size() <= day) result.daily_cost.resize(day + 1, 0.0);
    for (std::size_t k = 0; k < states.size(); ++k) {
      SiteState& st = states[k];
      double power = st.metered_power_kw();
      double rate = rate_at(st.site, now);
      double cost = power * step_hours * rate;
      bool peak = is_peak(st.site, now);
      bool budget_applies = !cfg.budget_peak_hours_only || peak;
      bool violation = budget_applies &&
                       power > st.site.power_budget_kw * (1.0 + 1e-12);
      StepRecord rec;
      rec.step = step;
      rec.site_index = k;
      rec.running_jobs = static_cast<int>(st.running.size());
      rec.nodes_used = st.used_nodes();
      rec.power_kw = power;
      rec.rate = rate;
      rec.cost = cost;
      rec.queue_length = queue.size();
      rec.budget_violation = violation;
      result.step_records.push_back(rec);

      result.total_cost += cost;
      if (peak) result.peak_cost += cost;
      result.daily_cost[day] += cost;
      site_cost[k] += cost;
      site_energy[k] += power * step_hours;
      if (violation) ++result.budget_violations;
      double u = static_cast<double>(rec.nodes_used) /
                 static_cast<double>(st.site.node_count);
      util_sum[k] += u;
      util_max[k] = std::max(util_max[k], u);
    }
  }

  // Aggregate metrics.
  result.queued_at_end = static_cast<std::int64_t>(queue.size());
  for (const auto& st : states)
    result.running_at_end += static_cast<std::int64_t>(st.running.size());
  for (auto& [id, o] : outcomes) {
    result.job_outcomes.push_back(o);
    ++result.started;
    if (o.completed) ++result.completed;
  }
  std::sort(result.job_outcomes.begin(), result.job_outcomes.end(),
            [](const JobOutcome& a, const JobOutcome& b) {
              if (a.start_time != b.start_time) return a.start_time < b.start_time;
              return a.id < b.id;
            });
  if (!waits.empty()) {
    double s = 0.0;
    for (double w : waits) s += w;
    result.avg_wait_seconds = s / static_cast<double>(waits.size());
    std::sort(waits.begin(), waits.end());
    std::size_t idx = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(waits.size()))) - 1;
    result.p95_wait_seconds = waits[std::min(idx, waits.size() - 1)];
  }
  result.cost_per_job = result.completed > 0
                            ? result.total_cost / static_cast<double>(result.completed)
                            : 0.0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    SiteMetrics m;
    m.name = states[k].site.name;
    m.avg_utilization = util_sum[k] / static_cast<double>(cfg.horizon_steps);
    m.max_utilization = util_max[k];
    m.hourly_starts = hourly[k];
    m.energy_kwh = site_energy[k];
    m.cost = site_cost[k];
    result.site_metrics.push_back(std::move(m));
  }
  result.category_shares = peak_offpeak_distribution(result, categories);
  return result;
}

// Peak system power under FCFS at full capacity (oracle predictions, no
// binding budget), scaled by `fraction` and split across sites by node share.
inline std::vector<double> compute_budget(const JobTable& trace,
                                          const std::vector<Site>& sites,
                                          double fraction, double dt_seconds,
                                          double start_time) {
  if (fraction <= 0 || fraction > 1.0)
    throw std::invalid_argument("budget fraction must lie in (0, 1]");
  SimConfig cfg;
  cfg.dt_seconds = dt_seconds;
  cfg.start_time = start_time;
  cfg.sites = sites;
  for (auto& s : cfg.sites) s.power_budget_kw = 1e18;  // unconstrained
  cfg.policy = Policy::Fcfs;

  double last_event = start_time;
  double max_runtime = 0.0;
  for (const Job& j : trace) {
    last_event = std::max(last_event, j.submit_time);
    max_runtime = std::max(max_runtime, j.actual_runtime);
  }
  double span = (last_event - start_time) + 2.0 * max_runtime + dt_seconds;
  cfg.horizon_steps =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(span / dt_seconds)));

  auto probe = run(trace, cfg, Predictor::oracle());
  std::vector<double> per_step_total(
      static_cast<std::size_t>(cfg.horizon_steps), 0.0);
  for (const auto& rec : probe.step_records)
    per_step_total[static_cast<std::size_t>(rec.step)] += rec.power_kw;
  double peak_kw = 0.0;
  for (double p : per_step_total) peak_kw = std::max(peak_kw, p);

  double total_nodes = 0.0;
  for (const auto& s : sites) total_nodes += static_cast<double>(s.node_count);
  std::vector<double> budgets;
  budgets.reserve(sites.size());
  for (const auto& s : sites)
    budgets.push_back(fraction * peak_kw * static_cast<double>(s.node_count) /
                      total_nodes);
  return budgets;
}

struct ComparisonEntry {
  std::string label;
  SimConfig config;
  SimulationResult result;
};

struct ComparisonReport {
  std::vector<ComparisonEntry> entries;
  // cost_reduction_pct[i][j] = 100 * (1 - cost_i / cost_j)
  std::vector<std::vector<double>> cost_reduction_pct;
  std::vector<std::vector<double>> wait_delta_seconds;
};

struct RunSpec {
  std::string label;
  SimConfig config;
  Predictor predictor;
};

// Runs every config against the identical trace and tabulates pairwise cost
// reductions and wait-time deltas.
inline ComparisonReport compare(const JobTable& trace,
                                const std::vector<RunSpec>& specs) {
  ComparisonReport report;
  for (const auto& spec : specs)
    report.entries.push_back(
        {spec.label, spec.config, run(trace, spec.config, spec.predictor)});
  std::size_t n = report.entries.size();
  report.cost_reduction_pct.assign(n, std::vector<double>(n, 0.0));
  report.wait_delta_seconds.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double ci = report.entries[i].result.total_cost;
      double cj = report.entries[j].result.total_cost;
      report.cost_reduction_pct[i][j] = cj != 0.0 ? 100.0 * (1.0 - ci / cj) : 0.0;
      report.wait_delta_seconds[i][j] =
          report.entries[i].result.avg_wait_seconds -
          report.entries[j].result.avg_wait_seconds;
    }
  }
  return report;
}

}  // namespace tardis
