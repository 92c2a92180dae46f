#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tardis/pricing.hpp"
#include "tardis/trace.hpp"

namespace tardis {

// Slot-grid instance for the exact reference solver. Runtimes are rounded up
// to whole slots, matching the engine's per-step metering.
struct BruteForceInstance {
  JobTable jobs;             // at most 8
  std::vector<Site> sites;   // at most 2
  int horizon_slots = 1;     // at most 8
  double slot_seconds = 3600.0;
  double start_time = 0.0;
  bool require_all_scheduled = true;
};

struct BruteForcePlacement {
  std::size_t site_index = 0;
  int start_slot = 0;
};

struct BruteForceResult {
  bool feasible = false;  // a schedule satisfying the completion rule exists
  double min_cost = std::numeric_limits<double>::infinity();
  // One entry per job, in instance order; nullopt = never started.
  std::vector<std::optional<BruteForcePlacement>> placements;
};

// Exhaustive enumeration of (site, start slot) per job — including "never
// start within the horizon" — under node, power-budget and single-site
// constraints. With require_all_scheduled the skip branch is pruned, so the
// result is the cheapest schedule that completes every job in the horizon.
inline BruteForceResult optimal_dispatch_bruteforce(const BruteForceInstance& inst) {
  if (inst.jobs.size() > 8)
    throw std::invalid_argument("brute force: more than 8 jobs");
  if (inst.sites.size() > 2 || inst.sites.empty())
    throw std::invalid_argument("brute force: site count must be 1 or 2");
  if (inst.horizon_slots > 8 || inst.horizon_slots < 1)
    throw std::invalid_argument("brute force: horizon must be 1..8 slots");

  const std::size_t n_jobs = inst.jobs.size();
  const std::size_t n_sites = inst.sites.size();
  const int horizon = inst.horizon_slots;
  const double slot_hours = inst.slot_seconds / 3600.0;

  std::vector<std::vector<double>> rate(n_sites, std::vector<double>(horizon));
  bool any_negative_rate = false;
  for (std::size_t k = 0; k < n_sites; ++k)
    for (int t = 0; t < horizon; ++t) {
      rate[k][t] = rate_at(inst.sites[k],
                           inst.start_time + t * inst.slot_seconds);
      if (rate[k][t] < 0) any_negative_rate = true;
    }

  std::vector<int> dur(n_jobs);
  std::vector<int> earliest(n_jobs);
  for (std::size_t j = 0; j < n_jobs; ++j) {
    dur[j] = std::max(1, static_cast<int>(std::ceil(
                             inst.jobs[j].actual_runtime / inst.slot_seconds)));
    double rel = (inst.jobs[j].submit_time - inst.start_time) / inst.slot_seconds;
    earliest[j] = std::max(0, static_cast<int>(std::ceil(rel - 1e-12)));
  }

  std::vector<std::vector<int>> nodes_used(n_sites, std::vector<int>(horizon, 0));
  std::vector<std::vector<double>> power_used(n_sites, std::vector<double>(horizon, 0.0));

  BruteForceResult best;
  std::vector<std::optional<BruteForcePlacement>> current(n_jobs);

  auto job_cost = [&](std::size_t j, std::size_t k, int t0) {
    double c = 0.0;
    for (int t = t0; t < t0 + dur[j]; ++t)
      c += rate[k][t] * inst.jobs[j].true_power * slot_hours;
    return c;
  };

  auto fits = [&](std::size_t j, std::size_t k, int t0) {
    const Job& job = inst.jobs[j];
    for (int t = t0; t < t0 + dur[j]; ++t) {
      if (nodes_used[k][t] + job.nodes_requested > inst.sites[k].node_count)
        return false;
      if (power_used[k][t] + job.true_power > inst.sites[k].power_budget_kw)
        return false;
    }
    return true;
  };

  auto occupy = [&](std::size_t j, std::size_t k, int t0, int sign) {
    const Job& job = inst.jobs[j];
    for (int t = t0; t < t0 + dur[j]; ++t) {
      nodes_used[k][t] += sign * job.nodes_requested;
      power_used[k][t] += sign * job.true_power;
    }
  };

  auto dfs = [&](auto&& self, std::size_t j, double cost) -> void {
    if (cost >= best.min_cost && !any_negative_rate && best.feasible) return;
    if (j == n_jobs) {
      if (cost < best.min_cost) {
        best.min_cost = cost;
        best.feasible = true;
        best.placements = current;
      }
      return;
    }
    for (std::size_t k = 0; k < n_sites; ++k) {
      for (int t0 = earliest[j]; t0 + dur[j] <= horizon; ++t0) {
        if (!fits(j, k, t0)) continue;
        occupy(j, k, t0, +1);
        current[j] = BruteForcePlacement{k, t0};
        self(self, j + 1, cost + job_cost(j, k, t0));
        occupy(j, k, t0, -1);
        current[j] = std::nullopt;
      }
    }
    if (!inst.require_all_scheduled) self(self, j + 1, cost);
  };
  dfs(dfs, 0, 0.0);
  return best;
}

}  // namespace tardis
