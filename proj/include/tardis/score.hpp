#pragma once

#include <algorithm>
#include <stdexcept>

#include "tardis/pricing.hpp"
#include "tardis/trace.hpp"

namespace tardis {

// Weighting of the five scoring factors plus their normalizers. p_max <= 0
// means "derive from the trace" (the engine fills in the maximum priority).
struct ScoreWeights {
  double w_cost = 0.4;
  double w_power = 0.2;
  double w_utilization = 0.2;
  double w_wait = 0.2;
  double w_priority = 0.0;
  double t_max_seconds = 86400.0;
  double p_max = 0.0;

  void validate() const {
    if (w_cost < 0 || w_power < 0 || w_utilization < 0 || w_wait < 0 ||
        w_priority < 0)
      throw std::invalid_argument("score weights must be nonnegative");
    if (t_max_seconds <= 0)
      throw std::invalid_argument("t_max_seconds must be positive");
  }
};

// 1 / (1 + p_hat * d * rate). The product is floored at zero so the factor
// stays in (0, 1] when rates are zero or negative; cost accounting elsewhere
// uses the signed rate unmodified.
inline double cost_factor(double p_hat_kw, double duration_hours,
                          double rate_per_kwh) {
  double prod = p_hat_kw * duration_hours * rate_per_kwh;
  if (prod < 0.0) prod = 0.0;
  return 1.0 / (1.0 + prod);
}

// 1 / (1 + p_hat / (nodes * cores_per_node))
inline double power_efficiency(double p_hat_kw, int nodes, int cores_per_node) {
  return 1.0 / (1.0 + p_hat_kw / (static_cast<double>(nodes) *
                                  static_cast<double>(cores_per_node)));
}

// 1 - used/total
inline double utilization_factor(int used_nodes, int total_nodes) {
  return 1.0 - static_cast<double>(used_nodes) / static_cast<double>(total_nodes);
}

// min((now - submit)/t_max, 1)
inline double wait_factor(double now, double submit, double t_max_seconds) {
  double w = (now - submit) / t_max_seconds;
  return std::clamp(w, 0.0, 1.0);
}

// Weighted sum of the five factors for placing `job` on `site` at `now`.
// Setting w_priority to zero recovers the four-factor score.
inline double score(const Job& job, const Site& site, double now,
                    double p_hat_kw, int used_nodes,
                    const ScoreWeights& w) {
  if (w.p_max <= 0.0)
    throw std::invalid_argument("score weights: p_max must be positive");
  double d_hours = job.runtime_estimate / 3600.0;
  double c = cost_factor(p_hat_kw, d_hours, rate_at(site, now));
  double p = power_efficiency(p_hat_kw, job.nodes_requested, job.cores_per_node);
  double u = utilization_factor(used_nodes, site.node_count);
  double wt = wait_factor(now, job.submit_time, w.t_max_seconds);
  double r = static_cast<double>(job.priority) / w.p_max;
  return w.w_cost * c + w.w_power * p + w.w_utilization * u + w.w_wait * wt +
         w.w_priority * r;
}

}  // namespace tardis
