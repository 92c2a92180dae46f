#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tardis/simengine.hpp"
#include "tardis/trace.hpp"

namespace tardis {

inline constexpr const char* kReportFormat = "tardis-report-v1";

inline nlohmann::json result_to_json(const SimulationResult& r) {
  nlohmann::json j;
  j["total_cost"] = r.total_cost;
  j["peak_cost"] = r.peak_cost;
  j["peak_cost_share"] = r.total_cost != 0.0 ? r.peak_cost / r.total_cost : 0.0;
  j["daily_cost"] = r.daily_cost;
  j["avg_wait_seconds"] = r.avg_wait_seconds;
  j["p95_wait_seconds"] = r.p95_wait_seconds;
  j["cost_per_job"] = r.cost_per_job;
  j["submitted"] = r.submitted;
  j["started"] = r.started;
  j["completed"] = r.completed;
  j["queued_at_end"] = r.queued_at_end;
  j["running_at_end"] = r.running_at_end;
  j["rejected_ids"] = r.rejected_ids;
  j["budget_violations"] = r.budget_violations;
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& m : r.site_metrics) {
    sites.push_back({{"name", m.name},
                     {"avg_utilization", m.avg_utilization},
                     {"max_utilization", m.max_utilization},
                     {"hourly_starts", m.hourly_starts},
                     {"energy_kwh", m.energy_kwh},
                     {"cost", m.cost}});
  }
  j["sites"] = sites;
  j["category_shares"] = {
      {"peak", {{"low", r.category_shares.peak[0]},
                {"medium", r.category_shares.peak[1]},
                {"high", r.category_shares.peak[2]},
                {"starts", r.category_shares.peak_starts}}},
      {"off_peak", {{"low", r.category_shares.off_peak[0]},
                    {"medium", r.category_shares.off_peak[1]},
                    {"high", r.category_shares.off_peak[2]},
                    {"starts", r.category_shares.off_peak_starts}}}};
  return j;
}

inline nlohmann::json run_to_json(const std::string& label, const SimConfig& cfg,
                                  const SimulationResult& r) {
  nlohmann::json j;
  j["format"] = kReportFormat;
  j["label"] = label;
  j["config"] = {{"policy", to_string(cfg.policy)},
                 {"dt_seconds", cfg.dt_seconds},
                 {"horizon_steps", cfg.horizon_steps},
                 {"start_time", cfg.start_time},
                 {"budget_fraction", cfg.budget_fraction},
                 {"budget_peak_hours_only", cfg.budget_peak_hours_only},
                 {"seed", cfg.seed}};
  nlohmann::json sites = nlohmann::json::array();
  for (const auto& s : cfg.sites) {
    sites.push_back({{"name", s.name},
                     {"node_count", s.node_count},
                     {"power_budget_kw", s.power_budget_kw},
                     {"utc_offset_minutes", s.utc_offset_minutes},
                     {"off_peak_rate", s.schedule.off_peak_rate},
                     {"peak_rate", s.schedule.peak_rate},
                     {"peak_start_hour", s.schedule.peak_start_hour},
                     {"peak_end_hour", s.schedule.peak_end_hour}});
  }
  j["config"]["sites"] = sites;
  j["result"] = result_to_json(r);
  return j;
}

inline void write_steps_csv(std::ostream& out, const SimulationResult& r,
                            const SimConfig& cfg) {
  out << "step,site,running_jobs,nodes_used,power_kw,rate,cost,queue_len,violation\n";
  for (const auto& rec : r.step_records) {
    out << rec.step << ',' << cfg.sites[rec.site_index].name << ','
        << rec.running_jobs << ',' << rec.nodes_used << ','
        << detail::format_double(rec.power_kw) << ','
        << detail::format_double(rec.rate) << ','
        << detail::format_double(rec.cost) << ',' << rec.queue_length << ','
        << (rec.budget_violation ? 1 : 0) << '\n';
  }
}

inline void write_daily_csv(std::ostream& out, const SimulationResult& r) {
  out << "day,cost\n";
  for (std::size_t d = 0; d < r.daily_cost.size(); ++d)
    out << d << ',' << detail::format_double(r.daily_cost[d]) << '\n';
}

inline void write_jobs_csv(std::ostream& out, const SimulationResult& r,
                           const SimConfig& cfg) {
  out << "id,site,submit_time,start_time,end_time,wait_seconds,"
         "started_in_peak,completed,power_category\n";
  for (const auto& o : r.job_outcomes) {
    out << o.id << ',' << cfg.sites[o.site_index].name << ','
        << detail::format_double(o.submit_time) << ','
        << detail::format_double(o.start_time) << ','
        << detail::format_double(o.end_time) << ','
        << detail::format_double(o.wait_seconds) << ','
        << (o.started_in_peak ? 1 : 0) << ',' << (o.completed ? 1 : 0) << ','
        << to_string(o.category) << '\n';
  }
}

inline nlohmann::json comparison_to_json(const ComparisonReport& report) {
  nlohmann::json j;
  j["format"] = kReportFormat;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries)
    entries.push_back(run_to_json(e.label, e.config, e.result));
  j["runs"] = entries;
  j["cost_reduction_pct"] = report.cost_reduction_pct;
  j["wait_delta_seconds"] = report.wait_delta_seconds;
  return j;
}

}  // namespace tardis
