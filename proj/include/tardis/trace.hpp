#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tardis/rng.hpp"

namespace tardis {

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One batch job. Internal units: kilowatts, seconds, mebibytes.
struct Job {
  std::int64_t id = 0;
  double submit_time = 0.0;        // seconds since simulation epoch (UTC)
  int nodes_requested = 1;
  int cores_per_task = 1;
  int cores_per_node = 1;
  int shared_flag = 0;
  int priority = 0;
  double memory_mib = 0.0;
  double runtime_estimate = 1.0;   // seconds
  std::string job_type;
  double true_power = 0.0;         // average kW over the job's lifetime
  double actual_runtime = 1.0;     // seconds; trace ground truth

  void validate() const {
    if (nodes_requested < 1) throw TraceError("job " + std::to_string(id) + ": nodes_requested < 1");
    if (cores_per_node < 1) throw TraceError("job " + std::to_string(id) + ": cores_per_node < 1");
    if (runtime_estimate <= 0) throw TraceError("job " + std::to_string(id) + ": runtime_estimate <= 0");
    if (actual_runtime <= 0) throw TraceError("job " + std::to_string(id) + ": actual_runtime <= 0");
    if (true_power < 0) throw TraceError("job " + std::to_string(id) + ": true_power < 0");
    if (submit_time < 0) throw TraceError("job " + std::to_string(id) + ": submit_time < 0");
  }
};

// Jobs sorted by (submit_time, id); ids unique.
using JobTable = std::vector<Job>;

enum class PowerCategory { Low, Medium, High };

inline const char* to_string(PowerCategory c) {
  switch (c) {
    case PowerCategory::Low: return "low";
    case PowerCategory::Medium: return "medium";
    default: return "high";
  }
}

inline void sort_job_table(JobTable& jobs) {
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    if (a.submit_time != b.submit_time) return a.submit_time < b.submit_time;
    return a.id < b.id;
  });
}

namespace detail {

inline const std::vector<std::string>& trace_columns() {
  static const std::vector<std::string> cols = {
      "id", "submit_time", "nodes_requested", "cores_per_task",
      "cores_per_node", "shared_flag", "priority", "memory_mib",
      "runtime_estimate_s", "job_type", "power_kw", "actual_runtime_s"};
  return cols;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double_field(const std::string& s, std::size_t row,
                                 const std::string& col) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw TraceError("row " + std::to_string(row) + ": malformed value '" + s +
                     "' in column '" + col + "'");
  return v;
}

inline std::int64_t parse_int_field(const std::string& s, std::size_t row,
                                    const std::string& col) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw TraceError("row " + std::to_string(row) + ": malformed value '" + s +
                     "' in column '" + col + "'");
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace detail

// Parses the trace-csv format. Header row is required; a `power_w` column is
// accepted in place of `power_kw` and divided by 1000.
inline JobTable parse_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw TraceError("empty input: header row missing");
  auto header = detail::split_csv_line(line);
  const auto& expect = detail::trace_columns();
  bool watts = false;
  if (header.size() != expect.size())
    throw TraceError("header: expected " + std::to_string(expect.size()) +
                     " columns, got " + std::to_string(header.size()));
  for (std::size_t i = 0; i < expect.size(); ++i) {
    if (header[i] == expect[i]) continue;
    if (expect[i] == "power_kw" && header[i] == "power_w") {
      watts = true;
      continue;
    }
    throw TraceError("header: expected column '" + expect[i] + "', got '" +
                     header[i] + "'");
  }

  JobTable jobs;
  std::unordered_set<std::int64_t> seen;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != expect.size())
      throw TraceError("row " + std::to_string(row) + ": expected " +
                       std::to_string(expect.size()) + " fields, got " +
                       std::to_string(f.size()));
    Job j;
    j.id = detail::parse_int_field(f[0], row, "id");
    j.submit_time = detail::parse_double_field(f[1], row, "submit_time");
    j.nodes_requested = static_cast<int>(detail::parse_int_field(f[2], row, "nodes_requested"));
    j.cores_per_task = static_cast<int>(detail::parse_int_field(f[3], row, "cores_per_task"));
    j.cores_per_node = static_cast<int>(detail::parse_int_field(f[4], row, "cores_per_node"));
    j.shared_flag = static_cast<int>(detail::parse_int_field(f[5], row, "shared_flag"));
    j.priority = static_cast<int>(detail::parse_int_field(f[6], row, "priority"));
    j.memory_mib = detail::parse_double_field(f[7], row, "memory_mib");
    j.runtime_estimate = detail::parse_double_field(f[8], row, "runtime_estimate_s");
    j.job_type = f[9];
    j.true_power = detail::parse_double_field(f[10], row, watts ? "power_w" : "power_kw");
    if (watts) j.true_power /= 1000.0;
    j.actual_runtime = detail::parse_double_field(f[11], row, "actual_runtime_s");

    if (j.priority < 0)
      throw TraceError("row " + std::to_string(row) + ": negative value in column 'priority'");
    if (j.memory_mib < 0)
      throw TraceError("row " + std::to_string(row) + ": negative value in column 'memory_mib'");
    try {
      j.validate();
    } catch (const TraceError& e) {
      throw TraceError("row " + std::to_string(row) + ": " + e.what());
    }
    if (!seen.insert(j.id).second)
      throw TraceError("row " + std::to_string(row) + ": duplicate id " + std::to_string(j.id));
    jobs.push_back(std::move(j));
  }
  sort_job_table(jobs);
  return jobs;
}

inline void write_trace(std::ostream& out, const JobTable& jobs) {
  const auto& cols = detail::trace_columns();
  for (std::size_t i = 0; i < cols.size(); ++i)
    out << cols[i] << (i + 1 < cols.size() ? "," : "\n");
  for (const Job& j : jobs) {
    out << j.id << ',' << detail::format_double(j.submit_time) << ','
        << j.nodes_requested << ',' << j.cores_per_task << ','
        << j.cores_per_node << ',' << j.shared_flag << ',' << j.priority << ','
        << detail::format_double(j.memory_mib) << ','
        << detail::format_double(j.runtime_estimate) << ',' << j.job_type
        << ',' << detail::format_double(j.true_power) << ','
        << detail::format_double(j.actual_runtime) << '\n';
  }
}

inline std::string serialize_trace(const JobTable& jobs) {
  std::ostringstream oss;
  write_trace(oss, jobs);
  return oss.str();
}

// ---------------------------------------------------------------------------
// Synthetic workload generation

struct JobTypeSpec {
  std::string name;
  double weight = 1.0;       // relative draw probability
  double base_kw_per_node = 0.5;
};

// Everything the generator needs; deterministic for a fixed (spec, seed).
struct WorkloadSpec {
  std::size_t job_count = 0;
  std::string scenario = "average";  // high | low | average
  double span_seconds = 30.0 * 86400.0;  // arrival window
  double start_time = 0.0;

  // Resources
  int max_nodes = 16;
  double node_geometric_p = 0.45;  // P(n) ~ (1-p)^(n-1), truncated
  int cores_per_node = 32;
  int max_cores_per_task = 4;
  double shared_prob = 0.3;
  int max_priority = 4;

  // Runtime: lognormal, clamped and rounded to whole minutes.
  double runtime_log_mu = std::log(1800.0);
  double runtime_log_sigma = 1.0;
  double runtime_min = 60.0;
  double runtime_max = 86400.0;

  // Memory: lognormal MiB.
  double memory_log_mu = std::log(8192.0);
  double memory_log_sigma = 0.7;

  // Power: true_power = base_kw(job_type) * nodes * lognormal noise,
  // with the noise normalized to mean one.
  double power_noise_sigma = 0.35;
  std::vector<JobTypeSpec> job_types = {
      {"cpu", 0.45, 0.35}, {"gpu", 0.20, 1.40},
      {"mixed", 0.20, 0.80}, {"io", 0.15, 0.20}};

  // Diurnal arrival shape: a Gaussian bump over a flat floor, centered on
  // arrival_peak_hour (hours, in trace time). Day-to-day burstiness depends
  // on the scenario; amplitude follows the scenario unless overridden.
  double arrival_peak_hour = 14.0;
  double arrival_peak_width = 5.0;
  double arrival_amplitude = -1.0;  // < 0: derive from scenario

  double diurnal_amplitude() const {
    if (arrival_amplitude >= 0.0) return arrival_amplitude;
    if (scenario == "high") return 1.2;
    if (scenario == "low") return 0.5;
    return 0.8;
  }
  double day_burst_sigma() const {
    if (scenario == "high") return 0.55;
    if (scenario == "low") return 0.20;
    return 0.35;
  }

  void validate() const {
    if (scenario != "high" && scenario != "low" && scenario != "average")
      throw TraceError("workload spec: unknown scenario '" + scenario + "'");
    if (span_seconds <= 0) throw TraceError("workload spec: span_seconds <= 0");
    if (max_nodes < 1) throw TraceError("workload spec: max_nodes < 1");
    if (node_geometric_p <= 0 || node_geometric_p >= 1)
      throw TraceError("workload spec: node_geometric_p outside (0,1)");
    if (job_types.empty()) throw TraceError("workload spec: no job types");
    if (runtime_min <= 0 || runtime_max < runtime_min)
      throw TraceError("workload spec: bad runtime bounds");
  }
};

namespace detail {

// Hour-of-day intensity: flat floor plus a Gaussian bump, wrapped at 24h.
inline double hour_weight(int hour, double center, double width,
                          double amplitude) {
  double d = std::abs(hour - center);
  d = std::min(d, 24.0 - d);
  double x = d / width;
  return 1.0 + amplitude * std::exp(-0.5 * x * x);
}

}  // namespace detail

// Pure function of (spec, seed): reproducible synthetic workloads with a
// learnable feature -> power relationship and a long-tailed power histogram.
inline JobTable generate_synthetic_workload(const WorkloadSpec& spec,
                                            std::uint64_t seed) {
  spec.validate();
  JobTable jobs;
  if (spec.job_count == 0) return jobs;
  jobs.reserve(spec.job_count);
  Rng rng(derive_seed(seed, 0x7261636511ULL));

  // Piecewise-constant arrival density per hour over the span.
  std::size_t n_hours = static_cast<std::size_t>(std::ceil(spec.span_seconds / 3600.0));
  std::size_t n_days = (n_hours + 23) / 24;
  std::vector<double> day_mult(n_days);
  double sig = spec.day_burst_sigma();
  for (auto& m : day_mult) m = rng.lognormal(-0.5 * sig * sig, sig);
  std::vector<double> cum(n_hours + 1, 0.0);
  for (std::size_t h = 0; h < n_hours; ++h) {
    double w = day_mult[h / 24] *
               detail::hour_weight(static_cast<int>(h % 24),
                                   spec.arrival_peak_hour,
                                   spec.arrival_peak_width,
                                   spec.diurnal_amplitude());
    cum[h + 1] = cum[h] + w;
  }
  double total = cum[n_hours];

  double type_weight_sum = 0.0;
  for (const auto& t : spec.job_types) type_weight_sum += t.weight;

  for (std::size_t i = 0; i < spec.job_count; ++i) {
    Job j;
    j.id = static_cast<std::int64_t>(i + 1);

    // Inverse-CDF sample of the hourly density.
    double u = rng.uniform() * total;
    std::size_t h = static_cast<std::size_t>(
        std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    h = (h == 0) ? 0 : h - 1;
    if (h >= n_hours) h = n_hours - 1;
    double frac = (cum[h + 1] > cum[h]) ? (u - cum[h]) / (cum[h + 1] - cum[h])
                                        : rng.uniform();
    double t_arr = (static_cast<double>(h) + frac) * 3600.0;
    if (t_arr >= spec.span_seconds) t_arr = spec.span_seconds - 1.0;
    j.submit_time = spec.start_time + std::floor(t_arr);

    // Truncated geometric node count.
    int nodes = 1;
    while (nodes < spec.max_nodes && rng.uniform() > spec.node_geometric_p) ++nodes;
    j.nodes_requested = nodes;
    j.cores_per_node = spec.cores_per_node;
    j.cores_per_task = static_cast<int>(rng.uniform_int(1, spec.max_cores_per_task));
    j.shared_flag = rng.bernoulli(spec.shared_prob) ? 1 : 0;
    j.priority = static_cast<int>(rng.uniform_int(0, spec.max_priority));
    j.memory_mib = std::round(rng.lognormal(spec.memory_log_mu, spec.memory_log_sigma));

    double rt = rng.lognormal(spec.runtime_log_mu, spec.runtime_log_sigma);
    rt = std::clamp(rt, spec.runtime_min, spec.runtime_max);
    rt = std::max(60.0, std::round(rt / 60.0) * 60.0);
    j.runtime_estimate = rt;
    j.actual_runtime = rt;

    double pick = rng.uniform() * type_weight_sum;
    const JobTypeSpec* ts = &spec.job_types.back();
    for (const auto& t : spec.job_types) {
      if (pick < t.weight) {
        ts = &t;
        break;
      }
      pick -= t.weight;
    }
    j.job_type = ts->name;
    double noise = rng.lognormal(-0.5 * spec.power_noise_sigma * spec.power_noise_sigma,
                                 spec.power_noise_sigma);
    j.true_power = ts->base_kw_per_node * nodes * noise;
    j.validate();
    jobs.push_back(std::move(j));
  }
  sort_job_table(jobs);
  return jobs;
}

// ---------------------------------------------------------------------------
// Power tertiles

// Linear-interpolation percentile over a sorted copy.
inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) throw TraceError("percentile of empty set");
  std::sort(v.begin(), v.end());
  if (v.size() == 1) return v[0];
  double pos = p * static_cast<double>(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

struct PowerTertiles {
  double low_boundary = 0.0;   // 33.3rd percentile
  double high_boundary = 0.0;  // 66.7th percentile

  PowerCategory classify(double power_kw) const {
    if (power_kw <= low_boundary) return PowerCategory::Low;
    if (power_kw <= high_boundary) return PowerCategory::Medium;
    return PowerCategory::High;
  }
};

inline PowerTertiles compute_power_tertiles(const JobTable& jobs) {
  if (jobs.empty()) throw TraceError("cannot categorize an empty job table");
  std::vector<double> p;
  p.reserve(jobs.size());
  for (const Job& j : jobs) p.push_back(j.true_power);
  PowerTertiles t;
  t.low_boundary = percentile(p, 1.0 / 3.0);
  t.high_boundary = percentile(p, 2.0 / 3.0);
  return t;
}

// Tertile classes over the table's own power distribution; ties fall low.
inline std::map<std::int64_t, PowerCategory> categorize_power(const JobTable& jobs) {
  PowerTertiles t = compute_power_tertiles(jobs);
  std::map<std::int64_t, PowerCategory> out;
  for (const Job& j : jobs) out[j.id] = t.classify(j.true_power);
  return out;
}

}  // namespace tardis
