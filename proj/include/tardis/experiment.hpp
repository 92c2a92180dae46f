#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tardis/checkpoint.hpp"
#include "tardis/report.hpp"
#include "tardis/simengine.hpp"
#include "tardis/trace.hpp"

namespace tardis {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Site list entry as read from the experiment/sites config document. A site
// may pin its budget in kW or express it as a fraction of the observed system
// peak; the experiment's budget-fraction grid scales either choice.
struct SiteConfig {
  Site site;
  std::optional<double> explicit_budget_kw;
  double fraction_of_peak = 1.0;
};

struct ExperimentConfig {
  std::optional<std::string> trace_file;
  std::optional<WorkloadSpec> synthetic;
  std::vector<SiteConfig> sites;
  std::vector<Policy> policies;
  std::vector<double> budget_fractions{1.0};
  PredictorKind predictor = PredictorKind::Oracle;
  std::optional<std::string> checkpoint_path;  // required for the gnn kind
  ScoreWeights weights;
  double dt_seconds = 60.0;
  std::optional<std::int64_t> horizon_steps;  // default: run until drained
  double start_time = 0.0;
  bool budget_peak_hours_only = false;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
};

namespace detail {

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return j;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<T>();
}

}  // namespace detail

inline WorkloadSpec workload_spec_from_json(const nlohmann::json& j) {
  WorkloadSpec s;
  s.job_count = detail::get_or<std::size_t>(j, "jobs", s.job_count);
  s.scenario = detail::get_or<std::string>(j, "scenario", s.scenario);
  if (j.contains("days"))
    s.span_seconds = j.at("days").get<double>() * 86400.0;
  else
    s.span_seconds = detail::get_or<double>(j, "span_seconds", s.span_seconds);
  s.start_time = detail::get_or<double>(j, "start_time", s.start_time);
  s.arrival_peak_hour = detail::get_or<double>(j, "arrival_peak_hour", s.arrival_peak_hour);
  s.arrival_peak_width = detail::get_or<double>(j, "arrival_peak_width", s.arrival_peak_width);
  s.arrival_amplitude = detail::get_or<double>(j, "arrival_amplitude", s.arrival_amplitude);
  s.max_nodes = detail::get_or<int>(j, "max_nodes", s.max_nodes);
  s.node_geometric_p = detail::get_or<double>(j, "node_geometric_p", s.node_geometric_p);
  s.cores_per_node = detail::get_or<int>(j, "cores_per_node", s.cores_per_node);
  s.runtime_log_mu = detail::get_or<double>(j, "runtime_log_mu", s.runtime_log_mu);
  s.runtime_log_sigma = detail::get_or<double>(j, "runtime_log_sigma", s.runtime_log_sigma);
  s.runtime_min = detail::get_or<double>(j, "runtime_min", s.runtime_min);
  s.runtime_max = detail::get_or<double>(j, "runtime_max", s.runtime_max);
  s.power_noise_sigma = detail::get_or<double>(j, "power_noise_sigma", s.power_noise_sigma);
  if (j.contains("job_types")) {
    s.job_types.clear();
    for (const auto& t : j.at("job_types"))
      s.job_types.push_back({t.at("name").get<std::string>(),
                             detail::get_or<double>(t, "weight", 1.0),
                             t.at("base_kw_per_node").get<double>()});
  }
  s.validate();
  return s;
}

inline SiteConfig site_config_from_json(const nlohmann::json& j) {
  SiteConfig sc;
  sc.site.name = j.at("name").get<std::string>();
  sc.site.node_count = j.at("node_count").get<int>();
  sc.site.utc_offset_minutes = detail::get_or<int>(j, "utc_offset_minutes", 0);
  sc.site.schedule.off_peak_rate = j.at("off_peak_rate").get<double>();
  sc.site.schedule.peak_rate = j.at("peak_rate").get<double>();
  sc.site.schedule.peak_start_hour = detail::get_or<double>(j, "peak_start_hour", 0.0);
  sc.site.schedule.peak_end_hour = detail::get_or<double>(j, "peak_end_hour", 0.0);
  if (j.contains("power_budget_kw"))
    sc.explicit_budget_kw = j.at("power_budget_kw").get<double>();
  sc.fraction_of_peak = detail::get_or<double>(j, "budget_fraction_of_peak", 1.0);
  sc.site.power_budget_kw = sc.explicit_budget_kw.value_or(1.0);  // placeholder
  return sc;
}

inline ScoreWeights weights_from_json(const nlohmann::json& j) {
  ScoreWeights w;
  w.w_cost = detail::get_or<double>(j, "cost", w.w_cost);
  w.w_power = detail::get_or<double>(j, "power", w.w_power);
  w.w_utilization = detail::get_or<double>(j, "utilization", w.w_utilization);
  w.w_wait = detail::get_or<double>(j, "wait", w.w_wait);
  w.w_priority = detail::get_or<double>(j, "priority", w.w_priority);
  w.t_max_seconds = detail::get_or<double>(j, "t_max_seconds", w.t_max_seconds);
  w.p_max = detail::get_or<double>(j, "p_max", w.p_max);
  w.validate();
  return w;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (j.contains("trace")) {
    const auto& t = j.at("trace");
    if (t.contains("file")) c.trace_file = t.at("file").get<std::string>();
    if (t.contains("synthetic"))
      c.synthetic = workload_spec_from_json(t.at("synthetic"));
  }
  if (!c.trace_file && !c.synthetic)
    throw ConfigError("config: trace.file or trace.synthetic required");

  if (j.contains("sites")) {
    for (const auto& s : j.at("sites")) c.sites.push_back(site_config_from_json(s));
  } else if (detail::get_or<bool>(j, "three_site_reference", false)) {
    int nodes = detail::get_or<int>(j, "site_node_count", 64);
    for (const auto& s : three_site_reference_config(nodes)) {
      SiteConfig sc;
      sc.site = s;
      c.sites.push_back(sc);
    }
  } else {
    throw ConfigError("config: 'sites' array or three_site_reference required");
  }
  if (c.sites.empty()) throw ConfigError("config: empty site list");

  if (!j.contains("policies") || j.at("policies").empty())
    throw ConfigError("config: at least one policy required");
  for (const auto& p : j.at("policies"))
    c.policies.push_back(policy_from_string(p.get<std::string>()));

  if (j.contains("budget_fractions")) {
    c.budget_fractions.clear();
    for (const auto& f : j.at("budget_fractions")) {
      double v = f.get<double>();
      if (v <= 0 || v > 1.0)
        throw ConfigError("config: budget fraction must lie in (0, 1]");
      c.budget_fractions.push_back(v);
    }
    if (c.budget_fractions.empty())
      throw ConfigError("config: empty budget_fractions");
  }

  if (j.contains("predictor")) {
    const auto& p = j.at("predictor");
    if (p.is_string()) {
      c.predictor = predictor_kind_from_string(p.get<std::string>());
    } else {
      c.predictor = predictor_kind_from_string(p.at("kind").get<std::string>());
      if (p.contains("checkpoint"))
        c.checkpoint_path = p.at("checkpoint").get<std::string>();
    }
  }
  if (j.contains("weights")) c.weights = weights_from_json(j.at("weights"));
  c.dt_seconds = detail::get_or<double>(j, "dt_seconds", c.dt_seconds);
  if (j.contains("horizon_steps"))
    c.horizon_steps = j.at("horizon_steps").get<std::int64_t>();
  else if (j.contains("horizon_days"))
    c.horizon_steps = static_cast<std::int64_t>(
        std::ceil(j.at("horizon_days").get<double>() * 86400.0 / c.dt_seconds));
  c.start_time = detail::get_or<double>(j, "start_time", c.start_time);
  c.budget_peak_hours_only =
      detail::get_or<bool>(j, "budget_peak_hours_only", c.budget_peak_hours_only);
  c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
  c.output_dir = detail::get_or<std::string>(j, "output_dir", c.output_dir);
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from_json(detail::load_json_file(path));
}

inline JobTable load_experiment_trace(const ExperimentConfig& cfg) {
  if (cfg.trace_file) {
    std::ifstream in(*cfg.trace_file);
    if (!in) throw ConfigError("cannot read trace '" + *cfg.trace_file + "'");
    return parse_trace(in);
  }
  return generate_synthetic_workload(*cfg.synthetic,
                                     derive_seed(cfg.seed, 0x747261ULL));
}

inline Predictor build_predictor(const ExperimentConfig& cfg,
                                 const JobTable& trace) {
  switch (cfg.predictor) {
    case PredictorKind::Oracle:
      return Predictor::oracle();
    case PredictorKind::Mean:
      return Predictor::mean(trace);
    case PredictorKind::Gnn: {
      if (!cfg.checkpoint_path)
        throw ConfigError("gnn predictor requires predictor.checkpoint; train one first");
      auto ckpt = load_checkpoint(*cfg.checkpoint_path);
      return Predictor::gnn(std::move(ckpt.model), std::move(ckpt.pipeline),
                            ckpt.config.k_neighbors);
    }
  }
  throw ConfigError("unreachable predictor kind");
}

// Derives the per-site budget base: explicit kW when pinned, otherwise the
// observed unconstrained peak apportioned by node share.
inline std::vector<double> budget_base_kw(const ExperimentConfig& cfg,
                                          const JobTable& trace) {
  bool need_peak = false;
  for (const auto& s : cfg.sites)
    if (!s.explicit_budget_kw) need_peak = true;
  std::vector<double> base(cfg.sites.size(), 0.0);
  std::vector<double> peak_share;
  if (need_peak) {
    std::vector<Site> sites;
    for (const auto& s : cfg.sites) sites.push_back(s.site);
    peak_share = compute_budget(trace, sites, 1.0, cfg.dt_seconds, cfg.start_time);
  }
  for (std::size_t i = 0; i < cfg.sites.size(); ++i) {
    base[i] = cfg.sites[i].explicit_budget_kw
                  ? *cfg.sites[i].explicit_budget_kw
                  : cfg.sites[i].fraction_of_peak * peak_share[i];
    if (base[i] <= 0) base[i] = 1e-9;
  }
  return base;
}

inline std::int64_t default_horizon_steps(const JobTable& trace,
                                          double dt_seconds,
                                          double start_time) {
  double last_submit = start_time;
  double max_runtime = dt_seconds;
  for (const Job& j : trace) {
    last_submit = std::max(last_submit, j.submit_time);
    max_runtime = std::max(max_runtime, j.actual_runtime);
  }
  double span = (last_submit - start_time) + 4.0 * max_runtime + dt_seconds;
  return std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::ceil(span / dt_seconds)));
}

inline SimConfig make_sim_config(const ExperimentConfig& cfg,
                                 const JobTable& trace, Policy policy,
                                 double budget_fraction,
                                 const std::vector<double>& base_budget) {
  SimConfig sim;
  sim.dt_seconds = cfg.dt_seconds;
  sim.horizon_steps = cfg.horizon_steps
                          ? *cfg.horizon_steps
                          : default_horizon_steps(trace, cfg.dt_seconds, cfg.start_time);
  sim.start_time = cfg.start_time;
  for (std::size_t i = 0; i < cfg.sites.size(); ++i) {
    Site s = cfg.sites[i].site;
    s.power_budget_kw = std::max(budget_fraction * base_budget[i], 1e-9);
    sim.sites.push_back(s);
  }
  sim.policy = policy;
  sim.weights = cfg.weights;
  sim.budget_peak_hours_only = cfg.budget_peak_hours_only;
  sim.budget_fraction = budget_fraction;
  sim.seed = cfg.seed;
  return sim;
}

inline std::string run_label(Policy policy, double budget_fraction) {
  std::ostringstream oss;
  oss << to_string(policy) << "_b" << static_cast<int>(std::llround(budget_fraction * 100));
  return oss.str();
}

struct ExperimentOutput {
  ComparisonReport report;
  std::vector<std::string> written_files;
};

// The full (policy x budget fraction) grid against one trace, with all report
// artifacts written under cfg.output_dir.
inline ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  JobTable trace = load_experiment_trace(cfg);
  Predictor predictor = build_predictor(cfg, trace);
  auto base_budget = budget_base_kw(cfg, trace);

  std::vector<RunSpec> specs;
  for (double f : cfg.budget_fractions)
    for (Policy p : cfg.policies)
      specs.push_back({run_label(p, f),
                       make_sim_config(cfg, trace, p, f, base_budget), predictor});

  ExperimentOutput out;
  out.report = compare(trace, specs);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);
  auto emit = [&](const std::string& name, const std::string& body) {
    fs::path p = fs::path(cfg.output_dir) / name;
    std::ofstream f(p);
    if (!f) throw ConfigError("cannot write output file '" + p.string() + "'");
    f << body;
    out.written_files.push_back(p.string());
  };

  for (const auto& e : out.report.entries) {
    emit(e.label + ".json", run_to_json(e.label, e.config, e.result).dump(1) + "\n");
    std::ostringstream steps, daily, jobs;
    write_steps_csv(steps, e.result, e.config);
    write_daily_csv(daily, e.result);
    write_jobs_csv(jobs, e.result, e.config);
    emit(e.label + "_steps.csv", steps.str());
    emit(e.label + "_daily.csv", daily.str());
    emit(e.label + "_jobs.csv", jobs.str());
  }
  emit("comparison.json", comparison_to_json(out.report).dump(1) + "\n");
  return out;
}

}  // namespace tardis
