// Experiment runner: generate or ingest traces, train the power model, run
// policy/budget grids over one or more sites and emit comparison reports.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tardis/checkpoint.hpp"
#include "tardis/experiment.hpp"
#include "tardis/report.hpp"
#include "tardis/simengine.hpp"
#include "tardis/trace.hpp"
#include "tardis/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int cmd_gen_trace(const std::string& out_path,
                  const std::optional<std::string>& config_path,
                  std::uint64_t seed, std::size_t jobs,
                  const std::string& scenario, double days) {
  tardis::WorkloadSpec spec;
  if (config_path) {
    spec = tardis::workload_spec_from_json(
        tardis::detail::load_json_file(*config_path));
  }
  if (jobs > 0) spec.job_count = jobs;
  if (!scenario.empty()) spec.scenario = scenario;
  if (days > 0) spec.span_seconds = days * 86400.0;
  auto table = tardis::generate_synthetic_workload(spec, seed);
  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "error: cannot write '" << out_path << "'\n";
    return 1;
  }
  tardis::write_trace(out, table);
  std::cout << "wrote " << table.size() << " jobs to " << out_path << "\n";
  return 0;
}

int cmd_train(const std::string& trace_path, const std::string& out_path,
              tardis::TrainConfig cfg, bool paper_split,
              std::string history_path) {
  std::ifstream in(trace_path);
  if (!in) {
    std::cerr << "error: cannot read trace '" << trace_path << "'\n";
    return 1;
  }
  tardis::JobTable jobs = tardis::parse_trace(in);
  if (paper_split) {
    // Temporal 30% subset reserved for model fitting; the rest is left for
    // scheduling experiments.
    std::size_t n = jobs.size() * 30 / 100;
    jobs.resize(std::max<std::size_t>(n, 1));
  }
  auto result = tardis::train(jobs, cfg);
  tardis::save_checkpoint(out_path, result.model, result.pipeline, cfg);

  if (history_path.empty()) history_path = out_path + ".history.csv";
  std::ofstream hist(history_path);
  if (!hist) {
    std::cerr << "error: cannot write '" << history_path << "'\n";
    return 1;
  }
  hist << "epoch,train_loss,val_mse_kw\n";
  for (const auto& e : result.history.epochs)
    hist << e.epoch << ',' << tardis::detail::format_double(e.train_loss)
         << ',' << tardis::detail::format_double(e.val_mse_kw) << '\n';

  std::cout << "trained on " << jobs.size() << " jobs; parameters "
            << result.model.count_parameters() << "; best epoch "
            << result.history.best_epoch << "; validation mse "
            << result.history.best_val_mse_kw << " kW^2\n"
            << "checkpoint: " << out_path << "\nhistory: " << history_path
            << "\n";
  return 0;
}

tardis::ExperimentConfig apply_overrides(
    tardis::ExperimentConfig cfg, const std::optional<std::string>& out_dir,
    const std::optional<std::uint64_t>& seed,
    const std::optional<std::string>& policy,
    const std::optional<double>& budget,
    const std::optional<std::string>& trace) {
  if (out_dir) cfg.output_dir = *out_dir;
  if (seed) cfg.seed = *seed;
  if (policy) cfg.policies = {tardis::policy_from_string(*policy)};
  if (budget) cfg.budget_fractions = {*budget};
  if (trace) {
    cfg.trace_file = *trace;
    cfg.synthetic.reset();
  }
  return cfg;
}

void print_comparison(const tardis::ComparisonReport& report) {
  std::cout << std::left << std::setw(16) << "run" << std::right
            << std::setw(14) << "total_cost" << std::setw(12) << "peak_share"
            << std::setw(12) << "cost/job" << std::setw(14) << "avg_wait_s"
            << std::setw(11) << "completed" << std::setw(11) << "violations"
            << "\n";
  for (const auto& e : report.entries) {
    const auto& r = e.result;
    double share = r.total_cost != 0.0 ? r.peak_cost / r.total_cost : 0.0;
    std::cout << std::left << std::setw(16) << e.label << std::right
              << std::setw(14) << std::fixed << std::setprecision(2)
              << r.total_cost << std::setw(12) << std::setprecision(3) << share
              << std::setw(12) << std::setprecision(3) << r.cost_per_job
              << std::setw(14) << std::setprecision(1) << r.avg_wait_seconds
              << std::setw(11) << r.completed << std::setw(11)
              << r.budget_violations << "\n";
  }
  std::cout.unsetf(std::ios::fixed);
}

int cmd_simulate(const std::string& config_path,
                 const std::optional<std::string>& out_dir,
                 const std::optional<std::uint64_t>& seed,
                 const std::optional<std::string>& policy,
                 const std::optional<double>& budget,
                 const std::optional<std::string>& trace, bool print_table) {
  auto cfg = apply_overrides(tardis::load_experiment_config(config_path),
                             out_dir, seed, policy, budget, trace);
  auto out = tardis::run_experiment(cfg);
  if (print_table) print_comparison(out.report);
  std::cout << "wrote " << out.written_files.size() << " files to "
            << cfg.output_dir << "\n";
  return 0;
}

struct ReportRow {
  std::string label;
  std::string policy;
  double budget_fraction = 1.0;
  double total_cost = 0.0;
  double peak_share = 0.0;
  double cost_per_job = 0.0;
  double avg_wait = 0.0;
  double p95_wait = 0.0;
  std::int64_t completed = 0;
  std::int64_t violations = 0;
  double avg_util = 0.0;
  double max_util = 0.0;
};

int cmd_report(const std::string& dir, std::optional<std::string> out_dir_opt) {
  std::string out_dir = out_dir_opt.value_or(dir);
  std::vector<ReportRow> rows;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".json" &&
        entry.path().filename() != "comparison.json")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    std::ifstream in(path);
    json j;
    in >> j;
    if (!j.contains("format") || j["format"] != tardis::kReportFormat) continue;
    ReportRow row;
    row.label = j.at("label").get<std::string>();
    row.policy = j.at("config").at("policy").get<std::string>();
    row.budget_fraction = j.at("config").at("budget_fraction").get<double>();
    const auto& r = j.at("result");
    row.total_cost = r.at("total_cost").get<double>();
    row.peak_share = r.at("peak_cost_share").get<double>();
    row.cost_per_job = r.at("cost_per_job").get<double>();
    row.avg_wait = r.at("avg_wait_seconds").get<double>();
    row.p95_wait = r.at("p95_wait_seconds").get<double>();
    row.completed = r.at("completed").get<std::int64_t>();
    row.violations = r.at("budget_violations").get<std::int64_t>();
    double usum = 0.0, umax = 0.0;
    for (const auto& s : r.at("sites")) {
      usum += s.at("avg_utilization").get<double>();
      umax = std::max(umax, s.at("max_utilization").get<double>());
    }
    row.avg_util = r.at("sites").empty() ? 0.0 : usum / r.at("sites").size();
    row.max_util = umax;
    rows.push_back(row);
  }
  if (rows.empty()) {
    std::cerr << "error: no run reports found in '" << dir << "'\n";
    return 1;
  }

  fs::create_directories(out_dir);
  std::ofstream tables(fs::path(out_dir) / "tables.csv");
  tables << "label,policy,budget_fraction,total_cost,peak_cost_share,"
            "cost_per_job,avg_wait_s,p95_wait_s,completed,budget_violations,"
            "avg_utilization,max_utilization\n";
  for (const auto& r : rows) {
    tables << r.label << ',' << r.policy << ','
           << tardis::detail::format_double(r.budget_fraction) << ','
           << tardis::detail::format_double(r.total_cost) << ','
           << tardis::detail::format_double(r.peak_share) << ','
           << tardis::detail::format_double(r.cost_per_job) << ','
           << tardis::detail::format_double(r.avg_wait) << ','
           << tardis::detail::format_double(r.p95_wait) << ',' << r.completed
           << ',' << r.violations << ','
           << tardis::detail::format_double(r.avg_util) << ','
           << tardis::detail::format_double(r.max_util) << '\n';
  }

  // Reductions relative to fcfs at the same budget fraction when present,
  // else the first row.
  std::ofstream red(fs::path(out_dir) / "reductions.csv");
  red << "label,baseline,cost_reduction_pct,wait_delta_s\n";
  for (const auto& r : rows) {
    const ReportRow* base = &rows.front();
    for (const auto& cand : rows)
      if (cand.policy == "fcfs" && cand.budget_fraction == r.budget_fraction) {
        base = &cand;
        break;
      }
    double pct = base->total_cost != 0.0
                     ? 100.0 * (1.0 - r.total_cost / base->total_cost)
                     : 0.0;
    red << r.label << ',' << base->label << ','
        << tardis::detail::format_double(pct) << ','
        << tardis::detail::format_double(r.avg_wait - base->avg_wait) << '\n';
  }

  std::ofstream txt(fs::path(out_dir) / "summary.txt");
  txt << std::left << std::setw(16) << "run" << std::right << std::setw(14)
      << "total_cost" << std::setw(12) << "peak_share" << std::setw(12)
      << "cost/job" << std::setw(14) << "avg_wait_s" << std::setw(12)
      << "p95_wait_s" << std::setw(11) << "completed" << std::setw(11)
      << "violations" << std::setw(10) << "avg_util" << "\n";
  for (const auto& r : rows) {
    txt << std::left << std::setw(16) << r.label << std::right << std::setw(14)
        << std::fixed << std::setprecision(2) << r.total_cost << std::setw(12)
        << std::setprecision(3) << r.peak_share << std::setw(12)
        << std::setprecision(3) << r.cost_per_job << std::setw(14)
        << std::setprecision(1) << r.avg_wait << std::setw(12)
        << std::setprecision(1) << r.p95_wait << std::setw(11) << r.completed
        << std::setw(11) << r.violations << std::setw(10)
        << std::setprecision(3) << r.avg_util << "\n";
  }

  std::cout << "wrote tables.csv, reductions.csv, summary.txt to " << out_dir
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tardis: power-aware multi-site HPC scheduling simulator"};
  app.require_subcommand(1);

  // gen-trace
  auto* gen = app.add_subcommand("gen-trace", "generate a synthetic job trace");
  std::string gen_out;
  std::optional<std::string> gen_config;
  std::uint64_t gen_seed = 1;
  std::size_t gen_jobs = 0;
  std::string gen_scenario;
  double gen_days = 0.0;
  gen->add_option("--out", gen_out, "output trace csv")->required();
  gen->add_option("--config", gen_config, "workload spec json");
  gen->add_option("--seed", gen_seed, "master seed");
  gen->add_option("--jobs", gen_jobs, "job count");
  gen->add_option("--scenario", gen_scenario, "high | low | average");
  gen->add_option("--days", gen_days, "arrival window in days");

  // train
  auto* train = app.add_subcommand("train", "train the power prediction model");
  std::string train_trace, train_out, train_history;
  bool paper_split = false;
  tardis::TrainConfig tcfg;
  train->add_option("--trace", train_trace, "input trace csv")->required();
  train->add_option("--out", train_out, "checkpoint path")->required();
  train->add_option("--history", train_history, "per-epoch loss csv");
  train->add_flag("--paper-split", paper_split,
                  "fit on the temporal 30% subset of the trace");
  train->add_option("--seed", tcfg.seed, "training seed");
  train->add_option("--lr", tcfg.learning_rate, "Adam learning rate");
  train->add_option("--epochs", tcfg.max_epochs, "max epochs");
  train->add_option("--patience", tcfg.patience, "early stopping patience");
  train->add_option("--batch-size", tcfg.batch_size, "mini-batch size");
  train->add_option("--k", tcfg.k_neighbors, "kNN graph neighbors");
  train->add_option("--dropout", tcfg.dropout, "dropout probability");
  train->add_option("--val-fraction", tcfg.validation_fraction,
                    "validation fraction of the training subset");

  // simulate / compare
  std::string sim_config;
  std::optional<std::string> sim_out, sim_policy, sim_trace;
  std::optional<std::uint64_t> sim_seed;
  std::optional<double> sim_budget;
  auto add_sim_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", sim_config, "experiment config json")->required();
    cmd->add_option("--out", sim_out, "output directory override");
    cmd->add_option("--seed", sim_seed, "seed override");
    cmd->add_option("--policy", sim_policy, "run only this policy");
    cmd->add_option("--budget", sim_budget, "run only this budget fraction");
    cmd->add_option("--trace", sim_trace, "trace file override");
  };
  auto* sim = app.add_subcommand("simulate", "run the policy x budget grid");
  add_sim_options(sim);
  auto* cmp = app.add_subcommand(
      "compare", "run the grid and print the comparison table");
  add_sim_options(cmp);

  // report
  auto* rep = app.add_subcommand("report", "tabulate run reports in a directory");
  std::string rep_dir;
  std::optional<std::string> rep_out;
  rep->add_option("--dir", rep_dir, "directory of run json files")->required();
  rep->add_option("--out", rep_out, "output directory for tables");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_gen_trace(gen_out, gen_config, gen_seed, gen_jobs,
                           gen_scenario, gen_days);
    if (train->parsed())
      return cmd_train(train_trace, train_out, tcfg, paper_split, train_history);
    if (sim->parsed())
      return cmd_simulate(sim_config, sim_out, sim_seed, sim_policy, sim_budget,
                          sim_trace, false);
    if (cmp->parsed())
      return cmd_simulate(sim_config, sim_out, sim_seed, sim_policy, sim_budget,
                          sim_trace, true);
    if (rep->parsed()) return cmd_report(rep_dir, rep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
