#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "tardis/gcn.hpp"
#include "tardis/knn_graph.hpp"
#include "tardis/pipeline.hpp"
#include "tardis/rng.hpp"
#include "tardis/trace.hpp"

namespace tardis {

struct TrainConfig {
  double learning_rate = 0.001;
  int patience = 15;
  int max_epochs = 200;
  std::size_t batch_size = 512;
  std::size_t k_neighbors = 5;
  double dropout = 0.2;
  std::uint64_t seed = 1;
  double validation_fraction = 0.2;
  GcnDims dims;  // input/hidden/fc widths

  void validate() const {
    if (learning_rate < 0) throw std::invalid_argument("train config: learning_rate < 0");
    if (patience < 1) throw std::invalid_argument("train config: patience < 1");
    if (max_epochs < 1) throw std::invalid_argument("train config: max_epochs < 1");
    if (batch_size < 2) throw std::invalid_argument("train config: batch_size < 2");
    if (k_neighbors < 1) throw std::invalid_argument("train config: k_neighbors < 1");
    if (validation_fraction <= 0 || validation_fraction >= 1)
      throw std::invalid_argument("train config: validation_fraction outside (0,1)");
  }
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;   // MSE in standardized target units
  double val_mse_kw = 0.0;   // MSE in kW^2 on the validation split
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_val_mse_kw = std::numeric_limits<double>::infinity();
};

class Adam {
 public:
  Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(GcnModel& model) {
    ++t_;
    std::size_t total = 0;
    model.visit_params([&](double*, double*, std::size_t n) { total += n; });
    if (m_.size() != total) {
      m_.assign(total, 0.0);
      v_.assign(total, 0.0);
    }
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    std::size_t off = 0;
    model.visit_params([&](double* p, double* g, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) {
        double gi = g[i];
        m_[off + i] = beta1_ * m_[off + i] + (1.0 - beta1_) * gi;
        v_[off + i] = beta2_ * v_[off + i] + (1.0 - beta2_) * gi * gi;
        double mhat = m_[off + i] / bc1;
        double vhat = v_[off + i] / bc2;
        p[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
      off += n;
    });
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<double> m_, v_;
};

struct TrainResult {
  GcnModel model;
  FeaturePipeline pipeline;
  TrainHistory history;
};

namespace detail {

struct Batch {
  JobGraph graph;
  std::vector<double> target_z;   // standardized targets
  std::vector<double> target_kw;  // raw targets
};

inline std::vector<Batch> make_batches(const Matrix& features,
                                       const JobTable& jobs,
                                       const FeaturePipeline& pipe,
                                       const std::vector<std::size_t>& order,
                                       std::size_t batch_size, std::size_t k) {
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t end = std::min(start + batch_size, order.size());
    if (end - start < 2) break;  // batch statistics need two rows
    Matrix x(end - start, features.cols());
    Batch b;
    b.target_z.reserve(end - start);
    b.target_kw.reserve(end - start);
    for (std::size_t r = start; r < end; ++r) {
      std::size_t idx = order[r];
      for (std::size_t c = 0; c < features.cols(); ++c)
        x(r - start, c) = features(idx, c);
      b.target_kw.push_back(jobs[idx].true_power);
      b.target_z.push_back(pipe.standardize_target(jobs[idx].true_power));
    }
    b.graph = build_knn_graph(std::move(x), k);
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace detail

// Mini-batch Adam training with a temporal train/validation split and early
// stopping that restores the best-validation snapshot. Deterministic for a
// fixed (jobs, cfg) pair.
inline TrainResult train(const JobTable& jobs, const TrainConfig& cfg) {
  cfg.validate();
  if (jobs.size() < 2 * cfg.batch_size)
    throw std::invalid_argument(
        "insufficient jobs: need at least " + std::to_string(2 * cfg.batch_size) +
        ", got " + std::to_string(jobs.size()));

  // Temporal split: the table is sorted by submit time, so the validation
  // slice is simply the most recent fraction.
  std::size_t n = jobs.size();
  std::size_t n_val = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::llround(cfg.validation_fraction *
                                               static_cast<double>(n))));
  std::size_t n_train = n - n_val;
  JobTable train_jobs(jobs.begin(), jobs.begin() + static_cast<std::ptrdiff_t>(n_train));
  JobTable val_jobs(jobs.begin() + static_cast<std::ptrdiff_t>(n_train), jobs.end());

  TrainResult res;
  res.pipeline = FeaturePipeline::fit(train_jobs);
  Matrix x_train = res.pipeline.transform(train_jobs);
  Matrix x_val = res.pipeline.transform(val_jobs);

  std::vector<std::size_t> train_order(n_train);
  std::iota(train_order.begin(), train_order.end(), 0);
  Rng shuffle_rng(derive_seed(cfg.seed, 0x73687566ULL));
  shuffle_rng.shuffle(train_order);
  auto train_batches = detail::make_batches(x_train, train_jobs, res.pipeline,
                                            train_order, cfg.batch_size,
                                            cfg.k_neighbors);
  std::vector<std::size_t> val_order(val_jobs.size());
  std::iota(val_order.begin(), val_order.end(), 0);
  auto val_batches = detail::make_batches(x_val, val_jobs, res.pipeline,
                                          val_order, cfg.batch_size,
                                          cfg.k_neighbors);
  if (train_batches.empty() || val_batches.empty())
    throw std::invalid_argument("insufficient jobs: empty train or validation batch set");

  res.model = GcnModel(cfg.dims, cfg.dropout, cfg.seed);
  res.model.set_training(true);
  Adam adam(cfg.learning_rate);

  GcnModel best_model = res.model;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int wait = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng dropout_rng(derive_seed(cfg.seed, 0x64726f70ULL + static_cast<std::uint64_t>(epoch)));
    double train_loss_sum = 0.0;
    std::size_t train_count = 0;
    res.model.set_training(true);
    for (auto& batch : train_batches) {
      auto t = res.model.forward(batch.graph, ForwardMode::kTrain, &dropout_rng);
      std::size_t bn = batch.target_z.size();
      Matrix dy(bn, 1);
      double loss = 0.0;
      for (std::size_t i = 0; i < bn; ++i) {
        double diff = t.yhat(i, 0) - batch.target_z[i];
        loss += diff * diff;
        dy(i, 0) = 2.0 * diff / static_cast<double>(bn);
      }
      loss /= static_cast<double>(bn);
      if (!std::isfinite(loss))
        throw ModelError("training diverged: non-finite loss at epoch " +
                         std::to_string(epoch));
      train_loss_sum += loss * static_cast<double>(bn);
      train_count += bn;
      res.model.zero_grad();
      res.model.backward(t, dy);
      adam.step(res.model);
    }

    // Validation loss in raw kW. kValidation mode makes this a pure function
    // of the parameters, so a zero learning rate yields a flat series.
    double val_se = 0.0;
    std::size_t val_count = 0;
    for (auto& batch : val_batches) {
      auto t = res.model.forward(batch.graph, ForwardMode::kValidation);
      for (std::size_t i = 0; i < batch.target_kw.size(); ++i) {
        double pred = res.pipeline.unstandardize_target(t.yhat(i, 0));
        double diff = pred - batch.target_kw[i];
        val_se += diff * diff;
      }
      val_count += batch.target_kw.size();
    }
    double val_mse = val_se / static_cast<double>(val_count);
    if (!std::isfinite(val_mse))
      throw ModelError("training diverged: non-finite validation loss at epoch " +
                       std::to_string(epoch));

    res.history.epochs.push_back(
        {epoch, train_loss_sum / static_cast<double>(train_count), val_mse});

    if (val_mse < best_val) {
      best_val = val_mse;
      best_epoch = epoch;
      best_model = res.model;
      wait = 0;
    } else {
      ++wait;
      if (wait >= cfg.patience) break;
    }
  }

  res.model = best_model;
  res.model.set_training(false);
  res.history.best_epoch = best_epoch;
  res.history.best_val_mse_kw = best_val;
  return res;
}

}  // namespace tardis
