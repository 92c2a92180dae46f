#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "tardis/gcn.hpp"
#include "tardis/pipeline.hpp"
#include "tardis/trace.hpp"

namespace tardis {

enum class PredictorKind { Gnn, Oracle, Mean };

inline PredictorKind predictor_kind_from_string(const std::string& s) {
  if (s == "gnn") return PredictorKind::Gnn;
  if (s == "oracle") return PredictorKind::Oracle;
  if (s == "mean") return PredictorKind::Mean;
  throw std::invalid_argument("unknown predictor kind '" + s + "'");
}

inline const char* to_string(PredictorKind k) {
  switch (k) {
    case PredictorKind::Gnn: return "gnn";
    case PredictorKind::Oracle: return "oracle";
    default: return "mean";
  }
}

// Per-job power prediction over the current scheduling window: one graph is
// built over the window and evaluated in eval mode; negative outputs clamp
// to zero.
inline std::map<std::int64_t, double> predict(GcnModel& model,
                                              const FeaturePipeline& pipeline,
                                              const JobTable& jobs,
                                              std::size_t k) {
  std::map<std::int64_t, double> out;
  if (jobs.empty()) return out;
  if (model.training())
    throw ModelError("predict requires the model in eval mode");
  JobGraph g = build_knn_graph(pipeline.transform(jobs), k);
  auto t = model.forward(g, ForwardMode::kEval);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    double p = pipeline.unstandardize_target(t.yhat(i, 0));
    out[jobs[i].id] = p < 0.0 ? 0.0 : p;
  }
  return out;
}

// Uniform interface the dispatchers and the engine consume. The oracle
// returns each job's true power; the mean predictor answers the training-set
// average for every query.
class Predictor {
 public:
  static Predictor oracle() {
    Predictor p;
    p.kind_ = PredictorKind::Oracle;
    return p;
  }

  static Predictor mean(const JobTable& train_jobs) {
    if (train_jobs.empty())
      throw std::invalid_argument("mean predictor: empty training set");
    Predictor p;
    p.kind_ = PredictorKind::Mean;
    double s = 0.0;
    for (const Job& j : train_jobs) s += j.true_power;
    p.mean_kw_ = s / static_cast<double>(train_jobs.size());
    return p;
  }

  static Predictor gnn(GcnModel model, FeaturePipeline pipeline, std::size_t k) {
    Predictor p;
    p.kind_ = PredictorKind::Gnn;
    model.set_training(false);
    p.model_ = std::make_shared<GcnModel>(std::move(model));
    p.pipeline_ = std::move(pipeline);
    p.k_ = k;
    return p;
  }

  PredictorKind kind() const { return kind_; }
  double mean_kw() const { return mean_kw_; }

  std::map<std::int64_t, double> predict_window(const JobTable& window) const {
    std::map<std::int64_t, double> out;
    switch (kind_) {
      case PredictorKind::Oracle:
        for (const Job& j : window) out[j.id] = j.true_power;
        break;
      case PredictorKind::Mean:
        for (const Job& j : window) out[j.id] = mean_kw_;
        break;
      case PredictorKind::Gnn:
        out = tardis::predict(*model_, pipeline_, window, k_);
        break;
    }
    return out;
  }

 private:
  PredictorKind kind_ = PredictorKind::Oracle;
  double mean_kw_ = 0.0;
  std::shared_ptr<GcnModel> model_;  // shared: Predictor is copied by value
  FeaturePipeline pipeline_;
  std::size_t k_ = 5;
};

}  // namespace tardis
