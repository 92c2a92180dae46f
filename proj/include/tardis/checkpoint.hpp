#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tardis/gcn.hpp"
#include "tardis/pipeline.hpp"
#include "tardis/train.hpp"

namespace tardis {

inline constexpr const char* kCheckpointFormat = "tardis-gcn-checkpoint-v1";

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != m.size())
    throw std::runtime_error("checkpoint: matrix size mismatch");
  m.data() = std::move(data);
  return m;
}

inline nlohmann::json linear_to_json(const nn::Linear& l) {
  return {{"w", matrix_to_json(l.w)}, {"b", l.b}};
}

inline void linear_from_json(const nlohmann::json& j, nn::Linear& l) {
  l.w = matrix_from_json(j.at("w"));
  l.b = j.at("b").get<std::vector<double>>();
  l.zero_grad();
}

inline nlohmann::json bn_to_json(const nn::BatchNorm& b) {
  return {{"gamma", b.gamma},
          {"beta", b.beta},
          {"running_mean", b.running_mean},
          {"running_var", b.running_var}};
}

inline void bn_from_json(const nlohmann::json& j, nn::BatchNorm& b) {
  b.gamma = j.at("gamma").get<std::vector<double>>();
  b.beta = j.at("beta").get<std::vector<double>>();
  b.running_mean = j.at("running_mean").get<std::vector<double>>();
  b.running_var = j.at("running_var").get<std::vector<double>>();
  b.zero_grad();
}

}  // namespace detail

inline nlohmann::json checkpoint_to_json(const GcnModel& model,
                                         const FeaturePipeline& pipeline,
                                         const TrainConfig& cfg) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["dims"] = {{"input", model.dims().input},
               {"hidden", model.dims().hidden},
               {"fc", model.dims().fc}};
  j["dropout"] = model.dropout_p();
  j["layers"] = {{"embed", detail::linear_to_json(model.embed)},
                 {"bn0", detail::bn_to_json(model.bn0)},
                 {"conv1", detail::linear_to_json(model.conv1.lin)},
                 {"bn1", detail::bn_to_json(model.bn1)},
                 {"conv2", detail::linear_to_json(model.conv2.lin)},
                 {"bn2", detail::bn_to_json(model.bn2)},
                 {"fc", detail::linear_to_json(model.fc)},
                 {"out", detail::linear_to_json(model.out)}};
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& [name, idx] : pipeline.sorted_labels())
    labels.push_back({{"name", name}, {"index", idx}});
  j["pipeline"] = {{"labels", labels},
                   {"feature_mean", pipeline.feature_means()},
                   {"feature_std", pipeline.feature_stds()},
                   {"target_mean", pipeline.target_mean()},
                   {"target_std", pipeline.target_std()}};
  j["train_config"] = {{"learning_rate", cfg.learning_rate},
                       {"patience", cfg.patience},
                       {"max_epochs", cfg.max_epochs},
                       {"batch_size", cfg.batch_size},
                       {"k_neighbors", cfg.k_neighbors},
                       {"dropout", cfg.dropout},
                       {"seed", cfg.seed},
                       {"validation_fraction", cfg.validation_fraction}};
  return j;
}

struct Checkpoint {
  GcnModel model;
  FeaturePipeline pipeline;
  TrainConfig config;
};

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.at("format").get<std::string>() != kCheckpointFormat)
    throw std::runtime_error("checkpoint: unsupported format tag '" +
                             j.at("format").get<std::string>() + "'");
  Checkpoint c;
  GcnDims dims{j.at("dims").at("input").get<std::size_t>(),
               j.at("dims").at("hidden").get<std::size_t>(),
               j.at("dims").at("fc").get<std::size_t>()};
  c.model = GcnModel(dims, j.at("dropout").get<double>(), 0);
  const auto& layers = j.at("layers");
  detail::linear_from_json(layers.at("embed"), c.model.embed);
  detail::bn_from_json(layers.at("bn0"), c.model.bn0);
  detail::linear_from_json(layers.at("conv1"), c.model.conv1.lin);
  detail::bn_from_json(layers.at("bn1"), c.model.bn1);
  detail::linear_from_json(layers.at("conv2"), c.model.conv2.lin);
  detail::bn_from_json(layers.at("bn2"), c.model.bn2);
  detail::linear_from_json(layers.at("fc"), c.model.fc);
  detail::linear_from_json(layers.at("out"), c.model.out);
  c.model.set_training(false);

  const auto& p = j.at("pipeline");
  std::vector<std::pair<std::string, std::size_t>> labels;
  for (const auto& l : p.at("labels"))
    labels.emplace_back(l.at("name").get<std::string>(),
                        l.at("index").get<std::size_t>());
  c.pipeline.restore(std::move(labels),
                     p.at("feature_mean").get<std::vector<double>>(),
                     p.at("feature_std").get<std::vector<double>>(),
                     p.at("target_mean").get<double>(),
                     p.at("target_std").get<double>());

  const auto& t = j.at("train_config");
  c.config.learning_rate = t.at("learning_rate").get<double>();
  c.config.patience = t.at("patience").get<int>();
  c.config.max_epochs = t.at("max_epochs").get<int>();
  c.config.batch_size = t.at("batch_size").get<std::size_t>();
  c.config.k_neighbors = t.at("k_neighbors").get<std::size_t>();
  c.config.dropout = t.at("dropout").get<double>();
  c.config.seed = t.at("seed").get<std::uint64_t>();
  c.config.validation_fraction = t.at("validation_fraction").get<double>();
  c.config.dims = dims;
  return c;
}

inline void save_checkpoint(const std::string& path, const GcnModel& model,
                            const FeaturePipeline& pipeline,
                            const TrainConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(model, pipeline, cfg).dump(1) << '\n';
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint '" + path + "'");
  nlohmann::json j;
  in >> j;
  return checkpoint_from_json(j);
}

}  // namespace tardis
