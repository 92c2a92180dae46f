#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tardis/matrix.hpp"
#include "tardis/trace.hpp"

namespace tardis {

// Fixed feature order of the 8-column input:
//   nodes_requested, cores_per_task, cores_per_node, shared_flag,
//   priority, memory_mib, runtime_estimate, job_type (label encoded)
inline constexpr std::size_t kFeatureCount = 8;

// Label encoding for categoricals plus per-column z-scoring, fitted on
// training data only. The regression target is standardized with the same
// statistics object so predictions can be mapped back to kilowatts.
class FeaturePipeline {
 public:
  FeaturePipeline() = default;

  static FeaturePipeline fit(const JobTable& jobs) {
    if (jobs.empty())
      throw std::invalid_argument("feature pipeline: cannot fit on an empty table");
    FeaturePipeline p;
    for (const Job& j : jobs)
      if (!p.type_labels_.contains(j.job_type)) {
        std::size_t idx = p.type_labels_.size();
        p.type_labels_.emplace(j.job_type, idx);
      }

    Matrix raw = p.raw_features(jobs);
    p.mean_.assign(kFeatureCount, 0.0);
    p.std_.assign(kFeatureCount, 1.0);
    double n = static_cast<double>(jobs.size());
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      double m = 0.0;
      for (std::size_t r = 0; r < raw.rows(); ++r) m += raw(r, c);
      m /= n;
      double v = 0.0;
      for (std::size_t r = 0; r < raw.rows(); ++r) {
        double d = raw(r, c) - m;
        v += d * d;
      }
      v /= n;  // population variance
      p.mean_[c] = m;
      p.std_[c] = v > 0.0 ? std::sqrt(v) : 1.0;
    }

    double tm = 0.0;
    for (const Job& j : jobs) tm += j.true_power;
    tm /= n;
    double tv = 0.0;
    for (const Job& j : jobs) {
      double d = j.true_power - tm;
      tv += d * d;
    }
    tv /= n;
    p.target_mean_ = tm;
    p.target_std_ = tv > 0.0 ? std::sqrt(tv) : 1.0;
    return p;
  }

  // Unseen job types map to a reserved index one past the dictionary.
  double encode_type(const std::string& type) const {
    auto it = type_labels_.find(type);
    return it == type_labels_.end() ? static_cast<double>(type_labels_.size())
                                    : static_cast<double>(it->second);
  }

  Matrix transform(const JobTable& jobs) const {
    Matrix x = raw_features(jobs);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < kFeatureCount; ++c)
        x(r, c) = (x(r, c) - mean_[c]) / std_[c];
    return x;
  }

  double standardize_target(double power_kw) const {
    return (power_kw - target_mean_) / target_std_;
  }
  double unstandardize_target(double z) const {
    return z * target_std_ + target_mean_;
  }

  double target_mean() const { return target_mean_; }
  double target_std() const { return target_std_; }
  const std::vector<double>& feature_means() const { return mean_; }
  const std::vector<double>& feature_stds() const { return std_; }
  const std::unordered_map<std::string, std::size_t>& type_labels() const {
    return type_labels_;
  }

  // Serialization hooks used by the model checkpoint.
  std::vector<std::pair<std::string, std::size_t>> sorted_labels() const {
    std::vector<std::pair<std::string, std::size_t>> v(type_labels_.begin(),
                                                       type_labels_.end());
    std::sort(v.begin(), v.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    return v;
  }
  void restore(std::vector<std::pair<std::string, std::size_t>> labels,
               std::vector<double> mean, std::vector<double> std,
               double target_mean, double target_std) {
    type_labels_.clear();
    for (auto& [k, v] : labels) type_labels_.emplace(k, v);
    mean_ = std::move(mean);
    std_ = std::move(std);
    target_mean_ = target_mean;
    target_std_ = target_std;
  }

 private:
  Matrix raw_features(const JobTable& jobs) const {
    Matrix x(jobs.size(), kFeatureCount);
    for (std::size_t r = 0; r < jobs.size(); ++r) {
      const Job& j = jobs[r];
      x(r, 0) = static_cast<double>(j.nodes_requested);
      x(r, 1) = static_cast<double>(j.cores_per_task);
      x(r, 2) = static_cast<double>(j.cores_per_node);
      x(r, 3) = static_cast<double>(j.shared_flag);
      x(r, 4) = static_cast<double>(j.priority);
      x(r, 5) = j.memory_mib;
      x(r, 6) = j.runtime_estimate;
      x(r, 7) = encode_type(j.job_type);
    }
    return x;
  }

  std::unordered_map<std::string, std::size_t> type_labels_;
  std::vector<double> mean_;
  std::vector<double> std_;
  double target_mean_ = 0.0;
  double target_std_ = 1.0;
};

}  // namespace tardis
