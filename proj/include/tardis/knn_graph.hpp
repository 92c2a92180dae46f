#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "tardis/matrix.hpp"

namespace tardis {

// Undirected kNN graph over standardized feature rows. Edges exclude
// self-loops; the symmetric normalization coefficients used by graph
// convolutions add them back implicitly.
struct JobGraph {
  Matrix features;                                 // n x 8
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // u < v, unique
  std::vector<std::size_t> degree;                 // undirected degree, no self
  std::vector<double> edge_alpha;                  // 1/sqrt((du+1)(dv+1))
  std::vector<double> self_alpha;                  // 1/(d+1)

  std::size_t node_count() const { return features.rows(); }

  void compute_normalization() {
    edge_alpha.resize(edges.size());
    self_alpha.resize(degree.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
      auto [u, v] = edges[e];
      edge_alpha[e] = 1.0 / std::sqrt(static_cast<double>((degree[u] + 1) *
                                                          (degree[v] + 1)));
    }
    for (std::size_t i = 0; i < degree.size(); ++i)
      self_alpha[i] = 1.0 / static_cast<double>(degree[i] + 1);
  }
};

// Euclidean-distance kNN relation, symmetrized by union. Ties break toward
// the lower node index. A single node yields a graph with no edges.
inline JobGraph build_knn_graph(Matrix features, std::size_t k) {
  const std::size_t n = features.rows();
  JobGraph g;
  g.features = std::move(features);
  g.degree.assign(n, 0);
  if (n <= 1 || k == 0) {
    g.compute_normalization();
    return g;
  }
  const std::size_t kk = std::min(k, n - 1);
  const std::size_t dim = g.features.cols();

  std::vector<std::vector<std::size_t>> nbrs(n);
  std::vector<std::pair<double, std::size_t>> cand;
  cand.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    const double* xi = g.features.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double* xj = g.features.row(j);
      double d2 = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        double diff = xi[c] - xj[c];
        d2 += diff * diff;
      }
      cand.emplace_back(d2, j);
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk),
                      cand.end());
    nbrs[i].reserve(kk);
    for (std::size_t m = 0; m < kk; ++m) nbrs[i].push_back(cand[m].second);
  }

  // Union of the directed relations, deduplicated as (min, max) pairs.
  std::vector<std::pair<std::size_t, std::size_t>> all;
  all.reserve(n * kk);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : nbrs[i])
      all.emplace_back(std::min(i, j), std::max(i, j));
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  g.edges = std::move(all);
  for (auto [u, v] : g.edges) {
    ++g.degree[u];
    ++g.degree[v];
  }
  g.compute_normalization();
  return g;
}

}  // namespace tardis
