#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tardis/knn_graph.hpp"
#include "tardis/matrix.hpp"
#include "tardis/rng.hpp"

namespace tardis {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace nn {

inline void glorot_init(Matrix& w, Rng& rng) {
  double s = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& v : w.data()) v = rng.uniform(-s, s);
}

struct Linear {
  Matrix w;                  // in x out
  std::vector<double> b;     // out
  Matrix gw;
  std::vector<double> gb;

  void init(std::size_t in, std::size_t out, Rng& rng) {
    w = Matrix(in, out);
    b.assign(out, 0.0);
    glorot_init(w, rng);
    zero_grad();
  }
  void zero_grad() {
    gw = Matrix(w.rows(), w.cols());
    gb.assign(b.size(), 0.0);
  }
  Matrix forward(const Matrix& x) const {
    Matrix y = matmul(x, w);
    add_row_vector(y, b);
    return y;
  }
  // Accumulates parameter gradients; returns dL/dx.
  Matrix backward(const Matrix& x, const Matrix& dy) {
    Matrix dgw = matmul_at_b(x, dy);
    for (std::size_t i = 0; i < gw.size(); ++i) gw.data()[i] += dgw.data()[i];
    auto db = column_sums(dy);
    for (std::size_t j = 0; j < gb.size(); ++j) gb[j] += db[j];
    return matmul_a_bt(dy, w);
  }
  std::size_t param_count() const { return w.size() + b.size(); }
};

struct BatchNormCache {
  Matrix xhat;
  std::vector<double> inv_std;
  bool train_mode = false;
};

// Batch normalization over columns. Population (biased) variance is used both
// for batch statistics and for the running estimates.
struct BatchNorm {
  std::vector<double> gamma, beta;
  std::vector<double> running_mean, running_var;
  std::vector<double> ggamma, gbeta;
  double momentum = 0.1;
  double eps = 1e-5;

  void init(std::size_t dim) {
    gamma.assign(dim, 1.0);
    beta.assign(dim, 0.0);
    running_mean.assign(dim, 0.0);
    running_var.assign(dim, 1.0);
    zero_grad();
  }
  void zero_grad() {
    ggamma.assign(gamma.size(), 0.0);
    gbeta.assign(beta.size(), 0.0);
  }

  Matrix forward(const Matrix& x, bool training, bool update_running,
                 BatchNormCache& cache) {
    const std::size_t n = x.rows(), d = x.cols();
    Matrix y(n, d);
    cache.xhat = Matrix(n, d);
    cache.inv_std.assign(d, 0.0);
    cache.train_mode = training;
    for (std::size_t j = 0; j < d; ++j) {
      double mu, var;
      if (training) {
        mu = 0.0;
        for (std::size_t i = 0; i < n; ++i) mu += x(i, j);
        mu /= static_cast<double>(n);
        var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          double dd = x(i, j) - mu;
          var += dd * dd;
        }
        var /= static_cast<double>(n);
        if (update_running) {
          running_mean[j] = (1.0 - momentum) * running_mean[j] + momentum * mu;
          running_var[j] = (1.0 - momentum) * running_var[j] + momentum * var;
        }
      } else {
        mu = running_mean[j];
        var = running_var[j];
      }
      double is = 1.0 / std::sqrt(var + eps);
      cache.inv_std[j] = is;
      for (std::size_t i = 0; i < n; ++i) {
        double xh = (x(i, j) - mu) * is;
        cache.xhat(i, j) = xh;
        y(i, j) = gamma[j] * xh + beta[j];
      }
    }
    return y;
  }

  Matrix backward(const BatchNormCache& cache, const Matrix& dy) {
    const std::size_t n = dy.rows(), d = dy.cols();
    Matrix dx(n, d);
    for (std::size_t j = 0; j < d; ++j) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sum_dy += dy(i, j);
        sum_dy_xhat += dy(i, j) * cache.xhat(i, j);
      }
      ggamma[j] += sum_dy_xhat;
      gbeta[j] += sum_dy;
      if (cache.train_mode) {
        double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          dx(i, j) = gamma[j] * cache.inv_std[j] *
                     (dy(i, j) - inv_n * sum_dy -
                      cache.xhat(i, j) * inv_n * sum_dy_xhat);
        }
      } else {
        for (std::size_t i = 0; i < n; ++i)
          dx(i, j) = gamma[j] * cache.inv_std[j] * dy(i, j);
      }
    }
    return dx;
  }
  std::size_t param_count() const { return gamma.size() + beta.size(); }
};

// Symmetric-normalized neighborhood aggregation with implicit self-loops:
// out_i = a_ii * m_i + sum over edges (i,j) of a_ij * m_j. The operator is
// symmetric, so it is its own adjoint in the backward pass.
inline Matrix propagate(const JobGraph& g, const Matrix& m) {
  const std::size_t n = m.rows(), d = m.cols();
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    double a = g.self_alpha[i];
    const double* mi = m.row(i);
    double* oi = out.row(i);
    for (std::size_t c = 0; c < d; ++c) oi[c] = a * mi[c];
  }
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    auto [u, v] = g.edges[e];
    double a = g.edge_alpha[e];
    double* ou = out.row(u);
    double* ov = out.row(v);
    const double* mu = m.row(u);
    const double* mv = m.row(v);
    for (std::size_t c = 0; c < d; ++c) {
      ou[c] += a * mv[c];
      ov[c] += a * mu[c];
    }
  }
  return out;
}

struct GcnConv {
  Linear lin;  // weight + bias; bias added after propagation

  void init(std::size_t in, std::size_t out, Rng& rng) { lin.init(in, out, rng); }
  void zero_grad() { lin.zero_grad(); }
  Matrix forward(const JobGraph& g, const Matrix& x) const {
    Matrix m = matmul(x, lin.w);
    Matrix y = propagate(g, m);
    add_row_vector(y, lin.b);
    return y;
  }
  Matrix backward(const JobGraph& g, const Matrix& x, const Matrix& dy) {
    auto db = column_sums(dy);
    for (std::size_t j = 0; j < lin.gb.size(); ++j) lin.gb[j] += db[j];
    Matrix dm = propagate(g, dy);
    Matrix dgw = matmul_at_b(x, dm);
    for (std::size_t i = 0; i < lin.gw.size(); ++i)
      lin.gw.data()[i] += dgw.data()[i];
    return matmul_a_bt(dm, lin.w);
  }
  std::size_t param_count() const { return lin.param_count(); }
};

inline Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

// dL/dx from dL/dy using the forward output (y > 0 iff x > 0).
inline Matrix relu_backward(const Matrix& y, const Matrix& dy) {
  Matrix dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (y.data()[i] <= 0.0) dx.data()[i] = 0.0;
  return dx;
}

}  // namespace nn

struct GcnDims {
  std::size_t input = 8;
  std::size_t hidden = 128;
  std::size_t fc = 64;
};

// kTrain: batch statistics, running stats updated, dropout active.
// kValidation: batch statistics, no running update, dropout off — the loss
//              this mode yields is a pure function of the parameters, which
//              keeps early stopping reproducible.
// kEval: running statistics, dropout off; the deployment path.
enum class ForwardMode { kTrain, kValidation, kEval };

// Intermediate activations of one forward pass, kept for the backward pass.
struct GcnForwardTrace {
  const JobGraph* graph = nullptr;
  Matrix x0, z_embed, a0, r0, h0;
  Matrix p1, a1, g1;
  Matrix p2, z2, a2, g2;
  Matrix zf, rf, hf;
  Matrix yhat;  // n x 1
  nn::BatchNormCache bn0c, bn1c, bn2c;
  Matrix drop0_mask, dropf_mask;  // empty when dropout is inactive
};

// Power-prediction network: Linear embedding + BatchNorm + ReLU + Dropout,
// two graph convolutions with BatchNorm + ReLU (the second with a residual
// add of the first's output), a fully connected ReLU layer with dropout and
// a scalar output head.
class GcnModel {
 public:
  GcnModel() = default;
  GcnModel(GcnDims dims, double dropout_p, std::uint64_t init_seed)
      : dims_(dims), dropout_p_(dropout_p) {
    Rng rng(derive_seed(init_seed, 0x67636eULL));
    embed.init(dims.input, dims.hidden, rng);
    bn0.init(dims.hidden);
    conv1.init(dims.hidden, dims.hidden, rng);
    bn1.init(dims.hidden);
    conv2.init(dims.hidden, dims.hidden, rng);
    bn2.init(dims.hidden);
    fc.init(dims.hidden, dims.fc, rng);
    out.init(dims.fc, 1, rng);
  }

  const GcnDims& dims() const { return dims_; }
  double dropout_p() const { return dropout_p_; }
  bool training() const { return training_; }
  void set_training(bool t) { training_ = t; }

  // `dropout_rng` must be supplied in kTrain mode when dropout_p > 0.
  GcnForwardTrace forward(const JobGraph& graph, ForwardMode mode,
                          Rng* dropout_rng = nullptr) {
    bool batch_stats = mode != ForwardMode::kEval;
    bool update_running = mode == ForwardMode::kTrain;
    bool dropout_on = mode == ForwardMode::kTrain;
    GcnForwardTrace t;
    t.graph = &graph;
    t.x0 = graph.features;
    t.z_embed = embed.forward(t.x0);
    t.a0 = bn0.forward(t.z_embed, batch_stats, update_running, t.bn0c);
    t.r0 = nn::relu(t.a0);
    t.h0 = apply_dropout(t.r0, t.drop0_mask, dropout_on, dropout_rng);

    t.p1 = conv1.forward(graph, t.h0);
    t.a1 = bn1.forward(t.p1, batch_stats, update_running, t.bn1c);
    t.g1 = nn::relu(t.a1);

    t.p2 = conv2.forward(graph, t.g1);
    t.z2 = t.p2;
    for (std::size_t i = 0; i < t.z2.size(); ++i)
      t.z2.data()[i] += t.g1.data()[i];  // residual
    t.a2 = bn2.forward(t.z2, batch_stats, update_running, t.bn2c);
    t.g2 = nn::relu(t.a2);

    t.zf = fc.forward(t.g2);
    t.rf = nn::relu(t.zf);
    t.hf = apply_dropout(t.rf, t.dropf_mask, dropout_on, dropout_rng);
    t.yhat = out.forward(t.hf);
    if (!t.yhat.all_finite())
      throw ModelError("non-finite activation in forward pass");
    return t;
  }

  // Mode from the model's train/eval flag.
  GcnForwardTrace forward(const JobGraph& graph, Rng* dropout_rng = nullptr) {
    return forward(graph,
                   training_ ? ForwardMode::kTrain : ForwardMode::kEval,
                   dropout_rng);
  }

  void zero_grad() {
    embed.zero_grad();
    bn0.zero_grad();
    conv1.zero_grad();
    bn1.zero_grad();
    conv2.zero_grad();
    bn2.zero_grad();
    fc.zero_grad();
    out.zero_grad();
  }

  // Accumulates gradients for all trainable parameters given dL/dyhat.
  void backward(const GcnForwardTrace& t, const Matrix& dyhat) {
    Matrix dhf = out.backward(t.hf, dyhat);
    Matrix drf = dropout_backward(dhf, t.dropf_mask);
    Matrix dzf = nn::relu_backward(t.rf, drf);
    Matrix dg2 = fc.backward(t.g2, dzf);

    Matrix da2 = nn::relu_backward(t.g2, dg2);
    Matrix dz2 = bn2.backward(t.bn2c, da2);
    Matrix dg1_conv = conv2.backward(*t.graph, t.g1, dz2);
    Matrix dg1 = dz2;  // residual branch
    for (std::size_t i = 0; i < dg1.size(); ++i)
      dg1.data()[i] += dg1_conv.data()[i];

    Matrix da1 = nn::relu_backward(t.g1, dg1);
    Matrix dp1 = bn1.backward(t.bn1c, da1);
    Matrix dh0 = conv1.backward(*t.graph, t.h0, dp1);

    Matrix dr0 = dropout_backward(dh0, t.drop0_mask);
    Matrix da0 = nn::relu_backward(t.r0, dr0);
    Matrix dz0 = bn0.backward(t.bn0c, da0);
    embed.backward(t.x0, dz0);
  }

  // Sums weights and biases of linear/conv layers plus batch-norm scale and
  // shift; running statistics are not trainable.
  std::size_t count_parameters() const {
    return embed.param_count() + bn0.param_count() + conv1.param_count() +
           bn1.param_count() + conv2.param_count() + bn2.param_count() +
           fc.param_count() + out.param_count();
  }

  template <typename Fn>
  void visit_params(Fn&& fn) {
    auto vec = [&](std::vector<double>& v, std::vector<double>& g) {
      fn(v.data(), g.data(), v.size());
    };
    auto mat = [&](Matrix& m, Matrix& g) {
      fn(m.data().data(), g.data().data(), m.size());
    };
    mat(embed.w, embed.gw);
    vec(embed.b, embed.gb);
    vec(bn0.gamma, bn0.ggamma);
    vec(bn0.beta, bn0.gbeta);
    mat(conv1.lin.w, conv1.lin.gw);
    vec(conv1.lin.b, conv1.lin.gb);
    vec(bn1.gamma, bn1.ggamma);
    vec(bn1.beta, bn1.gbeta);
    mat(conv2.lin.w, conv2.lin.gw);
    vec(conv2.lin.b, conv2.lin.gb);
    vec(bn2.gamma, bn2.ggamma);
    vec(bn2.beta, bn2.gbeta);
    mat(fc.w, fc.gw);
    vec(fc.b, fc.gb);
    mat(out.w, out.gw);
    vec(out.b, out.gb);
  }

  nn::Linear embed, fc, out;
  nn::BatchNorm bn0, bn1, bn2;
  nn::GcnConv conv1, conv2;

 private:
  Matrix apply_dropout(const Matrix& x, Matrix& mask, bool active, Rng* rng) {
    if (!active || dropout_p_ <= 0.0) {
      mask = Matrix();
      return x;
    }
    if (rng == nullptr)
      throw ModelError("dropout requires an rng in training mode");
    double keep = 1.0 - dropout_p_;
    double scale = 1.0 / keep;
    mask = Matrix(x.rows(), x.cols());
    Matrix y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) {
      double m = rng->bernoulli(keep) ? scale : 0.0;
      mask.data()[i] = m;
      y.data()[i] = x.data()[i] * m;
    }
    return y;
  }

  static Matrix dropout_backward(const Matrix& dy, const Matrix& mask) {
    if (mask.size() == 0) return dy;
    Matrix dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] *= mask.data()[i];
    return dx;
  }

  GcnDims dims_;
  double dropout_p_ = 0.2;
  bool training_ = false;
};

// Closed-form parameter count for a given layer sizing.
inline std::size_t gcn_parameter_count(const GcnDims& d) {
  std::size_t n = 0;
  n += d.input * d.hidden + d.hidden;  // embedding
  n += 2 * d.hidden;                   // bn0
  n += d.hidden * d.hidden + d.hidden; // conv1
  n += 2 * d.hidden;                   // bn1
  n += d.hidden * d.hidden + d.hidden; // conv2
  n += 2 * d.hidden;                   // bn2
  n += d.hidden * d.fc + d.fc;         // fc
  n += d.fc * 1 + 1;                   // output
  return n;
}

}  // namespace tardis
