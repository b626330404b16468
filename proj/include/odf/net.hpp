#pragma once

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "odf/rng.hpp"

namespace odf::net {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Row = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using Col = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Thrown when training encounters a non-finite loss.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Architecture of the NeuralODF MLP: `layers` dense layers of `width` units
// (layer norm before ReLU on all but the last layer), the intersection head
// branching after `branch_after` layers, a raw linear depth head on the last
// layer, and the 6D input (plus latent code) re-concatenated at the input of
// layer `skip_at`.
struct MlpConfig {
  int layers = 8;
  int width = 256;
  int latent_dim = 0;  // 0 = overfit mode (no latent input)
  int branch_after = 2;
  int skip_at = 0;  // 0 = layers / 2

  int input_dim() const { return 6 + latent_dim; }
  int skip_layer() const { return skip_at > 0 ? skip_at : (layers / 2 < 2 ? 2 : layers / 2); }

  void validate() const {
    if (layers < 3) throw std::invalid_argument("MlpConfig: need at least 3 layers");
    if (width < 1) throw std::invalid_argument("MlpConfig: width must be >= 1");
    if (latent_dim < 0) throw std::invalid_argument("MlpConfig: latent_dim must be >= 0");
    if (branch_after < 1 || branch_after >= layers) {
      throw std::invalid_argument("MlpConfig: branch_after out of range");
    }
    if (skip_layer() < 2 || skip_layer() > layers) {
      throw std::invalid_argument("MlpConfig: skip layer out of range");
    }
  }

  bool operator==(const MlpConfig&) const = default;
};

// --- differentiable primitives ------------------------------------------------

template <typename T>
inline T stable_softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
inline T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

inline constexpr double kLayerNormEps = 1e-5;

// Per-column layer norm over the feature dimension.
// normed = (z - mean) / sqrt(var + eps); out = gamma .* normed + beta.
template <typename T>
void layer_norm_forward(const Mat<T>& z, const Eigen::Ref<const Col<T>>& gamma,
                        const Eigen::Ref<const Col<T>>& beta, Mat<T>& normed, Row<T>& inv_sigma,
                        Mat<T>& out) {
  Row<T> mean = z.colwise().mean();
  Mat<T> centered = z.rowwise() - mean;
  Row<T> var = centered.array().square().colwise().mean();
  inv_sigma = (var.array() + T(kLayerNormEps)).rsqrt();
  normed = centered.array().rowwise() * inv_sigma.array();
  out = (normed.array().colwise() * gamma.array()).colwise() + beta.array();
}

template <typename T>
void layer_norm_backward(const Mat<T>& d_out, const Mat<T>& normed, const Row<T>& inv_sigma,
                         const Eigen::Ref<const Col<T>>& gamma, Col<T>& d_gamma, Col<T>& d_beta,
                         Mat<T>& d_z) {
  d_gamma = (d_out.array() * normed.array()).rowwise().sum();
  d_beta = d_out.rowwise().sum();
  Mat<T> d_normed = d_out.array().colwise() * gamma.array();
  Row<T> mean_dn = d_normed.colwise().mean();
  Row<T> mean_dn_n = (d_normed.array() * normed.array()).colwise().mean();
  d_z = ((d_normed.array().rowwise() - mean_dn.array()) -
         normed.array().rowwise() * mean_dn_n.array())
            .rowwise() *
        inv_sigma.array();
}

// --- the MLP -------------------------------------------------------------------

// Parameters live in one flat vector; layer matrices are Eigen maps into it.
// Flat layout (the checkpoint "declaration order"): per trunk layer W, b,
// then gamma, beta when the layer is normalized; then the confidence head
// W, b; then the depth head W, b.
template <typename T>
class Mlp {
 public:
  struct Slice {
    int in_dim = 0, out_dim = 0;
    int w = 0, b = 0, g = -1, be = -1;
    bool has_ln = false;
  };

  struct Workspace {
    std::vector<Mat<T>> input;   // materialized layer inputs (incl. skip concat)
    std::vector<Mat<T>> pre;     // preactivation fed to ReLU (post layer norm)
    std::vector<Mat<T>> normed;  // layer-norm normalized values
    std::vector<Row<T>> inv_sigma;
    std::vector<Mat<T>> act;  // post-ReLU activations
    std::vector<Mat<T>> dact;
    Row<T> depth_raw, conf_logit;
    Col<T> grad;    // flat parameter gradient, sized on demand
    Mat<T> dinput;  // gradient wrt the network input (for latent codes)
  };

  explicit Mlp(const MlpConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    build_layout();
    params_ = Col<T>::Zero(param_count_);
    for (const Slice& s : trunk_) {
      if (s.has_ln) gamma_map(params_, s).setOnes();
    }
  }

  const MlpConfig& config() const { return cfg_; }
  int param_count() const { return param_count_; }
  Col<T>& params() { return params_; }
  const Col<T>& params() const { return params_; }
  const std::vector<Slice>& trunk_slices() const { return trunk_; }
  const Slice& conf_slice() const { return conf_; }
  const Slice& depth_slice() const { return depth_; }

  static Eigen::Map<Mat<T>> weight_map(Col<T>& v, const Slice& s) {
    return {v.data() + s.w, s.out_dim, s.in_dim};
  }
  static Eigen::Map<const Mat<T>> weight_map(const Col<T>& v, const Slice& s) {
    return {v.data() + s.w, s.out_dim, s.in_dim};
  }
  static Eigen::Map<Col<T>> bias_map(Col<T>& v, const Slice& s) {
    return {v.data() + s.b, s.out_dim};
  }
  static Eigen::Map<const Col<T>> bias_map(const Col<T>& v, const Slice& s) {
    return {v.data() + s.b, s.out_dim};
  }
  static Eigen::Map<Col<T>> gamma_map(Col<T>& v, const Slice& s) {
    return {v.data() + s.g, s.out_dim};
  }
  static Eigen::Map<const Col<T>> gamma_map(const Col<T>& v, const Slice& s) {
    return {v.data() + s.g, s.out_dim};
  }
  static Eigen::Map<Col<T>> beta_map(Col<T>& v, const Slice& s) {
    return {v.data() + s.be, s.out_dim};
  }
  static Eigen::Map<const Col<T>> beta_map(const Col<T>& v, const Slice& s) {
    return {v.data() + s.be, s.out_dim};
  }

  // Fan-in scaled uniform weights, zero biases, unit gamma; both heads start
  // at zero so an untrained model answers confidence 0.5 and depth 0.
  void init_params(uint64_t seed) {
    Rng rng(seed, 9);
    for (const Slice& s : trunk_) {
      T bound = T(1) / std::sqrt(T(s.in_dim));
      auto w = weight_map(params_, s);
      for (int c = 0; c < w.cols(); ++c) {
        for (int r = 0; r < w.rows(); ++r) w(r, c) = T(rng.uniform(-double(bound), double(bound)));
      }
      bias_map(params_, s).setZero();
      if (s.has_ln) {
        gamma_map(params_, s).setOnes();
        beta_map(params_, s).setZero();
      }
    }
    weight_map(params_, conf_).setZero();
    bias_map(params_, conf_).setZero();
    weight_map(params_, depth_).setZero();
    bias_map(params_, depth_).setZero();
  }

  // X: [input_dim x B]. Fills ws caches plus ws.depth_raw / ws.conf_logit.
  void forward(const Eigen::Ref<const Mat<T>>& X, Workspace& ws) const {
    if (X.rows() != cfg_.input_dim()) throw std::invalid_argument("Mlp::forward: bad input rows");
    ensure(ws);
    const int L = cfg_.layers;
    const int skip = cfg_.skip_layer() - 1;  // 0-indexed layer whose input gets the concat
    for (int i = 0; i < L; ++i) {
      if (i == 0) {
        ws.input[i] = X;
      } else if (i == skip) {
        ws.input[i].resize(cfg_.width + cfg_.input_dim(), X.cols());
        ws.input[i].topRows(cfg_.width) = ws.act[i - 1];
        ws.input[i].bottomRows(cfg_.input_dim()) = X;
      } else {
        ws.input[i] = ws.act[i - 1];
      }
      const Slice& s = trunk_[size_t(i)];
      Mat<T> z = (weight_map(params_, s) * ws.input[i]).colwise() + bias_map(params_, s);
      if (s.has_ln) {
        layer_norm_forward<T>(z, gamma_map(params_, s), beta_map(params_, s), ws.normed[i],
                              ws.inv_sigma[i], ws.pre[i]);
      } else {
        ws.pre[i] = std::move(z);
      }
      ws.act[i] = ws.pre[i].cwiseMax(T(0));
    }
    ws.conf_logit = (weight_map(params_, conf_) * ws.act[cfg_.branch_after - 1]).row(0);
    ws.conf_logit.array() += bias_map(params_, conf_)(0);
    ws.depth_raw = (weight_map(params_, depth_) * ws.act[L - 1]).row(0);
    ws.depth_raw.array() += bias_map(params_, depth_)(0);
  }

  // Reverse pass over the cached forward. Writes the flat parameter gradient
  // into ws.grad (zeroed first) and, when requested, d(loss)/d(input) into
  // ws.dinput.
  void backward(Workspace& ws, const Row<T>& d_depth_raw, const Row<T>& d_conf_logit,
                bool want_dinput = false) const {
    const int L = cfg_.layers;
    const int B = int(ws.input[0].cols());
    const int skip = cfg_.skip_layer() - 1;
    ws.grad.setZero();
    if (want_dinput) ws.dinput = Mat<T>::Zero(cfg_.input_dim(), B);
    for (int i = 0; i < L; ++i) ws.dact[i] = Mat<T>::Zero(cfg_.width, B);

    weight_map(ws.grad, depth_).noalias() = d_depth_raw * ws.act[L - 1].transpose();
    bias_map(ws.grad, depth_)(0) = d_depth_raw.sum();
    ws.dact[L - 1].noalias() += weight_map(params_, depth_).transpose() * d_depth_raw;

    weight_map(ws.grad, conf_).noalias() =
        d_conf_logit * ws.act[cfg_.branch_after - 1].transpose();
    bias_map(ws.grad, conf_)(0) = d_conf_logit.sum();
    ws.dact[cfg_.branch_after - 1].noalias() +=
        weight_map(params_, conf_).transpose() * d_conf_logit;

    for (int i = L - 1; i >= 0; --i) {
      const Slice& s = trunk_[size_t(i)];
      Mat<T> dh = (ws.pre[i].array() > T(0)).template cast<T>() * ws.dact[i].array();
      Mat<T> dz;
      if (s.has_ln) {
        Col<T> dgamma, dbeta;
        layer_norm_backward<T>(dh, ws.normed[i], ws.inv_sigma[i], gamma_map(params_, s), dgamma,
                               dbeta, dz);
        gamma_map(ws.grad, s) = dgamma;
        beta_map(ws.grad, s) = dbeta;
      } else {
        dz = std::move(dh);
      }
      weight_map(ws.grad, s).noalias() = dz * ws.input[i].transpose();
      bias_map(ws.grad, s) = dz.rowwise().sum();
      if (i == 0) {
        if (want_dinput) ws.dinput.noalias() += weight_map(params_, s).transpose() * dz;
      } else {
        Mat<T> din = weight_map(params_, s).transpose() * dz;
        if (i == skip) {
          ws.dact[i - 1] += din.topRows(cfg_.width);
          if (want_dinput) ws.dinput += din.bottomRows(cfg_.input_dim());
        } else {
          ws.dact[i - 1] += din;
        }
      }
    }
  }

  // Batch evaluation without workspace management; confidence is sigmoid(logit).
  void evaluate(const Eigen::Ref<const Mat<T>>& X, Row<T>& depth_raw, Row<T>& confidence) const {
    thread_local Workspace ws;
    forward(X, ws);
    depth_raw = ws.depth_raw;
    confidence = ws.conf_logit.unaryExpr([](T v) { return sigmoid(v); });
  }

 private:
  void ensure(Workspace& ws) const {
    const size_t n = size_t(cfg_.layers);
    if (ws.input.size() != n) {
      ws.input.resize(n);
      ws.pre.resize(n);
      ws.normed.resize(n);
      ws.inv_sigma.resize(n);
      ws.act.resize(n);
      ws.dact.resize(n);
    }
    if (ws.grad.size() != param_count_) ws.grad = Col<T>::Zero(param_count_);
  }

  void build_layout() {
    int offset = 0;
    auto push = [&](int out_dim, int in_dim, bool has_ln) {
      Slice s;
      s.in_dim = in_dim;
      s.out_dim = out_dim;
      s.has_ln = has_ln;
      s.w = offset;
      offset += out_dim * in_dim;
      s.b = offset;
      offset += out_dim;
      if (has_ln) {
        s.g = offset;
        offset += out_dim;
        s.be = offset;
        offset += out_dim;
      }
      return s;
    };
    const int D = cfg_.input_dim();
    const int H = cfg_.width;
    const int skip = cfg_.skip_layer() - 1;
    trunk_.clear();
    for (int i = 0; i < cfg_.layers; ++i) {
      int in_dim = i == 0 ? D : (i == skip ? H + D : H);
      trunk_.push_back(push(H, in_dim, i < cfg_.layers - 1));
    }
    conf_ = push(1, H, false);
    depth_ = push(1, H, false);
    param_count_ = offset;
  }

  MlpConfig cfg_;
  std::vector<Slice> trunk_;
  Slice conf_, depth_;
  int param_count_ = 0;
  Col<T> params_;
};

// --- loss ----------------------------------------------------------------------

// Loss weights: total = lambda_depth * MSE(clamped depths)
//                     + BCE(confidence) + lambda_reg * mean ||latent||^2.
template <typename T>
struct LossConfig {
  T lambda_depth = T(5);
  T lambda_reg = T(1e-4);
  T clamp = T(0.5);
};

template <typename T>
struct LossParts {
  T depth = T(0);
  T prob = T(0);
  T reg = T(0);
  T total() const { return depth + prob + reg; }
};

// Forward + gradient of the depth and confidence terms over one batch.
// depth_label carries the sentinel for non-intersecting rays; the clamp makes
// any prediction at or beyond it penalty-free. Gradients are d(total)/d(raw).
template <typename T>
LossParts<T> loss_forward_backward(const Row<T>& depth_raw, const Row<T>& conf_logit,
                                   const Row<T>& depth_label, const Row<T>& intersect_label,
                                   const LossConfig<T>& cfg, Row<T>& d_depth_raw,
                                   Row<T>& d_conf_logit) {
  const int B = int(depth_raw.size());
  LossParts<T> parts;
  d_depth_raw.resize(B);
  d_conf_logit.resize(B);
  T inv_b = T(1) / T(B);
  T depth_acc = T(0), prob_acc = T(0);
  for (int i = 0; i < B; ++i) {
    T pred = depth_raw(i) < cfg.clamp ? depth_raw(i) : cfg.clamp;
    T label = depth_label(i) < cfg.clamp ? depth_label(i) : cfg.clamp;
    T err = pred - label;
    depth_acc += err * err;
    d_depth_raw(i) = depth_raw(i) < cfg.clamp ? cfg.lambda_depth * T(2) * err * inv_b : T(0);

    T logit = conf_logit(i);
    T y = intersect_label(i);
    prob_acc += stable_softplus(logit) - y * logit;
    d_conf_logit(i) = (sigmoid(logit) - y) * inv_b;
  }
  parts.depth = cfg.lambda_depth * depth_acc * inv_b;
  parts.prob = prob_acc * inv_b;
  return parts;
}

// --- optimizer -------------------------------------------------------------------

// Adaptive moment estimation over a flat parameter vector.
template <typename T>
class Adam {
 public:
  Adam(int size, T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_ = Col<T>::Zero(size);
    v_ = Col<T>::Zero(size);
  }

  void step(Col<T>& params, const Col<T>& grad) {
    ++t_;
    m_ = beta1_ * m_ + (T(1) - beta1_) * grad;
    v_ = beta2_ * v_ + (T(1) - beta2_) * grad.cwiseProduct(grad);
    T bc1 = T(1) - std::pow(beta1_, T(t_));
    T bc2 = T(1) - std::pow(beta2_, T(t_));
    T alpha = lr_ * std::sqrt(bc2) / bc1;
    params.array() -= alpha * m_.array() / (v_.array().sqrt() + eps_);
  }

  void set_lr(T lr) { lr_ = lr; }
  T lr() const { return lr_; }
  int64_t steps() const { return t_; }

 private:
  T lr_, beta1_, beta2_, eps_;
  Col<T> m_, v_;
  int64_t t_ = 0;
};

}  // namespace odf::net
