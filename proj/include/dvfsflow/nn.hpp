#pragma once

// Small dense feedforward networks with hand-written backprop and Adam.
//
// Parameters live in one contiguous vector; per-layer weights and biases are
// Eigen::Map views into it, so optimizers and finite-difference checks work on
// a flat vector while the forward pass reads natural matrix shapes.
//
// Batched inputs are column-major: one sample per column.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dvfsflow/errors.hpp"
#include "dvfsflow/types.hpp"

namespace dvfsflow::nn {

enum class Activation { tanh, relu };

inline const char* to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

inline Activation activation_from_string(const std::string& tag) {
  if (tag == "tanh") return Activation::tanh;
  if (tag == "relu") return Activation::relu;
  throw ConfigError("activation", "unknown tag '" + tag + "'");
}

template <typename Scalar>
class Mlp {
 public:
  using VectorS = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Mlp() = default;

  // Zero-initialized network with the given shape.
  Mlp(std::vector<int> layer_sizes, Activation activation)
      : sizes_(std::move(layer_sizes)), activation_(activation) {
    if (sizes_.size() < 2) throw ConfigError("layer_sizes", "needs at least two layers");
    for (int s : sizes_) {
      if (s < 1) throw ConfigError("layer_sizes", "every layer needs at least one unit");
    }
    Eigen::Index offset = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(offset);
      offset += Eigen::Index(sizes_[l + 1]) * sizes_[l] + sizes_[l + 1];
    }
    params_ = VectorS::Zero(offset);
  }

  int num_layers() const { return int(sizes_.size()) - 1; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  Activation activation() const { return activation_; }

  VectorS& parameters() { return params_; }
  const VectorS& parameters() const { return params_; }

  Eigen::Map<MatrixS> weight(int l) {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<const MatrixS> weight(int l) const {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<VectorS> bias(int l) {
    return {params_.data() + offsets_[l] + Eigen::Index(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
  }
  Eigen::Map<const VectorS> bias(int l) const {
    return {params_.data() + offsets_[l] + Eigen::Index(sizes_[l + 1]) * sizes_[l], sizes_[l + 1]};
  }

  bool operator==(const Mlp& o) const {
    return sizes_ == o.sizes_ && activation_ == o.activation_ && params_ == o.params_;
  }

 private:
  std::vector<int> sizes_;
  Activation activation_ = Activation::tanh;
  VectorS params_;
  std::vector<Eigen::Index> offsets_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
template <typename Scalar = double>
Mlp<Scalar> init_mlp(const std::vector<int>& layer_sizes, Activation activation,
                     std::uint64_t seed) {
  Mlp<Scalar> net(layer_sizes, activation);
  Rng rng(seed);
  for (int l = 0; l < net.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(double(layer_sizes[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    auto w = net.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = Scalar(u(rng));
  }
  return net;
}

namespace detail {

template <typename Derived>
void activate(Eigen::MatrixBase<Derived>& z, Activation a) {
  if (a == Activation::tanh)
    z = z.array().tanh().matrix();
  else
    z = z.array().max(typename Derived::Scalar(0)).matrix();
}

}  // namespace detail

/// Batched forward pass; `inputs` holds one sample per column.
template <typename Scalar>
typename Mlp<Scalar>::MatrixS forward_batch(const Mlp<Scalar>& net,
                                            const typename Mlp<Scalar>::MatrixS& inputs) {
  if (inputs.rows() != net.input_size()) {
    throw DomainError("input has " + std::to_string(inputs.rows()) + " rows, network expects " +
                      std::to_string(net.input_size()));
  }
  typename Mlp<Scalar>::MatrixS a = inputs;
  for (int l = 0; l < net.num_layers(); ++l) {
    typename Mlp<Scalar>::MatrixS z = net.weight(l) * a;
    z.colwise() += net.bias(l);
    if (l + 1 < net.num_layers()) detail::activate(z, net.activation());
    a = std::move(z);
  }
  return a;
}

template <typename Scalar>
typename Mlp<Scalar>::VectorS forward(const Mlp<Scalar>& net,
                                      const typename Mlp<Scalar>::VectorS& x) {
  return forward_batch(net, typename Mlp<Scalar>::MatrixS(x)).col(0);
}

template <typename Scalar>
struct LossAndGrad {
  Scalar loss = Scalar(0);
  typename Mlp<Scalar>::VectorS grad;
};

/// loss = (1/n) * sum_{i,j} w_ij (pred_ij - target_ij)^2 with its gradient with
/// respect to every parameter. `weights` has the shape of `targets`; a one-hot
/// column restricts the loss to a single output (Q-learning), a replicated
/// vector gives per-feature weighting.
template <typename Scalar>
LossAndGrad<Scalar> weighted_squared_loss(const Mlp<Scalar>& net,
                                          const typename Mlp<Scalar>::MatrixS& inputs,
                                          const typename Mlp<Scalar>::MatrixS& targets,
                                          const typename Mlp<Scalar>::MatrixS& weights) {
  using MatrixS = typename Mlp<Scalar>::MatrixS;
  if (inputs.rows() != net.input_size()) throw DomainError("input dimension mismatch");
  if (targets.rows() != net.output_size() || targets.cols() != inputs.cols())
    throw DomainError("target shape mismatch");
  if (weights.rows() != targets.rows() || weights.cols() != targets.cols())
    throw DomainError("loss weight shape mismatch");
  const Scalar n = Scalar(std::max<Eigen::Index>(1, inputs.cols()));

  const int layers = net.num_layers();
  std::vector<MatrixS> acts;  // acts[0] = inputs, acts[l+1] = output of layer l
  acts.reserve(layers + 1);
  acts.push_back(inputs);
  for (int l = 0; l < layers; ++l) {
    MatrixS z = net.weight(l) * acts.back();
    z.colwise() += net.bias(l);
    if (l + 1 < layers) detail::activate(z, net.activation());
    acts.push_back(std::move(z));
  }

  const MatrixS diff = acts.back() - targets;
  LossAndGrad<Scalar> out;
  out.loss = (weights.array() * diff.array().square()).sum() / n;

  Mlp<Scalar> grad(net.layer_sizes(), net.activation());
  MatrixS delta = (Scalar(2) / n) * (weights.array() * diff.array()).matrix();
  for (int l = layers - 1; l >= 0; --l) {
    grad.weight(l).noalias() = delta * acts[l].transpose();
    grad.bias(l) = delta.rowwise().sum();
    if (l == 0) break;
    MatrixS back = net.weight(l).transpose() * delta;
    if (net.activation() == Activation::tanh)
      delta = (back.array() * (Scalar(1) - acts[l].array().square())).matrix();
    else
      delta = (back.array() * (acts[l].array() > Scalar(0)).template cast<Scalar>()).matrix();
  }
  out.grad = std::move(grad.parameters());
  return out;
}

/// Per-feature weights `lambda` broadcast over the batch.
template <typename Scalar>
LossAndGrad<Scalar> weighted_squared_loss(const Mlp<Scalar>& net,
                                          const typename Mlp<Scalar>::MatrixS& inputs,
                                          const typename Mlp<Scalar>::MatrixS& targets,
                                          const typename Mlp<Scalar>::VectorS& lambda) {
  if (lambda.size() != net.output_size()) throw DomainError("lambda dimension mismatch");
  if ((lambda.array() < Scalar(0)).any()) throw DomainError("lambda must be non-negative");
  return weighted_squared_loss(net, inputs, targets,
                               typename Mlp<Scalar>::MatrixS(lambda.replicate(1, inputs.cols())));
}

template <typename Scalar>
struct AdamState {
  typename Mlp<Scalar>::VectorS m;
  typename Mlp<Scalar>::VectorS v;
  long step = 0;
  Scalar learning_rate = Scalar(1e-3);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
};

template <typename Scalar>
AdamState<Scalar> make_adam(const Mlp<Scalar>& net, Scalar learning_rate) {
  AdamState<Scalar> s;
  s.m = Mlp<Scalar>::VectorS::Zero(net.parameters().size());
  s.v = s.m;
  s.learning_rate = learning_rate;
  return s;
}

/// Clears both moment accumulators and the bias-correction clock.
template <typename Scalar>
void reset_adam(AdamState<Scalar>& s, Scalar learning_rate) {
  s.m.setZero();
  s.v.setZero();
  s.step = 0;
  s.learning_rate = learning_rate;
}

template <typename Scalar>
void adam_update(Mlp<Scalar>& net, AdamState<Scalar>& s,
                 const typename Mlp<Scalar>::VectorS& grad) {
  if (s.m.size() != grad.size()) throw DomainError("optimizer state does not match network");
  ++s.step;
  s.m = s.beta1 * s.m + (Scalar(1) - s.beta1) * grad;
  s.v = s.beta2 * s.v + (Scalar(1) - s.beta2) * grad.cwiseAbs2();
  const Scalar c1 = Scalar(1) - std::pow(s.beta1, Scalar(s.step));
  const Scalar c2 = Scalar(1) - std::pow(s.beta2, Scalar(s.step));
  net.parameters().array() -=
      s.learning_rate * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.epsilon);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// One Adam step on the weighted squared loss; returns the pre-update loss.
template <typename Scalar>
Scalar train_step(Mlp<Scalar>& net, AdamState<Scalar>& adam,
                  const typename Mlp<Scalar>::MatrixS& inputs,
                  const typename Mlp<Scalar>::MatrixS& targets,
                  const typename Mlp<Scalar>::MatrixS& weights) {
  if (!all_finite(inputs) || !all_finite(targets))
    throw NumericError("non-finite value in training batch");
  auto lg = weighted_squared_loss(net, inputs, targets, weights);
  if (!std::isfinite(double(lg.loss)) || !all_finite(lg.grad))
    throw NumericError("non-finite loss or gradient");
  adam_update(net, adam, lg.grad);
  return lg.loss;
}

template <typename Scalar>
Scalar train_step(Mlp<Scalar>& net, AdamState<Scalar>& adam,
                  const typename Mlp<Scalar>::MatrixS& inputs,
                  const typename Mlp<Scalar>::MatrixS& targets,
                  const typename Mlp<Scalar>::VectorS& lambda) {
  if (lambda.size() != net.output_size()) throw DomainError("lambda dimension mismatch");
  return train_step(net, adam, inputs, targets,
                    typename Mlp<Scalar>::MatrixS(lambda.replicate(1, inputs.cols())));
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  int parameters_checked = 0;
  bool passed = false;
};

/// Compares backprop against central differences (h = 1e-5) on a random
/// subsample of at least `min_params` parameters (all of them if fewer exist).
template <typename Scalar>
GradCheckResult grad_check(const Mlp<Scalar>& net, const typename Mlp<Scalar>::MatrixS& inputs,
                           const typename Mlp<Scalar>::MatrixS& targets,
                           const typename Mlp<Scalar>::MatrixS& weights, double tolerance,
                           Rng& rng, int min_params = 50) {
  const auto analytic = weighted_squared_loss(net, inputs, targets, weights).grad;
  const Eigen::Index total = analytic.size();

  std::vector<Eigen::Index> idx(total);
  for (Eigen::Index i = 0; i < total; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min<Eigen::Index>(total, std::max(min_params, 1)));

  const Scalar h = Scalar(1e-5);
  Mlp<Scalar> probe = net;
  GradCheckResult out;
  for (Eigen::Index i : idx) {
    const Scalar saved = probe.parameters()(i);
    probe.parameters()(i) = saved + h;
    const Scalar up = weighted_squared_loss(probe, inputs, targets, weights).loss;
    probe.parameters()(i) = saved - h;
    const Scalar down = weighted_squared_loss(probe, inputs, targets, weights).loss;
    probe.parameters()(i) = saved;
    const double numeric = double(up - down) / (2.0 * double(h));
    const double a = double(analytic(i));
    const double rel = std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
    out.max_relative_error = std::max(out.max_relative_error, rel);
    ++out.parameters_checked;
  }
  out.passed = out.max_relative_error < tolerance;
  return out;
}

using MlpD = Mlp<double>;
using AdamD = AdamState<double>;

}  // namespace dvfsflow::nn
