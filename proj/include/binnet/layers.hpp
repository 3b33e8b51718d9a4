#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "binnet/binarize.hpp"
#include "binnet/rng.hpp"
#include "binnet/tensor.hpp"

namespace binnet {

enum class Regularizer : std::uint8_t { kNone = 0, kDeterministic = 1, kStochastic = 2 };

/// Which weights a forward/backward pass reads: the real-valued parameters
/// or their binarized shadows.
enum class WeightMode : std::uint8_t { kReal = 0, kBinary = 1 };

struct ForwardCtx {
  bool training = false;
  WeightMode weights = WeightMode::kReal;
};

enum class LayerKind : std::uint8_t {
  kDense = 1,
  kConv = 2,
  kBatchNorm = 3,
  kRelu = 4,
  kMaxPool = 5,
  kFlatten = 6,
};

/// View of one trainable parameter tensor and its gradient buffer.
/// Binarized slots take part in weight clipping and shadow binarization.
struct ParamSlot {
  std::string name;
  Tensor* value;
  Tensor* grad;
  bool binarized;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;

  virtual Tensor forward(const Tensor& input, const ForwardCtx& ctx) = 0;

  /// Input gradient for the minibatch last seen by forward; parameter
  /// gradients accumulate into the layer's grad buffers.
  virtual Tensor backward(const Tensor& input, const Tensor& grad_out) = 0;

  virtual void collect_params(std::vector<ParamSlot>& out) { (void)out; }

  /// Rebuilds the layer's binarized weight shadow, if it has one.
  virtual void refresh_binary(Regularizer reg, Rng& rng) {
    (void)reg;
    (void)rng;
  }

  /// Marks the binarized shadow stale after real weights change.
  virtual void invalidate_binary() {}
};

/// Fully connected layer, out = a * W^T + b, with a binarized shadow of W.
class DenseLayer final : public Layer {
 public:
  DenseLayer(std::int64_t in_features, std::int64_t out_features);

  LayerKind kind() const override { return LayerKind::kDense; }
  Tensor forward(const Tensor& input, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& input, const Tensor& grad_out) override;
  void collect_params(std::vector<ParamSlot>& out) override;
  void refresh_binary(Regularizer reg, Rng& rng) override;
  void invalidate_binary() override { wb_fresh_ = false; }

  void init_he(Rng& rng);

  std::int64_t in_features() const { return in_; }
  std::int64_t out_features() const { return out_; }
  Tensor& weights() { return w_; }
  const Tensor& weights() const { return w_; }
  Tensor& bias() { return b_; }
  const Tensor& bias() const { return b_; }
  const Tensor& binary_weights() const { return wb_; }
  bool binary_fresh() const { return wb_fresh_; }
  const Tensor& weight_grad() const { return grad_w_; }
  const Tensor& bias_grad() const { return grad_b_; }

 private:
  const Tensor& active_weights(WeightMode mode) const;

  std::int64_t in_, out_;
  Tensor w_, b_, wb_, grad_w_, grad_b_;
  bool wb_fresh_ = false;
  WeightMode last_mode_ = WeightMode::kReal;
};

/// 2-D convolution layer with binarized kernel shadow. Kernels are stored
/// as [O x C x kh x kw]; forward uses im2col and caches the patch matrices
/// for the backward pass.
class ConvLayer final : public Layer {
 public:
  ConvLayer(std::int64_t in_channels, std::int64_t out_channels,
            std::int64_t kernel, int stride, int pad);

  LayerKind kind() const override { return LayerKind::kConv; }
  Tensor forward(const Tensor& input, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& input, const Tensor& grad_out) override;
  void collect_params(std::vector<ParamSlot>& out) override;
  void refresh_binary(Regularizer reg, Rng& rng) override;
  void invalidate_binary() override { wb_fresh_ = false; }

  void init_he(Rng& rng);

  std::int64_t in_channels() const { return c_; }
  std::int64_t out_channels() const { return o_; }
  std::int64_t kernel() const { return k_; }
  int stride() const { return stride_; }
  int pad() const { return pad_; }
  Tensor& kernels() { return w_; }
  const Tensor& kernels() const { return w_; }
  Tensor& bias() { return b_; }
  const Tensor& bias() const { return b_; }
  const Tensor& binary_kernels() const { return wb_; }
  bool binary_fresh() const { return wb_fresh_; }

 private:
  const Tensor& active_weights(WeightMode mode) const;

  std::int64_t c_, o_, k_;
  int stride_, pad_;
  Tensor w_, b_, wb_, grad_w_, grad_b_;
  Tensor cols_;  // cached im2col patches, [N x K x P]
  bool wb_fresh_ = false;
  WeightMode last_mode_ = WeightMode::kReal;
};

/// Per-channel batch normalization. Accepts [N x C] or [N x C x H x W];
/// normalization statistics reduce over every axis except the channel one.
class BatchNormLayer final : public Layer {
 public:
  explicit BatchNormLayer(std::int64_t channels, float eps = 1e-5f,
                          float momentum = 0.1f);

  LayerKind kind() const override { return LayerKind::kBatchNorm; }
  Tensor forward(const Tensor& input, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& input, const Tensor& grad_out) override;
  void collect_params(std::vector<ParamSlot>& out) override;

  std::int64_t channels() const { return channels_; }
  float eps() const { return eps_; }
  float momentum() const { return momentum_; }
  Tensor& gamma() { return gamma_; }
  Tensor& beta() { return beta_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }

 private:
  std::int64_t channels_;
  float eps_, momentum_;
  Tensor gamma_, beta_, running_mean_, running_var_;
  Tensor grad_gamma_, grad_beta_;
  Tensor xhat_, inv_std_;  // training-pass caches
  std::int64_t group_ = 0;
};

class ReluLayer final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kRelu; }
  Tensor forward(const Tensor& input, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& input, const Tensor& grad_out) override;
};

/// Max pooling over square windows; gradient routes to the first (lowest
/// linear index) maximum of each window.
class MaxPoolLayer final : public Layer {
 public:
  MaxPoolLayer(int window, int stride);

  LayerKind kind() const override { return LayerKind::kMaxPool; }
  Tensor forward(const Tensor& input, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& input, const Tensor& grad_out) override;

  int window() const { return window_; }
  int stride() const { return stride_; }

 private:
  int window_, stride_;
  std::vector<std::int64_t> argmax_;  // input offsets per output element
};

/// Collapses [N x C x H x W] to [N x C*H*W].
class FlattenLayer final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kFlatten; }
  Tensor forward(const Tensor& input, const ForwardCtx& ctx) override;
  Tensor backward(const Tensor& input, const Tensor& grad_out) override;
};

/// Mean cross-entropy over the batch with a numerically stabilized softmax.
/// Returns the loss and d(loss)/d(logits) = (softmax - onehot) / batch.
std::pair<double, Tensor> softmax_cross_entropy(
    const Tensor& logits, const std::vector<int>& targets);

/// Zero-mean normal init with std = sqrt(2 / fan_in); fan_in is the product
/// of every extent except the first.
Tensor he_init(const std::vector<std::int64_t>& shape, Rng& rng);

}  // namespace binnet
