#pragma once

#include <memory>
#include <string>
#include <vector>

#include "binnet/layers.hpp"

namespace binnet {

/// Ordered stack of layers producing class logits, plus the input geometry
/// it was built for. Parameter state has a single writer (the training
/// loop); forward passes may parallelize internally.
struct Network {
  std::vector<std::unique_ptr<Layer>> layers;
  std::int64_t in_channels = 1;
  std::int64_t in_height = 1;
  std::int64_t in_width = 1;
  std::int64_t classes = 10;
  std::string preset = "custom";

  /// Runs all layers; when acts is given it receives the per-layer inputs
  /// (acts[k] feeds layers[k]) for use by backward.
  Tensor forward(const Tensor& input, const ForwardCtx& ctx,
                 std::vector<Tensor>* acts = nullptr);

  /// Backpropagates the logit gradient through every layer, accumulating
  /// parameter gradients; returns the input gradient.
  Tensor backward(const std::vector<Tensor>& acts, const Tensor& grad_logits);

  void refresh_binary(Regularizer reg, Rng& rng);
  void invalidate_binary();
  void zero_grads();
  std::vector<ParamSlot> params();
  std::int64_t param_count();
};

/// Builds a preset architecture with seeded He initialization.
/// Known presets: "mnist-fc" (flatten, 784-1024-1024-10 with batch norm on
/// the hidden layers) and "cifar10-vgg" (three conv blocks 64/128/256 with
/// pooling, then 256-wide and 10-wide dense layers).
Network make_preset(const std::string& name, std::uint64_t seed);

}  // namespace binnet
