#include "binnet/network.hpp"

#include "binnet/common.hpp"

namespace binnet {
namespace {

constexpr std::uint64_t kInitStream = 0x1717;

}  // namespace

Tensor Network::forward(const Tensor& input, const ForwardCtx& ctx,
                        std::vector<Tensor>* acts) {
  if (acts) {
    acts->clear();
    acts->reserve(layers.size());
  }
  Tensor x = input;
  for (auto& layer : layers) {
    Tensor next = layer->forward(x, ctx);
    if (acts) acts->push_back(std::move(x));
    x = std::move(next);
  }
  return x;
}

Tensor Network::backward(const std::vector<Tensor>& acts,
                         const Tensor& grad_logits) {
  if (acts.size() != layers.size())
    throw StateError("network backward: activation stack does not match a "
                     "forward pass");
  Tensor g = grad_logits;
  for (std::size_t k = layers.size(); k-- > 0;)
    g = layers[k]->backward(acts[k], g);
  return g;
}

void Network::refresh_binary(Regularizer reg, Rng& rng) {
  for (auto& layer : layers) layer->refresh_binary(reg, rng);
}

void Network::invalidate_binary() {
  for (auto& layer : layers) layer->invalidate_binary();
}

void Network::zero_grads() {
  for (const ParamSlot& slot : params()) slot.grad->fill(0.0f);
}

std::vector<ParamSlot> Network::params() {
  std::vector<ParamSlot> out;
  for (auto& layer : layers) layer->collect_params(out);
  return out;
}

std::int64_t Network::param_count() {
  std::int64_t n = 0;
  for (const ParamSlot& slot : params()) n += slot.value->numel();
  return n;
}

Network make_preset(const std::string& name, std::uint64_t seed) {
  Rng rng = Rng::derive(seed, kInitStream);
  Network net;
  net.preset = name;
  if (name == "mnist-fc") {
    net.in_channels = 1;
    net.in_height = 28;
    net.in_width = 28;
    net.classes = 10;
    net.layers.push_back(std::make_unique<FlattenLayer>());
    auto d1 = std::make_unique<DenseLayer>(784, 1024);
    d1->init_he(rng);
    net.layers.push_back(std::move(d1));
    net.layers.push_back(std::make_unique<BatchNormLayer>(1024));
    net.layers.push_back(std::make_unique<ReluLayer>());
    auto d2 = std::make_unique<DenseLayer>(1024, 1024);
    d2->init_he(rng);
    net.layers.push_back(std::move(d2));
    net.layers.push_back(std::make_unique<BatchNormLayer>(1024));
    net.layers.push_back(std::make_unique<ReluLayer>());
    auto d3 = std::make_unique<DenseLayer>(1024, 10);
    d3->init_he(rng);
    net.layers.push_back(std::move(d3));
    return net;
  }
  if (name == "cifar10-vgg") {
    net.in_channels = 3;
    net.in_height = 32;
    net.in_width = 32;
    net.classes = 10;
    auto conv_block = [&](std::int64_t in, std::int64_t out) {
      auto conv = std::make_unique<ConvLayer>(in, out, 3, 1, 1);
      conv->init_he(rng);
      net.layers.push_back(std::move(conv));
      net.layers.push_back(std::make_unique<BatchNormLayer>(out));
      net.layers.push_back(std::make_unique<ReluLayer>());
    };
    conv_block(3, 64);
    conv_block(64, 64);
    net.layers.push_back(std::make_unique<MaxPoolLayer>(2, 2));
    conv_block(64, 128);
    conv_block(128, 128);
    net.layers.push_back(std::make_unique<MaxPoolLayer>(2, 2));
    conv_block(128, 256);
    conv_block(256, 256);
    net.layers.push_back(std::make_unique<MaxPoolLayer>(2, 2));
    net.layers.push_back(std::make_unique<FlattenLayer>());
    auto fc1 = std::make_unique<DenseLayer>(256 * 4 * 4, 256);
    fc1->init_he(rng);
    net.layers.push_back(std::move(fc1));
    net.layers.push_back(std::make_unique<BatchNormLayer>(256));
    net.layers.push_back(std::make_unique<ReluLayer>());
    auto fc2 = std::make_unique<DenseLayer>(256, 10);
    fc2->init_he(rng);
    net.layers.push_back(std::move(fc2));
    return net;
  }
  throw DomainError("make_preset: unknown preset '" + name +
                    "' (expected mnist-fc or cifar10-vgg)");
}

}  // namespace binnet
