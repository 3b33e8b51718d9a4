#include "binnet/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "binnet/binarize.hpp"
#include "binnet/common.hpp"
#include "binnet/fastpath.hpp"
#include "binnet/parallel.hpp"

namespace binnet {
namespace {

constexpr std::uint64_t kStochStream = 0x570C;
constexpr std::uint64_t kShuffleStreamBase = 0x5AFF0000ULL;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void check_dataset_for_net(const Network& net, const Dataset& ds,
                           const char* which) {
  if (ds.count() == 0)
    throw DomainError(std::string(which) + " dataset is empty");
  if (ds.images.dim(1) != net.in_channels ||
      ds.images.dim(2) != net.in_height || ds.images.dim(3) != net.in_width)
    throw DimensionError(
        std::string(which) + " dataset images are " +
        std::to_string(ds.images.dim(1)) + "x" +
        std::to_string(ds.images.dim(2)) + "x" +
        std::to_string(ds.images.dim(3)) + ", network expects " +
        std::to_string(net.in_channels) + "x" + std::to_string(net.in_height) +
        "x" + std::to_string(net.in_width));
}

}  // namespace

OptState make_opt_state(Network& net, const TrainConfig& cfg) {
  OptState opt;
  opt.eta = cfg.eta0;
  opt.epoch = 0;
  for (const ParamSlot& slot : net.params())
    opt.velocity.emplace_back(slot.value->shape());
  return opt;
}

TrainState TrainState::create(const std::string& preset,
                              const TrainConfig& cfg) {
  return wrap(make_preset(preset, cfg.seed), cfg);
}

TrainState TrainState::wrap(Network net, const TrainConfig& cfg) {
  TrainState st{std::move(net), cfg, OptState{},
                Rng::derive(cfg.seed, kStochStream)};
  st.opt = make_opt_state(st.net, cfg);
  return st;
}

void sgd_momentum_update(Tensor& value, const Tensor& grad, Tensor& velocity,
                         double eta, double momentum) {
  if (!value.same_shape(grad) || !value.same_shape(velocity))
    throw DimensionError("sgd_momentum_update: shape mismatch");
  const float m = static_cast<float>(momentum);
  const float lr = static_cast<float>(eta);
  float* v = velocity.data();
  float* w = value.data();
  const float* g = grad.data();
  parallel_for(value.numel(), [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      v[i] = m * v[i] + g[i];
      w[i] -= lr * v[i];
    }
  });
}

double decay_learning_rate(double eta_prev, int epoch) {
  if (epoch < 1)
    throw DomainError("decay_learning_rate: epoch must be >= 1");
  return eta_prev * std::pow(0.01, static_cast<double>(epoch) / 100.0);
}

double train_minibatch(Network& net, const Tensor& inputs,
                       const std::vector<int>& targets, const TrainConfig& cfg,
                       OptState& opt, Rng& stoch_rng, MinibatchStats* stats) {
  if (inputs.dim(0) < 1) throw DomainError("train_minibatch: empty batch");
  const bool regularized = cfg.regularizer != Regularizer::kNone;
  if (regularized) net.refresh_binary(cfg.regularizer, stoch_rng);

  const ForwardCtx ctx{/*training=*/true,
                       regularized ? WeightMode::kBinary : WeightMode::kReal};
  std::vector<Tensor> acts;
  const Tensor logits = net.forward(inputs, ctx, &acts);
  auto [loss, dlogits] = softmax_cross_entropy(logits, targets);
  if (!std::isfinite(loss))
    throw DivergenceError("training diverged: non-finite loss " +
                          std::to_string(loss));
  if (stats) {
    const auto pred = argmax_rows(logits);
    for (std::size_t i = 0; i < targets.size(); ++i)
      if (pred[i] == targets[i]) ++stats->correct;
  }

  net.zero_grads();
  net.backward(acts, dlogits);

  const auto slots = net.params();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    sgd_momentum_update(*slots[i].value, *slots[i].grad, opt.velocity[i],
                        opt.eta, cfg.momentum);
    if (regularized && slots[i].binarized)
      clip_weights_inplace(*slots[i].value);
  }
  net.invalidate_binary();
  return loss;
}

EvalResult evaluate(Network& net, const Dataset& dataset, WeightMode mode) {
  if (dataset.count() == 0) throw DomainError("evaluate: empty dataset");
  check_dataset_for_net(net, dataset, "evaluation");
  const std::int64_t n = dataset.count();
  const ForwardCtx ctx{/*training=*/false, WeightMode::kReal};
  PackedNet packed;
  if (mode == WeightMode::kBinary) packed = PackedNet::from_network(net);

  Tensor image({1, dataset.images.dim(1), dataset.images.dim(2),
                dataset.images.dim(3)});
  std::vector<int> label(1);
  std::int64_t correct = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::int64_t i = 0; i < n; ++i) {
    gather_batch(dataset, &i, 1, image, label);
    const Tensor logits = mode == WeightMode::kBinary
                              ? packed.forward(image)
                              : net.forward(image, ctx);
    if (argmax_rows(logits)[0] == label[0]) ++correct;
  }
  const double elapsed = seconds_since(t0);
  return {static_cast<double>(correct) / static_cast<double>(n),
          elapsed / static_cast<double>(n)};
}

std::vector<MetricsRecord> train(TrainState& state, const Dataset& train_set,
                                 const Dataset& val_set,
                                 const EpochObserver& observer) {
  Network& net = state.net;
  const TrainConfig& cfg = state.cfg;
  check_dataset_for_net(net, train_set, "training");
  check_dataset_for_net(net, val_set, "validation");

  const std::int64_t n = train_set.count();
  const std::int64_t batch = cfg.batch_size;
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  Tensor inputs;
  std::vector<int> targets;
  std::vector<MetricsRecord> records;

  for (int epoch = state.opt.epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::derive(
        cfg.seed, kShuffleStreamBase + static_cast<std::uint64_t>(epoch));
    for (std::int64_t i = n - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(shuffle_rng.next_below(
                    static_cast<std::uint64_t>(i + 1)))]);

    MinibatchStats stats;
    for (std::int64_t at = 0; at < n; at += batch) {
      const std::int64_t take = std::min<std::int64_t>(batch, n - at);
      gather_batch(train_set, order.data() + at, take, inputs, targets);
      train_minibatch(net, inputs, targets, cfg, state.opt, state.stoch_rng,
                      &stats);
    }
    const double learn_time = seconds_since(t0);

    const WeightMode eval_mode = cfg.regularizer == Regularizer::kNone
                                     ? WeightMode::kReal
                                     : WeightMode::kBinary;
    const EvalResult val = evaluate(net, val_set, eval_mode);

    MetricsRecord rec;
    rec.epoch = epoch + 1;
    rec.learn_time_s = learn_time;
    rec.infer_time_per_image_s = val.time_per_image_s;
    rec.train_acc = static_cast<double>(stats.correct) / static_cast<double>(n);
    rec.val_acc = val.accuracy;
    records.push_back(rec);

    state.opt.eta = decay_learning_rate(state.opt.eta, epoch + 1);
    state.opt.epoch = epoch + 1;
    if (observer) observer(rec);
  }
  return records;
}

}  // namespace binnet
