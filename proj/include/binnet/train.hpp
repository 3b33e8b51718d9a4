#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "binnet/data_io.hpp"
#include "binnet/network.hpp"
#include "binnet/rng.hpp"

namespace binnet {

struct TrainConfig {
  Regularizer regularizer = Regularizer::kNone;
  double eta0 = 0.001;
  double momentum = 0.9;
  int batch_size = 4;
  int epochs = 0;
  std::uint64_t seed = 0;
};

/// Optimizer state: one velocity tensor per parameter (in Network::params()
/// order), the current epoch index and the current learning rate.
struct OptState {
  std::vector<Tensor> velocity;
  int epoch = 0;
  double eta = 0.001;
};

OptState make_opt_state(Network& net, const TrainConfig& cfg);

/// One row of the per-epoch metrics table.
struct MetricsRecord {
  int epoch = 0;
  double learn_time_s = 0.0;
  double infer_time_per_image_s = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

/// Everything a run needs to continue: the network, its configuration,
/// optimizer state and the stochastic-binarization stream.
struct TrainState {
  Network net;
  TrainConfig cfg;
  OptState opt;
  Rng stoch_rng;

  static TrainState create(const std::string& preset, const TrainConfig& cfg);

  /// Wraps an already-built network (custom architectures, tests).
  static TrainState wrap(Network net, const TrainConfig& cfg);
};

/// Heavy-ball step: v' = momentum * v + grad; value' = value - eta * v'.
void sgd_momentum_update(Tensor& value, const Tensor& grad, Tensor& velocity,
                         double eta, double momentum);

/// Compounding per-epoch decay: eta[epoch] = eta[epoch-1] * 0.01^(epoch/100).
double decay_learning_rate(double eta_prev, int epoch);

struct MinibatchStats {
  int correct = 0;
};

/// One optimization step: refresh binarized shadows per the regularizer,
/// forward, backward through the same shadows, momentum update, then clip
/// weights back into [-1, +1] (regularized modes only). Returns the batch
/// loss; a non-finite loss aborts with DivergenceError before any update.
double train_minibatch(Network& net, const Tensor& inputs,
                       const std::vector<int>& targets, const TrainConfig& cfg,
                       OptState& opt, Rng& stoch_rng,
                       MinibatchStats* stats = nullptr);

struct EvalResult {
  double accuracy = 0.0;
  double time_per_image_s = 0.0;
};

/// Batch-1 inference over the whole dataset. kBinary runs the bit-packed
/// fast path over the deterministic binarization of the stored weights;
/// kReal runs the full-precision layers.
EvalResult evaluate(Network& net, const Dataset& dataset, WeightMode mode);

using EpochObserver = std::function<void(const MetricsRecord&)>;

/// Runs epochs [opt.epoch, cfg.epochs): seeded reshuffle each epoch,
/// minibatch steps, per-epoch validation and learning-rate decay. The
/// observer fires after each completed epoch (it keeps partial results
/// reachable if a later epoch diverges).
std::vector<MetricsRecord> train(TrainState& state, const Dataset& train_set,
                                 const Dataset& val_set,
                                 const EpochObserver& observer = {});

}  // namespace binnet
