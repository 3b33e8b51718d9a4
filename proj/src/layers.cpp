#include "binnet/layers.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "binnet/common.hpp"
#include "binnet/parallel.hpp"

namespace binnet {
namespace {

void add_row_bias(Tensor& rows, const Tensor& bias) {
  const std::int64_t n = rows.dim(0), cols = rows.dim(1);
  float* p = rows.data();
  const float* b = bias.data();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < cols; ++j) p[i * cols + j] += b[j];
}

}  // namespace

// ---- DenseLayer ------------------------------------------------------------

DenseLayer::DenseLayer(std::int64_t in_features, std::int64_t out_features)
    : in_(in_features),
      out_(out_features),
      w_({out_features, in_features}),
      b_({out_features}),
      wb_({out_features, in_features}),
      grad_w_({out_features, in_features}),
      grad_b_({out_features}) {}

void DenseLayer::init_he(Rng& rng) {
  w_ = he_init({out_, in_}, rng);
  b_.fill(0.0f);
  wb_fresh_ = false;
}

const Tensor& DenseLayer::active_weights(WeightMode mode) const {
  if (mode == WeightMode::kReal) return w_;
  if (!wb_fresh_)
    throw StateError("dense: binarized weights are stale; refresh_binary "
                     "must run after every weight update");
  return wb_;
}

Tensor DenseLayer::forward(const Tensor& input, const ForwardCtx& ctx) {
  if (input.ndim() != 2 || input.dim(1) != in_)
    throw DimensionError("dense: input must be [batch x " +
                         std::to_string(in_) + "]");
  last_mode_ = ctx.weights;
  Tensor out = matmul_nt(input, active_weights(ctx.weights));
  add_row_bias(out, b_);
  return out;
}

Tensor DenseLayer::backward(const Tensor& input, const Tensor& grad_out) {
  if (grad_out.ndim() != 2 || grad_out.dim(1) != out_ ||
      grad_out.dim(0) != input.dim(0))
    throw DimensionError("dense backward: gradient must be [batch x " +
                         std::to_string(out_) + "]");
  const Tensor& weights = active_weights(last_mode_);
  // dW += dOut^T * a_prev, dB += column sums, dA = dOut * W.
  gemm_tn(grad_out.data(), input.data(), grad_w_.data(), grad_out.dim(0),
          out_, in_, true);
  const float* g = grad_out.data();
  float* gb = grad_b_.data();
  for (std::int64_t n = 0; n < grad_out.dim(0); ++n)
    for (std::int64_t j = 0; j < out_; ++j) gb[j] += g[n * out_ + j];
  Tensor grad_in({input.dim(0), in_});
  gemm_nn(grad_out.data(), weights.data(), grad_in.data(), grad_out.dim(0),
          out_, in_, false);
  return grad_in;
}

void DenseLayer::collect_params(std::vector<ParamSlot>& out) {
  out.push_back({"w", &w_, &grad_w_, true});
  out.push_back({"b", &b_, &grad_b_, false});
}

void DenseLayer::refresh_binary(Regularizer reg, Rng& rng) {
  if (reg == Regularizer::kDeterministic) {
    binarize_deterministic_into(w_, wb_);
  } else if (reg == Regularizer::kStochastic) {
    binarize_stochastic_into(w_, rng, wb_);
  } else {
    return;
  }
  wb_fresh_ = true;
}

// ---- ConvLayer -------------------------------------------------------------

ConvLayer::ConvLayer(std::int64_t in_channels, std::int64_t out_channels,
                     std::int64_t kernel, int stride, int pad)
    : c_(in_channels),
      o_(out_channels),
      k_(kernel),
      stride_(stride),
      pad_(pad),
      w_({out_channels, in_channels, kernel, kernel}),
      b_({out_channels}),
      wb_({out_channels, in_channels, kernel, kernel}),
      grad_w_({out_channels, in_channels, kernel, kernel}),
      grad_b_({out_channels}) {}

void ConvLayer::init_he(Rng& rng) {
  w_ = he_init({o_, c_, k_, k_}, rng);
  b_.fill(0.0f);
  wb_fresh_ = false;
}

const Tensor& ConvLayer::active_weights(WeightMode mode) const {
  if (mode == WeightMode::kReal) return w_;
  if (!wb_fresh_)
    throw StateError("conv: binarized kernels are stale; refresh_binary "
                     "must run after every weight update");
  return wb_;
}

Tensor ConvLayer::forward(const Tensor& input, const ForwardCtx& ctx) {
  if (input.ndim() != 4 || input.dim(1) != c_)
    throw DimensionError("conv: input must be [N x " + std::to_string(c_) +
                         " x H x W]");
  last_mode_ = ctx.weights;
  const Tensor& weights = active_weights(ctx.weights);
  const std::int64_t N = input.dim(0);
  const auto [oh, ow] = conv2d_output_extents(input.dim(2), input.dim(3), k_,
                                              k_, stride_, pad_);
  const std::int64_t K = c_ * k_ * k_;
  const std::int64_t P = oh * ow;
  if (cols_.numel() != N * K * P) cols_ = Tensor({N, K, P});
  Tensor out({N, o_, oh, ow});
  for (std::int64_t n = 0; n < N; ++n) {
    float* col = cols_.data() + n * K * P;
    im2col(input, n, k_, k_, stride_, pad_, col);
    gemm_nn(weights.data(), col, out.data() + n * o_ * P, o_, K, P, false);
  }
  const float* bias = b_.data();
  float* o = out.data();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t j = 0; j < o_; ++j) {
      const float bj = bias[j];
      float* row = o + (n * o_ + j) * P;
      for (std::int64_t p = 0; p < P; ++p) row[p] += bj;
    }
  return out;
}

Tensor ConvLayer::backward(const Tensor& input, const Tensor& grad_out) {
  const std::int64_t N = input.dim(0);
  const auto [oh, ow] = conv2d_output_extents(input.dim(2), input.dim(3), k_,
                                              k_, stride_, pad_);
  const std::int64_t K = c_ * k_ * k_;
  const std::int64_t P = oh * ow;
  if (grad_out.ndim() != 4 || grad_out.dim(0) != N || grad_out.dim(1) != o_ ||
      grad_out.dim(2) != oh || grad_out.dim(3) != ow)
    throw DimensionError("conv backward: gradient shape mismatch");
  if (cols_.numel() != N * K * P)
    throw StateError("conv backward: no cached forward pass for this input");
  const Tensor& weights = active_weights(last_mode_);

  Tensor grad_in(input.shape());
  Tensor dcol({K, P});
  FloatBuffer col_t(static_cast<std::size_t>(K * P));
  const float* g = grad_out.data();
  float* gb = grad_b_.data();
  for (std::int64_t n = 0; n < N; ++n) {
    const float* gslice = g + n * o_ * P;
    const float* col = cols_.data() + n * K * P;
    // dW += dOut_n * col_n^T, done as a plain product against the
    // transposed patch matrix (faster than strided dot products).
    transpose(col, col_t.data(), K, P);
    gemm_nn(gslice, col_t.data(), grad_w_.data(), o_, P, K, true);
    for (std::int64_t j = 0; j < o_; ++j) {
      float s = 0.0f;
      for (std::int64_t p = 0; p < P; ++p) s += gslice[j * P + p];
      gb[j] += s;
    }
    // dX_n = col2im(W^T * dOut_n).
    gemm_tn(weights.data(), gslice, dcol.data(), o_, K, P, false);
    col2im(dcol.data(), k_, k_, stride_, pad_, grad_in, n);
  }
  return grad_in;
}

void ConvLayer::collect_params(std::vector<ParamSlot>& out) {
  out.push_back({"w", &w_, &grad_w_, true});
  out.push_back({"b", &b_, &grad_b_, false});
}

void ConvLayer::refresh_binary(Regularizer reg, Rng& rng) {
  if (reg == Regularizer::kDeterministic) {
    binarize_deterministic_into(w_, wb_);
  } else if (reg == Regularizer::kStochastic) {
    binarize_stochastic_into(w_, rng, wb_);
  } else {
    return;
  }
  wb_fresh_ = true;
}

// ---- BatchNormLayer --------------------------------------------------------

BatchNormLayer::BatchNormLayer(std::int64_t channels, float eps,
                               float momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_(Tensor::full({channels}, 1.0f)),
      beta_({channels}),
      running_mean_({channels}),
      running_var_(Tensor::full({channels}, 1.0f)),
      grad_gamma_({channels}),
      grad_beta_({channels}),
      inv_std_({channels}) {}

Tensor BatchNormLayer::forward(const Tensor& input, const ForwardCtx& ctx) {
  if (input.ndim() != 2 && input.ndim() != 4)
    throw DimensionError("batchnorm: input must be 2-D or 4-D");
  if (input.dim(1) != channels_)
    throw DimensionError("batchnorm: expected " + std::to_string(channels_) +
                         " channels, got " + std::to_string(input.dim(1)));
  const std::int64_t N = input.dim(0);
  const std::int64_t spatial = input.ndim() == 4 ? input.dim(2) * input.dim(3) : 1;
  const std::int64_t group = N * spatial;
  Tensor out(input.shape());

  if (!ctx.training) {
    parallel_for(channels_, [&](std::int64_t clo, std::int64_t chi) {
      for (std::int64_t c = clo; c < chi; ++c) {
        const float scale =
            gamma_[c] / std::sqrt(running_var_[c] + eps_);
        const float shift = beta_[c] - scale * running_mean_[c];
        for (std::int64_t n = 0; n < N; ++n) {
          const float* src = input.data() + (n * channels_ + c) * spatial;
          float* dst = out.data() + (n * channels_ + c) * spatial;
          for (std::int64_t s = 0; s < spatial; ++s)
            dst[s] = src[s] * scale + shift;
        }
      }
    });
    return out;
  }

  if (N < 2)
    throw DomainError("batchnorm: training mode requires batch size >= 2");
  if (xhat_.numel() != input.numel()) xhat_ = Tensor(input.shape());
  group_ = group;
  parallel_for(channels_, [&](std::int64_t clo, std::int64_t chi) {
    for (std::int64_t c = clo; c < chi; ++c) {
      double sum = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const float* src = input.data() + (n * channels_ + c) * spatial;
        for (std::int64_t s = 0; s < spatial; ++s) sum += src[s];
      }
      const float mean = static_cast<float>(sum / static_cast<double>(group));
      double sq = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const float* src = input.data() + (n * channels_ + c) * spatial;
        for (std::int64_t s = 0; s < spatial; ++s) {
          const double d = src[s] - mean;
          sq += d * d;
        }
      }
      const float var = static_cast<float>(sq / static_cast<double>(group));
      const float istd = 1.0f / std::sqrt(var + eps_);
      inv_std_[c] = istd;
      const float g = gamma_[c], bt = beta_[c];
      for (std::int64_t n = 0; n < N; ++n) {
        const float* src = input.data() + (n * channels_ + c) * spatial;
        float* xh = xhat_.data() + (n * channels_ + c) * spatial;
        float* dst = out.data() + (n * channels_ + c) * spatial;
        for (std::int64_t s = 0; s < spatial; ++s) {
          const float h = (src[s] - mean) * istd;
          xh[s] = h;
          dst[s] = g * h + bt;
        }
      }
      // Running stats use the unbiased variance estimate.
      const float unbiased =
          group > 1 ? var * static_cast<float>(group) /
                          static_cast<float>(group - 1)
                    : var;
      running_mean_[c] = (1.0f - momentum_) * running_mean_[c] + momentum_ * mean;
      running_var_[c] = (1.0f - momentum_) * running_var_[c] + momentum_ * unbiased;
    }
  });
  return out;
}

Tensor BatchNormLayer::backward(const Tensor& input, const Tensor& grad_out) {
  if (!grad_out.same_shape(input))
    throw DimensionError("batchnorm backward: gradient shape mismatch");
  if (xhat_.numel() != input.numel() || group_ == 0)
    throw StateError("batchnorm backward: no cached training forward pass");
  const std::int64_t N = input.dim(0);
  const std::int64_t spatial = input.ndim() == 4 ? input.dim(2) * input.dim(3) : 1;
  Tensor grad_in(input.shape());
  const float invm = 1.0f / static_cast<float>(group_);
  parallel_for(channels_, [&](std::int64_t clo, std::int64_t chi) {
    for (std::int64_t c = clo; c < chi; ++c) {
      double dg = 0.0, db = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const float* go = grad_out.data() + (n * channels_ + c) * spatial;
        const float* xh = xhat_.data() + (n * channels_ + c) * spatial;
        for (std::int64_t s = 0; s < spatial; ++s) {
          dg += static_cast<double>(go[s]) * xh[s];
          db += go[s];
        }
      }
      grad_gamma_[c] += static_cast<float>(dg);
      grad_beta_[c] += static_cast<float>(db);
      const float k = gamma_[c] * inv_std_[c];
      const float mean_db = static_cast<float>(db) * invm;
      const float mean_dg = static_cast<float>(dg) * invm;
      for (std::int64_t n = 0; n < N; ++n) {
        const float* go = grad_out.data() + (n * channels_ + c) * spatial;
        const float* xh = xhat_.data() + (n * channels_ + c) * spatial;
        float* gi = grad_in.data() + (n * channels_ + c) * spatial;
        for (std::int64_t s = 0; s < spatial; ++s)
          gi[s] = k * (go[s] - mean_db - xh[s] * mean_dg);
      }
    }
  });
  return grad_in;
}

void BatchNormLayer::collect_params(std::vector<ParamSlot>& out) {
  out.push_back({"gamma", &gamma_, &grad_gamma_, false});
  out.push_back({"beta", &beta_, &grad_beta_, false});
}

// ---- ReluLayer -------------------------------------------------------------

Tensor ReluLayer::forward(const Tensor& input, const ForwardCtx&) {
  Tensor out(input.shape());
  const float* src = input.data();
  float* dst = out.data();
  parallel_for(input.numel(), [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i)
      dst[i] = src[i] > 0.0f ? src[i] : 0.0f;
  });
  return out;
}

Tensor ReluLayer::backward(const Tensor& input, const Tensor& grad_out) {
  if (!grad_out.same_shape(input))
    throw DimensionError("relu backward: gradient shape mismatch");
  Tensor grad_in(input.shape());
  const float* src = input.data();
  const float* go = grad_out.data();
  float* gi = grad_in.data();
  parallel_for(input.numel(), [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i)
      gi[i] = src[i] > 0.0f ? go[i] : 0.0f;
  });
  return grad_in;
}

// ---- MaxPoolLayer ----------------------------------------------------------

MaxPoolLayer::MaxPoolLayer(int window, int stride)
    : window_(window), stride_(stride) {
  if (window < 1 || stride < 1)
    throw DimensionError("maxpool: window and stride must be >= 1");
}

Tensor MaxPoolLayer::forward(const Tensor& input, const ForwardCtx&) {
  if (input.ndim() != 4) throw DimensionError("maxpool: input must be 4-D");
  const std::int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                     W = input.dim(3);
  if (window_ > H || window_ > W)
    throw DimensionError("maxpool: window exceeds input extents");
  if ((H - window_) % stride_ != 0 || (W - window_) % stride_ != 0)
    throw DimensionError("maxpool: output extents are not integral");
  const std::int64_t oh = (H - window_) / stride_ + 1;
  const std::int64_t ow = (W - window_) / stride_ + 1;
  Tensor out({N, C, oh, ow});
  argmax_.assign(static_cast<std::size_t>(N * C * oh * ow), 0);
  parallel_for(N * C, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t nc = lo; nc < hi; ++nc) {
      const float* plane = input.data() + nc * H * W;
      float* dst = out.data() + nc * oh * ow;
      std::int64_t* amax = argmax_.data() + nc * oh * ow;
      for (std::int64_t oy = 0; oy < oh; ++oy) {
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          std::int64_t best = (oy * stride_) * W + ox * stride_;
          float best_v = plane[best];
          for (std::int64_t ky = 0; ky < window_; ++ky) {
            for (std::int64_t kx = 0; kx < window_; ++kx) {
              const std::int64_t idx =
                  (oy * stride_ + ky) * W + ox * stride_ + kx;
              if (plane[idx] > best_v) {  // strict: ties keep first index
                best_v = plane[idx];
                best = idx;
              }
            }
          }
          dst[oy * ow + ox] = best_v;
          amax[oy * ow + ox] = best;
        }
      }
    }
  });
  return out;
}

Tensor MaxPoolLayer::backward(const Tensor& input, const Tensor& grad_out) {
  const std::int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                     W = input.dim(3);
  const std::int64_t oh = grad_out.dim(2), ow = grad_out.dim(3);
  if (argmax_.size() != static_cast<std::size_t>(N * C * oh * ow))
    throw StateError("maxpool backward: no cached forward pass");
  Tensor grad_in(input.shape());
  parallel_for(N * C, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t nc = lo; nc < hi; ++nc) {
      const float* go = grad_out.data() + nc * oh * ow;
      const std::int64_t* amax = argmax_.data() + nc * oh * ow;
      float* gi = grad_in.data() + nc * H * W;
      for (std::int64_t p = 0; p < oh * ow; ++p) gi[amax[p]] += go[p];
    }
  });
  return grad_in;
}

// ---- FlattenLayer ----------------------------------------------------------

Tensor FlattenLayer::forward(const Tensor& input, const ForwardCtx&) {
  if (input.ndim() < 2) throw DimensionError("flatten: input must be >= 2-D");
  std::int64_t rest = 1;
  for (int d = 1; d < input.ndim(); ++d) rest *= input.dim(d);
  return input.reshaped({input.dim(0), rest});
}

Tensor FlattenLayer::backward(const Tensor& input, const Tensor& grad_out) {
  if (grad_out.numel() != input.numel())
    throw DimensionError("flatten backward: gradient size mismatch");
  return grad_out.reshaped(input.shape());
}

// ---- loss ------------------------------------------------------------------

std::pair<double, Tensor> softmax_cross_entropy(
    const Tensor& logits, const std::vector<int>& targets) {
  if (logits.ndim() != 2)
    throw DimensionError("softmax_cross_entropy: logits must be 2-D");
  const std::int64_t batch = logits.dim(0), classes = logits.dim(1);
  if (static_cast<std::int64_t>(targets.size()) != batch)
    throw DimensionError("softmax_cross_entropy: one target per batch row");
  for (int t : targets)
    if (t < 0 || t >= classes)
      throw DomainError("softmax_cross_entropy: target " + std::to_string(t) +
                        " outside [0, " + std::to_string(classes) + ")");
  Tensor dlogits({batch, classes});
  double loss = 0.0;
  const float inv_batch = 1.0f / static_cast<float>(batch);
  for (std::int64_t n = 0; n < batch; ++n) {
    const float* row = logits.data() + n * classes;
    float mx = row[0];
    for (std::int64_t j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::int64_t j = 0; j < classes; ++j)
      denom += std::exp(static_cast<double>(row[j] - mx));
    const double log_denom = std::log(denom);
    const int t = targets[static_cast<std::size_t>(n)];
    loss += log_denom - static_cast<double>(row[t] - mx);
    float* drow = dlogits.data() + n * classes;
    for (std::int64_t j = 0; j < classes; ++j) {
      const double p = std::exp(static_cast<double>(row[j] - mx)) / denom;
      drow[j] = static_cast<float>(p) * inv_batch;
    }
    drow[t] -= inv_batch;
  }
  return {loss / static_cast<double>(batch), std::move(dlogits)};
}

Tensor he_init(const std::vector<std::int64_t>& shape, Rng& rng) {
  Tensor out(shape);
  std::int64_t fan_in = 1;
  for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
  if (fan_in < 1) throw DomainError("he_init: fan-in must be >= 1");
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  float* p = out.data();
  for (std::int64_t i = 0; i < out.numel(); ++i)
    p[i] = static_cast<float>(stddev * rng.next_normal());
  return out;
}

}  // namespace binnet
