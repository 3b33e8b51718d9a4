#include "binnet/binarize.hpp"

#include <string>

#include "binnet/common.hpp"
#include "binnet/parallel.hpp"

namespace binnet {

void binarize_deterministic_into(const Tensor& w, Tensor& out) {
  if (!w.same_shape(out)) out = Tensor(w.shape());
  const float* src = w.data();
  float* dst = out.data();
  parallel_for(w.numel(), [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i)
      dst[i] = src[i] <= 0.0f ? -1.0f : 1.0f;
  });
}

Tensor binarize_deterministic(const Tensor& w) {
  Tensor out(w.shape());
  binarize_deterministic_into(w, out);
  return out;
}

float hard_sigmoid(float x) {
  float v = (x + 1.0f) * 0.5f;
  if (v < 0.0f) v = 0.0f;
  if (v > 1.0f) v = 1.0f;
  return v;
}

Tensor hard_sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  const float* src = x.data();
  float* dst = out.data();
  for (std::int64_t i = 0; i < x.numel(); ++i) dst[i] = hard_sigmoid(src[i]);
  return out;
}

void binarize_stochastic_into(const Tensor& w, Rng& rng, Tensor& out) {
  if (!w.same_shape(out)) out = Tensor(w.shape());
  const float* src = w.data();
  float* dst = out.data();
  const Rng base = rng;
  // Element i always uses draw i of the stream, so chunked execution
  // reproduces the sequential order exactly.
  parallel_for(w.numel(), [&](std::int64_t lo, std::int64_t hi) {
    Rng local = base;
    local.skip(static_cast<std::uint64_t>(lo));
    for (std::int64_t i = lo; i < hi; ++i) {
      const float p = hard_sigmoid(src[i]);
      dst[i] = local.next_float() < p ? 1.0f : -1.0f;
    }
  });
  rng.skip(static_cast<std::uint64_t>(w.numel()));
}

Tensor binarize_stochastic(const Tensor& w, Rng& rng) {
  Tensor out(w.shape());
  binarize_stochastic_into(w, rng, out);
  return out;
}

void clip_weights_inplace(Tensor& w) {
  float* p = w.data();
  parallel_for(w.numel(), [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      float v = p[i];
      if (v > 1.0f) v = 1.0f;
      if (v < -1.0f) v = -1.0f;
      p[i] = v;
    }
  });
}

Tensor clip_weights(const Tensor& w) {
  Tensor out = w;
  clip_weights_inplace(out);
  return out;
}

PackedBinaryMatrix pack(const Tensor& signs, std::int64_t rows,
                        std::int64_t cols) {
  if (signs.numel() != rows * cols)
    throw DimensionError("pack: tensor holds " + std::to_string(signs.numel()) +
                         " values, expected " + std::to_string(rows * cols));
  PackedBinaryMatrix p;
  p.rows = rows;
  p.cols = cols;
  const std::int64_t wpr = p.words_per_row();
  p.words.assign(static_cast<std::size_t>(rows * wpr), 0);
  const float* src = signs.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    std::uint64_t* out = p.words.data() + r * wpr;
    for (std::int64_t c = 0; c < cols; ++c) {
      const float v = src[r * cols + c];
      if (v == 1.0f) {
        out[c >> 6] |= 1ULL << (c & 63);
      } else if (v != -1.0f) {
        throw DomainError("pack: entry at (" + std::to_string(r) + "," +
                          std::to_string(c) + ") is " + std::to_string(v) +
                          ", expected exactly -1 or +1");
      }
    }
  }
  return p;
}

Tensor unpack(const PackedBinaryMatrix& p) {
  Tensor out({p.rows, p.cols});
  float* dst = out.data();
  const std::int64_t wpr = p.words_per_row();
  for (std::int64_t r = 0; r < p.rows; ++r) {
    const std::uint64_t* row = p.words.data() + r * wpr;
    for (std::int64_t c = 0; c < p.cols; ++c)
      dst[r * p.cols + c] = (row[c >> 6] >> (c & 63)) & 1 ? 1.0f : -1.0f;
  }
  return out;
}

}  // namespace binnet
