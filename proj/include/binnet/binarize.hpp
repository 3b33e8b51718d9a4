#pragma once

#include <cstdint>
#include <vector>

#include "binnet/rng.hpp"
#include "binnet/tensor.hpp"

namespace binnet {

/// Sign binarization: -1 where w <= 0, +1 otherwise.
Tensor binarize_deterministic(const Tensor& w);
void binarize_deterministic_into(const Tensor& w, Tensor& out);

/// Piecewise-linear sigmoid clamp((x + 1) / 2, 0, 1).
Tensor hard_sigmoid(const Tensor& x);
float hard_sigmoid(float x);

/// Per-element draw: +1 with probability hard_sigmoid(w), else -1.
/// Draws consume the stream in flat row-major element order.
Tensor binarize_stochastic(const Tensor& w, Rng& rng);
void binarize_stochastic_into(const Tensor& w, Rng& rng, Tensor& out);

/// Clamp to [-1, +1].
Tensor clip_weights(const Tensor& w);
void clip_weights_inplace(Tensor& w);

/// Row-major bit-packed sign matrix: bit 1 encodes +1, bit 0 encodes -1.
/// Each row occupies ceil(cols / 64) words; pad bits in a row's last word
/// are zero.
struct PackedBinaryMatrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<std::uint64_t> words;

  std::int64_t words_per_row() const { return (cols + 63) / 64; }
  const std::uint64_t* row(std::int64_t r) const {
    return words.data() + r * words_per_row();
  }
  bool operator==(const PackedBinaryMatrix&) const = default;
};

/// Packs a {-1,+1} tensor of rows*cols elements; any other value is a
/// domain error.
PackedBinaryMatrix pack(const Tensor& signs, std::int64_t rows,
                        std::int64_t cols);

/// Exact inverse of pack.
Tensor unpack(const PackedBinaryMatrix& p);

}  // namespace binnet
