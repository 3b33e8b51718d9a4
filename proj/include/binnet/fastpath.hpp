#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "binnet/binarize.hpp"
#include "binnet/network.hpp"
#include "binnet/tensor.hpp"

namespace binnet {

/// Dense layer in inference form: bit-packed sign weights plus real bias.
/// With real activations, a row's product reduces to additions:
///   out = 2 * (sum over +1 taps) - (sum over all taps) + bias.
struct PackedDense {
  PackedBinaryMatrix wb_packed;            // [out x in]
  Tensor bias;                             // [out]
  std::vector<std::int64_t> row_popcounts; // +1 count per output row
};

/// Builds a PackedDense from a {-1,+1} weight matrix.
PackedDense make_packed_dense(const Tensor& signs, const Tensor& bias);

/// out[n, j] = sum_{i: bit set} a[n, i] - sum_{i: bit clear} a[n, i] + b[j].
Tensor binary_dense_forward(const PackedDense& layer, const Tensor& a);

/// Pack-time acceleration structure for the accumulate kernel: +1 tap
/// positions per (row, k-panel), panel-local, shared by every column tile.
struct BinaryTapPlan {
  std::int64_t panels = 0;
  std::vector<std::uint16_t> taps;
  std::vector<std::int64_t> start;  // rows * panels + 1 slice offsets
};

BinaryTapPlan make_tap_plan(const PackedBinaryMatrix& packed);

/// Convolution kernels in packed sign form, flattened to [O x C*kh*kw].
struct PackedConv {
  PackedBinaryMatrix wb_packed;
  BinaryTapPlan plan;
  Tensor bias;
  std::int64_t out_channels = 0, in_channels = 0, kh = 0, kw = 0;
  int stride = 1, pad = 0;
};

PackedConv make_packed_conv(const Tensor& sign_kernels, const Tensor& bias,
                            int stride, int pad);

/// im2col followed by the binary accumulate kernel; matches conv2d with the
/// unpacked sign kernels up to summation order.
Tensor binary_conv_forward(const PackedConv& layer, const Tensor& input);

/// Core shared by the dense and convolution fast paths:
/// out[O x P] = signs(packed[O x K]) * col[K x P] + bias, computed as
/// 2 * masked row sums minus the per-column totals.
void binary_accumulate(const PackedBinaryMatrix& packed,
                       const BinaryTapPlan& plan, const float* col,
                       std::int64_t p, const float* bias, float* out);
void binary_accumulate(const PackedBinaryMatrix& packed, const float* col,
                       std::int64_t p, const float* bias, float* out);

/// Whole-network inference over packed sign weights. Batch norm folds its
/// running statistics into per-channel scale/shift; dense and conv layers
/// use the deterministic binarization of their stored real weights.
class PackedNet {
 public:
  static PackedNet from_network(Network& net);
  Tensor forward(const Tensor& input) const;

 private:
  struct Item {
    LayerKind kind;
    PackedDense dense;
    PackedConv conv;
    Tensor scale, shift;  // folded batch norm
    int window = 0, stride = 0;
  };
  std::vector<Item> items_;
};

}  // namespace binnet
