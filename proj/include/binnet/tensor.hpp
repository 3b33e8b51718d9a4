#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "binnet/common.hpp"

namespace binnet {

using FloatBuffer = std::vector<float, AlignedAllocator<float>>;

/// Batch/channel/height/width extents of an image tensor.
struct Shape4 {
  std::int64_t n = 1;
  std::int64_t c = 1;
  std::int64_t h = 1;
  std::int64_t w = 1;

  std::int64_t numel() const { return n * c * h * w; }
  bool operator==(const Shape4&) const = default;
};

/// Dense row-major tensor of 32-bit floats.
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor; every extent must be >= 1.
  explicit Tensor(std::vector<std::int64_t> shape);

  static Tensor zeros(std::vector<std::int64_t> shape) {
    return Tensor(std::move(shape));
  }
  static Tensor full(std::vector<std::int64_t> shape, float value);
  static Tensor from_data(std::vector<std::int64_t> shape,
                          std::vector<float> data);

  const std::vector<std::int64_t>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  /// 2-D indexing (row-major).
  float& at(std::int64_t i, std::int64_t j) {
    return data_[static_cast<std::size_t>(i * shape_[1] + j)];
  }
  float at(std::int64_t i, std::int64_t j) const {
    return data_[static_cast<std::size_t>(i * shape_[1] + j)];
  }

  /// 4-D indexing (NCHW).
  float& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    return data_[static_cast<std::size_t>(
        ((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  float at(std::int64_t n, std::int64_t c, std::int64_t h,
           std::int64_t w) const {
    return data_[static_cast<std::size_t>(
        ((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }

  /// Same data under a new shape with equal element count.
  Tensor reshaped(std::vector<std::int64_t> new_shape) const&;
  Tensor reshaped(std::vector<std::int64_t> new_shape) &&;

  void fill(float value);
  bool all_finite() const;

 private:
  std::vector<std::int64_t> shape_;
  FloatBuffer data_;
};

// ---- matrix products ------------------------------------------------------

/// C[M x N] = A[M x K] * B[K x N].
Tensor matmul(const Tensor& a, const Tensor& b);
/// C[M x N] = A[M x K] * B[N x K]^T (both operands row-major).
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// C[K x N] = A[M x K]^T * B[M x N].
Tensor matmul_tn(const Tensor& a, const Tensor& b);

/// Raw accumulate variants used by the layer kernels. When accumulate is
/// false the output is overwritten, otherwise summed into.
void gemm_nn(const float* a, const float* b, float* c, std::int64_t m,
             std::int64_t k, std::int64_t n, bool accumulate);
void gemm_nt(const float* a, const float* b, float* c, std::int64_t m,
             std::int64_t k, std::int64_t n, bool accumulate);
void gemm_tn(const float* a, const float* b, float* c, std::int64_t m,
             std::int64_t k, std::int64_t n, bool accumulate);

/// dst[cols x rows] = src[rows x cols]^T (blocked copy).
void transpose(const float* src, float* dst, std::int64_t rows,
               std::int64_t cols);

// ---- convolution ----------------------------------------------------------

/// Cross-correlation of an NCHW input with OCkhkw kernels.
/// Output spatial extent: (H + 2*pad - kh) / stride + 1 (must divide evenly).
Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int pad);

/// Output spatial extents of conv2d; throws DimensionError when the
/// geometry does not produce integral extents.
std::pair<std::int64_t, std::int64_t> conv2d_output_extents(
    std::int64_t h, std::int64_t w, std::int64_t kh, std::int64_t kw,
    int stride, int pad);

/// Unrolls image n of an NCHW input into a [C*kh*kw x H'*W'] patch matrix.
/// Out-of-bounds taps read zero.
void im2col(const Tensor& input, std::int64_t n, std::int64_t kh,
            std::int64_t kw, int stride, int pad, float* col);

/// Adjoint of im2col: scatter-adds a patch matrix back into image n of an
/// NCHW gradient tensor.
void col2im(const float* col, std::int64_t kh, std::int64_t kw, int stride,
            int pad, Tensor& grad_input, std::int64_t n);

// ---- elementwise / reductions ---------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor hadamard(const Tensor& a, const Tensor& b);

/// Sum of a 2-D tensor along the given axis (0: over rows, 1: over cols).
Tensor sum_axis(const Tensor& a, int axis);

/// Row-wise argmax of a 2-D tensor; ties resolve to the lowest index.
std::vector<std::int64_t> argmax_rows(const Tensor& a);

}  // namespace binnet
