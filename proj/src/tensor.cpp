#include "binnet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "binnet/parallel.hpp"

namespace binnet {
namespace {

std::string shape_str(const std::vector<std::int64_t>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

void require_2d(const Tensor& t, const char* who) {
  if (t.ndim() != 2)
    throw DimensionError(std::string(who) + ": expected 2-D tensor, got " +
                         shape_str(t.shape()));
}

// 16-lane float vector; lowers to two 8-lane ops on AVX2-only hosts.
typedef float vf __attribute__((vector_size(64)));

inline vf vload(const float* p) {
  vf v;
  __builtin_memcpy(&v, p, sizeof(vf));
  return v;
}

inline void vstore(float* p, vf v) { __builtin_memcpy(p, &v, sizeof(vf)); }

inline vf vsplat(float x) {
  return vf{x, x, x, x, x, x, x, x, x, x, x, x, x, x, x, x};
}

inline vf vzero() { return vsplat(0.0f); }

// Fixed pairwise tree so results do not depend on surrounding code.
inline float hsum(vf v) {
  float t[16];
  vstore(t, v);
  for (int w = 8; w > 0; w >>= 1)
    for (int l = 0; l < w; ++l) t[l] += t[l + w];
  return t[0];
}

constexpr std::int64_t kRowTile = 4;   // output rows per register tile
constexpr std::int64_t kColTile = 64;  // output columns per register tile

// C[4 x 64] tile of C = A * B (A row-major [M x K], B row-major [K x N]).
void nn_tile4x64(const float* __restrict a, const float* __restrict b,
                 float* __restrict c, std::int64_t k, std::int64_t lda,
                 std::int64_t ldb, std::int64_t ldc, bool accumulate) {
  vf acc[4][4];
  for (int r = 0; r < 4; ++r)
    for (int q = 0; q < 4; ++q)
      acc[r][q] = accumulate ? vload(c + r * ldc + q * 16) : vzero();
  for (std::int64_t p = 0; p < k; ++p) {
    const float* brow = b + p * ldb;
    const vf b0 = vload(brow), b1 = vload(brow + 16), b2 = vload(brow + 32),
             b3 = vload(brow + 48);
    for (int r = 0; r < 4; ++r) {
      const vf av = vsplat(a[r * lda + p]);
      acc[r][0] += av * b0;
      acc[r][1] += av * b1;
      acc[r][2] += av * b2;
      acc[r][3] += av * b3;
    }
  }
  for (int r = 0; r < 4; ++r)
    for (int q = 0; q < 4; ++q) vstore(c + r * ldc + q * 16, acc[r][q]);
}

// Same tile with a single output row.
void nn_tile1x64(const float* __restrict a, const float* __restrict b,
                 float* __restrict c, std::int64_t k, std::int64_t ldb,
                 bool accumulate) {
  vf acc0 = accumulate ? vload(c) : vzero();
  vf acc1 = accumulate ? vload(c + 16) : vzero();
  vf acc2 = accumulate ? vload(c + 32) : vzero();
  vf acc3 = accumulate ? vload(c + 48) : vzero();
  for (std::int64_t p = 0; p < k; ++p) {
    const float* brow = b + p * ldb;
    const vf av = vsplat(a[p]);
    acc0 += av * vload(brow);
    acc1 += av * vload(brow + 16);
    acc2 += av * vload(brow + 32);
    acc3 += av * vload(brow + 48);
  }
  vstore(c, acc0);
  vstore(c + 16, acc1);
  vstore(c + 32, acc2);
  vstore(c + 48, acc3);
}

// Scalar reference path for ragged tile edges.
void nn_edge(const float* __restrict a, const float* __restrict b,
             float* __restrict c, std::int64_t rows, std::int64_t k,
             std::int64_t cols, std::int64_t lda, std::int64_t ldb,
             std::int64_t ldc, bool accumulate) {
  for (std::int64_t i = 0; i < rows; ++i) {
    float* crow = c + i * ldc;
    if (!accumulate)
      for (std::int64_t j = 0; j < cols; ++j) crow[j] = 0.0f;
    for (std::int64_t p = 0; p < k; ++p) {
      const float av = a[i * lda + p];
      const float* brow = b + p * ldb;
      for (std::int64_t j = 0; j < cols; ++j) crow[j] += av * brow[j];
    }
  }
}

float dot_plain(const float* __restrict a, const float* __restrict b,
                std::int64_t k) {
  vf acc0 = vzero(), acc1 = vzero();
  std::int64_t p = 0;
  for (; p + 32 <= k; p += 32) {
    acc0 += vload(a + p) * vload(b + p);
    acc1 += vload(a + p + 16) * vload(b + p + 16);
  }
  float tail = 0.0f;
  for (; p < k; ++p) tail += a[p] * b[p];
  return hsum(acc0) + hsum(acc1) + tail;
}

// 2x2 block of dot products for C = A * B^T.
void nt_tile2x2(const float* __restrict a0, const float* __restrict a1,
                const float* __restrict b0, const float* __restrict b1,
                std::int64_t k, float out[2][2]) {
  vf c00 = vzero(), c01 = vzero(), c10 = vzero(), c11 = vzero();
  vf d00 = vzero(), d01 = vzero(), d10 = vzero(), d11 = vzero();
  std::int64_t p = 0;
  for (; p + 32 <= k; p += 32) {
    const vf ax = vload(a0 + p), ay = vload(a0 + p + 16);
    const vf bx = vload(a1 + p), by = vload(a1 + p + 16);
    const vf ux = vload(b0 + p), uy = vload(b0 + p + 16);
    const vf vx = vload(b1 + p), vy = vload(b1 + p + 16);
    c00 += ax * ux;
    d00 += ay * uy;
    c01 += ax * vx;
    d01 += ay * vy;
    c10 += bx * ux;
    d10 += by * uy;
    c11 += bx * vx;
    d11 += by * vy;
  }
  float t00 = 0, t01 = 0, t10 = 0, t11 = 0;
  for (; p < k; ++p) {
    t00 += a0[p] * b0[p];
    t01 += a0[p] * b1[p];
    t10 += a1[p] * b0[p];
    t11 += a1[p] * b1[p];
  }
  out[0][0] = hsum(c00) + hsum(d00) + t00;
  out[0][1] = hsum(c01) + hsum(d01) + t01;
  out[1][0] = hsum(c10) + hsum(d10) + t10;
  out[1][1] = hsum(c11) + hsum(d11) + t11;
}

}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape) : shape_(std::move(shape)) {
  if (shape_.empty())
    throw DimensionError("Tensor: shape must have at least one extent");
  std::int64_t n = 1;
  for (std::int64_t d : shape_) {
    if (d < 1)
      throw DimensionError("Tensor: extents must be positive, got " +
                           shape_str(shape_));
    n *= d;
  }
  data_.assign(static_cast<std::size_t>(n), 0.0f);
}

Tensor Tensor::full(std::vector<std::int64_t> shape, float value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::from_data(std::vector<std::int64_t> shape,
                         std::vector<float> data) {
  Tensor t(std::move(shape));
  if (t.numel() != static_cast<std::int64_t>(data.size()))
    throw DimensionError("Tensor::from_data: " + shape_str(t.shape()) +
                         " does not hold " + std::to_string(data.size()) +
                         " values");
  t.data_.assign(data.begin(), data.end());
  return t;
}

Tensor Tensor::reshaped(std::vector<std::int64_t> new_shape) const& {
  Tensor t = *this;
  return std::move(t).reshaped(std::move(new_shape));
}

Tensor Tensor::reshaped(std::vector<std::int64_t> new_shape) && {
  Tensor t(new_shape);
  if (t.numel() != numel())
    throw DimensionError("reshaped: " + shape_str(shape_) + " -> " +
                         shape_str(new_shape) + " changes element count");
  t.data_ = std::move(data_);
  return t;
}

void Tensor::fill(float value) {
  for (float& x : data_) x = value;
}

bool Tensor::all_finite() const {
  for (float x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

// ---- gemm -------------------------------------------------------------

void gemm_nn(const float* a, const float* b, float* c, std::int64_t m,
             std::int64_t k, std::int64_t n, bool accumulate) {
  // Panels of B are kept L2-resident across the row tiles; each panel adds
  // its partial sums into C in ascending-k order.
  const std::int64_t kc = std::clamp<std::int64_t>(
      static_cast<std::int64_t>((768 * 1024) / (4 * std::max<std::int64_t>(n, 1))),
      64, k);
  const std::int64_t full_cols = n - n % kColTile;
  const std::int64_t row_tiles = m / kRowTile + (m % kRowTile ? 1 : 0);
  for (std::int64_t k0 = 0; k0 < k; k0 += kc) {
    const std::int64_t kn = std::min<std::int64_t>(kc, k - k0);
    const bool acc = accumulate || k0 > 0;
    const float* ap = a + k0;
    const float* bp = b + k0 * n;
    parallel_for(row_tiles, [&](std::int64_t tlo, std::int64_t thi) {
      for (std::int64_t t = tlo; t < thi; ++t) {
        const std::int64_t i = t * kRowTile;
        const std::int64_t rows = std::min<std::int64_t>(kRowTile, m - i);
        for (std::int64_t j = 0; j < full_cols; j += kColTile) {
          if (rows == kRowTile)
            nn_tile4x64(ap + i * k, bp + j, c + i * n + j, kn, k, n, n, acc);
          else
            for (std::int64_t r = 0; r < rows; ++r)
              nn_tile1x64(ap + (i + r) * k, bp + j, c + (i + r) * n + j, kn, n,
                          acc);
        }
        if (full_cols < n)
          nn_edge(ap + i * k, bp + full_cols, c + i * n + full_cols, rows, kn,
                  n - full_cols, k, n, n, acc);
      }
    });
  }
}

void transpose(const float* src, float* dst, std::int64_t rows,
               std::int64_t cols) {
  constexpr std::int64_t kBlock = 16;
  for (std::int64_t i0 = 0; i0 < rows; i0 += kBlock) {
    const std::int64_t ih = std::min(rows, i0 + kBlock);
    for (std::int64_t j0 = 0; j0 < cols; j0 += kBlock) {
      const std::int64_t jh = std::min(cols, j0 + kBlock);
      for (std::int64_t i = i0; i < ih; ++i)
        for (std::int64_t j = j0; j < jh; ++j)
          dst[j * rows + i] = src[i * cols + j];
    }
  }
}

void gemm_nt(const float* a, const float* b, float* c, std::int64_t m,
             std::int64_t k, std::int64_t n, bool accumulate) {
  const std::int64_t pairs_m = m / 2;
  parallel_for(pairs_m + (m % 2), [&](std::int64_t tlo, std::int64_t thi) {
    for (std::int64_t t = tlo; t < thi; ++t) {
      const std::int64_t i = t * 2;
      if (i + 2 <= m) {
        std::int64_t j = 0;
        for (; j + 2 <= n; j += 2) {
          float blk[2][2];
          nt_tile2x2(a + i * k, a + (i + 1) * k, b + j * k, b + (j + 1) * k, k,
                     blk);
          for (int r = 0; r < 2; ++r)
            for (int q = 0; q < 2; ++q) {
              float& dst = c[(i + r) * n + j + q];
              dst = (accumulate ? dst : 0.0f) + blk[r][q];
            }
        }
        for (; j < n; ++j)
          for (int r = 0; r < 2; ++r) {
            float& dst = c[(i + r) * n + j];
            dst = (accumulate ? dst : 0.0f) +
                  dot_plain(a + (i + r) * k, b + j * k, k);
          }
      } else {
        for (std::int64_t j = 0; j < n; ++j) {
          float& dst = c[i * n + j];
          dst = (accumulate ? dst : 0.0f) + dot_plain(a + i * k, b + j * k, k);
        }
      }
    }
  });
}

void gemm_tn(const float* a, const float* b, float* c, std::int64_t m,
             std::int64_t k, std::int64_t n, bool accumulate) {
  // C[k x n] = A^T * B with A [m x k], B [m x n]: row i of C accumulates
  // A[p, i] * B[p, :] over p, so the inner structure mirrors gemm_nn with a
  // column-strided left operand.
  const std::int64_t row_tiles = k / kRowTile;
  parallel_for(row_tiles + (k % kRowTile ? 1 : 0), [&](std::int64_t tlo,
                                                       std::int64_t thi) {
    for (std::int64_t t = tlo; t < thi; ++t) {
      const std::int64_t i = t * kRowTile;
      const std::int64_t rows = std::min<std::int64_t>(kRowTile, k - i);
      for (std::int64_t j = 0; j < n; j += kColTile) {
        const std::int64_t cols = std::min<std::int64_t>(kColTile, n - j);
        if (cols == kColTile && rows == kRowTile) {
          vf acc[4][4];
          for (int r = 0; r < 4; ++r)
            for (int q = 0; q < 4; ++q)
              acc[r][q] = accumulate ? vload(c + (i + r) * n + j + q * 16)
                                     : vzero();
          for (std::int64_t p = 0; p < m; ++p) {
            const float* brow = b + p * n + j;
            const vf b0 = vload(brow), b1 = vload(brow + 16),
                     b2 = vload(brow + 32), b3 = vload(brow + 48);
            const float* acol = a + p * k + i;
            for (int r = 0; r < 4; ++r) {
              const vf av = vsplat(acol[r]);
              acc[r][0] += av * b0;
              acc[r][1] += av * b1;
              acc[r][2] += av * b2;
              acc[r][3] += av * b3;
            }
          }
          for (int r = 0; r < 4; ++r)
            for (int q = 0; q < 4; ++q)
              vstore(c + (i + r) * n + j + q * 16, acc[r][q]);
        } else {
          for (std::int64_t r = 0; r < rows; ++r) {
            float* crow = c + (i + r) * n + j;
            if (!accumulate)
              for (std::int64_t q = 0; q < cols; ++q) crow[q] = 0.0f;
            for (std::int64_t p = 0; p < m; ++p) {
              const float av = a[p * k + i + r];
              const float* brow = b + p * n + j;
              for (std::int64_t q = 0; q < cols; ++q) crow[q] += av * brow[q];
            }
          }
        }
      }
    }
  });
}

// ---- tensor-level products ---------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a.dim(1) != b.dim(0))
    throw DimensionError("matmul: inner extents disagree, " +
                         shape_str(a.shape()) + " * " + shape_str(b.shape()));
  Tensor c({a.dim(0), b.dim(1)});
  gemm_nn(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(1), false);
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  if (a.dim(1) != b.dim(1))
    throw DimensionError("matmul_nt: inner extents disagree, " +
                         shape_str(a.shape()) + " * " +
                         shape_str(b.shape()) + "^T");
  Tensor c({a.dim(0), b.dim(0)});
  gemm_nt(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(0), false);
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_tn");
  require_2d(b, "matmul_tn");
  if (a.dim(0) != b.dim(0))
    throw DimensionError("matmul_tn: outer extents disagree, " +
                         shape_str(a.shape()) + "^T * " +
                         shape_str(b.shape()));
  Tensor c({a.dim(1), b.dim(1)});
  gemm_tn(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(1), false);
  return c;
}

// ---- convolution ---------------------------------------------------------

std::pair<std::int64_t, std::int64_t> conv2d_output_extents(
    std::int64_t h, std::int64_t w, std::int64_t kh, std::int64_t kw,
    int stride, int pad) {
  if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
  if (pad < 0) throw DimensionError("conv2d: pad must be >= 0");
  const std::int64_t ph = h + 2 * pad, pw = w + 2 * pad;
  if (kh > ph || kw > pw)
    throw DimensionError("conv2d: kernel exceeds padded input extents");
  if ((ph - kh) % stride != 0 || (pw - kw) % stride != 0)
    throw DimensionError("conv2d: output extents are not integral");
  return {(ph - kh) / stride + 1, (pw - kw) / stride + 1};
}

void im2col(const Tensor& input, std::int64_t n, std::int64_t kh,
            std::int64_t kw, int stride, int pad, float* col) {
  const std::int64_t C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const auto [oh, ow] = conv2d_output_extents(H, W, kh, kw, stride, pad);
  const std::int64_t patch = oh * ow;
  const float* img = input.data() + n * C * H * W;
  std::int64_t row = 0;
  for (std::int64_t c = 0; c < C; ++c) {
    const float* plane = img + c * H * W;
    for (std::int64_t ky = 0; ky < kh; ++ky) {
      for (std::int64_t kx = 0; kx < kw; ++kx, ++row) {
        float* dst = col + row * patch;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
          const std::int64_t iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            for (std::int64_t ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = 0.0f;
            continue;
          }
          const float* src = plane + iy * W;
          float* drow = dst + oy * ow;
          if (stride == 1) {
            // ix = ox + kx - pad: one contiguous span, zero fill outside.
            const std::int64_t shift = kx - pad;
            const std::int64_t lo = std::max<std::int64_t>(0, -shift);
            const std::int64_t hi = std::min<std::int64_t>(ow, W - shift);
            for (std::int64_t ox = 0; ox < lo; ++ox) drow[ox] = 0.0f;
            if (hi > lo)
              std::memcpy(drow + lo, src + lo + shift,
                          static_cast<std::size_t>(hi - lo) * sizeof(float));
            for (std::int64_t ox = std::max(lo, hi); ox < ow; ++ox)
              drow[ox] = 0.0f;
          } else {
            for (std::int64_t ox = 0; ox < ow; ++ox) {
              const std::int64_t ix = ox * stride - pad + kx;
              drow[ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void col2im(const float* col, std::int64_t kh, std::int64_t kw, int stride,
            int pad, Tensor& grad_input, std::int64_t n) {
  const std::int64_t C = grad_input.dim(1), H = grad_input.dim(2),
                     W = grad_input.dim(3);
  const auto [oh, ow] = conv2d_output_extents(H, W, kh, kw, stride, pad);
  const std::int64_t patch = oh * ow;
  float* img = grad_input.data() + n * C * H * W;
  // Per-channel scatter keeps accumulation order fixed under parallel runs.
  parallel_for(C, [&](std::int64_t clo, std::int64_t chi) {
    for (std::int64_t c = clo; c < chi; ++c) {
      float* plane = img + c * H * W;
      for (std::int64_t ky = 0; ky < kh; ++ky) {
        for (std::int64_t kx = 0; kx < kw; ++kx) {
          const float* src = col + ((c * kh + ky) * kw + kx) * patch;
          for (std::int64_t oy = 0; oy < oh; ++oy) {
            const std::int64_t iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= H) continue;
            float* drow = plane + iy * W;
            for (std::int64_t ox = 0; ox < ow; ++ox) {
              const std::int64_t ix = ox * stride - pad + kx;
              if (ix >= 0 && ix < W) drow[ix] += src[oy * ow + ox];
            }
          }
        }
      }
    }
  });
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride,
              int pad) {
  if (input.ndim() != 4 || kernels.ndim() != 4)
    throw DimensionError("conv2d: input and kernels must be 4-D");
  if (input.dim(1) != kernels.dim(1))
    throw DimensionError("conv2d: channel mismatch, input " +
                         shape_str(input.shape()) + " vs kernels " +
                         shape_str(kernels.shape()));
  const std::int64_t N = input.dim(0), O = kernels.dim(0),
                     kh = kernels.dim(2), kw = kernels.dim(3);
  const auto [oh, ow] =
      conv2d_output_extents(input.dim(2), input.dim(3), kh, kw, stride, pad);
  const std::int64_t K = kernels.dim(1) * kh * kw;
  const std::int64_t P = oh * ow;
  Tensor out({N, O, oh, ow});
  thread_local FloatBuffer col;
  if (col.size() < static_cast<std::size_t>(K * P))
    col.resize(static_cast<std::size_t>(K * P));
  for (std::int64_t n = 0; n < N; ++n) {
    im2col(input, n, kh, kw, stride, pad, col.data());
    gemm_nn(kernels.data(), col.data(), out.data() + n * O * P, O, K, P,
            false);
  }
  return out;
}

// ---- elementwise / reductions ---------------------------------------------

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(who) + ": shape mismatch, " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
  return out;
}

Tensor scale(const Tensor& a, float s) {
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * s;
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor out(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  return out;
}

Tensor sum_axis(const Tensor& a, int axis) {
  require_2d(a, "sum_axis");
  if (axis != 0 && axis != 1) throw DimensionError("sum_axis: axis must be 0 or 1");
  const std::int64_t rows = a.dim(0), cols = a.dim(1);
  if (axis == 0) {
    Tensor out({cols});
    for (std::int64_t i = 0; i < rows; ++i)
      for (std::int64_t j = 0; j < cols; ++j) out[j] += a.at(i, j);
    return out;
  }
  Tensor out({rows});
  for (std::int64_t i = 0; i < rows; ++i) {
    float s = 0.0f;
    for (std::int64_t j = 0; j < cols; ++j) s += a.at(i, j);
    out[i] = s;
  }
  return out;
}

std::vector<std::int64_t> argmax_rows(const Tensor& a) {
  require_2d(a, "argmax_rows");
  std::vector<std::int64_t> out(static_cast<std::size_t>(a.dim(0)));
  for (std::int64_t i = 0; i < a.dim(0); ++i) {
    std::int64_t best = 0;
    float best_v = a.at(i, 0);
    for (std::int64_t j = 1; j < a.dim(1); ++j) {
      if (a.at(i, j) > best_v) {
        best_v = a.at(i, j);
        best = j;
      }
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

}  // namespace binnet
