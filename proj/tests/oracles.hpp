// Independent reference implementations and checkers used by the tests.
// These must stay naive: they are the trusted side of every comparison.
#pragma once

#include <cmath>
#include <functional>
#include <gtest/gtest.h>

#include "binnet/rng.hpp"
#include "binnet/tensor.hpp"

namespace binnet::testing {

inline Tensor random_tensor(std::vector<std::int64_t> shape, Rng& rng,
                            float lo = -1.0f, float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t[i] = lo + (hi - lo) * rng.next_float();
  return t;
}

// Brute-force triple loop product.
inline Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      float s = 0.0f;
      for (std::int64_t p = 0; p < k; ++p) s += a.at(i, p) * b.at(p, j);
      c.at(i, j) = s;
    }
  return c;
}

// Direct six-loop cross-correlation with zero padding.
inline Tensor naive_conv2d(const Tensor& input, const Tensor& kernels,
                           int stride, int pad) {
  const std::int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2),
                     W = input.dim(3);
  const std::int64_t O = kernels.dim(0), kh = kernels.dim(2),
                     kw = kernels.dim(3);
  const std::int64_t oh = (H + 2 * pad - kh) / stride + 1;
  const std::int64_t ow = (W + 2 * pad - kw) / stride + 1;
  Tensor out({N, O, oh, ow});
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t o = 0; o < O; ++o)
      for (std::int64_t oy = 0; oy < oh; ++oy)
        for (std::int64_t ox = 0; ox < ow; ++ox) {
          float s = 0.0f;
          for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t ky = 0; ky < kh; ++ky)
              for (std::int64_t kx = 0; kx < kw; ++kx) {
                const std::int64_t iy = oy * stride - pad + ky;
                const std::int64_t ix = ox * stride - pad + kx;
                if (iy >= 0 && iy < H && ix >= 0 && ix < W)
                  s += input.at(n, c, iy, ix) * kernels.at(o, c, ky, kx);
              }
          out.at(n, o, oy, ox) = s;
        }
  return out;
}

inline void expect_allclose(const Tensor& actual, const Tensor& expected,
                            double rtol, double atol = 0.0) {
  ASSERT_EQ(actual.shape(), expected.shape());
  for (std::int64_t i = 0; i < actual.numel(); ++i) {
    const double a = actual[i], e = expected[i];
    const double tol = atol + rtol * std::max(std::abs(a), std::abs(e));
    ASSERT_NEAR(a, e, tol) << "element " << i;
  }
}

inline double max_abs(const Tensor& t) {
  double m = 0.0;
  for (std::int64_t i = 0; i < t.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(t[i])));
  return m;
}

// Central finite differences of `loss` with respect to `param`, compared
// against the analytic gradient. The error is normalized by the largest
// gradient magnitude so the tolerance reads as a relative one.
inline void expect_grad_matches(const std::function<double()>& loss,
                                Tensor& param, const Tensor& analytic,
                                double h, double tol, const char* what) {
  ASSERT_EQ(param.shape(), analytic.shape()) << what;
  Tensor fd(param.shape());
  for (std::int64_t i = 0; i < param.numel(); ++i) {
    const float old = param[i];
    param[i] = static_cast<float>(old + h);
    const double lp = loss();
    param[i] = static_cast<float>(old - h);
    const double lm = loss();
    param[i] = old;
    fd[i] = static_cast<float>((lp - lm) / (2.0 * h));
  }
  const double denom = std::max({max_abs(analytic), max_abs(fd), 1e-8});
  for (std::int64_t i = 0; i < param.numel(); ++i) {
    const double rel = std::abs(analytic[i] - fd[i]) / denom;
    ASSERT_LE(rel, tol) << what << " element " << i << ": analytic "
                        << analytic[i] << " vs finite-difference " << fd[i];
  }
}

}  // namespace binnet::testing
