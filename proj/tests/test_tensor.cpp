#include "binnet/tensor.hpp"

#include <gtest/gtest.h>

#include "binnet/common.hpp"
#include "binnet/rng.hpp"
#include "oracles.hpp"

using namespace binnet;
using binnet::testing::expect_allclose;
using binnet::testing::naive_conv2d;
using binnet::testing::naive_matmul;
using binnet::testing::random_tensor;

TEST(Tensor, RejectsNonPositiveExtents) {
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  EXPECT_THROW(Tensor(std::vector<std::int64_t>{}), DimensionError);
  EXPECT_THROW(Tensor::from_data({2, 2}, {1.0f, 2.0f}), DimensionError);
}

TEST(Tensor, ReshapePreservesCount) {
  Tensor t = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.dim(0), 3);
  EXPECT_FLOAT_EQ(r.at(2, 1), 6.0f);
  EXPECT_THROW(t.reshaped({4, 2}), DimensionError);
}

TEST(Matmul, IdentityCase) {
  const Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  const Tensor m = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  const Tensor out = matmul(eye, m);
  expect_allclose(out, m, 0.0, 0.0);
}

TEST(Matmul, ZeroAnnihilates) {
  const Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  const Tensor zero({2, 2});
  expect_allclose(matmul(eye, zero), zero, 0.0, 0.0);
}

TEST(Matmul, MatchesTripleLoopOracle3x4x2) {
  Rng rng(7);
  const Tensor a = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({4, 2}, rng);
  expect_allclose(matmul(a, b), naive_matmul(a, b), 0.0, 1e-6);
}

TEST(Matmul, MatchesTripleLoopOracleRandomSizes) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = static_cast<std::int64_t>(1 + rng.next_below(64));
    const auto k = static_cast<std::int64_t>(1 + rng.next_below(64));
    const auto n = static_cast<std::int64_t>(1 + rng.next_below(64));
    const Tensor a = random_tensor({m, k}, rng);
    const Tensor b = random_tensor({k, n}, rng);
    expect_allclose(matmul(a, b), naive_matmul(a, b), 1e-5, 1e-6);
  }
}

TEST(Matmul, ShapeMismatchIsDimensionError) {
  const Tensor a({2, 3});
  const Tensor b({4, 2});
  EXPECT_THROW(matmul(a, b), DimensionError);
  EXPECT_THROW(matmul_nt(a, Tensor({2, 4})), DimensionError);
  EXPECT_THROW(matmul_tn(a, Tensor({3, 2})), DimensionError);
}

TEST(Matmul, TransposedVariantsMatchOracle) {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = static_cast<std::int64_t>(1 + rng.next_below(40));
    const auto k = static_cast<std::int64_t>(1 + rng.next_below(40));
    const auto n = static_cast<std::int64_t>(1 + rng.next_below(40));
    const Tensor a = random_tensor({m, k}, rng);
    const Tensor bt = random_tensor({n, k}, rng);
    // A * B^T via the oracle: transpose bt by hand.
    Tensor b({k, n});
    for (std::int64_t i = 0; i < k; ++i)
      for (std::int64_t j = 0; j < n; ++j) b.at(i, j) = bt.at(j, i);
    expect_allclose(matmul_nt(a, bt), naive_matmul(a, b), 1e-5, 1e-6);

    const Tensor at = random_tensor({k, m}, rng);
    Tensor a2({m, k});
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < k; ++j) a2.at(i, j) = at.at(j, i);
    const Tensor b2 = random_tensor({k, n}, rng);
    expect_allclose(matmul_tn(at, b2), naive_matmul(a2, b2), 1e-5, 1e-6);
  }
}

TEST(Matmul, AccumulateVariantAddsInPlace) {
  Rng rng(17);
  const Tensor a = random_tensor({5, 7}, rng);
  const Tensor b = random_tensor({7, 9}, rng);
  Tensor c = random_tensor({5, 9}, rng);
  const Tensor base = c;
  gemm_nn(a.data(), b.data(), c.data(), 5, 7, 9, true);
  const Tensor prod = naive_matmul(a, b);
  for (std::int64_t i = 0; i < c.numel(); ++i)
    ASSERT_NEAR(c[i], base[i] + prod[i], 1e-5);
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(3);
  const Tensor input = random_tensor({1, 1, 3, 3}, rng);
  const Tensor kernel = Tensor::full({1, 1, 1, 1}, 1.0f);
  expect_allclose(conv2d(input, kernel, 1, 0), input.reshaped({1, 1, 3, 3}),
                  0.0, 0.0);
}

TEST(Conv2d, AllOnesSumsToNine) {
  const Tensor input = Tensor::full({1, 1, 3, 3}, 1.0f);
  const Tensor kernel = Tensor::full({1, 1, 3, 3}, 1.0f);
  const Tensor out = conv2d(input, kernel, 1, 0);
  ASSERT_EQ(out.numel(), 1);
  EXPECT_FLOAT_EQ(out[0], 9.0f);
}

TEST(Conv2d, MatchesNaiveOracle) {
  Rng rng(23);
  const Tensor input = random_tensor({2, 3, 9, 9}, rng);
  const Tensor kernels = random_tensor({4, 3, 3, 3}, rng);
  for (const auto& [stride, pad] : {std::pair{1, 0}, {1, 1}, {2, 1}}) {
    expect_allclose(conv2d(input, kernels, stride, pad),
                    naive_conv2d(input, kernels, stride, pad), 1e-5, 1e-6);
  }
}

TEST(Conv2d, OneHotKernelShiftsInput) {
  Rng rng(29);
  const Tensor input = random_tensor({1, 1, 6, 6}, rng);
  Tensor kernel({1, 1, 3, 3});
  kernel.at(0, 0, 2, 1) = 1.0f;  // picks the (y+2, x+1) tap
  const Tensor out = conv2d(input, kernel, 1, 0);
  for (std::int64_t y = 0; y < 4; ++y)
    for (std::int64_t x = 0; x < 4; ++x)
      ASSERT_EQ(out.at(0, 0, y, x), input.at(0, 0, y + 2, x + 1));
}

TEST(Conv2d, NonIntegralOutputIsDimensionError) {
  const Tensor input({1, 1, 5, 5});
  const Tensor kernel({1, 1, 2, 2});
  EXPECT_THROW(conv2d(input, kernel, 2, 0), DimensionError);
  EXPECT_THROW(conv2d(Tensor({1, 1, 2, 2}), Tensor({1, 1, 3, 3}), 1, 0),
               DimensionError);
}

TEST(Conv2d, EqualsIm2colMatmulComposition) {
  Rng rng(31);
  const Tensor input = random_tensor({1, 2, 6, 6}, rng);
  const Tensor kernels = random_tensor({3, 2, 3, 3}, rng);
  const Tensor got = conv2d(input, kernels, 1, 1);
  Tensor col({2 * 3 * 3, 6 * 6});
  im2col(input, 0, 3, 3, 1, 1, col.data());
  const Tensor flat = kernels.reshaped({3, 18});
  const Tensor prod = matmul(flat, col);
  expect_allclose(got.reshaped({3, 36}), prod, 0.0, 0.0);
}

TEST(Elementwise, ScaleByOneIsIdentity) {
  Rng rng(37);
  const Tensor x = random_tensor({3, 5}, rng);
  expect_allclose(scale(x, 1.0f), x, 0.0, 0.0);
}

TEST(Elementwise, SumAxisOverZerosIsZero) {
  const Tensor z({4, 6});
  const Tensor s0 = sum_axis(z, 0);
  const Tensor s1 = sum_axis(z, 1);
  for (std::int64_t i = 0; i < s0.numel(); ++i) ASSERT_EQ(s0[i], 0.0f);
  for (std::int64_t i = 0; i < s1.numel(); ++i) ASSERT_EQ(s1[i], 0.0f);
}

TEST(Elementwise, ArgmaxRowsByInspection) {
  const Tensor t = Tensor::from_data({2, 2}, {0.1f, 0.9f, 0.7f, 0.3f});
  const auto idx = argmax_rows(t);
  ASSERT_EQ(idx.size(), 2u);
  EXPECT_EQ(idx[0], 1);
  EXPECT_EQ(idx[1], 0);
}

TEST(Elementwise, ShapeMismatchIsDimensionError) {
  EXPECT_THROW(add(Tensor({2, 2}), Tensor({2, 3})), DimensionError);
  EXPECT_THROW(hadamard(Tensor({2}), Tensor({3})), DimensionError);
}

TEST(Elementwise, AddSubHadamardBasics) {
  const Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  const Tensor b = Tensor::from_data({2, 2}, {4, 3, 2, 1});
  expect_allclose(add(a, b), Tensor::full({2, 2}, 5.0f), 0.0, 0.0);
  expect_allclose(sub(a, b), Tensor::from_data({2, 2}, {-3, -1, 1, 3}), 0.0, 0.0);
  expect_allclose(hadamard(a, b), Tensor::from_data({2, 2}, {4, 6, 6, 4}), 0.0,
                  0.0);
}

TEST(Tensor, OperationsKeepFiniteValues) {
  Rng rng(41);
  const Tensor a = random_tensor({16, 16}, rng);
  const Tensor b = random_tensor({16, 16}, rng);
  EXPECT_TRUE(matmul(a, b).all_finite());
  EXPECT_TRUE(conv2d(random_tensor({1, 2, 5, 5}, rng),
                     random_tensor({2, 2, 3, 3}, rng), 1, 1)
                  .all_finite());
}
