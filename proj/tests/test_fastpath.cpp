#include "binnet/fastpath.hpp"

#include <bit>
#include <gtest/gtest.h>

#include "binnet/bench.hpp"
#include "binnet/common.hpp"
#include "oracles.hpp"

using namespace binnet;
using binnet::testing::expect_allclose;
using binnet::testing::random_tensor;

namespace {

// Unpack-then-matmul oracle for the packed dense kernel.
Tensor unpacked_dense_oracle(const PackedDense& layer, const Tensor& a) {
  const Tensor w = unpack(layer.wb_packed);
  Tensor out = matmul_nt(a, w);
  for (std::int64_t n = 0; n < out.dim(0); ++n)
    for (std::int64_t j = 0; j < out.dim(1); ++j)
      out.at(n, j) += layer.bias[j];
  return out;
}

}  // namespace

TEST(BinaryDense, AllBitsSetSumsActivations) {
  const Tensor signs = Tensor::full({2, 70}, 1.0f);
  const PackedDense layer = make_packed_dense(signs, Tensor({2}));
  Rng rng(1);
  const Tensor a = random_tensor({1, 70}, rng);
  float expect = 0.0f;
  for (std::int64_t i = 0; i < 70; ++i) expect += a[i];
  const Tensor out = binary_dense_forward(layer, a);
  EXPECT_NEAR(out.at(0, 0), expect, 1e-4f);
  EXPECT_NEAR(out.at(0, 1), expect, 1e-4f);
}

TEST(BinaryDense, AllBitsClearNegatesSum) {
  const Tensor signs = Tensor::full({1, 70}, -1.0f);
  const PackedDense layer = make_packed_dense(signs, Tensor({1}));
  Rng rng(2);
  const Tensor a = random_tensor({1, 70}, rng);
  float expect = 0.0f;
  for (std::int64_t i = 0; i < 70; ++i) expect -= a[i];
  const Tensor out = binary_dense_forward(layer, a);
  EXPECT_NEAR(out.at(0, 0), expect, 1e-4f);
}

TEST(BinaryDense, MatchesUnpackedOracleAcrossWordBoundary) {
  Rng rng(3);
  const Tensor signs = binarize_deterministic(random_tensor({16, 70}, rng));
  const Tensor bias = random_tensor({16}, rng);
  const PackedDense layer = make_packed_dense(signs, bias);
  const Tensor a = random_tensor({3, 70}, rng);
  expect_allclose(binary_dense_forward(layer, a),
                  unpacked_dense_oracle(layer, a), 1e-4, 1e-4);
}

TEST(BinaryDense, WordBoundaryWidthsMatchOracle) {
  Rng rng(5);
  for (const std::int64_t width : {63, 64, 65, 127, 128, 129}) {
    for (int trial = 0; trial < 6; ++trial) {
      const auto rows = static_cast<std::int64_t>(1 + rng.next_below(24));
      const Tensor signs =
          binarize_deterministic(random_tensor({rows, width}, rng));
      const Tensor bias = random_tensor({rows}, rng);
      const PackedDense layer = make_packed_dense(signs, bias);
      const Tensor a = random_tensor({2, width}, rng);
      expect_allclose(binary_dense_forward(layer, a),
                      unpacked_dense_oracle(layer, a), 1e-4, 1e-4);
    }
  }
}

TEST(BinaryDense, RowPopcountsMatchWords) {
  Rng rng(7);
  const Tensor signs = binarize_deterministic(random_tensor({9, 130}, rng));
  const PackedDense layer = make_packed_dense(signs, Tensor({9}));
  for (std::int64_t r = 0; r < 9; ++r) {
    std::int64_t expect = 0;
    for (std::int64_t c = 0; c < 130; ++c)
      if (signs.at(r, c) == 1.0f) ++expect;
    EXPECT_EQ(layer.row_popcounts[static_cast<std::size_t>(r)], expect);
    std::int64_t from_words = 0;
    for (std::int64_t w = 0; w < layer.wb_packed.words_per_row(); ++w)
      from_words += std::popcount(layer.wb_packed.row(r)[w]);
    EXPECT_EQ(layer.row_popcounts[static_cast<std::size_t>(r)], from_words);
  }
}

TEST(BinaryDense, PackedStructureRoundTrips) {
  Rng rng(9);
  const Tensor signs = binarize_deterministic(random_tensor({12, 77}, rng));
  const PackedDense layer = make_packed_dense(signs, Tensor({12}));
  const Tensor back = unpack(layer.wb_packed);
  for (std::int64_t i = 0; i < signs.numel(); ++i)
    ASSERT_EQ(signs[i], back[i]);
}

TEST(BinaryDense, DimensionMismatchThrows) {
  const Tensor signs = Tensor::full({2, 8}, 1.0f);
  const PackedDense layer = make_packed_dense(signs, Tensor({2}));
  EXPECT_THROW(binary_dense_forward(layer, Tensor({1, 9})), DimensionError);
}

TEST(BinaryConv, PlusOneIdentityKernel) {
  const Tensor signs = Tensor::full({1, 1, 1, 1}, 1.0f);
  const PackedConv layer = make_packed_conv(signs, Tensor({1}), 1, 0);
  Rng rng(11);
  const Tensor x = random_tensor({1, 1, 5, 5}, rng);
  expect_allclose(binary_conv_forward(layer, x), x, 1e-5, 1e-5);
}

TEST(BinaryConv, MinusOneKernelNegatesInput) {
  const Tensor signs = Tensor::full({1, 1, 1, 1}, -1.0f);
  const PackedConv layer = make_packed_conv(signs, Tensor({1}), 1, 0);
  Rng rng(13);
  const Tensor x = random_tensor({1, 1, 4, 4}, rng);
  const Tensor out = binary_conv_forward(layer, x);
  for (std::int64_t i = 0; i < x.numel(); ++i)
    ASSERT_NEAR(out[i], -x[i], 1e-5f);
}

TEST(BinaryConv, MatchesUnpackedConvOracle) {
  Rng rng(15);
  const Tensor signs =
      binarize_deterministic(random_tensor({8, 3, 3, 3}, rng));
  const Tensor bias = random_tensor({8}, rng);
  const Tensor x = random_tensor({1, 3, 8, 8}, rng);
  for (const auto& [stride, pad] : {std::pair{1, 1}, {1, 0}}) {
    const PackedConv layer = make_packed_conv(signs, bias, stride, pad);
    Tensor expect = conv2d(x, signs, stride, pad);
    const std::int64_t p = expect.dim(2) * expect.dim(3);
    for (std::int64_t o = 0; o < 8; ++o) {
      float* row = expect.data() + o * p;
      for (std::int64_t i = 0; i < p; ++i) row[i] += bias[o];
    }
    expect_allclose(binary_conv_forward(layer, x), expect, 1e-4, 1e-4);
  }
}

TEST(PackedNet, MatchesEvalModeNetworkWithBinaryWeights) {
  Rng rng(17);
  Network net;
  net.in_channels = 2;
  net.in_height = 8;
  net.in_width = 8;
  net.classes = 4;
  auto conv = std::make_unique<ConvLayer>(2, 4, 3, 1, 1);
  conv->init_he(rng);
  conv->bias() = random_tensor({4}, rng, -0.2f, 0.2f);
  net.layers.push_back(std::move(conv));
  net.layers.push_back(std::make_unique<BatchNormLayer>(4));
  net.layers.push_back(std::make_unique<ReluLayer>());
  net.layers.push_back(std::make_unique<MaxPoolLayer>(2, 2));
  net.layers.push_back(std::make_unique<FlattenLayer>());
  auto dense = std::make_unique<DenseLayer>(4 * 4 * 4, 4);
  dense->init_he(rng);
  net.layers.push_back(std::move(dense));

  // Give batch norm non-trivial running stats.
  auto* bn = static_cast<BatchNormLayer*>(net.layers[1].get());
  bn->running_mean() = random_tensor({4}, rng, -0.5f, 0.5f);
  bn->running_var() = random_tensor({4}, rng, 0.5f, 2.0f);

  const PackedNet packed = PackedNet::from_network(net);
  const Tensor x = random_tensor({1, 2, 8, 8}, rng);

  Rng unused(0);
  net.refresh_binary(Regularizer::kDeterministic, unused);
  const Tensor expect = net.forward(x, {false, WeightMode::kBinary});
  expect_allclose(packed.forward(x), expect, 1e-3, 1e-3);
}

TEST(Bench, RejectsFewerThanThirtyReps) {
  EXPECT_THROW(run_benchmark(BenchKernel::kFpDense, 64, 10), DomainError);
  EXPECT_THROW(run_benchmark(BenchKernel::kFpDense, 64, 29), DomainError);
}

TEST(Bench, BinaryAndFpChecksumsAgreeOnSameWeights) {
  const auto fp = run_benchmark(BenchKernel::kFpDense, 256, 30);
  const auto bin = run_benchmark(BenchKernel::kBinDense, 256, 30);
  EXPECT_EQ(fp.reps, 30);
  EXPECT_LE(fp.p10_ns, fp.median_ns);
  EXPECT_LE(fp.median_ns, fp.p90_ns);
  const double tol = 1e-3 * std::max(std::abs(fp.checksum), 1.0);
  EXPECT_NEAR(fp.checksum, bin.checksum, tol);

  const auto fpc = run_benchmark(BenchKernel::kFpConv, 8, 30);
  const auto binc = run_benchmark(BenchKernel::kBinConv, 8, 30);
  const double tolc = 1e-3 * std::max(std::abs(fpc.checksum), 1.0);
  EXPECT_NEAR(fpc.checksum, binc.checksum, tolc);
}

TEST(Bench, CsvRowHasSchemaFields) {
  BenchResult r;
  r.kernel = "bin_dense";
  r.problem_size = "1024x1024";
  r.reps = 30;
  r.median_ns = 1000;
  r.p10_ns = 900;
  r.p90_ns = 1100;
  r.checksum = 1.5;
  EXPECT_EQ(bench_csv_row(r), "bin_dense,1024x1024,30,1000,900,1100,1.5");
  EXPECT_STREQ(kBenchCsvHeader, "kernel,size,reps,median_ns,p10_ns,p90_ns,checksum");
}
