#include "binnet/binarize.hpp"

#include <cmath>
#include <gtest/gtest.h>

#include "binnet/common.hpp"
#include "oracles.hpp"

using namespace binnet;
using binnet::testing::random_tensor;

TEST(Deterministic, ZeroMapsToMinusOne) {
  const Tensor w = Tensor::from_data({1}, {0.0f});
  EXPECT_FLOAT_EQ(binarize_deterministic(w)[0], -1.0f);
}

TEST(Deterministic, SignExamples) {
  const Tensor w = Tensor::from_data({2}, {-0.3f, 0.7f});
  const Tensor out = binarize_deterministic(w);
  EXPECT_FLOAT_EQ(out[0], -1.0f);
  EXPECT_FLOAT_EQ(out[1], 1.0f);
}

TEST(Deterministic, Idempotent) {
  Rng rng(5);
  const Tensor w = random_tensor({7, 9}, rng);
  const Tensor once = binarize_deterministic(w);
  const Tensor twice = binarize_deterministic(once);
  for (std::int64_t i = 0; i < w.numel(); ++i) ASSERT_EQ(once[i], twice[i]);
}

TEST(Deterministic, PreservesSignOfNonzeroEntries) {
  Rng rng(9);
  const Tensor w = random_tensor({64}, rng);
  const Tensor out = binarize_deterministic(w);
  for (std::int64_t i = 0; i < w.numel(); ++i) {
    if (w[i] != 0.0f) {
      ASSERT_GE(out[i] * w[i], 0.0f);
    }
  }
}

TEST(HardSigmoid, MidpointAndSaturation) {
  EXPECT_FLOAT_EQ(hard_sigmoid(0.0f), 0.5f);
  EXPECT_FLOAT_EQ(hard_sigmoid(-1.0f), 0.0f);
  EXPECT_FLOAT_EQ(hard_sigmoid(1.0f), 1.0f);
  EXPECT_FLOAT_EQ(hard_sigmoid(3.0f), 1.0f);
  EXPECT_FLOAT_EQ(hard_sigmoid(-7.0f), 0.0f);
}

TEST(HardSigmoid, MonotoneAndCentered) {
  float prev = -1.0f;
  for (int i = -40; i <= 40; ++i) {
    const float x = 0.1f * static_cast<float>(i);
    const float v = hard_sigmoid(x);
    ASSERT_GE(v, prev);
    prev = v;
    if (std::abs(x) <= 1.0f) {
      ASSERT_NEAR(hard_sigmoid(x) + hard_sigmoid(-x), 1.0f, 1e-6f);
    }
  }
}

TEST(Stochastic, SaturatedValuesAreDeterministic) {
  Rng rng(1);
  const Tensor plus = Tensor::full({1000}, 1.0f);
  const Tensor minus = Tensor::full({1000}, -1.0f);
  const Tensor bp = binarize_stochastic(plus, rng);
  const Tensor bm = binarize_stochastic(minus, rng);
  for (std::int64_t i = 0; i < 1000; ++i) {
    ASSERT_EQ(bp[i], 1.0f);
    ASSERT_EQ(bm[i], -1.0f);
  }
}

TEST(Stochastic, UnbiasedAtScale) {
  // Monte-Carlo check of the mean against 2*sigma(w) - 1.
  constexpr std::int64_t kDraws = 100000;
  const double bound = 4.0 / std::sqrt(static_cast<double>(kDraws));
  Rng rng(123);
  for (const float w : {-0.8f, -0.2f, 0.0f, 0.5f}) {
    const Tensor values = Tensor::full({kDraws}, w);
    const Tensor out = binarize_stochastic(values, rng);
    double mean = 0.0;
    for (std::int64_t i = 0; i < kDraws; ++i) mean += out[i];
    mean /= static_cast<double>(kDraws);
    const double expected = 2.0 * hard_sigmoid(w) - 1.0;
    EXPECT_NEAR(mean, expected, bound) << "w = " << w;
    if (w == 0.0f) {
      EXPECT_GE(mean, -0.02);
      EXPECT_LE(mean, 0.02);
    }
  }
}

TEST(Stochastic, SameSeedSameDraws) {
  Rng a(77), b(77);
  const Tensor w = Tensor::full({257}, 0.1f);
  const Tensor x = binarize_stochastic(w, a);
  const Tensor y = binarize_stochastic(w, b);
  for (std::int64_t i = 0; i < w.numel(); ++i) ASSERT_EQ(x[i], y[i]);
  EXPECT_EQ(a.state(), b.state());
}

TEST(Stochastic, AdvancesStreamByElementCount) {
  Rng a(5), b(5);
  const Tensor w = Tensor::full({100}, 0.0f);
  binarize_stochastic(w, a);
  b.skip(100);
  EXPECT_EQ(a.state(), b.state());
}

TEST(Clip, ClampExamples) {
  const Tensor w = Tensor::from_data({3}, {1.5f, -2.0f, 0.25f});
  const Tensor out = clip_weights(w);
  EXPECT_FLOAT_EQ(out[0], 1.0f);
  EXPECT_FLOAT_EQ(out[1], -1.0f);
  EXPECT_FLOAT_EQ(out[2], 0.25f);
}

TEST(Clip, Idempotent) {
  Rng rng(19);
  const Tensor w = random_tensor({33}, rng, -3.0f, 3.0f);
  const Tensor once = clip_weights(w);
  const Tensor twice = clip_weights(once);
  for (std::int64_t i = 0; i < w.numel(); ++i) ASSERT_EQ(once[i], twice[i]);
}

TEST(Pack, AllPlusOneRowOf64) {
  const Tensor signs = Tensor::full({1, 64}, 1.0f);
  const PackedBinaryMatrix p = pack(signs, 1, 64);
  ASSERT_EQ(p.words.size(), 1u);
  EXPECT_EQ(p.words[0], 0xFFFFFFFFFFFFFFFFULL);
}

TEST(Pack, AllMinusOneRowOf3) {
  const Tensor signs = Tensor::full({1, 3}, -1.0f);
  const PackedBinaryMatrix p = pack(signs, 1, 3);
  ASSERT_EQ(p.words.size(), 1u);
  EXPECT_EQ(p.words[0], 0x0ULL);
}

TEST(Pack, PadBitsAreZero) {
  Rng rng(21);
  for (const std::int64_t cols : {3, 63, 65, 100, 127, 129}) {
    const Tensor signs =
        binarize_deterministic(random_tensor({4, cols}, rng));
    const PackedBinaryMatrix p = pack(signs, 4, cols);
    const std::int64_t wpr = p.words_per_row();
    const int used = static_cast<int>(cols & 63);
    if (used == 0) continue;
    const std::uint64_t pad_mask = ~((1ULL << used) - 1);
    for (std::int64_t r = 0; r < 4; ++r)
      ASSERT_EQ(p.row(r)[wpr - 1] & pad_mask, 0ULL) << "cols " << cols;
  }
}

TEST(Pack, RoundTripIsExactOnRandomMatrices) {
  Rng rng(27);
  for (int trial = 0; trial < 25; ++trial) {
    const auto rows = static_cast<std::int64_t>(1 + rng.next_below(100));
    const auto cols = static_cast<std::int64_t>(1 + rng.next_below(200));
    const Tensor signs =
        binarize_deterministic(random_tensor({rows, cols}, rng));
    const Tensor back = unpack(pack(signs, rows, cols));
    for (std::int64_t i = 0; i < signs.numel(); ++i)
      ASSERT_EQ(signs[i], back[i]);
  }
}

TEST(Pack, RejectsNonSignEntries) {
  const Tensor bad = Tensor::from_data({1, 2}, {1.0f, 0.5f});
  EXPECT_THROW(pack(bad, 1, 2), DomainError);
  EXPECT_THROW(pack(Tensor({1, 2}), 1, 2), DomainError);  // zeros
  EXPECT_THROW(pack(Tensor::full({1, 2}, 1.0f), 2, 2), DimensionError);
}

TEST(Rng, SkipMatchesSequentialDraws) {
  Rng a(99), b(99);
  for (int i = 0; i < 1000; ++i) a.next_u64();
  b.skip(1000);
  EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DerivedStreamsDiffer) {
  Rng a = Rng::derive(1, 1);
  Rng b = Rng::derive(1, 2);
  EXPECT_NE(a.next_u64(), b.next_u64());
}
