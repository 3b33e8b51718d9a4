#include "binnet/fastpath.hpp"

#include <bit>
#include <cstring>
#include <string>

#include "binnet/common.hpp"
#include "binnet/parallel.hpp"

#if defined(__AVX512F__) || defined(__AVX2__)
#include <immintrin.h>
#endif

namespace binnet {
namespace {

// Sum of a[i] over the set bits of one full 64-bit word.
inline float masked_word_sum(std::uint64_t bits, const float* a) {
#if defined(__AVX512F__)
  __m512 acc = _mm512_setzero_ps();
  acc = _mm512_maskz_loadu_ps(static_cast<__mmask16>(bits), a);
  acc = _mm512_add_ps(
      acc, _mm512_maskz_loadu_ps(static_cast<__mmask16>(bits >> 16), a + 16));
  __m512 acc2 =
      _mm512_maskz_loadu_ps(static_cast<__mmask16>(bits >> 32), a + 32);
  acc2 = _mm512_add_ps(
      acc2, _mm512_maskz_loadu_ps(static_cast<__mmask16>(bits >> 48), a + 48));
  return _mm512_reduce_add_ps(_mm512_add_ps(acc, acc2));
#elif defined(__AVX2__)
  const __m256i lane_bit = _mm256_setr_epi32(1, 2, 4, 8, 16, 32, 64, 128);
  __m256 acc = _mm256_setzero_ps();
  for (int g = 0; g < 8; ++g) {
    const __m256i byte =
        _mm256_set1_epi32(static_cast<int>((bits >> (8 * g)) & 0xff));
    const __m256i m =
        _mm256_cmpeq_epi32(_mm256_and_si256(byte, lane_bit), lane_bit);
    acc = _mm256_add_ps(
        acc, _mm256_and_ps(_mm256_loadu_ps(a + 8 * g), _mm256_castsi256_ps(m)));
  }
  __m128 lo = _mm256_castps256_ps128(acc);
  __m128 hi = _mm256_extractf128_ps(acc, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
#else
  float s = 0.0f;
  while (bits) {
    s += a[std::countr_zero(bits)];
    bits &= bits - 1;
  }
  return s;
#endif
}

// Sum over set bits of a packed row against `cols` activations. The last
// partial word is handled scalar so no load runs past the buffer.
float masked_row_sum(const std::uint64_t* row, const float* a,
                     std::int64_t cols) {
  const std::int64_t full = cols >> 6;
  float s = 0.0f;
  for (std::int64_t w = 0; w < full; ++w)
    s += masked_word_sum(row[w], a + 64 * w);
  std::uint64_t tail = cols & 63 ? row[full] : 0;
  const float* base = a + 64 * full;
  while (tail) {
    s += base[std::countr_zero(tail)];
    tail &= tail - 1;
  }
  return s;
}

}  // namespace

PackedDense make_packed_dense(const Tensor& signs, const Tensor& bias) {
  if (signs.ndim() != 2)
    throw DimensionError("make_packed_dense: sign matrix must be 2-D");
  if (bias.numel() != signs.dim(0))
    throw DimensionError("make_packed_dense: one bias per output row");
  PackedDense layer;
  layer.wb_packed = pack(signs, signs.dim(0), signs.dim(1));
  layer.bias = bias;
  layer.row_popcounts.resize(static_cast<std::size_t>(signs.dim(0)));
  const std::int64_t wpr = layer.wb_packed.words_per_row();
  for (std::int64_t r = 0; r < signs.dim(0); ++r) {
    std::int64_t pc = 0;
    for (std::int64_t w = 0; w < wpr; ++w)
      pc += std::popcount(layer.wb_packed.row(r)[w]);
    layer.row_popcounts[static_cast<std::size_t>(r)] = pc;
  }
  return layer;
}

Tensor binary_dense_forward(const PackedDense& layer, const Tensor& a) {
  if (a.ndim() != 2 || a.dim(1) != layer.wb_packed.cols)
    throw DimensionError("binary_dense_forward: activations must be [batch x " +
                         std::to_string(layer.wb_packed.cols) + "]");
  const std::int64_t batch = a.dim(0), in = layer.wb_packed.cols,
                     out = layer.wb_packed.rows;
  Tensor result({batch, out});
  const float* bias = layer.bias.data();
  for (std::int64_t n = 0; n < batch; ++n) {
    const float* row = a.data() + n * in;
    float total = 0.0f;
    for (std::int64_t i = 0; i < in; ++i) total += row[i];
    float* dst = result.data() + n * out;
    parallel_for(out, [&](std::int64_t lo, std::int64_t hi) {
      for (std::int64_t j = lo; j < hi; ++j)
        dst[j] = 2.0f * masked_row_sum(layer.wb_packed.row(j), row, in) -
                 total + bias[j];
    });
  }
  return result;
}

namespace {

typedef float vacc __attribute__((vector_size(64)));

inline vacc vacc_load(const float* p) {
  vacc v;
  std::memcpy(&v, p, sizeof(vacc));
  return v;
}

inline void vacc_store(float* p, vacc v) { std::memcpy(p, &v, sizeof(vacc)); }

// One output row x NV*16 patch columns over a k-panel. Only the +1 taps
// are visited, via a precomputed position list (`taps`, panel-local), which
// is where the packed form beats a multiply-accumulate: half the tap work
// on average, no weight traffic and no bit-scan dependency chain. The
// panel's column slice arrives as a compact [k x NV*16] buffer so the
// loads stay conflict-free in L1. Partial sums park in `scratch` between
// panels; the final panel writes 2 * acc - total + bias.
template <int NV>
void binary_row_tile(bool first_panel, bool last_panel,
                     const std::uint16_t* taps, std::int64_t tap_count,
                     std::int64_t o, const float* panel, std::int64_t p,
                     std::int64_t p0, const float* total_tile,
                     const float* bias, float* scratch, float* out) {
  constexpr int kWidth = NV * 16;
  vacc acc[NV], b1[NV], b2[NV], b3[NV];  // four banks hide add latency
  if (first_panel) {
    for (int q = 0; q < NV; ++q) acc[q] = vacc{};
  } else {
    const float* src = scratch + o * p + p0;
    for (int q = 0; q < NV; ++q) acc[q] = vacc_load(src + 16 * q);
  }
  for (int q = 0; q < NV; ++q) b1[q] = vacc{};
  for (int q = 0; q < NV; ++q) b2[q] = vacc{};
  for (int q = 0; q < NV; ++q) b3[q] = vacc{};
  std::int64_t i = 0;
  for (; i + 4 <= tap_count; i += 4) {
    const float* s0 = panel + std::int64_t(taps[i]) * kWidth;
    const float* s1 = panel + std::int64_t(taps[i + 1]) * kWidth;
    const float* s2 = panel + std::int64_t(taps[i + 2]) * kWidth;
    const float* s3 = panel + std::int64_t(taps[i + 3]) * kWidth;
    for (int q = 0; q < NV; ++q) acc[q] += vacc_load(s0 + 16 * q);
    for (int q = 0; q < NV; ++q) b1[q] += vacc_load(s1 + 16 * q);
    for (int q = 0; q < NV; ++q) b2[q] += vacc_load(s2 + 16 * q);
    for (int q = 0; q < NV; ++q) b3[q] += vacc_load(s3 + 16 * q);
  }
  for (; i < tap_count; ++i) {
    const float* src = panel + std::int64_t(taps[i]) * kWidth;
    for (int q = 0; q < NV; ++q) acc[q] += vacc_load(src + 16 * q);
  }
  for (int q = 0; q < NV; ++q) acc[q] += b1[q];
  for (int q = 0; q < NV; ++q) b2[q] += b3[q];
  for (int q = 0; q < NV; ++q) acc[q] += b2[q];
  if (last_panel) {
    float* dst = out + o * p + p0;
    const vacc two = {2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2};
    const float bo = bias ? bias[o] : 0.0f;
    const vacc bv = {bo, bo, bo, bo, bo, bo, bo, bo,
                     bo, bo, bo, bo, bo, bo, bo, bo};
    for (int q = 0; q < NV; ++q)
      vacc_store(dst + 16 * q,
                 two * acc[q] - vacc_load(total_tile + 16 * q) + bv);
  } else {
    float* dst = scratch + o * p + p0;
    for (int q = 0; q < NV; ++q) vacc_store(dst + 16 * q, acc[q]);
  }
}

// Fallback for ragged column tails: per-row accumulation over set bits.
void binary_rows_generic(const PackedBinaryMatrix& packed, std::int64_t o0,
                         std::int64_t o1, const float* col, std::int64_t p,
                         std::int64_t p0, std::int64_t pt,
                         const float* total_range, const float* bias,
                         float* out) {
  const std::int64_t wpr = packed.words_per_row();
  std::vector<float> acc(static_cast<std::size_t>(pt));
  for (std::int64_t o = o0; o < o1; ++o) {
    std::memset(acc.data(), 0, acc.size() * sizeof(float));
    const std::uint64_t* row = packed.row(o);
    for (std::int64_t w = 0; w < wpr; ++w) {
      std::uint64_t bits = row[w];
      while (bits) {
        const std::int64_t k = 64 * w + std::countr_zero(bits);
        bits &= bits - 1;
        const float* src = col + k * p + p0;
        for (std::int64_t j = 0; j < pt; ++j) acc[static_cast<std::size_t>(j)] += src[j];
      }
    }
    float* dst = out + o * p + p0;
    const float b = bias ? bias[o] : 0.0f;
    for (std::int64_t j = 0; j < pt; ++j)
      dst[j] = 2.0f * acc[static_cast<std::size_t>(j)] - total_range[j] + b;
  }
}

}  // namespace

namespace {
constexpr std::int64_t kPT = 64;    // columns per register tile
constexpr std::int64_t kPanel = 2;  // packed words per k-panel
}  // namespace

BinaryTapPlan make_tap_plan(const PackedBinaryMatrix& packed) {
  const std::int64_t wpr = packed.words_per_row();
  BinaryTapPlan plan;
  plan.panels = (wpr + kPanel - 1) / kPanel;
  plan.taps.reserve(static_cast<std::size_t>(packed.rows * packed.cols / 2));
  plan.start.assign(static_cast<std::size_t>(packed.rows * plan.panels + 1),
                    0);
  for (std::int64_t o = 0; o < packed.rows; ++o) {
    const std::uint64_t* row = packed.row(o);
    for (std::int64_t pi = 0; pi < plan.panels; ++pi) {
      const std::int64_t w0 = pi * kPanel;
      const std::int64_t w1 = std::min<std::int64_t>(wpr, w0 + kPanel);
      for (std::int64_t w = w0; w < w1; ++w) {
        std::uint64_t bits = row[w];
        while (bits) {
          plan.taps.push_back(static_cast<std::uint16_t>(
              64 * (w - w0) + std::countr_zero(bits)));
          bits &= bits - 1;
        }
      }
      plan.start[static_cast<std::size_t>(o * plan.panels + pi + 1)] =
          static_cast<std::int64_t>(plan.taps.size());
    }
  }
  return plan;
}

void binary_accumulate(const PackedBinaryMatrix& packed,
                       const BinaryTapPlan& plan, const float* col,
                       std::int64_t p, const float* bias, float* out) {
  const std::int64_t K = packed.cols, O = packed.rows;
  const std::int64_t full_p = p - p % kPT;
  const std::int64_t wpr = packed.words_per_row();
  const std::int64_t p_tiles = full_p / kPT;
  const std::int64_t n_panels = plan.panels;
  constexpr std::int64_t kGroup = 16;  // column tiles per buffered group
  thread_local FloatBuffer scratch, panels, totals;
  const auto need_scratch =
      static_cast<std::size_t>(n_panels > 1 && full_p > 0 ? O * p : 0);
  if (scratch.size() < need_scratch) scratch.resize(need_scratch);
  const auto need_panels = static_cast<std::size_t>(
      full_p > 0 ? std::min(p_tiles, kGroup) * kPanel * 64 * kPT : 0);
  if (panels.size() < need_panels) panels.resize(need_panels);
  if (totals.size() < static_cast<std::size_t>(full_p))
    totals.resize(static_cast<std::size_t>(full_p));

  // Per k-panel: one contiguous sweep over the panel's rows scatters them
  // into compact per-tile buffers (strided reads would thrash L1 sets and
  // defeat the prefetcher), accumulating column totals on the way. Every
  // output row then works against a cache-hot 32 KiB slice.
  for (std::int64_t g0 = 0; g0 < p_tiles; g0 += kGroup) {
    const std::int64_t gtiles = std::min<std::int64_t>(kGroup, p_tiles - g0);
    for (std::int64_t pi = 0; pi < n_panels; ++pi) {
      const std::int64_t w0 = pi * kPanel;
      const std::int64_t w1 = std::min<std::int64_t>(wpr, w0 + kPanel);
      const std::int64_t rows = std::min<std::int64_t>(64 * w1, K) - 64 * w0;
      parallel_for(rows, [&](std::int64_t rlo, std::int64_t rhi) {
        for (std::int64_t r = rlo; r < rhi; ++r) {
          const float* src = col + (64 * w0 + r) * p + g0 * kPT;
          for (std::int64_t t = 0; t < gtiles; ++t)
            std::memcpy(panels.data() + (t * kPanel * 64 + r) * kPT,
                        src + t * kPT, kPT * sizeof(float));
        }
      });
      parallel_for(gtiles, [&](std::int64_t tlo, std::int64_t thi) {
        for (std::int64_t t = tlo; t < thi; ++t) {
          const std::int64_t p0 = (g0 + t) * kPT;
          const float* panel = panels.data() + t * kPanel * 64 * kPT;
          float* tile_total = totals.data() + p0;
          if (pi == 0)
            for (std::int64_t j = 0; j < kPT; ++j) tile_total[j] = 0.0f;
          for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t j = 0; j < kPT; ++j)
              tile_total[j] += panel[r * kPT + j];
          for (std::int64_t o = 0; o < O; ++o) {
            const std::int64_t lo =
                plan.start[static_cast<std::size_t>(o * n_panels + pi)];
            const std::int64_t hi =
                plan.start[static_cast<std::size_t>(o * n_panels + pi + 1)];
            binary_row_tile<4>(pi == 0, pi == n_panels - 1,
                               plan.taps.data() + lo, hi - lo, o, panel, p,
                               p0, tile_total, bias, scratch.data(), out);
          }
        }
      });
    }
  }
  if (full_p < p) {
    std::vector<float> tail_total(static_cast<std::size_t>(p - full_p), 0.0f);
    for (std::int64_t k = 0; k < K; ++k) {
      const float* src = col + k * p + full_p;
      for (std::int64_t j = 0; j < p - full_p; ++j)
        tail_total[static_cast<std::size_t>(j)] += src[j];
    }
    parallel_for(O, [&](std::int64_t lo, std::int64_t hi) {
      binary_rows_generic(packed, lo, hi, col, p, full_p, p - full_p,
                          tail_total.data(), bias, out);
    });
  }
}

void binary_accumulate(const PackedBinaryMatrix& packed, const float* col,
                       std::int64_t p, const float* bias, float* out) {
  binary_accumulate(packed, make_tap_plan(packed), col, p, bias, out);
}

PackedConv make_packed_conv(const Tensor& sign_kernels, const Tensor& bias,
                            int stride, int pad) {
  if (sign_kernels.ndim() != 4)
    throw DimensionError("make_packed_conv: kernels must be 4-D");
  if (bias.numel() != sign_kernels.dim(0))
    throw DimensionError("make_packed_conv: one bias per output channel");
  PackedConv layer;
  layer.out_channels = sign_kernels.dim(0);
  layer.in_channels = sign_kernels.dim(1);
  layer.kh = sign_kernels.dim(2);
  layer.kw = sign_kernels.dim(3);
  layer.stride = stride;
  layer.pad = pad;
  layer.wb_packed = pack(sign_kernels, layer.out_channels,
                         layer.in_channels * layer.kh * layer.kw);
  layer.plan = make_tap_plan(layer.wb_packed);
  layer.bias = bias;
  return layer;
}

namespace {

// One im2col row (fixed input channel and kernel tap) into a dense buffer.
void im2col_row(const float* plane, std::int64_t H, std::int64_t W,
                std::int64_t ky, std::int64_t kx, int stride, int pad,
                std::int64_t oh, std::int64_t ow, float* rowbuf) {
  for (std::int64_t oy = 0; oy < oh; ++oy) {
    const std::int64_t iy = oy * stride - pad + ky;
    float* drow = rowbuf + oy * ow;
    if (iy < 0 || iy >= H) {
      for (std::int64_t ox = 0; ox < ow; ++ox) drow[ox] = 0.0f;
      continue;
    }
    const float* src = plane + iy * W;
    if (stride == 1) {
      const std::int64_t shift = kx - pad;
      const std::int64_t lo = std::max<std::int64_t>(0, -shift);
      const std::int64_t hi = std::min<std::int64_t>(ow, W - shift);
      for (std::int64_t ox = 0; ox < lo; ++ox) drow[ox] = 0.0f;
      if (hi > lo)
        std::memcpy(drow + lo, src + lo + shift,
                    static_cast<std::size_t>(hi - lo) * sizeof(float));
      for (std::int64_t ox = std::max(lo, hi); ox < ow; ++ox) drow[ox] = 0.0f;
    } else {
      for (std::int64_t ox = 0; ox < ow; ++ox) {
        const std::int64_t ix = ox * stride - pad + kx;
        drow[ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0f;
      }
    }
  }
}

}  // namespace

Tensor binary_conv_forward(const PackedConv& layer, const Tensor& input) {
  if (input.ndim() != 4 || input.dim(1) != layer.in_channels)
    throw DimensionError("binary_conv_forward: input must be [N x " +
                         std::to_string(layer.in_channels) + " x H x W]");
  const std::int64_t N = input.dim(0), H = input.dim(2), W = input.dim(3);
  const auto [oh, ow] =
      conv2d_output_extents(input.dim(2), input.dim(3), layer.kh, layer.kw,
                            layer.stride, layer.pad);
  const std::int64_t K = layer.in_channels * layer.kh * layer.kw;
  const std::int64_t P = oh * ow;
  const std::int64_t O = layer.out_channels;
  Tensor out({N, O, oh, ow});

  if (P % kPT != 0) {
    // Ragged patch counts take the plain layout.
    thread_local FloatBuffer col;
    if (col.size() < static_cast<std::size_t>(K * P))
      col.resize(static_cast<std::size_t>(K * P));
    for (std::int64_t n = 0; n < N; ++n) {
      im2col(input, n, layer.kh, layer.kw, layer.stride, layer.pad,
             col.data());
      binary_accumulate(layer.wb_packed, layer.plan, col.data(), P,
                        layer.bias.data(), out.data() + n * O * P);
    }
    return out;
  }

  // Fast path: unroll patches straight into tile-compact [tile][k][width]
  // layout so the accumulate core never re-reads a strided buffer. 64-wide
  // tiles keep a two-word panel slice inside L1.
  constexpr std::int64_t width = kPT;
  const std::int64_t p_tiles = P / width;
  const std::int64_t n_panels = layer.plan.panels;
  thread_local FloatBuffer tiled, totals, rowbuf, scratch;
  if (tiled.size() < static_cast<std::size_t>(K * P))
    tiled.resize(static_cast<std::size_t>(K * P));
  if (totals.size() < static_cast<std::size_t>(P))
    totals.resize(static_cast<std::size_t>(P));
  if (rowbuf.size() < static_cast<std::size_t>(P))
    rowbuf.resize(static_cast<std::size_t>(P));
  const auto need_scratch =
      static_cast<std::size_t>(n_panels > 1 ? O * P : 0);
  if (scratch.size() < need_scratch) scratch.resize(need_scratch);

  for (std::int64_t n = 0; n < N; ++n) {
    std::memset(totals.data(), 0, static_cast<std::size_t>(P) * sizeof(float));
    const float* img = input.data() + n * layer.in_channels * H * W;
    for (std::int64_t k = 0; k < K; ++k) {
      const std::int64_t c = k / (layer.kh * layer.kw);
      const std::int64_t ky = (k / layer.kw) % layer.kh;
      const std::int64_t kx = k % layer.kw;
      im2col_row(img + c * H * W, H, W, ky, kx, layer.stride, layer.pad, oh,
                 ow, rowbuf.data());
      for (std::int64_t t = 0; t < p_tiles; ++t)
        std::memcpy(tiled.data() + (t * K + k) * width,
                    rowbuf.data() + t * width,
                    static_cast<std::size_t>(width) * sizeof(float));
      for (std::int64_t j = 0; j < P; ++j)
        totals[static_cast<std::size_t>(j)] += rowbuf[static_cast<std::size_t>(j)];
    }
    float* dst = out.data() + n * O * P;
    parallel_for(p_tiles, [&](std::int64_t tlo, std::int64_t thi) {
      for (std::int64_t t = tlo; t < thi; ++t) {
        const float* tile_base = tiled.data() + t * K * width;
        for (std::int64_t pi = 0; pi < n_panels; ++pi) {
          const float* panel = tile_base + 64 * pi * kPanel * width;
          for (std::int64_t o = 0; o < O; ++o) {
            const std::int64_t lo =
                layer.plan.start[static_cast<std::size_t>(o * n_panels + pi)];
            const std::int64_t hi = layer.plan.start[static_cast<std::size_t>(
                o * n_panels + pi + 1)];
            binary_row_tile<4>(pi == 0, pi == n_panels - 1,
                               layer.plan.taps.data() + lo, hi - lo, o, panel,
                               P, t * width, totals.data() + t * width,
                               layer.bias.data(), scratch.data(), dst);
          }
        }
      }
    });
  }
  return out;
}

// ---- PackedNet -------------------------------------------------------------

PackedNet PackedNet::from_network(Network& net) {
  PackedNet packed;
  for (auto& layer : net.layers) {
    Item item;
    item.kind = layer->kind();
    switch (layer->kind()) {
      case LayerKind::kDense: {
        auto* dense = static_cast<DenseLayer*>(layer.get());
        item.dense = make_packed_dense(
            binarize_deterministic(dense->weights()), dense->bias());
        break;
      }
      case LayerKind::kConv: {
        auto* conv = static_cast<ConvLayer*>(layer.get());
        item.conv =
            make_packed_conv(binarize_deterministic(conv->kernels()),
                             conv->bias(), conv->stride(), conv->pad());
        break;
      }
      case LayerKind::kBatchNorm: {
        auto* bn = static_cast<BatchNormLayer*>(layer.get());
        const std::int64_t C = bn->channels();
        item.scale = Tensor({C});
        item.shift = Tensor({C});
        for (std::int64_t c = 0; c < C; ++c) {
          const float s =
              bn->gamma()[c] / std::sqrt(bn->running_var()[c] + bn->eps());
          item.scale[c] = s;
          item.shift[c] = bn->beta()[c] - s * bn->running_mean()[c];
        }
        break;
      }
      case LayerKind::kMaxPool: {
        auto* pool = static_cast<MaxPoolLayer*>(layer.get());
        item.window = pool->window();
        item.stride = pool->stride();
        break;
      }
      case LayerKind::kRelu:
      case LayerKind::kFlatten:
        break;
    }
    packed.items_.push_back(std::move(item));
  }
  return packed;
}

Tensor PackedNet::forward(const Tensor& input) const {
  Tensor x = input;
  for (const Item& item : items_) {
    switch (item.kind) {
      case LayerKind::kDense:
        x = binary_dense_forward(item.dense, x);
        break;
      case LayerKind::kConv:
        x = binary_conv_forward(item.conv, x);
        break;
      case LayerKind::kBatchNorm: {
        const std::int64_t N = x.dim(0), C = x.dim(1);
        const std::int64_t spatial = x.ndim() == 4 ? x.dim(2) * x.dim(3) : 1;
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t c = 0; c < C; ++c) {
            float* p = x.data() + (n * C + c) * spatial;
            const float s = item.scale[c], sh = item.shift[c];
            for (std::int64_t i = 0; i < spatial; ++i) p[i] = p[i] * s + sh;
          }
        break;
      }
      case LayerKind::kRelu: {
        float* p = x.data();
        for (std::int64_t i = 0; i < x.numel(); ++i)
          p[i] = p[i] > 0.0f ? p[i] : 0.0f;
        break;
      }
      case LayerKind::kMaxPool: {
        const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2),
                           W = x.dim(3);
        const std::int64_t oh = (H - item.window) / item.stride + 1;
        const std::int64_t ow = (W - item.window) / item.stride + 1;
        Tensor out({N, C, oh, ow});
        for (std::int64_t nc = 0; nc < N * C; ++nc) {
          const float* plane = x.data() + nc * H * W;
          float* dst = out.data() + nc * oh * ow;
          for (std::int64_t oy = 0; oy < oh; ++oy)
            for (std::int64_t ox = 0; ox < ow; ++ox) {
              float best = plane[(oy * item.stride) * W + ox * item.stride];
              for (int ky = 0; ky < item.window; ++ky)
                for (int kx = 0; kx < item.window; ++kx) {
                  const float v = plane[(oy * item.stride + ky) * W +
                                        ox * item.stride + kx];
                  if (v > best) best = v;
                }
              dst[oy * ow + ox] = best;
            }
        }
        x = std::move(out);
        break;
      }
      case LayerKind::kFlatten: {
        const std::int64_t rows = x.dim(0);
        std::int64_t rest = 1;
        for (int d = 1; d < x.ndim(); ++d) rest *= x.dim(d);
        x = std::move(x).reshaped({rows, rest});
        break;
      }
    }
  }
  return x;
}

}  // namespace binnet
