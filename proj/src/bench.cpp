#include "binnet/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "binnet/binarize.hpp"
#include "binnet/common.hpp"
#include "binnet/fastpath.hpp"
#include "binnet/parallel.hpp"
#include "binnet/rng.hpp"
#include "binnet/tensor.hpp"

namespace binnet {
namespace {

constexpr int kWarmupReps = 5;
constexpr int kMinReps = 30;

Tensor random_uniform(std::vector<std::int64_t> shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i)
    t[i] = 2.0f * rng.next_float() - 1.0f;
  return t;
}

double tensor_sum(const Tensor& t) {
  double s = 0.0;
  for (std::int64_t i = 0; i < t.numel(); ++i) s += t[i];
  return s;
}

std::int64_t percentile(const std::vector<std::int64_t>& sorted, double q) {
  const auto idx = static_cast<std::size_t>(
      std::llround(q * static_cast<double>(sorted.size() - 1)));
  return sorted[idx];
}

template <typename Fn>
BenchResult time_kernel(const std::string& name, const std::string& size_str,
                        int reps, Fn&& fn) {
  BenchResult r;
  r.kernel = name;
  r.problem_size = size_str;
  r.reps = reps;
  SingleWorkerGuard single;
  for (int i = 0; i < kWarmupReps; ++i) r.checksum = fn();
  std::vector<std::int64_t> ns(static_cast<std::size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    r.checksum = fn();
    const auto t1 = std::chrono::steady_clock::now();
    ns[static_cast<std::size_t>(i)] =
        std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
  }
  std::sort(ns.begin(), ns.end());
  r.p10_ns = percentile(ns, 0.10);
  r.median_ns = percentile(ns, 0.50);
  r.p90_ns = percentile(ns, 0.90);
  return r;
}

}  // namespace

const char* bench_kernel_name(BenchKernel kernel) {
  switch (kernel) {
    case BenchKernel::kFpDense: return "fp_dense";
    case BenchKernel::kBinDense: return "bin_dense";
    case BenchKernel::kFpConv: return "fp_conv";
    case BenchKernel::kBinConv: return "bin_conv";
  }
  return "?";
}

std::optional<BenchKernel> parse_bench_kernel(const std::string& name) {
  if (name == "fp_dense") return BenchKernel::kFpDense;
  if (name == "bin_dense") return BenchKernel::kBinDense;
  if (name == "fp_conv") return BenchKernel::kFpConv;
  if (name == "bin_conv") return BenchKernel::kBinConv;
  return std::nullopt;
}

BenchResult run_benchmark(BenchKernel kernel, std::int64_t size, int reps) {
  if (reps < kMinReps)
    throw DomainError("run_benchmark: at least " + std::to_string(kMinReps) +
                      " repetitions required, got " + std::to_string(reps));
  if (size < 1) throw DomainError("run_benchmark: size must be >= 1");

  // fp/bin pairs share one problem stream so they see identical weights.
  const bool is_conv = kernel == BenchKernel::kFpConv ||
                       kernel == BenchKernel::kBinConv;
  Rng rng = Rng::derive(42, is_conv ? 1 : 0);
  switch (kernel) {
    case BenchKernel::kFpDense:
    case BenchKernel::kBinDense: {
      const Tensor signs = binarize_deterministic(random_uniform({size, size}, rng));
      const Tensor bias = random_uniform({size}, rng);
      const Tensor a = random_uniform({1, size}, rng);
      const std::string dims =
          std::to_string(size) + "x" + std::to_string(size);
      if (kernel == BenchKernel::kFpDense) {
        return time_kernel("fp_dense", dims, reps, [&] {
          Tensor out = matmul_nt(a, signs);
          for (std::int64_t j = 0; j < size; ++j) out[j] += bias[j];
          return tensor_sum(out);
        });
      }
      const PackedDense packed = make_packed_dense(signs, bias);
      return time_kernel("bin_dense", dims, reps, [&] {
        return tensor_sum(binary_dense_forward(packed, a));
      });
    }
    case BenchKernel::kFpConv:
    case BenchKernel::kBinConv: {
      const std::int64_t hw = 32;
      const Tensor signs =
          binarize_deterministic(random_uniform({size, size, 3, 3}, rng));
      const Tensor bias = random_uniform({size}, rng);
      const Tensor input = random_uniform({1, size, hw, hw}, rng);
      const std::string dims = std::to_string(size) + "ch3x3@" +
                               std::to_string(hw) + "x" + std::to_string(hw);
      if (kernel == BenchKernel::kFpConv) {
        return time_kernel("fp_conv", dims, reps, [&] {
          Tensor out = conv2d(input, signs, 1, 1);
          const std::int64_t p = out.dim(2) * out.dim(3);
          for (std::int64_t j = 0; j < size; ++j) {
            float* row = out.data() + j * p;
            for (std::int64_t i = 0; i < p; ++i) row[i] += bias[j];
          }
          return tensor_sum(out);
        });
      }
      const PackedConv packed = make_packed_conv(signs, bias, 1, 1);
      return time_kernel("bin_conv", dims, reps, [&] {
        return tensor_sum(binary_conv_forward(packed, input));
      });
    }
  }
  throw DomainError("run_benchmark: unknown kernel");
}

std::string bench_csv_row(const BenchResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%s,%d,%lld,%lld,%lld,%.9g",
                r.kernel.c_str(), r.problem_size.c_str(), r.reps,
                static_cast<long long>(r.median_ns),
                static_cast<long long>(r.p10_ns),
                static_cast<long long>(r.p90_ns), r.checksum);
  return std::string(buf);
}

}  // namespace binnet
