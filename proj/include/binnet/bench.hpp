#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace binnet {

enum class BenchKernel { kFpDense, kBinDense, kFpConv, kBinConv };

const char* bench_kernel_name(BenchKernel kernel);
std::optional<BenchKernel> parse_bench_kernel(const std::string& name);

/// One timed kernel measurement. Latencies are nanoseconds per invocation
/// over `reps` repetitions after warmup; the checksum is the sum of the
/// last output and keeps the timed call observable.
struct BenchResult {
  std::string kernel;
  std::string problem_size;
  int reps = 0;
  std::int64_t median_ns = 0;
  std::int64_t p10_ns = 0;
  std::int64_t p90_ns = 0;
  double checksum = 0.0;
};

/// Runs a kernel on a fixed seeded problem. Dense kernels compute a batch-1
/// [size x size] layer; conv kernels run size->size channels of 3x3 taps on
/// a 32x32 image. Requires reps >= 30; timing uses a monotonic clock, five
/// warmup repetitions, and a single worker.
BenchResult run_benchmark(BenchKernel kernel, std::int64_t size, int reps);

inline constexpr const char* kBenchCsvHeader =
    "kernel,size,reps,median_ns,p10_ns,p90_ns,checksum";

std::string bench_csv_row(const BenchResult& r);

}  // namespace binnet
