#pragma once

#include <cstdint>
#include <functional>

namespace binnet {

/// Number of workers the kernels may use. Defaults to the hardware
/// concurrency, capped by the BINNET_THREADS environment variable.
int worker_count();

/// Runs body(lo, hi) over a static partition of [0, n). Each index is
/// handled by exactly one worker, so disjoint-output kernels stay
/// deterministic regardless of the worker count.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& body);

/// Forces single-worker execution while alive (benchmark timing runs).
class SingleWorkerGuard {
 public:
  SingleWorkerGuard();
  ~SingleWorkerGuard();
  SingleWorkerGuard(const SingleWorkerGuard&) = delete;
  SingleWorkerGuard& operator=(const SingleWorkerGuard&) = delete;
};

}  // namespace binnet
