#pragma once

// Split-merge matching: shuffle the indices into s balanced shards, match
// every shard on its own overlap matrix, and map the shard labels back.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "hmatch/classify.hpp"
#include "hmatch/error.hpp"
#include "hmatch/matrix.hpp"
#include "hmatch/overlap.hpp"
#include "hmatch/random.hpp"

namespace hmatch {

/// Environment variable that overrides the default worker count.
inline constexpr const char* kThreadsEnvVar = "HMATCH_THREADS";

/// Worker count: `requested` if nonzero, else $HMATCH_THREADS if set to a
/// positive integer, else the hardware concurrency (at least 1).
inline std::size_t resolve_thread_count(std::size_t requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv(kThreadsEnvVar)) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
/// exception thrown by any task is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < count && !failed; i = next++) {
      try {
        fn(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Random balanced assignment of [0, n) to s shards.
struct SplitPlan {
  std::size_t n = 0;
  std::size_t s = 0;
  std::uint64_t seed = 0;
  /// Original indices of each shard, ascending.
  std::vector<std::vector<std::size_t>> shards;
  /// assignment[i] = (shard, position of i within that shard).
  std::vector<std::pair<std::size_t, std::size_t>> assignment;
};

/// Shard sizes differ by at most one; the first n mod s shards get the extra point.
inline SplitPlan make_split(std::size_t n, std::size_t s, std::uint64_t seed) {
  if (s < 1 || 2 * s > n) {
    throw InvalidArgument("make_split: need 1 <= s <= n/2 (got n=" + std::to_string(n) +
                          ", s=" + std::to_string(s) + ")");
  }
  SplitPlan plan;
  plan.n = n;
  plan.s = s;
  plan.seed = seed;
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (s > 1) {
    RandomStream rng(seed, 0);
    rng.shuffle(std::span<std::size_t>(perm));
  }
  plan.shards.resize(s);
  const std::size_t base = n / s;
  const std::size_t extra = n % s;
  std::size_t pos = 0;
  for (std::size_t j = 0; j < s; ++j) {
    const std::size_t size = base + (j < extra ? 1 : 0);
    plan.shards[j].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                          perm.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(plan.shards[j].begin(), plan.shards[j].end());
    pos += size;
  }
  plan.assignment.resize(n);
  for (std::size_t j = 0; j < s; ++j)
    for (std::size_t k = 0; k < plan.shards[j].size(); ++k) plan.assignment[plan.shards[j][k]] = {j, k};
  return plan;
}

struct ShardResult {
  std::vector<std::size_t> indices;
  MatchResult result;
  double wall_ms = 0.0;
};

struct ParallelReport {
  LabelPartition partition;
  std::vector<ShardResult> shards;
  double total_ms = 0.0;
  /// Shards whose 2-means step saw identical values.
  std::size_t degenerate_shards = 0;
};

struct ParallelOptions {
  /// 0 = resolve_thread_count().
  std::size_t threads = 0;
};

/// Split-merge matching. Preprocessing runs once on the full data before
/// splitting; each shard then builds its own H and is classified with
/// `cfg`. A fixed threshold is passed to every shard unchanged, while an
/// `inlier_fraction` default is evaluated at the shard's own size. The
/// split is drawn from cfg.seed. The merged partition does not depend on
/// the number of workers or the order shards finish in.
inline ParallelReport parallel_match(const DenseMatrix& x, const DenseMatrix& y, std::size_t s,
                                     const MatchConfig& cfg, const ParallelOptions& opts = {}) {
  cfg.validate();
  detail::check_pair_shapes(x, y);
  const auto start = std::chrono::steady_clock::now();

  const DenseMatrix xp = preprocess(x, cfg.preprocess);
  const DenseMatrix yp = preprocess(y, cfg.preprocess);
  const SplitPlan plan = make_split(x.cols(), s, cfg.seed);

  ParallelReport report;
  report.shards.resize(s);
  parallel_for(s, resolve_thread_count(opts.threads), [&](std::size_t j) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& idx = plan.shards[j];
    const OverlapMatrix h =
        build_overlap_preprocessed(xp.select_columns(idx), yp.select_columns(idx), cfg.preprocess);
    ShardResult& out = report.shards[j];
    out.indices = idx;
    out.result = match(h, cfg);
    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  });

  std::vector<bool> mask(x.cols(), false);
  for (const auto& shard : report.shards) {
    for (std::size_t local : shard.result.partition.inliers()) mask[shard.indices[local]] = true;
    if (shard.result.diagnostics.degenerate) ++report.degenerate_shards;
  }
  report.partition = LabelPartition::from_mask(mask);
  report.total_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace hmatch
