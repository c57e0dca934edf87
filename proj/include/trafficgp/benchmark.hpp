#pragma once

// Fixed-iteration scaling benchmark: per-worker local-update wall time as a
// function of the worker count K.

#include <algorithm>
#include <chrono>
#include <span>
#include <vector>

#include "trafficgp/admm.hpp"
#include "trafficgp/errors.hpp"

namespace trafficgp {

struct ScalingRow {
  int k = 0;
  double mean_local_update_ms = 0.0;  // median over repetitions
  double total_train_s = 0.0;         // median over repetitions
  std::vector<double> local_update_ms;  // one entry per repetition
  std::vector<double> train_s;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw Error(ErrorCode::EmptyInput, "median: no values");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// For each K: `repetitions` runs of exactly `outer_iterations` ADMM steps on
/// one thread, so every local update is timed without contention.
inline std::vector<ScalingRow> benchmark_scaling(const Dataset& train, const KernelSpec& spec, AdmmConfig cfg,
                                                 std::span<const int> k_list, int outer_iterations, int repetitions) {
  if (k_list.empty()) throw Error(ErrorCode::Config, "benchmark: empty K list");
  if (outer_iterations < 1 || repetitions < 1) {
    throw Error(ErrorCode::Config, "benchmark: outer_iterations and repetitions must be >= 1");
  }
  const int k_max = *std::max_element(k_list.begin(), k_list.end());
  if (train.size() < 8 * static_cast<std::size_t>(std::max(k_max, 1))) {
    throw Error(ErrorCode::InsufficientData, "benchmark: N=" + std::to_string(train.size()) + " < 8*max(K)=" +
                                                 std::to_string(8 * k_max));
  }
  cfg.max_outer = outer_iterations;
  cfg.fixed_iterations = true;

  std::vector<ScalingRow> rows;
  for (const int k : k_list) {
    cfg.k_workers = k;
    ScalingRow row;
    row.k = k;
    const auto problem = prepare_admm(train, spec, cfg);
    for (int rep = 0; rep < repetitions; ++rep) {
      auto exec = make_in_process_executor(problem, spec, cfg, 1);
      const auto start = std::chrono::steady_clock::now();
      const auto res = run_admm(problem, spec, cfg, exec);
      row.train_s.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      double sum = 0.0;
      for (const auto& t : res.worker_timing) sum += t.mean_ms;
      row.local_update_ms.push_back(sum / static_cast<double>(res.worker_timing.size()));
    }
    row.mean_local_update_ms = median(row.local_update_ms);
    row.total_train_s = median(row.train_s);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace trafficgp
