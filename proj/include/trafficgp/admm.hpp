#pragma once

// Global-consensus ADMM over K data shards, scaled-dual form:
//
//   theta_k <- argmin  f_k(theta) + rho/2 ||theta - z + u_k||^2   (inexact, warm started)
//   z       <- mean_k (theta_k + u_k)
//   u_k     <- u_k + theta_k - z
//
// f_k is the shard NLML for GP training; any Objective can be plugged in,
// which is how the convex test oracles drive the same loop.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "trafficgp/dataset.hpp"
#include "trafficgp/errors.hpp"
#include "trafficgp/gp.hpp"
#include "trafficgp/kernel.hpp"
#include "trafficgp/optimize.hpp"

namespace trafficgp {

enum class PartitionScheme { Strided, Block };

inline std::string_view to_string(PartitionScheme p) { return p == PartitionScheme::Strided ? "strided" : "block"; }

inline OptimConfig default_inner_config() {
  OptimConfig c;
  c.max_iters = 25;
  return c;
}

struct AdmmConfig {
  int k_workers = 1;
  double rho = 1.0;
  int max_outer = 50;
  double eps_abs = 1e-4;
  double eps_rel = 1e-3;
  OptimConfig inner = default_inner_config();
  PartitionScheme partition = PartitionScheme::Strided;
  std::uint64_t seed = 0;
  // Residual balancing on threshold-normalized residuals: rho *= tau when
  // r/eps_pri > mu * s/eps_dual, rho /= tau in the opposite case; the scaled
  // duals are rescaled to match.
  bool adaptive_rho = true;
  double balance_mu = 3.0;
  double balance_tau = 2.0;
  double relaxation = 1.6;  // alpha in (0,2); theta_k enters z and u as alpha theta_k + (1-alpha) z_prev
  bool fixed_iterations = false;  // run exactly max_outer iterations (benchmarking)

  void validate() const {
    if (k_workers < 1) throw Error(ErrorCode::Config, "admm: k_workers must be >= 1");
    if (!(rho > 0.0)) throw Error(ErrorCode::Config, "admm: rho must be > 0");
    if (max_outer < 1) throw Error(ErrorCode::Config, "admm: max_outer must be >= 1");
    if (!(eps_abs > 0.0) || !(eps_rel > 0.0)) throw Error(ErrorCode::Config, "admm: eps_abs/eps_rel must be > 0");
    if (!(balance_mu > 1.0) || !(balance_tau > 1.0)) throw Error(ErrorCode::Config, "admm: balance_mu/balance_tau must be > 1");
    if (!(relaxation > 0.0 && relaxation < 2.0)) throw Error(ErrorCode::Config, "admm: relaxation must be in (0,2)");
    inner.validate();
  }
};

struct Shard {
  int worker_id = 0;
  std::vector<std::size_t> indices;  // into the (training) dataset
  Dataset data;                      // raw, unstandardized values

  friend bool operator==(const Shard&, const Shard&) = default;
};

/// Index sets of a K-way split of 0..n-1, without size requirements.
/// Strided: worker k takes i with i mod K == k. Block: contiguous runs, the
/// first n mod K runs one longer.
inline std::vector<std::vector<std::size_t>> partition_indices(std::size_t n, std::size_t k, PartitionScheme scheme) {
  if (k < 1) throw Error(ErrorCode::Config, "partition: k_workers must be >= 1");
  std::vector<std::vector<std::size_t>> out(k);
  if (scheme == PartitionScheme::Strided) {
    for (std::size_t i = 0; i < n; ++i) out[i % k].push_back(i);
  } else {
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t next = 0;
    for (std::size_t w = 0; w < k; ++w) {
      const std::size_t len = base + (w < extra ? 1 : 0);
      for (std::size_t i = 0; i < len; ++i) out[w].push_back(next++);
    }
  }
  return out;
}

/// Splits data into K disjoint shards covering every index (see
/// partition_indices). Requires N >= 8K and at least max(8, min_dim + 1)
/// points per shard.
inline std::vector<Shard> partition(const Dataset& data, const AdmmConfig& cfg, std::size_t min_dim = 0) {
  if (cfg.k_workers < 1) throw Error(ErrorCode::Config, "partition: k_workers must be >= 1");
  const auto k = static_cast<std::size_t>(cfg.k_workers);
  const std::size_t n = data.size();
  const std::size_t min_points = std::max<std::size_t>(8, min_dim + 1);
  if (n < 8 * k || n / k < min_points) {
    throw Error(ErrorCode::InsufficientData, "partition: " + std::to_string(n) + " points cannot feed " +
                                                 std::to_string(k) + " workers with >= " +
                                                 std::to_string(min_points) + " points each");
  }
  auto sets = partition_indices(n, k, cfg.partition);
  std::vector<Shard> shards(k);
  for (std::size_t w = 0; w < k; ++w) {
    shards[w].worker_id = static_cast<int>(w);
    shards[w].indices = std::move(sets[w]);
    shards[w].data = subset(data, shards[w].indices);
  }
  return shards;
}

struct LocalUpdateResult {
  Vector theta;
  double objective = 0.0;  // f_k(theta), prox term excluded
  double wall_ms = 0.0;
};

/// argmin_theta f(theta) + rho/2 ||theta - z + u||^2, warm-started from
/// `warm`. If the solve fails it is retried once from z; a second failure
/// propagates.
inline LocalUpdateResult local_update(const Objective& f, const Vector& z, const Vector& u, const Vector& warm,
                                      const OptimConfig& inner_cfg, double rho) {
  if (z.size() != u.size() || z.size() != warm.size()) {
    throw Error(ErrorCode::ParameterShape, "local_update: dimension mismatch");
  }
  const auto start = std::chrono::steady_clock::now();
  if (!(rho > 0.0)) throw Error(ErrorCode::ParameterShape, "local_update: rho must be > 0");
  OptimConfig inner = inner_cfg;
  inner.prox = ProxTerm{rho, z - u};
  OptimResult res;
  try {
    res = minimize(f, warm, inner);
  } catch (const Error&) {
    res = minimize(f, z, inner);
  }
  const double prox = 0.5 * rho * (res.theta - (z - u)).squaredNorm();
  LocalUpdateResult out;
  out.theta = std::move(res.theta);
  out.objective = res.value - prox;
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

inline LocalUpdateResult local_update(const Objective& f, const Vector& z, const Vector& u, const Vector& warm,
                                      const AdmmConfig& cfg) {
  return local_update(f, z, u, warm, cfg.inner, cfg.rho);
}

/// z = (1/K) sum_k v_k, summed in index order.
inline Vector global_update(const std::vector<Vector>& locals_plus_duals) {
  if (locals_plus_duals.empty()) throw Error(ErrorCode::EmptyInput, "global_update: no workers");
  Vector z = locals_plus_duals.front();
  for (std::size_t k = 1; k < locals_plus_duals.size(); ++k) {
    if (locals_plus_duals[k].size() != z.size()) throw Error(ErrorCode::ParameterShape, "global_update: dimension mismatch");
    z += locals_plus_duals[k];
  }
  return z / static_cast<double>(locals_plus_duals.size());
}

inline Vector dual_update(const Vector& u, const Vector& theta, const Vector& z) {
  if (u.size() != theta.size() || u.size() != z.size()) throw Error(ErrorCode::ParameterShape, "dual_update: dimension mismatch");
  return u + theta - z;
}

struct Residuals {
  double primal = 0.0;  // sqrt(sum_k ||theta_k - z||^2)
  double dual = 0.0;    // rho * sqrt(K) * ||z - z_prev||
};

inline Residuals residuals(const std::vector<Vector>& thetas, const Vector& z, const Vector& z_prev, double rho) {
  double r2 = 0.0;
  for (const auto& t : thetas) r2 += (t - z).squaredNorm();
  return {std::sqrt(r2), rho * std::sqrt(static_cast<double>(thetas.size())) * (z - z_prev).norm()};
}

struct IterationRecord {
  double rho = 0.0;  // penalty used by this iteration's local solves
  double primal = 0.0;
  double dual = 0.0;
  double eps_primal = 0.0;
  double eps_dual = 0.0;
  double mean_objective = 0.0;
  double wall_ms = 0.0;
};

struct ConsensusState {
  Vector z;
  int iteration = 0;
  std::vector<IterationRecord> history;  // history.size() == iteration
};

struct WorkerTiming {
  double mean_ms = 0.0;
  double max_ms = 0.0;
  int calls = 0;
};

struct TrainResult {
  Vector z_star;
  bool converged = false;
  ConsensusState state;
  std::vector<Vector> thetas;
  std::vector<Vector> duals;
  std::vector<WorkerTiming> worker_timing;
  double final_rho = 0.0;
};

/// A failing worker, identified by index.
class WorkerFailure : public Error {
 public:
  WorkerFailure(int worker_id, ErrorCode code, const std::string& what)
      : Error(code, "worker " + std::to_string(worker_id) + ": " + what), worker_id_(worker_id) {}
  [[nodiscard]] int worker_id() const noexcept { return worker_id_; }

 private:
  int worker_id_;
};

/// The run stopped early; carries the iterations completed so far.
class AdmmAborted : public Error {
 public:
  AdmmAborted(int worker_id, int iteration, const std::string& cause, ConsensusState partial)
      : Error(ErrorCode::AbortedRun, "ADMM aborted at iteration " + std::to_string(iteration) + " (worker " +
                                         std::to_string(worker_id) + "): " + cause),
        worker_id_(worker_id),
        iteration_(iteration),
        partial_(std::move(partial)) {}

  [[nodiscard]] int worker_id() const noexcept { return worker_id_; }
  [[nodiscard]] int iteration() const noexcept { return iteration_; }
  [[nodiscard]] const ConsensusState& partial() const noexcept { return partial_; }

 private:
  int worker_id_;
  int iteration_;
  ConsensusState partial_;
};

/// Runs the local solves of one outer iteration. Results come back indexed by
/// worker. Implementations keep each worker's warm start (its previous
/// theta_k, or z on the first call).
class Executor {
 public:
  virtual ~Executor() = default;
  [[nodiscard]] virtual std::size_t num_workers() const = 0;
  virtual std::vector<LocalUpdateResult> local_updates(int iteration, const Vector& z, const std::vector<Vector>& duals,
                                                       double rho) = 0;
};

/// Worker-side state shared by the in-process executor and the network worker.
class LocalWorker {
 public:
  LocalWorker(int worker_id, Objective objective, OptimConfig inner)
      : worker_id_(worker_id), objective_(std::move(objective)), inner_(std::move(inner)) {}

  LocalUpdateResult update(const Vector& z, const Vector& u, double rho) {
    const Vector& warm = warm_ ? *warm_ : z;
    try {
      auto res = local_update(objective_, z, u, warm, inner_, rho);
      warm_ = res.theta;
      return res;
    } catch (const Error& e) {
      throw WorkerFailure(worker_id_, e.code(), e.what());
    }
  }

  [[nodiscard]] int worker_id() const noexcept { return worker_id_; }

 private:
  int worker_id_;
  Objective objective_;
  OptimConfig inner_;
  std::optional<Vector> warm_;
};

class InProcessExecutor final : public Executor {
 public:
  /// `threads` > 1 runs local solves concurrently; the result does not depend
  /// on it.
  InProcessExecutor(std::vector<Objective> objectives, const AdmmConfig& cfg, unsigned threads = 1)
      : threads_(std::max(1u, threads)) {
    workers_.reserve(objectives.size());
    for (std::size_t k = 0; k < objectives.size(); ++k) workers_.emplace_back(static_cast<int>(k), std::move(objectives[k]), cfg.inner);
  }

  [[nodiscard]] std::size_t num_workers() const override { return workers_.size(); }

  std::vector<LocalUpdateResult> local_updates(int /*iteration*/, const Vector& z, const std::vector<Vector>& duals,
                                               double rho) override {
    const std::size_t k = workers_.size();
    std::vector<LocalUpdateResult> out(k);
    std::vector<std::optional<WorkerFailure>> failures(k);
    auto run = [&](std::size_t w) {
      try {
        out[w] = workers_[w].update(z, duals[w], rho);
      } catch (const WorkerFailure& e) {
        failures[w].emplace(e);
      }
    };
    if (threads_ == 1 || k == 1) {
      for (std::size_t w = 0; w < k; ++w) run(w);
    } else {
      std::vector<std::thread> pool;
      const std::size_t nthreads = std::min<std::size_t>(threads_, k);
      for (std::size_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t] {
          for (std::size_t w = t; w < k; w += nthreads) run(w);
        });
      }
      for (auto& th : pool) th.join();
    }
    for (auto& f : failures) {
      if (f) throw *f;
    }
    return out;
  }

 private:
  std::vector<LocalWorker> workers_;
  unsigned threads_;
};

/// Read-only view passed to the per-iteration observer.
struct IterationView {
  int iteration;
  const Vector& z;
  const std::vector<Vector>& thetas;
  const std::vector<Vector>& duals;
  const IterationRecord& record;
};

using IterationObserver = std::function<void(const IterationView&)>;

/// Drives the consensus loop until both residuals fall below their
/// thresholds or max_outer iterations have run.
///   eps_primal = sqrt(K d) eps_abs + eps_rel max(||theta||, sqrt(K) ||z||)
///   eps_dual   = sqrt(K d) eps_abs + eps_rel rho ||u||
/// with ||.|| over the stacked worker vectors.
inline TrainResult run_consensus(Executor& executor, const Vector& z0, const AdmmConfig& cfg,
                                 const IterationObserver& observer = {}) {
  cfg.validate();
  const std::size_t k = executor.num_workers();
  if (k == 0) throw Error(ErrorCode::EmptyInput, "run_consensus: no workers");
  const auto dim = z0.size();
  const double kd = std::sqrt(static_cast<double>(k) * static_cast<double>(dim));

  TrainResult res;
  res.state.z = z0;
  res.thetas.assign(k, z0);
  res.duals.assign(k, Vector::Zero(dim));
  res.worker_timing.assign(k, {});
  double rho = cfg.rho;

  for (int it = 0; it < cfg.max_outer; ++it) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<LocalUpdateResult> locals;
    try {
      locals = executor.local_updates(it, res.state.z, res.duals, rho);
    } catch (const WorkerFailure& e) {
      throw AdmmAborted(e.worker_id(), it, e.what(), res.state);
    } catch (const Error& e) {
      throw AdmmAborted(-1, it, e.what(), res.state);
    }
    if (locals.size() != k) throw AdmmAborted(-1, it, "executor returned wrong number of results", res.state);

    const Vector z_prev = res.state.z;
    const double a = cfg.relaxation;
    double mean_obj = 0.0;
    std::vector<Vector> relaxed(k);
    std::vector<Vector> sums(k);
    for (std::size_t w = 0; w < k; ++w) {
      if (locals[w].theta.size() != dim) throw AdmmAborted(static_cast<int>(w), it, "theta dimension mismatch", res.state);
      res.thetas[w] = locals[w].theta;
      relaxed[w] = a == 1.0 ? res.thetas[w] : Vector(a * res.thetas[w] + (1.0 - a) * z_prev);
      sums[w] = relaxed[w] + res.duals[w];
      mean_obj += locals[w].objective;
      auto& t = res.worker_timing[w];
      t.mean_ms += (locals[w].wall_ms - t.mean_ms) / static_cast<double>(++t.calls);
      t.max_ms = std::max(t.max_ms, locals[w].wall_ms);
    }
    mean_obj /= static_cast<double>(k);

    res.state.z = global_update(sums);
    for (std::size_t w = 0; w < k; ++w) res.duals[w] = dual_update(res.duals[w], relaxed[w], res.state.z);

    const auto rs = residuals(res.thetas, res.state.z, z_prev, rho);
    double theta_norm2 = 0.0;
    double dual_norm2 = 0.0;
    for (std::size_t w = 0; w < k; ++w) {
      theta_norm2 += res.thetas[w].squaredNorm();
      dual_norm2 += res.duals[w].squaredNorm();
    }
    IterationRecord rec;
    rec.rho = rho;
    rec.primal = rs.primal;
    rec.dual = rs.dual;
    rec.eps_primal = kd * cfg.eps_abs +
                     cfg.eps_rel * std::max(std::sqrt(theta_norm2), std::sqrt(static_cast<double>(k)) * res.state.z.norm());
    rec.eps_dual = kd * cfg.eps_abs + cfg.eps_rel * rho * std::sqrt(dual_norm2);
    rec.mean_objective = mean_obj;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    res.state.history.push_back(rec);
    res.state.iteration = it + 1;

    if (observer) observer(IterationView{it, res.state.z, res.thetas, res.duals, rec});
    res.converged = rec.primal <= rec.eps_primal && rec.dual <= rec.eps_dual;
    if (res.converged && !cfg.fixed_iterations) break;
    if (cfg.adaptive_rho) {
      double scale = 1.0;
      const double rn = rec.primal / rec.eps_primal;
      const double sn = rec.dual / rec.eps_dual;
      if (rn > cfg.balance_mu * sn) {
        scale = cfg.balance_tau;
      } else if (sn > cfg.balance_mu * rn) {
        scale = 1.0 / cfg.balance_tau;
      }
      if (scale != 1.0) {
        rho *= scale;
        for (auto& u : res.duals) u /= scale;
      }
    }
  }
  res.final_rho = rho;
  res.z_star = res.state.z;
  return res;
}

/// Global standardization plus the shards it applies to.
struct AdmmProblem {
  Standardization stats;
  std::vector<Shard> shards;
};

inline AdmmProblem prepare_admm(const Dataset& data, const KernelSpec& spec, const AdmmConfig& cfg) {
  validate(data);
  cfg.validate();
  AdmmProblem p;
  p.stats = compute_standardization(data.values);
  p.shards = partition(data, cfg, spec.dim());
  return p;
}

inline Objective shard_objective(const Shard& shard, const KernelSpec& spec, const Standardization& stats) {
  return nlml_objective(standardize(shard.data, stats), spec);
}

inline InProcessExecutor make_in_process_executor(const AdmmProblem& problem, const KernelSpec& spec,
                                                  const AdmmConfig& cfg, unsigned threads = 1) {
  std::vector<Objective> objectives;
  for (const auto& s : problem.shards) objectives.push_back(shard_objective(s, spec, problem.stats));
  return InProcessExecutor(std::move(objectives), cfg, threads);
}

/// GP hyperparameter training by consensus ADMM, starting from default_theta.
inline TrainResult run_admm(const AdmmProblem& problem, const KernelSpec& spec, const AdmmConfig& cfg,
                            Executor& executor, const IterationObserver& observer = {}) {
  if (executor.num_workers() != problem.shards.size()) {
    throw Error(ErrorCode::ParameterShape, "run_admm: executor/shard count mismatch");
  }
  return run_consensus(executor, default_theta(spec), cfg, observer);
}

inline TrainResult run_admm(const Dataset& data, const KernelSpec& spec, const AdmmConfig& cfg, unsigned threads = 1,
                            const IterationObserver& observer = {}) {
  const auto problem = prepare_admm(data, spec, cfg);
  auto exec = make_in_process_executor(problem, spec, cfg, threads);
  return run_admm(problem, spec, cfg, exec, observer);
}

}  // namespace trafficgp
