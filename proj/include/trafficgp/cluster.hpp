#pragma once

// Networked ADMM: a worker process serves one coordinator connection; the
// coordinator drives run_consensus through RemoteExecutor, which keeps a
// strict per-iteration barrier and aggregates in worker-index order.

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "trafficgp/admm.hpp"
#include "trafficgp/errors.hpp"
#include "trafficgp/fusion.hpp"
#include "trafficgp/log.hpp"
#include "trafficgp/net.hpp"
#include "trafficgp/protocol.hpp"

namespace trafficgp::cluster {

namespace proto = trafficgp::protocol;

/// Serves a single coordinator connection until Shutdown.
/// serve() returns the process exit code: 0 after Shutdown, 1 on any failure
/// (an Error message is sent first when the connection is still usable).
class WorkerServer {
 public:
  explicit WorkerServer(const net::Endpoint& listen) : listener_(listen) {}

  [[nodiscard]] const net::Endpoint& endpoint() const noexcept { return listener_.endpoint(); }

  int serve() {
    net::Socket conn;
    try {
      conn = listener_.accept();
    } catch (const Error& e) {
      log::error("worker: accept failed: {}", e.what());
      return 1;
    }
    log::info("worker: coordinator connected on {}", endpoint().str());
    for (;;) {
      proto::Message msg;
      try {
        msg = net::recv_message(conn, std::chrono::hours(24 * 365));
      } catch (const Error& e) {
        log::error("worker: receive failed: {}", e.what());
        if (e.code() != ErrorCode::Protocol || std::string(e.what()).find("closed") == std::string::npos) {
          reply_error(conn, "PROTOCOL_ERROR", e.what());
        }
        return 1;
      }
      if (std::holds_alternative<proto::Shutdown>(msg)) {
        try_send(conn, proto::Ack{worker_id(), "Shutdown"});
        log::info("worker: shutdown");
        return 0;
      }
      if (auto* init = std::get_if<proto::Init>(&msg)) {
        if (state_) return reply_error(conn, "ALREADY_INITIALIZED", "Init received twice");
        state_.emplace(State{*init, LocalWorker(init->worker_id, shard_objective(init->shard, init->spec, init->stats),
                                                init->cfg.inner)});
        log::info("worker {}: initialized with {} points", init->worker_id, init->shard.data.size());
        if (!try_send(conn, proto::Ack{init->worker_id, "Init"})) return 1;
        continue;
      }
      if (auto* req = std::get_if<proto::LocalUpdateRequest>(&msg)) {
        if (!state_) return reply_error(conn, "NOT_INITIALIZED", "LocalUpdateRequest before Init");
        if (last_iteration_ && req->iteration <= *last_iteration_) {
          return reply_error(conn, "OUT_OF_ORDER", "iteration " + std::to_string(req->iteration) +
                                                       " after " + std::to_string(*last_iteration_));
        }
        const auto dim = state_->init.spec.dim();
        if (req->z.size() != dim || req->u.size() != dim) {
          return reply_error(conn, "PARAMETER_SHAPE", "z/u dimension does not match kernel");
        }
        last_iteration_ = req->iteration;
        try {
          const auto res = state_->worker.update(to_vec(req->z), to_vec(req->u), req->rho);
          proto::LocalUpdateResponse out{worker_id(), req->iteration,
                                         std::vector<double>(res.theta.data(), res.theta.data() + res.theta.size()),
                                         res.objective, res.wall_ms};
          if (!try_send(conn, out)) return 1;
        } catch (const Error& e) {
          return reply_error(conn, "LOCAL_UPDATE_FAILED", e.what());
        }
        continue;
      }
      if (auto* req = std::get_if<proto::PredictRequest>(&msg)) {
        if (!state_) return reply_error(conn, "NOT_INITIALIZED", "PredictRequest before Init");
        try {
          auto e = expert_predict(state_->init.shard, state_->init.spec, to_vec(req->z), state_->init.stats,
                                  req->query_times);
          if (!try_send(conn, proto::PredictResponse{worker_id(), std::move(e.mean), std::move(e.variance)})) return 1;
        } catch (const Error& e) {
          return reply_error(conn, "PREDICT_FAILED", e.what());
        }
        continue;
      }
      return reply_error(conn, "UNEXPECTED_MESSAGE", std::string(proto::type_name(msg)) + " is not a request");
    }
  }

 private:
  struct State {
    proto::Init init;
    LocalWorker worker;
  };

  static Vector to_vec(const std::vector<double>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  [[nodiscard]] int worker_id() const { return state_ ? state_->init.worker_id : -1; }

  static bool try_send(const net::Socket& conn, const proto::Message& m) {
    try {
      net::send_message(conn, m);
      return true;
    } catch (const Error& e) {
      log::error("worker: send failed: {}", e.what());
      return false;
    }
  }

  int reply_error(const net::Socket& conn, const std::string& code, const std::string& detail) {
    log::error("worker {}: {}: {}", worker_id(), code, detail);
    try_send(conn, proto::ErrorReply{code, detail});
    return 1;
  }

  net::Listener listener_;
  std::optional<State> state_;
  std::optional<int> last_iteration_;
};

struct ClusterOptions {
  std::chrono::milliseconds connect_timeout{10'000};
  std::chrono::milliseconds iteration_timeout{300'000};
};

/// Executor backed by remote workers, one connection each.
class RemoteExecutor final : public Executor {
 public:
  RemoteExecutor(const std::vector<net::Endpoint>& endpoints, const AdmmProblem& problem, const KernelSpec& spec,
                 const AdmmConfig& cfg, ClusterOptions opts = {})
      : opts_(opts) {
    if (endpoints.size() != problem.shards.size()) {
      throw Error(ErrorCode::Config, "cluster: " + std::to_string(endpoints.size()) + " endpoints for " +
                                         std::to_string(problem.shards.size()) + " shards");
    }
    for (std::size_t k = 0; k < endpoints.size(); ++k) {
      try {
        conns_.push_back(net::connect(endpoints[k], opts_.connect_timeout));
      } catch (const Error& e) {
        shutdown();
        throw WorkerFailure(static_cast<int>(k), e.code(), "connect " + endpoints[k].str() + ": " + e.what());
      }
    }
    const auto deadline = net::Clock::now() + opts_.iteration_timeout;
    for (std::size_t k = 0; k < conns_.size(); ++k) {
      guarded(k, [&] {
        net::send_message(conns_[k], proto::Init{static_cast<int>(k), spec, problem.shards[k], cfg, problem.stats});
      });
    }
    for (std::size_t k = 0; k < conns_.size(); ++k) {
      const auto reply = receive(k, deadline);
      const auto* ack = std::get_if<proto::Ack>(&reply);
      if (!ack || ack->of != "Init") fail(k, ErrorCode::Protocol, "expected Ack for Init");
    }
  }

  RemoteExecutor(const RemoteExecutor&) = delete;
  RemoteExecutor& operator=(const RemoteExecutor&) = delete;
  ~RemoteExecutor() override { shutdown(); }

  [[nodiscard]] std::size_t num_workers() const override { return conns_.size(); }

  std::vector<LocalUpdateResult> local_updates(int iteration, const Vector& z, const std::vector<Vector>& duals,
                                               double rho) override {
    const std::vector<double> zv(z.data(), z.data() + z.size());
    for (std::size_t k = 0; k < conns_.size(); ++k) {
      proto::LocalUpdateRequest req{iteration, zv, std::vector<double>(duals[k].data(), duals[k].data() + duals[k].size()),
                                    rho};
      guarded(k, [&] { net::send_message(conns_[k], req); });
    }
    // Barrier: all responses of this iteration, read in worker-index order.
    const auto deadline = net::Clock::now() + opts_.iteration_timeout;
    std::vector<LocalUpdateResult> out(conns_.size());
    for (std::size_t k = 0; k < conns_.size(); ++k) {
      const auto reply = receive(k, deadline);
      const auto* resp = std::get_if<proto::LocalUpdateResponse>(&reply);
      if (!resp) fail(k, ErrorCode::Protocol, "expected LocalUpdateResponse");
      if (resp->iteration != iteration) fail(k, ErrorCode::Protocol, "response for the wrong iteration");
      out[k].theta = Eigen::Map<const Vector>(resp->theta.data(), static_cast<Eigen::Index>(resp->theta.size()));
      out[k].objective = resp->objective;
      out[k].wall_ms = resp->wall_ms;
    }
    return out;
  }

  /// Expert predictions from every worker at hyperparameters z.
  std::vector<ExpertPrediction> predict(const Vector& z, const std::vector<double>& query) {
    const std::vector<double> zv(z.data(), z.data() + z.size());
    for (std::size_t k = 0; k < conns_.size(); ++k) {
      guarded(k, [&] { net::send_message(conns_[k], proto::PredictRequest{zv, query}); });
    }
    const auto deadline = net::Clock::now() + opts_.iteration_timeout;
    std::vector<ExpertPrediction> out;
    for (std::size_t k = 0; k < conns_.size(); ++k) {
      const auto reply = receive(k, deadline);
      const auto* resp = std::get_if<proto::PredictResponse>(&reply);
      if (!resp) fail(k, ErrorCode::Protocol, "expected PredictResponse");
      out.push_back({static_cast<int>(k), resp->mean, resp->variance});
    }
    return out;
  }

  /// Best effort: Shutdown to every open connection, then close.
  void shutdown() noexcept {
    for (auto& c : conns_) {
      if (!c.valid()) continue;
      try {
        net::send_message(c, proto::Shutdown{});
        (void)net::recv_message(c, std::chrono::milliseconds(2000));
      } catch (...) {
      }
      c.close();
    }
  }

 private:
  [[noreturn]] void fail(std::size_t k, ErrorCode code, const std::string& what) {
    conns_[k].close();
    throw WorkerFailure(static_cast<int>(k), code, what);
  }

  template <class F>
  void guarded(std::size_t k, F&& f) {
    if (!conns_[k].valid()) fail(k, ErrorCode::Protocol, "connection already closed");
    try {
      f();
    } catch (const WorkerFailure&) {
      throw;
    } catch (const Error& e) {
      fail(k, e.code(), e.what());
    }
  }

  proto::Message receive(std::size_t k, net::Clock::time_point deadline) {
    proto::Message m;
    guarded(k, [&] {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - net::Clock::now());
      m = net::recv_message(conns_[k], std::max(left, std::chrono::milliseconds(0)));
    });
    if (const auto* err = std::get_if<proto::ErrorReply>(&m)) fail(k, ErrorCode::AbortedRun, err->code + ": " + err->detail);
    return m;
  }

  ClusterOptions opts_;
  std::vector<net::Socket> conns_;
};

struct CoordinatorResult {
  TrainResult train;
  std::optional<PredictiveDistribution> prediction;  // rBCM over worker experts, if query given
  std::vector<ExpertPrediction> experts;
};

/// Partitions `data`, initializes the workers, runs ADMM remotely and
/// optionally gathers expert predictions at z* for `query`. Any worker
/// failure aborts the run (AdmmAborted) after a best-effort Shutdown.
inline CoordinatorResult coordinator_run(const Dataset& data, const KernelSpec& spec, const AdmmConfig& cfg,
                                         const std::vector<net::Endpoint>& endpoints, ClusterOptions opts = {},
                                         const std::optional<std::vector<double>>& query = std::nullopt,
                                         const IterationObserver& observer = {}) {
  if (endpoints.size() != static_cast<std::size_t>(cfg.k_workers)) {
    throw Error(ErrorCode::Config, "cluster: endpoint count must equal k_workers");
  }
  const auto problem = prepare_admm(data, spec, cfg);
  std::optional<RemoteExecutor> exec;
  try {
    exec.emplace(endpoints, problem, spec, cfg, opts);
  } catch (const WorkerFailure& e) {
    throw AdmmAborted(e.worker_id(), 0, e.what(), ConsensusState{default_theta(spec), 0, {}});
  }
  CoordinatorResult out;
  out.train = run_admm(problem, spec, cfg, *exec, observer);  // AdmmAborted propagates; dtor shuts down
  if (query) {
    try {
      out.experts = exec->predict(out.train.z_star, *query);
    } catch (const WorkerFailure& e) {
      throw AdmmAborted(e.worker_id(), out.train.state.iteration, e.what(), out.train.state);
    }
    out.prediction = fuse_experts(out.experts, problem.stats, prior_variance(spec, out.train.z_star));
  }
  exec->shutdown();
  return out;
}

}  // namespace trafficgp::cluster
