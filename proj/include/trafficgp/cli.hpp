#pragma once

// The trafficgp command-line driver: run config parsing, the generate /
// train / evaluate / benchmark / worker commands and their reports.
//
// Exit codes: 0 success, 2 config or usage error, 3 runtime error.
// Reports are written with sorted keys and carry no wall-clock values; all
// timings go to a *_timing.json next to them, so a seeded in-process run
// reproduces its report byte for byte.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trafficgp/admm.hpp"
#include "trafficgp/benchmark.hpp"
#include "trafficgp/cluster.hpp"
#include "trafficgp/errors.hpp"
#include "trafficgp/fusion.hpp"
#include "trafficgp/gp.hpp"
#include "trafficgp/kernel.hpp"
#include "trafficgp/log.hpp"
#include "trafficgp/net.hpp"
#include "trafficgp/serialize.hpp"
#include "trafficgp/traffic.hpp"

namespace trafficgp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

enum class TrainMode { Centralized, Admm };

inline std::string to_string(TrainMode m) { return m == TrainMode::Centralized ? "centralized" : "admm"; }

struct DataSection {
  std::optional<std::string> csv;  // otherwise synthetic
  TrafficConfig synthetic;
  SplitSpec split;
};

struct TrainSection {
  TrainMode mode = TrainMode::Centralized;
  AdmmConfig admm;
  OptimConfig optim;
  int threads = 1;
};

struct PredictSection {
  FusionStrategy strategy = FusionStrategy::rbcm();
  std::vector<FusionStrategy::Kind> benchmark;  // extra strategies scored side by side
};

struct ClusterSection {
  std::vector<net::Endpoint> endpoints;
  double connect_timeout_s = 10.0;
  double iteration_timeout_s = 300.0;
};

struct BenchmarkSection {
  std::vector<int> k_list{2, 4, 8, 16};
  int outer_iterations = 5;
  int repetitions = 3;
};

struct RunConfig {
  DataSection data;
  KernelSpec kernel = KernelSpec::traffic_default();
  TrainSection train;
  PredictSection predict;
  ClusterSection cluster;
  BenchmarkSection benchmark;
  std::string output_dir = "trafficgp-out";
};

// ---------------------------------------------------------------------------
// Config parsing

inline TrainMode parse_mode(const std::string& s, const std::string& where) {
  if (s == "centralized") return TrainMode::Centralized;
  if (s == "admm") return TrainMode::Admm;
  throw Error(ErrorCode::Config, where + ": mode must be 'centralized' or 'admm', got '" + s + "'");
}

inline FusionStrategy::Kind parse_strategy_kind(const std::string& s, const std::string& where) {
  if (s == "rbcm") return FusionStrategy::Kind::Rbcm;
  if (s == "sod") return FusionStrategy::Kind::Sod;
  if (s == "centralized") return FusionStrategy::Kind::Centralized;
  throw Error(ErrorCode::Config, where + ": strategy must be 'rbcm', 'sod' or 'centralized', got '" + s + "'");
}

inline std::string kind_name(FusionStrategy::Kind k) { return to_string(FusionStrategy{k, 0}); }

inline std::vector<int> parse_k_list(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::Config, where + ": expected a non-empty array of integers");
  std::vector<int> out;
  for (const auto& e : j) {
    if (!e.is_number_integer() || e.get<std::int64_t>() < 1 || e.get<std::int64_t>() > 4096) {
      throw Error(ErrorCode::Config, where + ": K values must be integers in [1, 4096]");
    }
    out.push_back(e.get<int>());
  }
  return out;
}

inline DataSection data_from_json(const json& j) {
  ObjectReader r(j, "data");
  DataSection d;
  if (r.has("csv") && r.has("synthetic")) r.fail("give either 'csv' or 'synthetic', not both");
  if (r.has("csv")) d.csv = r.string("csv");
  if (r.has("synthetic")) d.synthetic = traffic_config_from_json(r.at("synthetic"), "data.synthetic");
  if (r.has("split")) {
    ObjectReader s(r.at("split"), "data.split");
    d.split.train_fraction = s.number("train_fraction", d.split.train_fraction);
    s.finish();
    if (!(d.split.train_fraction > 0.0 && d.split.train_fraction < 1.0)) s.fail("train_fraction must be in (0,1)");
  }
  r.finish();
  return d;
}

inline TrainSection train_from_json(const json& j) {
  ObjectReader r(j, "train");
  TrainSection t;
  t.mode = parse_mode(r.string("mode", "centralized"), "train");
  if (r.has("admm")) t.admm = admm_config_from_json(r.at("admm"), "train.admm");
  if (r.has("optim")) t.optim = optim_config_from_json(r.at("optim"), t.optim, "train.optim");
  t.threads = static_cast<int>(r.integer("threads", t.threads));
  if (t.threads < 1 || t.threads > 256) r.fail("threads must be in [1, 256]");
  r.finish();
  return t;
}

inline PredictSection predict_from_json(const json& j) {
  ObjectReader r(j, "predict");
  PredictSection p;
  p.strategy.kind = parse_strategy_kind(r.string("strategy", "rbcm"), "predict");
  const auto w = r.integer("sod_worker", 0);
  if (w < 0) r.fail("sod_worker must be >= 0");
  p.strategy.sod_worker = static_cast<int>(w);
  if (r.has("benchmark")) {
    const auto& b = r.at("benchmark");
    if (!b.is_array()) r.fail("benchmark must be an array of strategy names");
    for (const auto& e : b) {
      if (!e.is_string()) r.fail("benchmark must be an array of strategy names");
      p.benchmark.push_back(parse_strategy_kind(e.get<std::string>(), "predict.benchmark"));
    }
  }
  r.finish();
  return p;
}

inline ClusterSection cluster_from_json(const json& j) {
  ObjectReader r(j, "cluster");
  ClusterSection c;
  if (r.has("endpoints")) {
    const auto& e = r.at("endpoints");
    if (!e.is_array()) r.fail("endpoints must be an array of \"HOST:PORT\" strings");
    for (const auto& s : e) {
      if (!s.is_string()) r.fail("endpoints must be an array of \"HOST:PORT\" strings");
      c.endpoints.push_back(net::parse_endpoint(s.get<std::string>()));
    }
  }
  c.connect_timeout_s = r.number("connect_timeout_s", c.connect_timeout_s);
  c.iteration_timeout_s = r.number("iteration_timeout_s", c.iteration_timeout_s);
  if (!(c.connect_timeout_s > 0.0) || !(c.iteration_timeout_s > 0.0)) r.fail("timeouts must be > 0");
  r.finish();
  return c;
}

inline BenchmarkSection benchmark_from_json(const json& j) {
  ObjectReader r(j, "benchmark");
  BenchmarkSection b;
  if (r.has("k_list")) b.k_list = parse_k_list(r.at("k_list"), "benchmark.k_list");
  b.outer_iterations = static_cast<int>(r.integer("outer_iterations", b.outer_iterations));
  b.repetitions = static_cast<int>(r.integer("repetitions", b.repetitions));
  if (b.outer_iterations < 1 || b.repetitions < 1) r.fail("outer_iterations and repetitions must be >= 1");
  r.finish();
  return b;
}

/// Validates the whole document; every section is optional.
inline RunConfig run_config_from_json(const json& j) {
  ObjectReader r(j, "config");
  RunConfig c;
  if (r.has("data")) c.data = data_from_json(r.at("data"));
  if (r.has("kernel")) c.kernel = kernel_spec_from_json(r.at("kernel"));
  if (r.has("train")) c.train = train_from_json(r.at("train"));
  if (r.has("predict")) c.predict = predict_from_json(r.at("predict"));
  if (r.has("cluster")) c.cluster = cluster_from_json(r.at("cluster"));
  if (r.has("benchmark")) c.benchmark = benchmark_from_json(r.at("benchmark"));
  if (r.has("output")) {
    const auto& o = r.at("output");
    if (o.is_string()) {
      c.output_dir = o.get<std::string>();
    } else {
      ObjectReader w(o, "output");
      c.output_dir = w.string("dir");
      w.finish();
    }
    if (c.output_dir.empty()) r.fail("output directory must not be empty");
  }
  r.finish();
  return c;
}

inline json to_json(const RunConfig& c) {
  json data = {{"split", {{"train_fraction", c.data.split.train_fraction}}}};
  if (c.data.csv) {
    data["csv"] = *c.data.csv;
  } else {
    data["synthetic"] = to_json(c.data.synthetic);
  }
  json bench = json::array();
  for (auto k : c.predict.benchmark) bench.push_back(kind_name(k));
  json endpoints = json::array();
  for (const auto& e : c.cluster.endpoints) endpoints.push_back(e.str());
  return {
      {"data", data},
      {"kernel", to_json(c.kernel)},
      {"train",
       {{"mode", to_string(c.train.mode)},
        {"admm", to_json(c.train.admm)},
        {"optim", to_json(c.train.optim)},
        {"threads", c.train.threads}}},
      {"predict",
       {{"strategy", kind_name(c.predict.strategy.kind)},
        {"sod_worker", c.predict.strategy.sod_worker},
        {"benchmark", bench}}},
      {"cluster",
       {{"endpoints", endpoints},
        {"connect_timeout_s", c.cluster.connect_timeout_s},
        {"iteration_timeout_s", c.cluster.iteration_timeout_s}}},
      {"benchmark",
       {{"k_list", c.benchmark.k_list},
        {"outer_iterations", c.benchmark.outer_iterations},
        {"repetitions", c.benchmark.repetitions}}},
      {"output", {{"dir", c.output_dir}}},
  };
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports "parse error at line L, column C: ..."
    std::string msg = e.what();
    const auto pos = msg.find("parse error");
    if (pos != std::string::npos) msg = msg.substr(pos);
    throw Error(ErrorCode::Config, origin + ": invalid JSON: " + msg);
  }
}

inline std::string read_file(const std::string& path, ErrorCode code) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(code, "cannot open '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

inline RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(parse_json_text(read_file(path, ErrorCode::Config), path));
}

// ---------------------------------------------------------------------------
// Shared helpers

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

struct LoadedData {
  Dataset all;
  Dataset train;
  Dataset test;
};

inline LoadedData load_data(const DataSection& d) {
  LoadedData out;
  out.all = d.csv ? load_csv(*d.csv) : generate_traffic(d.synthetic);
  auto [train, test] = split(out.all, d.split);
  out.train = std::move(train);
  out.test = std::move(test);
  return out;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline json history_to_json(const std::vector<IterationRecord>& history) {
  json h = json::array();
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& r = history[i];
    h.push_back({{"iteration", i},
                 {"rho", r.rho},
                 {"r", r.primal},
                 {"s", r.dual},
                 {"eps_primal", r.eps_primal},
                 {"eps_dual", r.eps_dual},
                 {"mean_objective", r.mean_objective}});
  }
  return h;
}

inline json error_to_json(const std::string& phase, const std::exception& e) {
  json err;
  err["chain"] = json::array({phase});
  if (const auto* te = dynamic_cast<const Error*>(&e)) {
    err["code"] = std::string(trafficgp::to_string(te->code()));
  } else {
    err["code"] = "INTERNAL";
  }
  err["chain"].push_back(e.what());
  err["message"] = e.what();
  if (const auto* ab = dynamic_cast<const AdmmAborted*>(&e)) {
    err["worker"] = ab->worker_id();
    err["iteration"] = ab->iteration();
    err["partial_history"] = history_to_json(ab->partial().history);
  }
  return err;
}

inline int fail_report(const std::filesystem::path& path, json report, const std::string& phase, const std::exception& e) {
  log::error("{}: {}", phase, e.what());
  std::cerr << "error: " << phase << ": " << e.what() << "\n";
  report["status"] = "error";
  report["error"] = error_to_json(phase, e);
  try {
    write_json(path, report);
  } catch (const Error& io) {
    std::cerr << "error: " << io.what() << "\n";
  }
  return kExitRuntime;
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_generate(const RunConfig& cfg, const std::string& out_file) {
  if (cfg.data.csv) {
    std::cerr << "error: generate needs a synthetic data section, config names a CSV file\n";
    return kExitConfig;
  }
  try {
    const auto d = generate_traffic(cfg.data.synthetic);
    std::ostringstream os;
    write_csv(os, d);
    write_file(out_file, os.str());
  } catch (const std::exception& e) {
    std::cerr << "error: generate: " << e.what() << "\n";
    return kExitRuntime;
  }
  log::info("generate: wrote {} rows to {}", cfg.data.synthetic.n_points, out_file);
  return kExitOk;
}

/// Writes <out>/train_report.json and <out>/train_timing.json.
inline int cmd_train(const RunConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  json report = {{"command", "train"}, {"config", to_json(cfg)}, {"mode", to_string(cfg.train.mode)}};
  json timing = {{"command", "train"}};
  std::string phase = "load data";
  try {
    auto t0 = std::chrono::steady_clock::now();
    const auto data = load_data(cfg.data);
    timing["load_s"] = seconds_since(t0);
    report["n_train"] = data.train.size();
    report["n_test"] = data.test.size();

    t0 = std::chrono::steady_clock::now();
    if (cfg.train.mode == TrainMode::Centralized) {
      phase = "centralized training";
      const auto stats = compute_standardization(data.train.values);
      const auto res = optimize(standardize(data.train, stats), cfg.kernel, default_theta(cfg.kernel), cfg.train.optim);
      report["standardization"] = to_json(stats);
      report["theta_star"] = vector_to_json(res.theta);
      report["objective_trace"] = res.trace;
      report["final_objective"] = res.value;
      report["iterations"] = res.iterations;
      report["converged"] = res.converged;
    } else {
      phase = "admm training";
      TrainResult res;
      Standardization stats;
      const IterationObserver observer = [](const IterationView& v) {
        log::info("admm iteration {}: r={} s={} rho={}", v.iteration, v.record.primal, v.record.dual, v.record.rho);
      };
      if (!cfg.cluster.endpoints.empty()) {
        cluster::ClusterOptions opts;
        opts.connect_timeout = std::chrono::milliseconds(static_cast<long>(cfg.cluster.connect_timeout_s * 1000.0));
        opts.iteration_timeout = std::chrono::milliseconds(static_cast<long>(cfg.cluster.iteration_timeout_s * 1000.0));
        stats = compute_standardization(data.train.values);
        res = cluster::coordinator_run(data.train, cfg.kernel, cfg.train.admm, cfg.cluster.endpoints, opts, std::nullopt,
                                       observer)
                  .train;
        report["executor"] = "remote";
      } else {
        const auto problem = prepare_admm(data.train, cfg.kernel, cfg.train.admm);
        stats = problem.stats;
        auto exec = make_in_process_executor(problem, cfg.kernel, cfg.train.admm, static_cast<unsigned>(cfg.train.threads));
        res = run_admm(problem, cfg.kernel, cfg.train.admm, exec, observer);
        report["executor"] = "in-process";
      }
      report["standardization"] = to_json(stats);
      report["z_star"] = vector_to_json(res.z_star);
      report["history"] = history_to_json(res.state.history);
      report["iterations"] = res.state.iteration;
      report["converged"] = res.converged;
      report["final_rho"] = res.final_rho;
      json wall = json::array();
      for (const auto& h : res.state.history) wall.push_back(h.wall_ms);
      timing["iteration_wall_ms"] = wall;
      json workers = json::array();
      for (const auto& w : res.worker_timing) {
        workers.push_back({{"mean_local_update_ms", w.mean_ms}, {"max_local_update_ms", w.max_ms}, {"calls", w.calls}});
      }
      timing["workers"] = workers;
    }
    timing["train_s"] = seconds_since(t0);
    report["status"] = "ok";
    write_json(dir / "train_report.json", report);
    write_json(dir / "train_timing.json", timing);
  } catch (const std::exception& e) {
    return fail_report(dir / "train_report.json", report, phase, e);
  }
  return kExitOk;
}

struct ModelInfo {
  RunConfig config;
  TrainMode mode = TrainMode::Centralized;
  HyperParams theta;
  Standardization stats;
};

inline ModelInfo model_from_report(const json& j) {
  const auto mismatch = [](const std::string& what) { return Error(ErrorCode::ModelMismatch, "model report: " + what); };
  if (!j.is_object() || j.value("command", "") != "train") throw mismatch("not a train report");
  if (j.value("status", "") != "ok") throw mismatch("training did not finish successfully");
  ModelInfo m;
  try {
    m.config = run_config_from_json(j.at("config"));
    m.mode = m.config.train.mode;
    m.theta = vector_from_json(j.at(m.mode == TrainMode::Centralized ? "theta_star" : "z_star"), "theta");
    m.stats = standardization_from_json(j.at("standardization"), "standardization", ErrorCode::ModelMismatch);
    check_theta(m.config.kernel, m.theta);
  } catch (const json::exception& e) {
    throw mismatch(e.what());
  } catch (const Error& e) {
    throw mismatch(e.what());
  }
  return m;
}

/// Writes <out>/eval_report.json, <out>/predictions.csv and
/// <out>/eval_timing.json.
inline int cmd_evaluate(const RunConfig& cfg, const std::string& model_path) {
  const std::filesystem::path dir(cfg.output_dir);
  json report = {{"command", "evaluate"}, {"config", to_json(cfg)}};
  std::string phase = "load model";
  try {
    const auto model = model_from_report(parse_json_text(read_file(model_path, ErrorCode::Io), model_path));
    report["model"] = {{"mode", to_string(model.mode)}, {"theta", vector_to_json(model.theta)}, {"kernel", to_json(model.config.kernel)}};

    phase = "load data";
    const auto t0 = std::chrono::steady_clock::now();
    const auto data = load_data(cfg.data);
    const auto stats = compute_standardization(data.train.values);
    if (!(stats == model.stats)) {
      throw Error(ErrorCode::ModelMismatch, "training split differs from the one the model was trained on");
    }

    phase = "predict";
    std::vector<FusionStrategy> strategies{cfg.predict.strategy};
    for (auto k : cfg.predict.benchmark) {
      if (k != cfg.predict.strategy.kind) strategies.push_back({k, cfg.predict.strategy.sod_worker});
    }
    FusionInputs in{model.config.kernel, model.theta, stats, {}, data.train};
    for (const auto& s : strategies) {
      if (s.kind != FusionStrategy::Kind::Centralized && model.mode != TrainMode::Admm) {
        throw Error(ErrorCode::ModelMismatch, "strategy '" + to_string(s) + "' needs an admm-trained model");
      }
    }
    if (model.mode == TrainMode::Admm) in.shards = partition(data.train, model.config.train.admm, model.config.kernel.dim());

    json scores = json::object();
    PredictiveDistribution primary;
    for (std::size_t i = 0; i < strategies.size(); ++i) {
      auto pd = predict_with_strategy(strategies[i], in, data.test.times);
      scores[to_string(strategies[i])] = {{"mape_percent", mape(data.test.values, pd.mean)},
                                          {"rmse", rmse(data.test.values, pd.mean)}};
      if (i == 0) primary = std::move(pd);
    }
    report["strategy"] = to_string(cfg.predict.strategy);
    report["metrics"] = scores[to_string(cfg.predict.strategy)];
    if (strategies.size() > 1) report["strategies"] = scores;
    report["n_test"] = data.test.size();

    std::ostringstream csv;
    csv << "time_h,actual,mean,variance\n";
    for (std::size_t i = 0; i < data.test.size(); ++i) {
      csv << format_double(data.test.times[i]) << ',' << format_double(data.test.values[i]) << ','
          << format_double(primary.mean[i]) << ',' << format_double(primary.variance[i]) << '\n';
    }
    report["status"] = "ok";
    write_file(dir / "predictions.csv", csv.str());
    write_json(dir / "eval_report.json", report);
    write_json(dir / "eval_timing.json", {{"command", "evaluate"}, {"evaluate_s", seconds_since(t0)}});
  } catch (const std::exception& e) {
    return fail_report(dir / "eval_report.json", report, phase, e);
  }
  return kExitOk;
}

/// Writes <out>/benchmark.csv (K,mean_local_update_ms,total_train_s) and
/// <out>/benchmark_report.json.
inline int cmd_benchmark(const RunConfig& cfg) {
  const std::filesystem::path dir(cfg.output_dir);
  json report = {{"command", "benchmark"}, {"config", to_json(cfg)}};
  std::string phase = "load data";
  try {
    const auto data = load_data(cfg.data);
    phase = "benchmark";
    const auto rows = benchmark_scaling(data.train, cfg.kernel, cfg.train.admm, cfg.benchmark.k_list,
                                        cfg.benchmark.outer_iterations, cfg.benchmark.repetitions);
    std::ostringstream csv;
    csv << "K,mean_local_update_ms,total_train_s\n";
    json jr = json::array();
    for (const auto& r : rows) {
      csv << r.k << ',' << format_double(r.mean_local_update_ms) << ',' << format_double(r.total_train_s) << '\n';
      jr.push_back({{"K", r.k},
                    {"mean_local_update_ms", r.mean_local_update_ms},
                    {"total_train_s", r.total_train_s},
                    {"local_update_ms_per_repetition", r.local_update_ms},
                    {"train_s_per_repetition", r.train_s}});
    }
    report["n_train"] = data.train.size();
    report["rows"] = jr;
    report["status"] = "ok";
    write_file(dir / "benchmark.csv", csv.str());
    write_json(dir / "benchmark_report.json", report);
  } catch (const std::exception& e) {
    return fail_report(dir / "benchmark_report.json", report, phase, e);
  }
  return kExitOk;
}

/// Serves one coordinator. Prints the bound endpoint on stdout first.
inline int cmd_worker(const std::string& listen) {
  net::Endpoint ep;
  try {
    ep = net::parse_endpoint(listen);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    cluster::WorkerServer server(ep);
    std::cout << "listening on " << server.endpoint().str() << std::endl;
    return server.serve();
  } catch (const std::exception& e) {
    std::cerr << "error: worker: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// Argument parsing

inline std::vector<int> parse_k_list_flag(const std::string& s) {
  json arr = json::array();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int k = 0;
    try {
      k = std::stoi(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) throw Error(ErrorCode::Config, "--k-list: '" + s + "' is not a comma-separated list of integers");
    arr.push_back(k);
  }
  return parse_k_list(arr, "--k-list");
}

/// Entry point shared by tools/trafficgp.cpp and the tests.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"Traffic forecasting with distributed Gaussian process regression"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config_path;
  std::string out;
  std::string mode;
  std::string strategy;
  std::string k_list;
  std::string listen;
  std::string model_path;

  auto* gen = app.add_subcommand("generate", "Write a synthetic traffic CSV");
  gen->add_option("--config", config_path, "Run config (JSON)");
  gen->add_option("--out", out, "Output CSV file (default <output.dir>/traffic.csv)");

  auto* train = app.add_subcommand("train", "Fit hyperparameters (centralized or consensus ADMM)");
  train->add_option("--config", config_path, "Run config (JSON)");
  train->add_option("--out", out, "Output directory");
  train->add_option("--mode", mode, "centralized | admm");

  auto* eval = app.add_subcommand("evaluate", "Predict the test split with a trained model");
  eval->add_option("--config", config_path, "Run config (JSON)");
  eval->add_option("--out", out, "Output directory");
  eval->add_option("--model", model_path, "Train report (default <output.dir>/train_report.json)");
  eval->add_option("--strategy", strategy, "rbcm | sod | centralized");

  auto* bench = app.add_subcommand("benchmark", "Local-update time versus worker count");
  bench->add_option("--config", config_path, "Run config (JSON)");
  bench->add_option("--out", out, "Output directory");
  bench->add_option("--k-list", k_list, "Comma-separated worker counts, e.g. 2,4,8,16");

  auto* worker = app.add_subcommand("worker", "Serve one ADMM coordinator");
  worker->add_option("--listen", listen, "HOST:PORT (port 0 picks a free port)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (worker->parsed()) return cmd_worker(listen);

  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (!out.empty() && !gen->parsed()) cfg.output_dir = out;
    if (!mode.empty()) cfg.train.mode = parse_mode(mode, "--mode");
    if (!strategy.empty()) cfg.predict.strategy.kind = parse_strategy_kind(strategy, "--strategy");
    if (!k_list.empty()) cfg.benchmark.k_list = parse_k_list_flag(k_list);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  if (gen->parsed()) {
    const std::string file = out.empty() ? (std::filesystem::path(cfg.output_dir) / "traffic.csv").string() : out;
    return cmd_generate(cfg, file);
  }
  if (train->parsed()) return cmd_train(cfg);
  if (eval->parsed()) {
    const std::string model =
        model_path.empty() ? (std::filesystem::path(cfg.output_dir) / "train_report.json").string() : model_path;
    return cmd_evaluate(cfg, model);
  }
  return cmd_benchmark(cfg);
}

}  // namespace trafficgp::cli
