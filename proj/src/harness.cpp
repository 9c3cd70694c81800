/*
 * Copyright 2026 The LC-DPF Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "lc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

namespace lc {
namespace {

constexpr std::uint64_t kFusionCenterStream = 1'000'000;
constexpr std::uint64_t kTruthStream = 1'000'001;
constexpr std::uint64_t kMeasurementStream = 1'000'002;
constexpr std::uint64_t kTopologyRun = std::numeric_limits<std::uint64_t>::max();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 stream(const ExperimentConfig& config, std::uint64_t run,
                       std::uint64_t id, std::uint64_t step) {
  return std::mt19937_64(derive_seed(config.seed, run, id, step));
}

std::vector<std::mt19937_64> sensor_streams(const ExperimentConfig& config,
                                            int sensors, std::uint64_t run,
                                            std::uint64_t step) {
  std::vector<std::mt19937_64> rngs;
  rngs.reserve(sensors);
  for (int k = 0; k < sensors; ++k) rngs.push_back(stream(config, run, k, step));
  return rngs;
}

// Read-only objects shared by every run of an experiment.
struct Shared {
  SensorNetwork net;
  ConsensusWeights weights;
  std::vector<GaussianMeasurementModel> models;
  LcLayout layout;
  LinearGaussianDynamics dynamics;
  GaussianBelief prior;
};

// Accumulates the squared errors of the estimators (columns of `estimates`)
// at time n.
void record_errors(const Eigen::Ref<const Eigen::MatrixXd>& estimates,
                   const Eigen::Ref<const Eigen::VectorXd>& truth, int targets,
                   int row, RunErrors& errors, bool last) {
  double final_sum = 0.0;
  for (Eigen::Index s = 0; s < estimates.cols(); ++s) {
    double sq = 0.0;
    for (int p = 0; p < targets; ++p) {
      const double e2 =
          (estimates.col(s).segment<2>(4 * p) - truth.segment<2>(4 * p))
              .squaredNorm();
      sq += e2;
      if (last) final_sum += std::sqrt(e2);
    }
    errors.sq_error(row, s) = sq / targets;
  }
  if (last) {
    errors.final_error =
        final_sum / (static_cast<double>(targets) * estimates.cols());
  }
}

RunErrors run_once(const ExperimentConfig& config, const Shared& shared,
                   int run, TransmissionLedger* ledger) {
  const ScenarioConfig& sc = config.scenario;
  const int sensors = shared.net.size();
  const int targets = sc.dynamics.targets;
  const int estimators = is_centralized(config.method) ? 1 : sensors;
  std::mt19937_64 truth_rng = stream(config, run, kTruthStream, 0);
  const Eigen::MatrixXd truth = simulate_truth(sc, truth_rng);

  RunErrors errors;
  errors.sq_error.resize(sc.steps, estimators);

  NetworkContext ctx{shared.net, shared.weights, ConsensusOptions{},
                     config.exact_sums, ledger};
  ctx.consensus.max_iterations = sc.consensus_iterations;
  ctx.consensus.tolerance = config.consensus_tolerance;
  const LcOptions lc{shared.layout, sc.gamma_mode, LsOptions{}};

  // Filter state for whichever method runs.
  ParticleSet central_ps;
  GaussianBelief central_belief = shared.prior;
  std::vector<ParticleSet> sensor_ps;
  std::vector<GaussianBelief> sensor_beliefs;
  {
    std::mt19937_64 fc_rng = stream(config, run, kFusionCenterStream, 0);
    std::vector<std::mt19937_64> rngs = sensor_streams(config, sensors, run, 0);
    switch (config.method) {
      case Method::kCpf:
        central_ps = ParticleSet::uniform(
            sample_gaussian(shared.prior, sc.particles, fc_rng));
        break;
      case Method::kLcDpf:
        for (int k = 0; k < sensors; ++k) {
          sensor_ps.push_back(ParticleSet::uniform(
              sample_gaussian(shared.prior, sc.particles, rngs[k])));
        }
        break;
      case Method::kLcDgpf:
      case Method::kRLcDgpf:
        sensor_beliefs.assign(sensors, shared.prior);
        break;
      case Method::kCgpf:
        break;
    }
  }

  for (int n = 1; n <= sc.steps; ++n) {
    std::mt19937_64 meas_rng = stream(config, run, kMeasurementStream, n);
    const std::vector<Eigen::VectorXd> z =
        measure_all(truth.col(n), shared.net, sc.acoustic, meas_rng);
    const StepInputs in{shared.dynamics, shared.models, z};
    Eigen::MatrixXd estimates;
    if (is_centralized(config.method)) {
      std::mt19937_64 fc_rng = stream(config, run, kFusionCenterStream, n);
      const CentralizedOutput out =
          config.method == Method::kCpf
              ? cpf_step(central_ps, in, fc_rng)
              : cgpf_step(central_belief, sc.particles, in, fc_rng);
      estimates = out.estimate;
      errors.diverged |= out.diverged;
    } else {
      std::vector<std::mt19937_64> rngs = sensor_streams(config, sensors, run, n);
      DistributedOutput out;
      if (config.method == Method::kLcDpf) {
        out = lcdpf_step(sensor_ps, in, ctx, lc, rngs);
      } else if (config.method == Method::kLcDgpf) {
        out = lcdgpf_step(sensor_beliefs, sc.particles, in, ctx, lc, rngs);
      } else {
        out = rlcdgpf_step(sensor_beliefs, particles_per_sensor(config), in,
                           ctx, lc, rngs);
      }
      estimates = std::move(out.estimates);
      errors.diverged |= out.diverged;
      errors.clamped |= out.clamped;
    }
    record_errors(estimates, truth.col(n), targets, n - 1, errors,
                  n == sc.steps);
    if (ledger) ledger->end_step();
  }
  return errors;
}

nlohmann::json optional_to_json(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

std::optional<double> optional_from_json(const nlohmann::json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

nlohmann::json series_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i))) {
      out.push_back(v(i));
    } else {
      out.push_back(nullptr);
    }
  }
  return out;
}

Eigen::VectorXd series_from_json(const nlohmann::json& doc) {
  Eigen::VectorXd v(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    v(i) = doc.at(i).is_null() ? std::numeric_limits<double>::quiet_NaN()
                               : doc.at(i).get<double>();
  }
  return v;
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string method_name(Method method) {
  switch (method) {
    case Method::kCpf: return "CPF";
    case Method::kCgpf: return "CGPF";
    case Method::kLcDpf: return "LC-DPF";
    case Method::kLcDgpf: return "LC-DGPF";
    case Method::kRLcDgpf: return "R-LC-DGPF";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c != '-' && c != '_') key.push_back(static_cast<char>(std::tolower(c)));
  }
  for (Method m : kAllMethods) {
    std::string candidate;
    for (char c : method_name(m)) {
      if (c != '-') candidate.push_back(static_cast<char>(std::tolower(c)));
    }
    if (candidate == key) return m;
  }
  throw InvalidConfig("unknown method \"" + std::string(name) + "\"");
}

bool is_centralized(Method method) {
  return method == Method::kCpf || method == Method::kCgpf;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ c);
}

int particles_per_sensor(const ExperimentConfig& config) {
  return config.scenario.particles / config.scenario.network.sensors;
}

void validate(const ExperimentConfig& config) {
  validate(config.scenario);
  if (config.runs < 1) throw InvalidConfig("at least one run is required");
  if (config.threads < 1) throw InvalidConfig("at least one thread is required");
  if (config.consensus_tolerance && !(*config.consensus_tolerance > 0.0)) {
    throw InvalidConfig("consensus tolerance must be positive");
  }
  if (config.topology &&
      config.topology->size() != config.scenario.network.sensors) {
    throw InvalidConfig("topology size differs from the configured sensor count");
  }
  if (config.method == Method::kRLcDgpf) {
    const int sensors = config.scenario.network.sensors;
    if (config.scenario.particles % sensors != 0) {
      throw InvalidConfig("R-LC-DGPF needs J divisible by K (J = " +
                          std::to_string(config.scenario.particles) +
                          ", K = " + std::to_string(sensors) + ")");
    }
    const LcLayout layout = scenario_layout(config.scenario);
    const int required = config.scenario.gamma_mode == GammaMode::kIndirect
                             ? layout.phi()->size()
                             : std::max(layout.phi()->size(), layout.psi()->size());
    if (particles_per_sensor(config) < required) {
      throw InvalidConfig("R-LC-DGPF needs J / K >= " + std::to_string(required));
    }
  }
}

SensorNetwork experiment_topology(const ExperimentConfig& config) {
  if (config.topology) return *config.topology;
  const NetworkSpec& spec = config.scenario.network;
  std::mt19937_64 rng(derive_seed(config.seed, kTopologyRun, 0, 0));
  return build_jittered_grid(spec.sensors, spec.area, spec.comm_range,
                             spec.jitter, rng);
}

Eigen::VectorXd rmse_n(std::span<const RunErrors> runs,
                       const std::vector<bool>& include) {
  if (runs.empty() || include.size() != runs.size()) {
    throw DimensionMismatch("rmse_n: one mask entry per run");
  }
  const Eigen::Index steps = runs.front().sq_error.rows();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(steps);
  double count = 0.0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (!include[r]) continue;
    if (runs[r].sq_error.rows() != steps) {
      throw DimensionMismatch("rmse_n: runs differ in length");
    }
    sum += runs[r].sq_error.rowwise().sum();
    count += static_cast<double>(runs[r].sq_error.cols());
  }
  if (count == 0.0) {
    return Eigen::VectorXd::Constant(steps,
                                     std::numeric_limits<double>::quiet_NaN());
  }
  return (sum / count).cwiseSqrt();
}

double armse(const Eigen::Ref<const Eigen::VectorXd>& rmse) {
  if (rmse.size() == 0) throw std::invalid_argument("armse: empty series");
  return std::sqrt(rmse.squaredNorm() / static_cast<double>(rmse.size()));
}

std::optional<double> sigma_armse(std::span<const RunErrors> runs,
                                  const std::vector<bool>& include) {
  if (runs.empty() || include.size() != runs.size()) {
    throw DimensionMismatch("sigma_armse: one mask entry per run");
  }
  const Eigen::Index estimators = runs.front().sq_error.cols();
  if (estimators < 2) return std::nullopt;
  Eigen::VectorXd per_sensor = Eigen::VectorXd::Zero(estimators);
  double samples = 0.0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (!include[r]) continue;
    per_sensor += runs[r].sq_error.colwise().sum().transpose();
    samples += static_cast<double>(runs[r].sq_error.rows());
  }
  if (samples == 0.0) return std::nullopt;
  const Eigen::VectorXd armse_k = (per_sensor / samples).cwiseSqrt();
  const double mean = armse_k.mean();
  return std::sqrt((armse_k.array() - mean).square().mean());
}

TrackLoss track_loss(std::span<const double> final_errors, double threshold) {
  TrackLoss out;
  out.lost.reserve(final_errors.size());
  int lost = 0;
  for (double e : final_errors) {
    const bool is_lost = !(e <= threshold);  // NaN counts as lost
    out.lost.push_back(is_lost);
    lost += is_lost;
  }
  out.percentage = final_errors.empty()
                       ? 0.0
                       : 100.0 * lost / static_cast<double>(final_errors.size());
  return out;
}

std::uint64_t comm_cost(Method method, const SensorNetwork& net,
                        const CommParams& params) {
  const auto k = static_cast<std::uint64_t>(net.size());
  const auto iters = static_cast<std::uint64_t>(params.iterations);
  switch (method) {
    case Method::kLcDpf:
    case Method::kLcDgpf:
      return k * iters * static_cast<std::uint64_t>(params.payload);
    case Method::kRLcDgpf:
      return k * iters *
             static_cast<std::uint64_t>(params.payload + params.moments_payload);
    case Method::kCpf:
    case Method::kCgpf: {
      const std::vector<int> hops = net.hop_counts(params.fusion_center);
      std::uint64_t total = 0;
      for (int h : hops) {
        total += static_cast<std::uint64_t>(h) *
                 static_cast<std::uint64_t>(params.reals_per_sensor);
      }
      return total + static_cast<std::uint64_t>(params.state_dim) *
                         static_cast<std::uint64_t>(
                             net.flooding_transmitters(params.fusion_center));
    }
  }
  return 0;
}

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json doc;
  doc["method"] = r.method;
  doc["exact_sums"] = r.exact_sums;
  doc["runs"] = r.runs;
  doc["steps"] = r.steps;
  doc["particles"] = r.particles;
  doc["iterations"] = r.iterations;
  doc["seed"] = r.seed;
  doc["armse"] = optional_to_json(r.armse);
  doc["adjusted_armse"] = optional_to_json(r.adjusted_armse);
  doc["sigma_armse"] = optional_to_json(r.sigma_armse);
  doc["adjusted_sigma_armse"] = optional_to_json(r.adjusted_sigma_armse);
  doc["track_loss_percentage"] = r.track_loss_percentage;
  doc["lost_runs"] = r.lost_runs;
  doc["diverged_runs"] = r.diverged_runs;
  doc["clamped_runs"] = r.clamped_runs;
  doc["transmissions_per_step"] = r.transmissions_per_step;
  doc["transmissions_total"] = r.transmissions_total;
  doc["ledger_total"] = r.ledger_total;
  doc["rmse"] = series_to_json(r.rmse);
  doc["adjusted_rmse"] = series_to_json(r.adjusted_rmse);
  return doc;
}

MetricsReport report_from_json(const nlohmann::json& doc) {
  MetricsReport r;
  r.method = doc.at("method").get<std::string>();
  r.exact_sums = doc.at("exact_sums").get<bool>();
  r.runs = doc.at("runs").get<int>();
  r.steps = doc.at("steps").get<int>();
  r.particles = doc.at("particles").get<int>();
  r.iterations = doc.at("iterations").get<int>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.armse = optional_from_json(doc.at("armse"))
                .value_or(std::numeric_limits<double>::quiet_NaN());
  r.adjusted_armse = optional_from_json(doc.at("adjusted_armse"));
  r.sigma_armse = optional_from_json(doc.at("sigma_armse"));
  r.adjusted_sigma_armse = optional_from_json(doc.at("adjusted_sigma_armse"));
  r.track_loss_percentage = doc.at("track_loss_percentage").get<double>();
  r.lost_runs = doc.at("lost_runs").get<int>();
  r.diverged_runs = doc.at("diverged_runs").get<int>();
  r.clamped_runs = doc.at("clamped_runs").get<int>();
  r.transmissions_per_step = doc.at("transmissions_per_step").get<std::uint64_t>();
  r.transmissions_total = doc.at("transmissions_total").get<std::uint64_t>();
  r.ledger_total = doc.at("ledger_total").get<std::uint64_t>();
  r.rmse = series_from_json(doc.at("rmse"));
  r.adjusted_rmse = series_from_json(doc.at("adjusted_rmse"));
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate(config);
  const ScenarioConfig& sc = config.scenario;
  SensorNetwork net = experiment_topology(config);
  ConsensusWeights weights = metropolis_weights(net);
  std::vector<GaussianMeasurementModel> models = acoustic_sensor_models(sc, net);
  const Shared shared{std::move(net), std::move(weights), std::move(models),
                      scenario_layout(sc), sc.dynamics.overall(),
                      sc.prior.belief()};

  ExperimentResult result;
  result.runs.resize(config.runs);
  TransmissionLedger first_ledger;
  std::atomic<int> next{0};
  const auto worker = [&] {
    for (int run = next++; run < config.runs; run = next++) {
      result.runs[run] =
          run_once(config, shared, run, run == 0 ? &first_ledger : nullptr);
    }
  };
  const int threads = std::min(config.threads, config.runs);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  MetricsReport& r = result.report;
  r.method = method_name(config.method);
  r.exact_sums = config.exact_sums && !is_centralized(config.method);
  r.runs = config.runs;
  r.steps = sc.steps;
  r.particles = sc.particles;
  r.iterations = sc.consensus_iterations;
  r.seed = config.seed;

  std::vector<double> final_errors;
  for (const RunErrors& e : result.runs) {
    final_errors.push_back(e.final_error);
    r.diverged_runs += e.diverged;
    r.clamped_runs += e.clamped;
  }
  const TrackLoss loss = track_loss(final_errors, config.track_loss_threshold);
  std::vector<bool> kept(loss.lost.size());
  std::transform(loss.lost.begin(), loss.lost.end(), kept.begin(),
                 [](bool lost) { return !lost; });
  const std::vector<bool> all(result.runs.size(), true);
  r.track_loss_percentage = loss.percentage;
  r.lost_runs = static_cast<int>(std::count(loss.lost.begin(), loss.lost.end(), true));
  r.rmse = rmse_n(result.runs, all);
  r.adjusted_rmse = rmse_n(result.runs, kept);
  r.armse = armse(r.rmse);
  if (r.lost_runs < r.runs) r.adjusted_armse = armse(r.adjusted_rmse);
  r.sigma_armse = sigma_armse(result.runs, all);
  r.adjusted_sigma_armse = sigma_armse(result.runs, kept);

  CommParams params;
  params.iterations = sc.consensus_iterations;
  params.payload = shared.layout.payload_size();
  params.moments_payload = packed_moments_size(sc.dynamics.state_dim());
  params.state_dim = sc.dynamics.state_dim();
  params.reals_per_sensor = 1 + 2;  // measurement plus sensor position
  params.fusion_center = shared.net.corner_sensor();
  r.transmissions_per_step = comm_cost(config.method, shared.net, params);
  r.transmissions_total = r.transmissions_per_step * static_cast<std::uint64_t>(sc.steps);
  r.ledger_total = first_ledger.cumulative_total();
  return result;
}

std::string rmse_csv(std::span<const MetricsReport> reports) {
  std::string out = "method,n,rmse,adjusted_rmse\n";
  for (const MetricsReport& r : reports) {
    const std::string label = r.method + (r.exact_sums ? " (exact sums)" : "");
    for (Eigen::Index n = 0; n < r.rmse.size(); ++n) {
      out += label + "," + std::to_string(n + 1) + "," + format_double(r.rmse(n)) +
             "," + format_double(r.adjusted_rmse(n)) + "\n";
    }
  }
  return out;
}

void write_outputs(const std::filesystem::path& dir,
                   std::span<const MetricsReport> reports,
                   const SensorNetwork& net) {
  std::filesystem::create_directories(dir);
  nlohmann::json metrics;
  if (reports.size() == 1) {
    metrics = report_to_json(reports.front());
  } else {
    metrics = nlohmann::json::array();
    for (const auto& r : reports) metrics.push_back(report_to_json(r));
  }
  write_file(dir / "metrics.json", metrics.dump(2) + "\n");
  write_file(dir / "rmse.csv", rmse_csv(reports));
  write_file(dir / "topology.json", topology_to_json(net).dump(2) + "\n");
}

}  // namespace lc
