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

// Monte Carlo experiments over the tracking scenario: seeded runs of one
// filter, error metrics, communication cost, and CSV/JSON artifacts.

#ifndef LC_HARNESS_HPP_
#define LC_HARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "lc/network.hpp"
#include "lc/scenario.hpp"

namespace lc {

enum class Method { kCpf, kCgpf, kLcDpf, kLcDgpf, kRLcDgpf };

inline constexpr Method kAllMethods[] = {Method::kCpf, Method::kCgpf,
                                         Method::kLcDpf, Method::kLcDgpf,
                                         Method::kRLcDgpf};

std::string method_name(Method method);
// Case-insensitive; accepts e.g. "lc-dpf", "LC-DPF", "lcdpf".
Method parse_method(std::string_view name);
bool is_centralized(Method method);

// Seed of an independent stream, hashed from the master seed and three
// stream coordinates (run, stream, time step).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                          std::uint64_t b, std::uint64_t c);

struct ExperimentConfig {
  ScenarioConfig scenario = default_config();
  Method method = Method::kLcDpf;
  int runs = 100;
  std::uint64_t seed = 1;
  // Replace consensus by exact network-wide sums.
  bool exact_sums = false;
  // Stop consensus early once the states change less than this.
  std::optional<double> consensus_tolerance;
  int threads = 1;
  double track_loss_threshold = 5.0;
  // Imported topology; otherwise a jittered grid drawn from the seed.
  std::optional<SensorNetwork> topology;
};

// Throws InvalidConfig, e.g. when R-LC-DGPF cannot split J evenly or J / K is
// too small for the LS fit.
void validate(const ExperimentConfig& config);

// Particles per sensor for R-LC-DGPF (J / K).
int particles_per_sensor(const ExperimentConfig& config);

SensorNetwork experiment_topology(const ExperimentConfig& config);

// Errors of one Monte Carlo run.
struct RunErrors {
  // (n - 1, s): mean over targets of the squared position error of estimator
  // s at time n. Centralized methods have a single estimator.
  Eigen::MatrixXd sq_error;
  // Mean over targets and estimators of the position error at the last step.
  double final_error = 0.0;
  bool diverged = false;
  bool clamped = false;
};

// sqrt of the mean over included runs and estimators of sq_error, per step.
Eigen::VectorXd rmse_n(std::span<const RunErrors> runs,
                       const std::vector<bool>& include);
// sqrt(mean_n rmse_n^2).
double armse(const Eigen::Ref<const Eigen::VectorXd>& rmse);
// Population standard deviation over estimators of the per-estimator ARMSE;
// empty for fewer than two estimators or no included run.
std::optional<double> sigma_armse(std::span<const RunErrors> runs,
                                  const std::vector<bool>& include);

struct TrackLoss {
  double percentage = 0.0;
  std::vector<bool> lost;
};

TrackLoss track_loss(std::span<const double> final_errors,
                     double threshold = 5.0);

struct CommParams {
  int iterations = 8;
  int payload = 0;          // N_c
  int moments_payload = 0;  // N_c' (R-LC-DGPF only)
  int state_dim = 0;
  // Reals each sensor routes to the fusion center (centralized methods).
  int reals_per_sensor = 1;
  int fusion_center = 0;
};

// Real numbers transmitted in the whole network per time step.
std::uint64_t comm_cost(Method method, const SensorNetwork& net,
                        const CommParams& params);

struct MetricsReport {
  std::string method;
  bool exact_sums = false;
  int runs = 0;
  int steps = 0;
  int particles = 0;
  int iterations = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXd rmse;
  Eigen::VectorXd adjusted_rmse;
  double armse = 0.0;
  std::optional<double> adjusted_armse;
  std::optional<double> sigma_armse;
  std::optional<double> adjusted_sigma_armse;
  double track_loss_percentage = 0.0;
  int lost_runs = 0;
  int diverged_runs = 0;
  int clamped_runs = 0;
  std::uint64_t transmissions_per_step = 0;
  std::uint64_t transmissions_total = 0;
  // Transmissions actually recorded by the first run's ledger.
  std::uint64_t ledger_total = 0;
};

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& doc);

struct ExperimentResult {
  MetricsReport report;
  std::vector<RunErrors> runs;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// Header plus one row per (method, n): method,n,rmse,adjusted_rmse.
std::string rmse_csv(std::span<const MetricsReport> reports);

// Writes metrics.json (one report object, or an array for several),
// rmse.csv and topology.json into `dir`.
void write_outputs(const std::filesystem::path& dir,
                   std::span<const MetricsReport> reports,
                   const SensorNetwork& net);

}  // namespace lc

#endif  // LC_HARNESS_HPP_
