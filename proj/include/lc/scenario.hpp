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

// Acoustic multi-target tracking scenario: constant-velocity targets, sensors
// measuring the summed sound amplitude, and ground-truth simulation.

#ifndef LC_SCENARIO_HPP_
#define LC_SCENARIO_HPP_

#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "lc/filters.hpp"
#include "lc/likelihood.hpp"
#include "lc/network.hpp"

namespace lc {

// Per-target state (x, y, vx, vy); the overall state stacks the P targets.
struct TargetDynamics {
  int targets = 2;
  Eigen::Matrix4d G_p;
  Eigen::Matrix<double, 4, 2> W_p;
  double sigma_u2 = 0.0;

  int state_dim() const { return 4 * targets; }
  // Block-diagonal G and W with the driving-noise standard deviation.
  LinearGaussianDynamics overall() const;
};

// h(x) = sum_p A_p / max(||rho_p - xi||, d_min)^kappa.
struct AcousticModel {
  std::vector<double> amplitudes;
  double path_loss_exponent = 1.0;
  double sigma_v2 = 0.05;
  double d_min = 0.1;
};

struct PriorSpec {
  std::vector<Eigen::Vector4d> means;  // one per target
  Eigen::Matrix4d cov;                 // shared by all targets

  GaussianBelief belief() const;
};

struct NetworkSpec {
  int sensors = 25;
  double area = 40.0;
  double comm_range = 18.0;
  // Uniform jitter per axis as a fraction of the grid cell side.
  double jitter = 0.25;
};

struct ScenarioConfig {
  TargetDynamics dynamics;
  AcousticModel acoustic;
  PriorSpec prior;
  NetworkSpec network;
  int steps = 200;
  int lc_degree = 2;
  int consensus_iterations = 8;
  // J for every filter except R-LC-DGPF, which runs J / K per sensor.
  int particles = 5000;
  GammaMode gamma_mode = GammaMode::kIndirect;
  // Ground truth starts here instead of a draw from the prior.
  std::optional<Eigen::VectorXd> fixed_x0;
  // Redraw ground-truth trajectories until every target stays inside the
  // deployment area for all steps.
  bool confine_truth = false;
  int max_truth_attempts = 10000;
};

ScenarioConfig default_config();

// Throws InvalidConfig on inconsistent or out-of-range parameters.
void validate(const ScenarioConfig& config);

// Reads a JSON document; absent keys keep the values of `base`.
ScenarioConfig scenario_from_json(const nlohmann::json& doc,
                                  const ScenarioConfig& base = default_config());
nlohmann::json scenario_to_json(const ScenarioConfig& config);

double h_acoustic(const Eigen::Ref<const Eigen::VectorXd>& x,
                  const Eigen::Vector2d& sensor, const AcousticModel& model);

// One Gaussian measurement model per sensor of `net`.
std::vector<GaussianMeasurementModel> acoustic_sensor_models(
    const ScenarioConfig& config, const SensorNetwork& net);

// Position components of the state: (4p, 4p + 1) for each target.
std::vector<int> position_indices(int targets);

// Basis over the target positions, with variables mapped from [0, area] to
// [-1, 1].
LcLayout scenario_layout(const ScenarioConfig& config);

// Columns x_0 ... x_steps of a trajectory (state_dim x (steps + 1)). With
// confine_truth, throws std::runtime_error when no trajectory stays inside
// the area within max_truth_attempts draws.
Eigen::MatrixXd simulate_truth(const ScenarioConfig& config,
                               std::mt19937_64& rng);

// z_k = h(x, xi_k) + v_k for every sensor.
std::vector<Eigen::VectorXd> measure_all(const Eigen::Ref<const Eigen::VectorXd>& x,
                                         const SensorNetwork& net,
                                         const AcousticModel& model,
                                         std::mt19937_64& rng);

}  // namespace lc

#endif  // LC_SCENARIO_HPP_
