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

// Static sensor network, Metropolis-weight average consensus, and accounting
// of the real numbers broadcast by the sensors.

#ifndef LC_NETWORK_HPP_
#define LC_NETWORK_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "lc/errors.hpp"

namespace lc {

// Sensors at fixed 2-D positions; k and k' are neighbors iff their distance
// is at most the communication range. Construction fails with NotConnected
// when the resulting graph is not connected.
class SensorNetwork {
 public:
  SensorNetwork(std::vector<Eigen::Vector2d> positions, double comm_range);
  // Explicit adjacency (e.g. imported from a topology file). The lists must
  // be symmetric and irreflexive.
  SensorNetwork(std::vector<Eigen::Vector2d> positions, double comm_range,
                std::vector<std::vector<int>> neighbors);

  int size() const { return static_cast<int>(positions_.size()); }
  const std::vector<Eigen::Vector2d>& positions() const { return positions_; }
  const Eigen::Vector2d& position(int k) const { return positions_[k]; }
  double comm_range() const { return comm_range_; }
  // Ascending neighbor indices of sensor k.
  const std::vector<int>& neighbors(int k) const { return neighbors_[k]; }
  int degree(int k) const { return static_cast<int>(neighbors_[k].size()); }

  // Hop count from `root` to every sensor (breadth-first search).
  std::vector<int> hop_counts(int root) const;
  // Number of sensors that must rebroadcast to flood a message from `root`
  // along a breadth-first tree (the root included).
  int flooding_transmitters(int root) const;
  // Sensor closest to the origin corner of the deployment area.
  int corner_sensor() const;

 private:
  void validate() const;

  std::vector<Eigen::Vector2d> positions_;
  double comm_range_;
  std::vector<std::vector<int>> neighbors_;
};

bool is_connected(const std::vector<std::vector<int>>& neighbors);

// sqrt(K) x sqrt(K) cells over [0, area]^2, one sensor per cell at the cell
// center plus U(-j, j) * cell_side jitter per axis. Regenerates until the
// graph is connected (at most `max_attempts` times).
SensorNetwork build_jittered_grid(int num_sensors, double area,
                                  double comm_range, double jitter_fraction,
                                  std::mt19937_64& rng, int max_attempts = 100);

nlohmann::json topology_to_json(const SensorNetwork& net);
SensorNetwork topology_from_json(const nlohmann::json& doc);

// Sparse symmetric consensus weights. Row k lists (k', omega_kk') over
// N_k and k itself in ascending k' order.
struct ConsensusWeights {
  struct Entry {
    int sensor;
    double weight;
  };
  std::vector<std::vector<Entry>> rows;

  int size() const { return static_cast<int>(rows.size()); }
  Eigen::MatrixXd dense() const;
};

// omega_kk' = 1 / (1 + max(|N_k|, |N_k'|)) for neighbors,
// omega_kk = 1 - sum_{k'' in N_k} omega_kk''.
ConsensusWeights metropolis_weights(const SensorNetwork& net);

// Real numbers broadcast in the network, by stage, for the current time step
// and cumulatively.
class TransmissionLedger {
 public:
  void add(const std::string& stage, std::uint64_t count);
  // Closes the current time step.
  void end_step();

  std::uint64_t current_step_total() const;
  std::uint64_t stage_total(const std::string& stage) const;
  std::uint64_t cumulative_total() const { return cumulative_; }
  const std::vector<std::uint64_t>& per_step() const { return per_step_; }
  const std::map<std::string, std::uint64_t>& by_stage() const {
    return by_stage_;
  }

 private:
  std::map<std::string, std::uint64_t> current_;
  std::map<std::string, std::uint64_t> by_stage_;
  std::vector<std::uint64_t> per_step_;
  std::uint64_t cumulative_ = 0;
};

struct ConsensusOptions {
  int max_iterations = 8;
  // Stop early once max_k |zeta_k^(i) - zeta_k^(i-1)| drops below this.
  std::optional<double> tolerance;
  std::string stage = "lc";
};

// Weights used at iteration i (1-based); lets the weights vary over time.
using WeightSchedule = std::function<const ConsensusWeights&(int iteration)>;

struct ConsensusResult {
  Eigen::MatrixXd states;  // K x N_c
  int iterations = 0;
};

// Synchronous iterations zeta^(i) = omega zeta^(i-1) on the rows of `init`
// (K x N_c). Adds K * iterations * N_c to the ledger.
ConsensusResult run_consensus(const SensorNetwork& net,
                              const ConsensusWeights& weights,
                              const Eigen::Ref<const Eigen::MatrixXd>& init,
                              const ConsensusOptions& options,
                              TransmissionLedger* ledger = nullptr);

ConsensusResult run_consensus(const SensorNetwork& net,
                              const WeightSchedule& schedule,
                              const Eigen::Ref<const Eigen::MatrixXd>& init,
                              const ConsensusOptions& options,
                              TransmissionLedger* ledger = nullptr);

// Per-sensor estimates K * zeta_k^(i_max) of the column sums of `addends`.
Eigen::MatrixXd consensus_sum(const SensorNetwork& net,
                              const ConsensusWeights& weights,
                              const Eigen::Ref<const Eigen::MatrixXd>& addends,
                              const ConsensusOptions& options,
                              TransmissionLedger* ledger = nullptr);

// Second-largest eigenvalue modulus of the weight matrix.
double second_largest_eigenvalue_modulus(const ConsensusWeights& weights);

}  // namespace lc

#endif  // LC_NETWORK_HPP_
