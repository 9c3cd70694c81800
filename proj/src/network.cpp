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

#include "lc/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace lc {

bool is_connected(const std::vector<std::vector<int>>& neighbors) {
  if (neighbors.empty()) return false;
  std::vector<bool> seen(neighbors.size(), false);
  std::deque<int> queue{0};
  seen[0] = true;
  std::size_t visited = 1;
  while (!queue.empty()) {
    const int k = queue.front();
    queue.pop_front();
    for (int n : neighbors[k]) {
      if (!seen[n]) {
        seen[n] = true;
        ++visited;
        queue.push_back(n);
      }
    }
  }
  return visited == neighbors.size();
}

SensorNetwork::SensorNetwork(std::vector<Eigen::Vector2d> positions,
                             double comm_range)
    : positions_(std::move(positions)), comm_range_(comm_range) {
  const int n = size();
  neighbors_.assign(n, {});
  for (int k = 0; k < n; ++k) {
    for (int l = 0; l < n; ++l) {
      if (l != k && (positions_[k] - positions_[l]).norm() <= comm_range_) {
        neighbors_[k].push_back(l);
      }
    }
  }
  validate();
}

SensorNetwork::SensorNetwork(std::vector<Eigen::Vector2d> positions,
                             double comm_range,
                             std::vector<std::vector<int>> neighbors)
    : positions_(std::move(positions)),
      comm_range_(comm_range),
      neighbors_(std::move(neighbors)) {
  if (neighbors_.size() != positions_.size()) {
    throw DimensionMismatch("SensorNetwork: adjacency size differs from the "
                            "number of positions");
  }
  for (auto& list : neighbors_) std::sort(list.begin(), list.end());
  for (int k = 0; k < size(); ++k) {
    for (int l : neighbors_[k]) {
      if (l == k || l < 0 || l >= size() ||
          !std::binary_search(neighbors_[l].begin(), neighbors_[l].end(), k)) {
        throw std::invalid_argument(
            "SensorNetwork: adjacency must be symmetric and irreflexive");
      }
    }
  }
  validate();
}

void SensorNetwork::validate() const {
  if (positions_.empty()) throw std::invalid_argument("SensorNetwork: empty");
  if (!is_connected(neighbors_)) {
    throw NotConnected("SensorNetwork: communication graph not connected");
  }
}

std::vector<int> SensorNetwork::hop_counts(int root) const {
  std::vector<int> hops(size(), -1);
  std::deque<int> queue{root};
  hops[root] = 0;
  while (!queue.empty()) {
    const int k = queue.front();
    queue.pop_front();
    for (int n : neighbors_[k]) {
      if (hops[n] < 0) {
        hops[n] = hops[k] + 1;
        queue.push_back(n);
      }
    }
  }
  return hops;
}

int SensorNetwork::flooding_transmitters(int root) const {
  const std::vector<int> hops = hop_counts(root);
  std::vector<bool> transmits(size(), false);
  for (int k = 0; k < size(); ++k) {
    if (k == root) continue;
    // Parent: lowest-index neighbor one hop closer to the root.
    for (int n : neighbors_[k]) {
      if (hops[n] == hops[k] - 1) {
        transmits[n] = true;
        break;
      }
    }
  }
  return static_cast<int>(std::count(transmits.begin(), transmits.end(), true));
}

int SensorNetwork::corner_sensor() const {
  int best = 0;
  for (int k = 1; k < size(); ++k) {
    if (positions_[k].norm() < positions_[best].norm()) best = k;
  }
  return best;
}

SensorNetwork build_jittered_grid(int num_sensors, double area,
                                  double comm_range, double jitter_fraction,
                                  std::mt19937_64& rng, int max_attempts) {
  const int side = static_cast<int>(std::lround(std::sqrt(num_sensors)));
  if (num_sensors < 1 || side * side != num_sensors) {
    throw NotPerfectSquare("build_jittered_grid: " +
                           std::to_string(num_sensors) +
                           " is not a perfect square");
  }
  if (jitter_fraction < 0.0 || jitter_fraction >= 0.5) {
    throw std::invalid_argument("build_jittered_grid: jitter fraction must lie "
                                "in [0, 0.5)");
  }
  const double cell = area / side;
  std::uniform_real_distribution<double> jitter(-jitter_fraction * cell,
                                                jitter_fraction * cell);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<Eigen::Vector2d> positions;
    positions.reserve(num_sensors);
    for (int row = 0; row < side; ++row) {
      for (int col = 0; col < side; ++col) {
        Eigen::Vector2d p((col + 0.5) * cell, (row + 0.5) * cell);
        if (jitter_fraction > 0.0) {
          const double dx = jitter(rng);
          const double dy = jitter(rng);
          p += Eigen::Vector2d(dx, dy);
        }
        positions.push_back(p);
      }
    }
    try {
      return SensorNetwork(std::move(positions), comm_range);
    } catch (const NotConnected&) {
      // draw again
    }
  }
  throw NotConnected("build_jittered_grid: no connected topology after " +
                     std::to_string(max_attempts) + " attempts");
}

nlohmann::json topology_to_json(const SensorNetwork& net) {
  nlohmann::json doc;
  doc["comm_range"] = net.comm_range();
  nlohmann::json positions = nlohmann::json::array();
  nlohmann::json adjacency = nlohmann::json::array();
  for (int k = 0; k < net.size(); ++k) {
    positions.push_back({net.position(k).x(), net.position(k).y()});
    adjacency.push_back(net.neighbors(k));
  }
  doc["positions"] = std::move(positions);
  doc["adjacency"] = std::move(adjacency);
  return doc;
}

SensorNetwork topology_from_json(const nlohmann::json& doc) {
  std::vector<Eigen::Vector2d> positions;
  for (const auto& p : doc.at("positions")) {
    positions.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  }
  const double range = doc.at("comm_range").get<double>();
  if (!doc.contains("adjacency")) return SensorNetwork(std::move(positions), range);
  auto adjacency = doc.at("adjacency").get<std::vector<std::vector<int>>>();
  return SensorNetwork(std::move(positions), range, std::move(adjacency));
}

Eigen::MatrixXd ConsensusWeights::dense() const {
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(size(), size());
  for (int k = 0; k < size(); ++k) {
    for (const Entry& e : rows[k]) omega(k, e.sensor) = e.weight;
  }
  return omega;
}

ConsensusWeights metropolis_weights(const SensorNetwork& net) {
  ConsensusWeights w;
  w.rows.resize(net.size());
  for (int k = 0; k < net.size(); ++k) {
    double off_diagonal = 0.0;
    for (int l : net.neighbors(k)) {
      const double weight =
          1.0 / (1.0 + std::max(net.degree(k), net.degree(l)));
      w.rows[k].push_back({l, weight});
      off_diagonal += weight;
    }
    w.rows[k].push_back({k, 1.0 - off_diagonal});
    std::sort(w.rows[k].begin(), w.rows[k].end(),
              [](const auto& a, const auto& b) { return a.sensor < b.sensor; });
  }
  return w;
}

void TransmissionLedger::add(const std::string& stage, std::uint64_t count) {
  current_[stage] += count;
  by_stage_[stage] += count;
  cumulative_ += count;
}

void TransmissionLedger::end_step() {
  per_step_.push_back(current_step_total());
  current_.clear();
}

std::uint64_t TransmissionLedger::current_step_total() const {
  std::uint64_t total = 0;
  for (const auto& [stage, count] : current_) total += count;
  return total;
}

std::uint64_t TransmissionLedger::stage_total(const std::string& stage) const {
  const auto it = by_stage_.find(stage);
  return it == by_stage_.end() ? 0 : it->second;
}

ConsensusResult run_consensus(const SensorNetwork& net,
                              const WeightSchedule& schedule,
                              const Eigen::Ref<const Eigen::MatrixXd>& init,
                              const ConsensusOptions& options,
                              TransmissionLedger* ledger) {
  const int k_count = net.size();
  if (init.rows() != k_count) {
    throw DimensionMismatch("run_consensus: " + std::to_string(init.rows()) +
                            " rows for " + std::to_string(k_count) +
                            " sensors");
  }
  if (options.max_iterations < 0) {
    throw std::invalid_argument("run_consensus: negative iteration count");
  }
  ConsensusResult result{init, 0};
  Eigen::MatrixXd next(init.rows(), init.cols());
  for (int i = 1; i <= options.max_iterations; ++i) {
    const ConsensusWeights& w = schedule(i);
    if (w.size() != k_count) {
      throw DimensionMismatch("run_consensus: weight matrix size");
    }
    for (int k = 0; k < k_count; ++k) {
      next.row(k).setZero();
      for (const auto& e : w.rows[k]) {
        next.row(k) += e.weight * result.states.row(e.sensor);
      }
    }
    const double change =
        init.cols() == 0 ? 0.0
                         : (next - result.states).cwiseAbs().maxCoeff();
    result.states.swap(next);
    result.iterations = i;
    if (options.tolerance && change < *options.tolerance) break;
  }
  if (ledger) {
    ledger->add(options.stage, static_cast<std::uint64_t>(k_count) *
                                   static_cast<std::uint64_t>(result.iterations) *
                                   static_cast<std::uint64_t>(init.cols()));
  }
  return result;
}

ConsensusResult run_consensus(const SensorNetwork& net,
                              const ConsensusWeights& weights,
                              const Eigen::Ref<const Eigen::MatrixXd>& init,
                              const ConsensusOptions& options,
                              TransmissionLedger* ledger) {
  return run_consensus(
      net, [&weights](int) -> const ConsensusWeights& { return weights; }, init,
      options, ledger);
}

Eigen::MatrixXd consensus_sum(const SensorNetwork& net,
                              const ConsensusWeights& weights,
                              const Eigen::Ref<const Eigen::MatrixXd>& addends,
                              const ConsensusOptions& options,
                              TransmissionLedger* ledger) {
  ConsensusResult result =
      run_consensus(net, weights, addends, options, ledger);
  return static_cast<double>(net.size()) * result.states;
}

double second_largest_eigenvalue_modulus(const ConsensusWeights& weights) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(weights.dense(),
                                                        Eigen::EigenvaluesOnly);
  Eigen::VectorXd moduli = solver.eigenvalues().cwiseAbs();
  std::sort(moduli.data(), moduli.data() + moduli.size(), std::greater<>());
  return moduli.size() > 1 ? moduli(1) : 0.0;
}

}  // namespace lc
