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

#include "lc/scenario.hpp"

#include <cmath>
#include <string>

namespace lc {
namespace {

Eigen::MatrixXd matrix_from_json(const nlohmann::json& doc, const char* key) {
  const auto rows = doc.size();
  if (!doc.is_array() || rows == 0 || !doc.at(0).is_array()) {
    throw InvalidConfig(std::string(key) + ": expected a nested array");
  }
  const auto cols = doc.at(0).size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (doc.at(i).size() != cols) {
      throw InvalidConfig(std::string(key) + ": ragged rows");
    }
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = doc.at(i).at(j).get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

template <typename T>
void read_if(const nlohmann::json& doc, const char* key, T& value) {
  if (doc.contains(key)) value = doc.at(key).get<T>();
}

template <int R, int C>
void read_matrix_if(const nlohmann::json& doc, const char* key,
                    Eigen::Matrix<double, R, C>& value) {
  if (!doc.contains(key)) return;
  const Eigen::MatrixXd m = matrix_from_json(doc.at(key), key);
  if (m.rows() != R || m.cols() != C) {
    throw InvalidConfig(std::string(key) + ": expected " + std::to_string(R) +
                        "x" + std::to_string(C));
  }
  value = m;
}

// Factor A with A A^T = cov, tolerating singular covariances.
Eigen::MatrixXd psd_factor(const Eigen::Ref<const Eigen::MatrixXd>& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      0.5 * (cov + cov.transpose()));
  return solver.eigenvectors() *
         solver.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

LinearGaussianDynamics TargetDynamics::overall() const {
  LinearGaussianDynamics out;
  out.G = Eigen::MatrixXd::Zero(state_dim(), state_dim());
  out.W = Eigen::MatrixXd::Zero(state_dim(), 2 * targets);
  for (int p = 0; p < targets; ++p) {
    out.G.block<4, 4>(4 * p, 4 * p) = G_p;
    out.W.block<4, 2>(4 * p, 2 * p) = W_p;
  }
  out.sigma_u = std::sqrt(sigma_u2);
  return out;
}

GaussianBelief PriorSpec::belief() const {
  const int targets = static_cast<int>(means.size());
  GaussianBelief b;
  b.mean.resize(4 * targets);
  b.cov = Eigen::MatrixXd::Zero(4 * targets, 4 * targets);
  for (int p = 0; p < targets; ++p) {
    b.mean.segment<4>(4 * p) = means[p];
    b.cov.block<4, 4>(4 * p, 4 * p) = cov;
  }
  return b;
}

ScenarioConfig default_config() {
  ScenarioConfig c;
  c.dynamics.targets = 2;
  c.dynamics.G_p << 1, 0, 1, 0,
                    0, 1, 0, 1,
                    0, 0, 1, 0,
                    0, 0, 0, 1;
  c.dynamics.W_p << 0.5, 0,
                    0, 0.5,
                    1, 0,
                    0, 1;
  c.dynamics.sigma_u2 = 0.00035;
  c.acoustic.amplitudes = {10.0, 10.0};
  c.acoustic.path_loss_exponent = 1.0;
  c.acoustic.sigma_v2 = 0.05;
  c.acoustic.d_min = 0.1;
  c.prior.means = {Eigen::Vector4d(36, 36, -0.05, -0.05),
                   Eigen::Vector4d(4, 4, 0.05, 0.05)};
  c.prior.cov = Eigen::Vector4d(1, 1, 0.001, 0.001).asDiagonal();
  c.network = NetworkSpec{};
  c.steps = 200;
  c.lc_degree = 2;
  c.consensus_iterations = 8;
  c.particles = 5000;
  c.confine_truth = true;
  return c;
}

void validate(const ScenarioConfig& c) {
  const auto fail = [](const std::string& what) { throw InvalidConfig(what); };
  if (c.dynamics.targets < 1) fail("at least one target is required");
  if (static_cast<int>(c.acoustic.amplitudes.size()) != c.dynamics.targets) {
    fail("one amplitude per target is required");
  }
  if (static_cast<int>(c.prior.means.size()) != c.dynamics.targets) {
    fail("one prior mean per target is required");
  }
  for (double a : c.acoustic.amplitudes) {
    if (!(a > 0.0)) fail("amplitudes must be positive");
  }
  if (!(c.acoustic.path_loss_exponent > 0.0)) fail("path loss exponent must be positive");
  if (!(c.acoustic.sigma_v2 > 0.0)) fail("measurement noise variance must be positive");
  if (!(c.acoustic.d_min > 0.0)) fail("d_min must be positive");
  if (!(c.dynamics.sigma_u2 >= 0.0)) fail("driving noise variance must be nonnegative");
  const Eigen::Matrix4d sym = 0.5 * (c.prior.cov + c.prior.cov.transpose());
  if ((sym - c.prior.cov).cwiseAbs().maxCoeff() > 1e-12) fail("prior covariance must be symmetric");
  if (Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(sym).eigenvalues().minCoeff() < 0.0) {
    fail("prior covariance must be positive semidefinite");
  }
  if (c.network.sensors < 1) fail("at least one sensor is required");
  if (!(c.network.area > 0.0) || !(c.network.comm_range > 0.0)) {
    fail("area and communication range must be positive");
  }
  if (c.network.jitter < 0.0 || c.network.jitter >= 0.5) fail("grid jitter must lie in [0, 0.5)");
  if (c.steps < 1) fail("at least one time step is required");
  if (c.lc_degree < 1) fail("LC degree must be at least 1");
  if (c.consensus_iterations < 0) fail("consensus iterations must be nonnegative");
  if (c.particles < 1) fail("at least one particle is required");
  if (c.max_truth_attempts < 1) fail("max_truth_attempts must be positive");
  if (c.fixed_x0 && c.fixed_x0->size() != c.dynamics.state_dim()) {
    fail("fixed_x0 has the wrong dimension");
  }
}

ScenarioConfig scenario_from_json(const nlohmann::json& doc,
                                  const ScenarioConfig& base) {
  if (!doc.is_object()) throw InvalidConfig("scenario config must be a JSON object");
  ScenarioConfig c = base;
  try {
    read_matrix_if(doc, "G_p", c.dynamics.G_p);
    read_matrix_if(doc, "W_p", c.dynamics.W_p);
    read_if(doc, "sigma_u2", c.dynamics.sigma_u2);
    read_if(doc, "amplitudes", c.acoustic.amplitudes);
    read_if(doc, "path_loss_exponent", c.acoustic.path_loss_exponent);
    read_if(doc, "sigma_v2", c.acoustic.sigma_v2);
    read_if(doc, "d_min", c.acoustic.d_min);
    if (doc.contains("prior_means")) {
      c.prior.means.clear();
      for (const auto& m : doc.at("prior_means")) {
        const auto v = m.get<std::vector<double>>();
        if (v.size() != 4) throw InvalidConfig("prior_means: 4 values per target");
        c.prior.means.emplace_back(v[0], v[1], v[2], v[3]);
      }
      c.dynamics.targets = static_cast<int>(c.prior.means.size());
    }
    read_matrix_if(doc, "prior_cov", c.prior.cov);
    read_if(doc, "sensors", c.network.sensors);
    read_if(doc, "area", c.network.area);
    read_if(doc, "comm_range", c.network.comm_range);
    read_if(doc, "grid_jitter", c.network.jitter);
    read_if(doc, "steps", c.steps);
    read_if(doc, "lc_degree", c.lc_degree);
    read_if(doc, "consensus_iterations", c.consensus_iterations);
    read_if(doc, "particles", c.particles);
    read_if(doc, "confine_truth", c.confine_truth);
    read_if(doc, "max_truth_attempts", c.max_truth_attempts);
    if (doc.contains("gamma_mode")) {
      const auto mode = doc.at("gamma_mode").get<std::string>();
      if (mode == "indirect") {
        c.gamma_mode = GammaMode::kIndirect;
      } else if (mode == "direct") {
        c.gamma_mode = GammaMode::kDirect;
      } else {
        throw InvalidConfig("gamma_mode must be \"indirect\" or \"direct\"");
      }
    }
    if (doc.contains("fixed_x0")) {
      if (doc.at("fixed_x0").is_null()) {
        c.fixed_x0.reset();
      } else {
        const auto v = doc.at("fixed_x0").get<std::vector<double>>();
        c.fixed_x0 = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("scenario config: ") + e.what());
  }
  validate(c);
  return c;
}

nlohmann::json scenario_to_json(const ScenarioConfig& c) {
  nlohmann::json doc;
  doc["G_p"] = matrix_to_json(c.dynamics.G_p);
  doc["W_p"] = matrix_to_json(c.dynamics.W_p);
  doc["sigma_u2"] = c.dynamics.sigma_u2;
  doc["amplitudes"] = c.acoustic.amplitudes;
  doc["path_loss_exponent"] = c.acoustic.path_loss_exponent;
  doc["sigma_v2"] = c.acoustic.sigma_v2;
  doc["d_min"] = c.acoustic.d_min;
  nlohmann::json means = nlohmann::json::array();
  for (const auto& m : c.prior.means) {
    means.push_back({m(0), m(1), m(2), m(3)});
  }
  doc["prior_means"] = std::move(means);
  doc["prior_cov"] = matrix_to_json(c.prior.cov);
  doc["sensors"] = c.network.sensors;
  doc["area"] = c.network.area;
  doc["comm_range"] = c.network.comm_range;
  doc["grid_jitter"] = c.network.jitter;
  doc["steps"] = c.steps;
  doc["lc_degree"] = c.lc_degree;
  doc["consensus_iterations"] = c.consensus_iterations;
  doc["particles"] = c.particles;
  doc["confine_truth"] = c.confine_truth;
  doc["max_truth_attempts"] = c.max_truth_attempts;
  doc["gamma_mode"] = c.gamma_mode == GammaMode::kIndirect ? "indirect" : "direct";
  if (c.fixed_x0) {
    doc["fixed_x0"] = std::vector<double>(c.fixed_x0->data(),
                                          c.fixed_x0->data() + c.fixed_x0->size());
  } else {
    doc["fixed_x0"] = nullptr;
  }
  return doc;
}

double h_acoustic(const Eigen::Ref<const Eigen::VectorXd>& x,
                  const Eigen::Vector2d& sensor, const AcousticModel& model) {
  const int targets = static_cast<int>(model.amplitudes.size());
  if (x.size() < 4 * targets) {
    throw DimensionMismatch("h_acoustic: state too short for the targets");
  }
  double total = 0.0;
  for (int p = 0; p < targets; ++p) {
    const double dx = x(4 * p) - sensor.x();
    const double dy = x(4 * p + 1) - sensor.y();
    const double dist = std::max(std::sqrt(dx * dx + dy * dy), model.d_min);
    total += model.path_loss_exponent == 1.0
                 ? model.amplitudes[p] / dist
                 : model.amplitudes[p] / std::pow(dist, model.path_loss_exponent);
  }
  return total;
}

std::vector<GaussianMeasurementModel> acoustic_sensor_models(
    const ScenarioConfig& config, const SensorNetwork& net) {
  std::vector<GaussianMeasurementModel> models;
  models.reserve(net.size());
  const Eigen::MatrixXd noise = Eigen::MatrixXd::Constant(1, 1, config.acoustic.sigma_v2);
  for (int k = 0; k < net.size(); ++k) {
    const Eigen::Vector2d sensor = net.position(k);
    const AcousticModel acoustic = config.acoustic;
    models.emplace_back(
        config.dynamics.state_dim(),
        [sensor, acoustic](const Eigen::Ref<const Eigen::VectorXd>& x,
                           Eigen::Ref<Eigen::VectorXd> out) {
          out(0) = h_acoustic(x, sensor, acoustic);
        },
        noise);
  }
  return models;
}

std::vector<int> position_indices(int targets) {
  std::vector<int> out;
  for (int p = 0; p < targets; ++p) {
    out.push_back(4 * p);
    out.push_back(4 * p + 1);
  }
  return out;
}

LcLayout scenario_layout(const ScenarioConfig& config) {
  const int dim = 2 * config.dynamics.targets;
  const double half = 0.5 * config.network.area;
  VariableScaling scaling{Eigen::VectorXd::Constant(dim, half),
                          Eigen::VectorXd::Constant(dim, half)};
  return LcLayout(config.lc_degree, position_indices(config.dynamics.targets),
                  std::move(scaling));
}

namespace {

Eigen::MatrixXd draw_trajectory(const ScenarioConfig& config,
                                std::mt19937_64& rng) {
  const int dim = config.dynamics.state_dim();
  const LinearGaussianDynamics dyn = config.dynamics.overall();
  Eigen::MatrixXd truth(dim, config.steps + 1);
  std::normal_distribution<double> normal;
  if (config.fixed_x0) {
    truth.col(0) = *config.fixed_x0;
  } else {
    const GaussianBelief prior = config.prior.belief();
    Eigen::VectorXd e(dim);
    for (int i = 0; i < dim; ++i) e(i) = normal(rng);
    truth.col(0) = prior.mean + psd_factor(prior.cov) * e;
  }
  Eigen::VectorXd u(dyn.W.cols());
  for (int n = 1; n <= config.steps; ++n) {
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = dyn.sigma_u * normal(rng);
    truth.col(n) = dyn.G * truth.col(n - 1) + dyn.W * u;
  }
  return truth;
}

bool inside_area(const Eigen::MatrixXd& truth, int targets, double area) {
  for (int p = 0; p < targets; ++p) {
    const auto pos = truth.middleRows(4 * p, 2);
    if (pos.minCoeff() < 0.0 || pos.maxCoeff() > area) return false;
  }
  return true;
}

}  // namespace

Eigen::MatrixXd simulate_truth(const ScenarioConfig& config,
                               std::mt19937_64& rng) {
  if (!config.confine_truth) return draw_trajectory(config, rng);
  for (int attempt = 0; attempt < config.max_truth_attempts; ++attempt) {
    Eigen::MatrixXd truth = draw_trajectory(config, rng);
    if (inside_area(truth, config.dynamics.targets, config.network.area)) {
      return truth;
    }
  }
  throw std::runtime_error("simulate_truth: no trajectory stayed inside the "
                           "area after " +
                           std::to_string(config.max_truth_attempts) +
                           " attempts");
}

std::vector<Eigen::VectorXd> measure_all(const Eigen::Ref<const Eigen::VectorXd>& x,
                                         const SensorNetwork& net,
                                         const AcousticModel& model,
                                         std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const double sigma_v = std::sqrt(model.sigma_v2);
  std::vector<Eigen::VectorXd> z(net.size(), Eigen::VectorXd(1));
  for (int k = 0; k < net.size(); ++k) {
    z[k](0) = h_acoustic(x, net.position(k), model) + sigma_v * normal(rng);
  }
  return z;
}

}  // namespace lc
