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

// Particle filters: the centralized PF and Gaussian PF, and the distributed
// filters that replace the exact joint likelihood by its likelihood-consensus
// approximation.

#ifndef LC_FILTERS_HPP_
#define LC_FILTERS_HPP_

#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lc/errors.hpp"
#include "lc/likelihood.hpp"
#include "lc/network.hpp"

namespace lc {

// Particles are stored column-wise (state_dim x J).
struct ParticleSet {
  Eigen::MatrixXd particles;
  Eigen::VectorXd weights;

  int size() const { return static_cast<int>(particles.cols()); }
  int state_dim() const { return static_cast<int>(particles.rows()); }

  static ParticleSet uniform(Eigen::MatrixXd particles);
};

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Nonnormalized first and second moments of one sensor's weighted particles.
struct PartialMoments {
  Eigen::VectorXd mean;  // sum_j w_j x_j
  Eigen::MatrixXd corr;  // sum_j w_j x_j x_j^T
  double weight_sum = 0.0;
};

// x_n = G x_{n-1} + W u_n, u_n ~ N(0, sigma_u^2 I).
struct LinearGaussianDynamics {
  Eigen::MatrixXd G;
  Eigen::MatrixXd W;
  double sigma_u = 0.0;

  int state_dim() const { return static_cast<int>(G.rows()); }
};

// Normalized weights proportional to exp(log_values), computed by subtracting
// the maximum. Throws FilterDivergence when no value is finite.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
normalize_log_weights(const Eigen::MatrixBase<Derived>& log_values) {
  using Scalar = typename Derived::Scalar;
  using std::exp;
  using std::isfinite;
  Scalar peak = -std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index j = 0; j < log_values.size(); ++j) {
    const Scalar v = log_values(j);
    if (std::isnan(v)) throw FilterDivergence("log-likelihood is NaN");
    if (v > peak) peak = v;
  }
  if (!isfinite(peak)) {
    throw FilterDivergence("every particle has zero likelihood");
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w =
      (log_values.array() - peak).exp().matrix();
  return w / w.sum();
}

// sum_j w_j x_j.
template <typename Derived, typename WeightDerived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> weighted_mean(
    const Eigen::MatrixBase<Derived>& particles,
    const Eigen::MatrixBase<WeightDerived>& weights) {
  return particles * weights;
}

// Weighted mean and covariance sum_j w_j x_j x_j^T - mu mu^T, for weights
// summing to one.
template <typename Derived, typename WeightDerived>
GaussianBelief weighted_moments(const Eigen::MatrixBase<Derived>& particles,
                                const Eigen::MatrixBase<WeightDerived>& weights) {
  GaussianBelief out;
  out.mean = particles * weights;
  // Centering first keeps the subtraction well conditioned.
  const Eigen::MatrixXd centered = particles.colwise() - out.mean;
  out.cov = centered * weights.asDiagonal() * centered.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

// Copies drawn by systematic resampling; the result has uniform weights.
// Throws std::invalid_argument if the weights are all zero.
ParticleSet systematic_resample(const ParticleSet& ps, std::mt19937_64& rng);

// Replaces each particle x by a draw from N(Gx, sigma_u^2 W W^T).
ParticleSet propagate(ParticleSet ps, const LinearGaussianDynamics& dynamics,
                      std::mt19937_64& rng);

// w_j proportional to exp(log_values(j)); throws FilterDivergence if every
// value is -inf.
ParticleSet weight_update(ParticleSet ps,
                          const Eigen::Ref<const Eigen::VectorXd>& log_values);

Eigen::VectorXd point_estimate(const ParticleSet& ps);

// Symmetrizes and floors the eigenvalues at `floor`.
Eigen::MatrixXd repair_covariance(const Eigen::Ref<const Eigen::MatrixXd>& cov,
                                  double floor = 1e-10);

// Exact time update of a Gaussian belief under linear-Gaussian dynamics:
// N(G mu, G C G^T + sigma_u^2 W W^T). Drawing from it is equivalent to
// drawing from the belief and propagating each draw.
GaussianBelief predict_gaussian(const GaussianBelief& belief,
                                const LinearGaussianDynamics& dynamics);

// J draws from N(mean, cov) after covariance repair (state_dim x J).
Eigen::MatrixXd sample_gaussian(const GaussianBelief& belief, int count,
                                std::mt19937_64& rng);

// Exact log-JLF sum_k log N(z_k; h_k(x), Q_k) at every column of `states`.
Eigen::VectorXd exact_log_jlf(std::span<const GaussianMeasurementModel> models,
                              std::span<const Eigen::VectorXd> measurements,
                              const Eigen::Ref<const Eigen::MatrixXd>& states);

// What every filter step needs to know about the current time step.
struct StepInputs {
  const LinearGaussianDynamics& dynamics;
  std::span<const GaussianMeasurementModel> models;
  std::span<const Eigen::VectorXd> measurements;
};

// How the sensors compute sums over the network.
struct NetworkContext {
  const SensorNetwork& net;
  const ConsensusWeights& weights;
  ConsensusOptions consensus;
  // Replace consensus by exact summation (no transmissions are recorded).
  bool exact_sums = false;
  TransmissionLedger* ledger = nullptr;
};

struct LcOptions {
  const LcLayout& layout;
  GammaMode gamma_mode = GammaMode::kIndirect;
  LsOptions ls;
};

// Per-sensor sums over k of the rows of `addends` (K x N): exact column sums
// broadcast to every sensor, or consensus estimates.
Eigen::MatrixXd network_sum(const NetworkContext& ctx,
                            const Eigen::Ref<const Eigen::MatrixXd>& addends,
                            const std::string& stage);

// LC: each sensor fits its local statistic at its own predicted particles and
// the network sums them. Returns sensor k's approximation of the global
// polynomial log-JLF.
std::vector<PolynomialJlfStatistic> likelihood_consensus(
    const StepInputs& in, std::span<const ParticleSet> predicted,
    const NetworkContext& ctx, const LcOptions& lc);

struct CentralizedOutput {
  Eigen::VectorXd estimate;
  bool diverged = false;
};

struct DistributedOutput {
  Eigen::MatrixXd estimates;  // state_dim x K
  bool diverged = false;
  // Some nonnormalized weight exponent hit kMaxLogWeight.
  bool clamped = false;
};

// Resample, propagate, weight by the exact JLF, estimate.
CentralizedOutput cpf_step(ParticleSet& state, const StepInputs& in,
                           std::mt19937_64& rng);

// Sample J from the belief, propagate, weight by the exact JLF, and collapse
// to the weighted mean and covariance.
CentralizedOutput cgpf_step(GaussianBelief& belief, int particles,
                            const StepInputs& in, std::mt19937_64& rng);

// One time step of the LC-based distributed PF. `states` and `rngs` hold one
// entry per sensor.
DistributedOutput lcdpf_step(std::span<ParticleSet> states,
                             const StepInputs& in, const NetworkContext& ctx,
                             const LcOptions& lc,
                             std::span<std::mt19937_64> rngs);

// One time step of the LC-based distributed Gaussian PF.
DistributedOutput lcdgpf_step(std::span<GaussianBelief> beliefs,
                              int particles, const StepInputs& in,
                              const NetworkContext& ctx, const LcOptions& lc,
                              std::span<std::mt19937_64> rngs);

// Largest exponent used for the nonnormalized weights of the reduced filter.
inline constexpr double kMaxLogWeight = 600.0;

// Partial moments of particles with nonnormalized weights exp(log_w).
PartialMoments partial_moments(const Eigen::Ref<const Eigen::MatrixXd>& particles,
                               const Eigen::Ref<const Eigen::VectorXd>& log_w);

// Packs (mean, upper triangle of corr, weight_sum) into one row of
// M + M(M+1)/2 + 1 values, and back.
Eigen::VectorXd pack_moments(const PartialMoments& m);
PartialMoments unpack_moments(const Eigen::Ref<const Eigen::VectorXd>& packed,
                              int state_dim);
int packed_moments_size(int state_dim);

// Global belief from summed partial moments: mu = mu'/W, C = R'/W - mu mu^T.
GaussianBelief combine_moments(const PartialMoments& total);

// One time step of the reduced-complexity LC-DGPF: each sensor runs
// `particles_per_sensor` particles and a second network sum fuses the
// partial moments.
DistributedOutput rlcdgpf_step(std::span<GaussianBelief> beliefs,
                               int particles_per_sensor, const StepInputs& in,
                               const NetworkContext& ctx, const LcOptions& lc,
                               std::span<std::mt19937_64> rngs);

}  // namespace lc

#endif  // LC_FILTERS_HPP_
