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

#include "lc/filters.hpp"

#include <algorithm>
#include <string>

namespace lc {

ParticleSet ParticleSet::uniform(Eigen::MatrixXd particles) {
  ParticleSet ps;
  const auto count = particles.cols();
  ps.particles = std::move(particles);
  ps.weights = Eigen::VectorXd::Constant(count, 1.0 / static_cast<double>(count));
  return ps;
}

ParticleSet systematic_resample(const ParticleSet& ps, std::mt19937_64& rng) {
  const int count = ps.size();
  if (count == 0 || ps.weights.size() != count) {
    throw DimensionMismatch("systematic_resample: weights do not match particles");
  }
  const double total = ps.weights.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw std::invalid_argument("systematic_resample: weights sum to zero");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double offset = unit(rng);
  Eigen::MatrixXd out(ps.state_dim(), count);
  double cumulative = ps.weights(0) / total;
  int source = 0;
  for (int j = 0; j < count; ++j) {
    const double target = (j + offset) / count;
    while (target > cumulative && source < count - 1) {
      ++source;
      cumulative += ps.weights(source) / total;
    }
    out.col(j) = ps.particles.col(source);
  }
  return ParticleSet::uniform(std::move(out));
}

ParticleSet propagate(ParticleSet ps, const LinearGaussianDynamics& dynamics,
                      std::mt19937_64& rng) {
  if (dynamics.G.cols() != ps.state_dim() ||
      dynamics.W.rows() != dynamics.G.rows()) {
    throw DimensionMismatch("propagate: dynamics do not match the state");
  }
  ps.particles = (dynamics.G * ps.particles).eval();
  if (dynamics.sigma_u == 0.0 || dynamics.W.cols() == 0) return ps;
  std::normal_distribution<double> normal(0.0, dynamics.sigma_u);
  Eigen::MatrixXd u(dynamics.W.cols(), ps.size());
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    for (Eigen::Index i = 0; i < u.rows(); ++i) u(i, j) = normal(rng);
  }
  ps.particles.noalias() += dynamics.W * u;
  return ps;
}

ParticleSet weight_update(ParticleSet ps,
                          const Eigen::Ref<const Eigen::VectorXd>& log_values) {
  if (log_values.size() != ps.size()) {
    throw DimensionMismatch("weight_update: one log-value per particle");
  }
  ps.weights = normalize_log_weights(log_values);
  return ps;
}

Eigen::VectorXd point_estimate(const ParticleSet& ps) {
  return weighted_mean(ps.particles, ps.weights);
}

Eigen::MatrixXd repair_covariance(const Eigen::Ref<const Eigen::MatrixXd>& cov,
                                  double floor) {
  if (cov.rows() != cov.cols()) {
    throw DimensionMismatch("repair_covariance: matrix is not square");
  }
  Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.eigenvalues().minCoeff() >= floor) return sym;
  const Eigen::VectorXd floored = solver.eigenvalues().cwiseMax(floor);
  sym = solver.eigenvectors() * floored.asDiagonal() *
        solver.eigenvectors().transpose();
  return 0.5 * (sym + sym.transpose());
}

GaussianBelief predict_gaussian(const GaussianBelief& belief,
                                const LinearGaussianDynamics& dynamics) {
  if (dynamics.G.cols() != belief.mean.size() ||
      dynamics.W.rows() != dynamics.G.rows()) {
    throw DimensionMismatch("predict_gaussian: dynamics do not match the state");
  }
  GaussianBelief out;
  out.mean = dynamics.G * belief.mean;
  out.cov = dynamics.G * belief.cov * dynamics.G.transpose() +
            dynamics.sigma_u * dynamics.sigma_u * dynamics.W *
                dynamics.W.transpose();
  return out;
}

Eigen::MatrixXd sample_gaussian(const GaussianBelief& belief, int count,
                                std::mt19937_64& rng) {
  const auto dim = belief.mean.size();
  if (belief.cov.rows() != dim || belief.cov.cols() != dim) {
    throw DimensionMismatch("sample_gaussian: covariance shape");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      0.5 * (belief.cov + belief.cov.transpose()));
  const Eigen::MatrixXd factor =
      solver.eigenvectors() *
      solver.eigenvalues().cwiseMax(1e-10).cwiseSqrt().asDiagonal();
  std::normal_distribution<double> normal;
  Eigen::MatrixXd std_normal(dim, count);
  for (int j = 0; j < count; ++j) {
    for (Eigen::Index i = 0; i < dim; ++i) std_normal(i, j) = normal(rng);
  }
  Eigen::MatrixXd out = factor * std_normal;
  out.colwise() += belief.mean;
  return out;
}

Eigen::VectorXd exact_log_jlf(std::span<const GaussianMeasurementModel> models,
                              std::span<const Eigen::VectorXd> measurements,
                              const Eigen::Ref<const Eigen::MatrixXd>& states) {
  if (models.size() != measurements.size()) {
    throw DimensionMismatch("exact_log_jlf: one measurement per sensor");
  }
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(states.cols());
  for (std::size_t k = 0; k < models.size(); ++k) {
    models[k].accumulate_log_density(measurements[k], states, acc);
  }
  return acc;
}

Eigen::MatrixXd network_sum(const NetworkContext& ctx,
                            const Eigen::Ref<const Eigen::MatrixXd>& addends,
                            const std::string& stage) {
  if (addends.rows() != ctx.net.size()) {
    throw DimensionMismatch("network_sum: one row per sensor");
  }
  if (ctx.exact_sums) {
    return addends.colwise().sum().replicate(addends.rows(), 1);
  }
  ConsensusOptions options = ctx.consensus;
  options.stage = stage;
  return consensus_sum(ctx.net, ctx.weights, addends, options, ctx.ledger);
}

std::vector<PolynomialJlfStatistic> likelihood_consensus(
    const StepInputs& in, std::span<const ParticleSet> predicted,
    const NetworkContext& ctx, const LcOptions& lc) {
  const int sensors = ctx.net.size();
  if (static_cast<int>(in.models.size()) != sensors ||
      static_cast<int>(in.measurements.size()) != sensors ||
      static_cast<int>(predicted.size()) != sensors) {
    throw DimensionMismatch("likelihood_consensus: one entry per sensor");
  }
  Eigen::MatrixXd local(sensors, lc.layout.payload_size());
  for (int k = 0; k < sensors; ++k) {
    const PolynomialJlfStatistic stat = local_polynomial_statistic(
        in.models[k], in.measurements[k], lc.layout, predicted[k].particles,
        lc.gamma_mode, lc.ls);
    local.row(k) = stat.coeffs.transpose();
  }
  const Eigen::MatrixXd sums = network_sum(ctx, local, "lc");
  std::vector<PolynomialJlfStatistic> out(sensors);
  for (int k = 0; k < sensors; ++k) {
    out[k].basis = lc.layout.psi();
    out[k].coeffs = sums.row(k).transpose();
  }
  return out;
}

namespace {

// Weight update that survives a degenerate likelihood by falling back to
// uniform weights.
ParticleSet guarded_weight_update(ParticleSet ps,
                                  const Eigen::Ref<const Eigen::VectorXd>& log_values,
                                  bool& diverged) {
  try {
    return weight_update(std::move(ps), log_values);
  } catch (const FilterDivergence&) {
    diverged = true;
    ps.weights.setConstant(1.0 / ps.size());
    return ps;
  }
}

Eigen::VectorXd approximate_log_jlf(const PolynomialJlfStatistic& stat,
                                    const LcLayout& layout,
                                    const Eigen::Ref<const Eigen::MatrixXd>& states) {
  Eigen::VectorXd out(states.cols());
  eval_log_jlf_batch(stat, layout.select(states), out);
  return out;
}

void check_sensor_spans(std::size_t states, std::size_t rngs,
                        const NetworkContext& ctx) {
  if (static_cast<int>(states) != ctx.net.size() ||
      static_cast<int>(rngs) != ctx.net.size()) {
    throw DimensionMismatch("distributed step: one state and rng per sensor");
  }
}

}  // namespace

CentralizedOutput cpf_step(ParticleSet& state, const StepInputs& in,
                           std::mt19937_64& rng) {
  CentralizedOutput out;
  ParticleSet predicted =
      propagate(systematic_resample(state, rng), in.dynamics, rng);
  const Eigen::VectorXd log_values =
      exact_log_jlf(in.models, in.measurements, predicted.particles);
  state = guarded_weight_update(std::move(predicted), log_values, out.diverged);
  out.estimate = point_estimate(state);
  return out;
}

CentralizedOutput cgpf_step(GaussianBelief& belief, int particles,
                            const StepInputs& in, std::mt19937_64& rng) {
  CentralizedOutput out;
  ParticleSet predicted = ParticleSet::uniform(
      sample_gaussian(predict_gaussian(belief, in.dynamics), particles, rng));
  const Eigen::VectorXd log_values =
      exact_log_jlf(in.models, in.measurements, predicted.particles);
  const ParticleSet weighted =
      guarded_weight_update(std::move(predicted), log_values, out.diverged);
  belief = weighted_moments(weighted.particles, weighted.weights);
  belief.cov = repair_covariance(belief.cov);
  out.estimate = belief.mean;
  return out;
}

DistributedOutput lcdpf_step(std::span<ParticleSet> states,
                             const StepInputs& in, const NetworkContext& ctx,
                             const LcOptions& lc,
                             std::span<std::mt19937_64> rngs) {
  check_sensor_spans(states.size(), rngs.size(), ctx);
  const int sensors = ctx.net.size();
  for (int k = 0; k < sensors; ++k) {
    states[k] =
        propagate(systematic_resample(states[k], rngs[k]), in.dynamics, rngs[k]);
  }
  const std::vector<PolynomialJlfStatistic> stats =
      likelihood_consensus(in, states, ctx, lc);
  DistributedOutput out;
  out.estimates.resize(in.dynamics.state_dim(), sensors);
  for (int k = 0; k < sensors; ++k) {
    const Eigen::VectorXd log_values =
        approximate_log_jlf(stats[k], lc.layout, states[k].particles);
    states[k] =
        guarded_weight_update(std::move(states[k]), log_values, out.diverged);
    out.estimates.col(k) = point_estimate(states[k]);
  }
  return out;
}

DistributedOutput lcdgpf_step(std::span<GaussianBelief> beliefs,
                              int particles, const StepInputs& in,
                              const NetworkContext& ctx, const LcOptions& lc,
                              std::span<std::mt19937_64> rngs) {
  check_sensor_spans(beliefs.size(), rngs.size(), ctx);
  const int sensors = ctx.net.size();
  std::vector<ParticleSet> predicted(sensors);
  for (int k = 0; k < sensors; ++k) {
    predicted[k] = ParticleSet::uniform(sample_gaussian(
        predict_gaussian(beliefs[k], in.dynamics), particles, rngs[k]));
  }
  const std::vector<PolynomialJlfStatistic> stats =
      likelihood_consensus(in, predicted, ctx, lc);
  DistributedOutput out;
  out.estimates.resize(in.dynamics.state_dim(), sensors);
  for (int k = 0; k < sensors; ++k) {
    const Eigen::VectorXd log_values =
        approximate_log_jlf(stats[k], lc.layout, predicted[k].particles);
    const ParticleSet weighted =
        guarded_weight_update(std::move(predicted[k]), log_values, out.diverged);
    beliefs[k] = weighted_moments(weighted.particles, weighted.weights);
    beliefs[k].cov = repair_covariance(beliefs[k].cov);
    out.estimates.col(k) = beliefs[k].mean;
  }
  return out;
}

PartialMoments partial_moments(const Eigen::Ref<const Eigen::MatrixXd>& particles,
                               const Eigen::Ref<const Eigen::VectorXd>& log_w) {
  if (log_w.size() != particles.cols()) {
    throw DimensionMismatch("partial_moments: one weight per particle");
  }
  const Eigen::VectorXd w = log_w.array().exp().matrix();
  PartialMoments m;
  m.mean = particles * w;
  m.corr = particles * w.asDiagonal() * particles.transpose();
  m.corr = 0.5 * (m.corr + m.corr.transpose()).eval();
  m.weight_sum = w.sum();
  return m;
}

int packed_moments_size(int state_dim) {
  return state_dim + state_dim * (state_dim + 1) / 2 + 1;
}

Eigen::VectorXd pack_moments(const PartialMoments& m) {
  const auto dim = m.mean.size();
  Eigen::VectorXd packed(packed_moments_size(static_cast<int>(dim)));
  packed.head(dim) = m.mean;
  Eigen::Index pos = dim;
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = i; j < dim; ++j) packed(pos++) = m.corr(i, j);
  }
  packed(pos) = m.weight_sum;
  return packed;
}

PartialMoments unpack_moments(const Eigen::Ref<const Eigen::VectorXd>& packed,
                              int state_dim) {
  if (packed.size() != packed_moments_size(state_dim)) {
    throw DimensionMismatch("unpack_moments: wrong packed length");
  }
  PartialMoments m;
  m.mean = packed.head(state_dim);
  m.corr.resize(state_dim, state_dim);
  Eigen::Index pos = state_dim;
  for (int i = 0; i < state_dim; ++i) {
    for (int j = i; j < state_dim; ++j) {
      m.corr(i, j) = packed(pos);
      m.corr(j, i) = packed(pos++);
    }
  }
  m.weight_sum = packed(pos);
  return m;
}

GaussianBelief combine_moments(const PartialMoments& total) {
  if (!(total.weight_sum > 0.0) || !std::isfinite(total.weight_sum)) {
    throw FilterDivergence("combined weight sum is not positive");
  }
  GaussianBelief b;
  b.mean = total.mean / total.weight_sum;
  b.cov = total.corr / total.weight_sum - b.mean * b.mean.transpose();
  b.cov = 0.5 * (b.cov + b.cov.transpose()).eval();
  if (!b.mean.allFinite() || !b.cov.allFinite()) {
    throw FilterDivergence("combined moments are not finite");
  }
  return b;
}

DistributedOutput rlcdgpf_step(std::span<GaussianBelief> beliefs,
                               int particles_per_sensor, const StepInputs& in,
                               const NetworkContext& ctx, const LcOptions& lc,
                               std::span<std::mt19937_64> rngs) {
  check_sensor_spans(beliefs.size(), rngs.size(), ctx);
  const int required = lc.gamma_mode == GammaMode::kIndirect
                           ? lc.layout.phi()->size()
                           : std::max(lc.layout.phi()->size(),
                                      lc.layout.psi()->size());
  if (particles_per_sensor < required) {
    throw InvalidConfig("rlcdgpf_step: " + std::to_string(particles_per_sensor) +
                        " particles per sensor cannot fit " +
                        std::to_string(required) + " coefficients");
  }
  const int sensors = ctx.net.size();
  const int dim = in.dynamics.state_dim();
  std::vector<ParticleSet> predicted(sensors);
  std::vector<Eigen::VectorXd> references(sensors);
  for (int k = 0; k < sensors; ++k) {
    const GaussianBelief prior = predict_gaussian(beliefs[k], in.dynamics);
    predicted[k] = ParticleSet::uniform(
        sample_gaussian(prior, particles_per_sensor, rngs[k]));
    references[k] = prior.mean;
  }
  const std::vector<PolynomialJlfStatistic> stats =
      likelihood_consensus(in, predicted, ctx, lc);

  // exp(S(x)) overflows, so every sensor measures its weights relative to the
  // JLF at its predicted mean. The sensors' predicted means agree up to
  // consensus error, so the partial moments stay on a common scale.
  Eigen::MatrixXd packed(sensors, packed_moments_size(dim));
  DistributedOutput out;
  for (int k = 0; k < sensors; ++k) {
    Eigen::VectorXd log_w =
        approximate_log_jlf(stats[k], lc.layout, predicted[k].particles);
    log_w.array() -= approximate_log_jlf(stats[k], lc.layout, references[k])(0);
    if (log_w.maxCoeff() > kMaxLogWeight) {
      out.clamped = true;
      log_w = log_w.cwiseMin(kMaxLogWeight);
    }
    packed.row(k) =
        pack_moments(partial_moments(predicted[k].particles, log_w)).transpose();
  }
  const Eigen::MatrixXd sums = network_sum(ctx, packed, "moments");

  out.estimates.resize(dim, sensors);
  for (int k = 0; k < sensors; ++k) {
    try {
      beliefs[k] = combine_moments(unpack_moments(sums.row(k).transpose(), dim));
    } catch (const FilterDivergence&) {
      out.diverged = true;
      beliefs[k] = weighted_moments(predicted[k].particles,
                                    predicted[k].weights);
    }
    beliefs[k].cov = repair_covariance(beliefs[k].cov);
    out.estimates.col(k) = beliefs[k].mean;
  }
  return out;
}

}  // namespace lc
