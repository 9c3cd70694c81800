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

#include "lc/likelihood.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace lc {

Eigen::MatrixXd ExpFamilyLocalModel::a_batch(
    const Eigen::Ref<const Eigen::MatrixXd>& states) const {
  Eigen::MatrixXd out(states.cols(), natural_dim());
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    out.row(j) = a(states.col(j)).transpose();
  }
  return out;
}

Eigen::VectorXd ExpFamilyLocalModel::d_batch(
    const Eigen::Ref<const Eigen::MatrixXd>& states) const {
  Eigen::VectorXd out(states.cols());
  for (Eigen::Index j = 0; j < states.cols(); ++j) out(j) = d(states.col(j));
  return out;
}

double ExpFamilyLocalModel::exp_family_log_likelihood(
    const Eigen::Ref<const Eigen::VectorXd>& z,
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return log_c(z) + a(x).dot(b(z)) - d(x);
}

GaussianMeasurementModel::GaussianMeasurementModel(int state_dim,
                                                   MeasurementFunction h,
                                                   Eigen::MatrixXd noise_cov)
    : state_dim_(state_dim), h_(std::move(h)), noise_cov_(std::move(noise_cov)) {
  if (noise_cov_.rows() != noise_cov_.cols() || noise_cov_.rows() == 0) {
    throw DimensionMismatch("GaussianMeasurementModel: Q must be square");
  }
  if (!noise_cov_.isApprox(noise_cov_.transpose())) {
    throw std::invalid_argument("GaussianMeasurementModel: Q not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(noise_cov_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(
        "GaussianMeasurementModel: Q not positive definite");
  }
  noise_sqrt_ = llt.matrixL();
  noise_precision_ =
      llt.solve(Eigen::MatrixXd::Identity(noise_cov_.rows(), noise_cov_.cols()));
  const double log_det =
      2.0 * noise_sqrt_.diagonal().array().log().sum();
  log_c_bar_ = -0.5 * (static_cast<double>(noise_cov_.rows()) *
                           std::log(2.0 * std::numbers::pi) +
                       log_det);
}

Eigen::VectorXd GaussianMeasurementModel::h(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != state_dim_) {
    throw DimensionMismatch("measurement function: state dimension " +
                            std::to_string(x.size()) + ", expected " +
                            std::to_string(state_dim_));
  }
  Eigen::VectorXd out(measurement_dim());
  h_(x, out);
  return out;
}

Eigen::VectorXd GaussianMeasurementModel::a(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return h(x);
}

Eigen::VectorXd GaussianMeasurementModel::b(
    const Eigen::Ref<const Eigen::VectorXd>& z) const {
  return noise_precision_ * z;
}

double GaussianMeasurementModel::log_c(
    const Eigen::Ref<const Eigen::VectorXd>& z) const {
  return log_c_bar_ - 0.5 * z.dot(noise_precision_ * z);
}

double GaussianMeasurementModel::d(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd hx = h(x);
  return 0.5 * hx.dot(noise_precision_ * hx);
}

Eigen::MatrixXd GaussianMeasurementModel::a_batch(
    const Eigen::Ref<const Eigen::MatrixXd>& states) const {
  if (states.rows() != state_dim_) {
    throw DimensionMismatch("a_batch: wrong state dimension");
  }
  Eigen::MatrixXd out(measurement_dim(), states.cols());
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    h_(states.col(j), out.col(j));
  }
  return out.transpose();
}

Eigen::VectorXd GaussianMeasurementModel::d_batch(
    const Eigen::Ref<const Eigen::MatrixXd>& states) const {
  const Eigen::MatrixXd hs = a_batch(states);
  return 0.5 * (hs * noise_precision_).cwiseProduct(hs).rowwise().sum();
}

double GaussianMeasurementModel::log_density(
    const Eigen::Ref<const Eigen::VectorXd>& z,
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd r = z - h(x);
  return log_c_bar_ - 0.5 * r.dot(noise_precision_ * r);
}

void GaussianMeasurementModel::accumulate_log_density(
    const Eigen::Ref<const Eigen::VectorXd>& z,
    const Eigen::Ref<const Eigen::MatrixXd>& states,
    Eigen::Ref<Eigen::VectorXd> acc) const {
  const int n = measurement_dim();
  Eigen::VectorXd hx(n);
  if (n == 1) {
    const double precision = noise_precision_(0, 0);
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
      h_(states.col(j), hx);
      const double r = z(0) - hx(0);
      acc(j) += log_c_bar_ - 0.5 * precision * r * r;
    }
    return;
  }
  Eigen::VectorXd r(n);
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    h_(states.col(j), hx);
    r = z - hx;
    acc(j) += log_c_bar_ - 0.5 * r.dot(noise_precision_ * r);
  }
}

LcLayout::LcLayout(int degree, std::vector<int> state_vars,
                   VariableScaling scaling)
    : degree_(degree), state_vars_(std::move(state_vars)) {
  const int dim = static_cast<int>(state_vars_.size());
  phi_ = std::make_shared<const PolynomialBasis>(dim, degree, scaling);
  psi_ = std::make_shared<const PolynomialBasis>(dim, 2 * degree, scaling);
  const int n = phi_->size();
  product_.resize(n, n);
  for (int r1 = 0; r1 < n; ++r1) {
    for (int r2 = 0; r2 < n; ++r2) {
      product_(r1, r2) = *psi_->position(
          add_indices(phi_->indices()[r1], phi_->indices()[r2]));
    }
  }
}

Eigen::MatrixXd LcLayout::select(
    const Eigen::Ref<const Eigen::MatrixXd>& states) const {
  Eigen::MatrixXd out(basis_dim(), states.cols());
  for (int m = 0; m < basis_dim(); ++m) {
    if (state_vars_[m] >= states.rows()) {
      throw DimensionMismatch("LcLayout::select: state has " +
                              std::to_string(states.rows()) + " components");
    }
    out.row(m) = states.row(state_vars_[m]);
  }
  return out;
}

int statistic_size(const JlfStatistic& stat) {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GeneralJlfStatistic>) {
          return static_cast<int>(s.a_coeffs.size() + s.gamma_coeffs.size());
        } else {
          return static_cast<int>(s.coeffs.size());
        }
      },
      stat);
}

BasisExpansion fit_alpha(const ExpFamilyLocalModel& model,
                         const LcLayout& layout,
                         const Eigen::Ref<const Eigen::MatrixXd>& states,
                         const LsOptions& options) {
  return ls_fit(layout.phi(), layout.select(states), model.a_batch(states),
                options);
}

Eigen::VectorXd gamma_direct(const ExpFamilyLocalModel& model,
                             const LcLayout& layout,
                             const Eigen::Ref<const Eigen::MatrixXd>& states,
                             const LsOptions& options) {
  return ls_fit(layout.psi(), layout.select(states), model.d_batch(states),
                options)
      .coeffs.col(0);
}

Eigen::VectorXd gamma_indirect_gaussian(
    const BasisExpansion& alpha,
    const Eigen::Ref<const Eigen::MatrixXd>& noise_precision,
    const LcLayout& layout) {
  if (!alpha.basis || !alpha.basis->same_layout(*layout.phi())) {
    throw DimensionMismatch("gamma_indirect_gaussian: alpha basis differs "
                            "from the layout's phi basis");
  }
  if (noise_precision.rows() != alpha.outputs() ||
      noise_precision.cols() != alpha.outputs()) {
    throw DimensionMismatch("gamma_indirect_gaussian: Q^-1 is " +
                            std::to_string(noise_precision.rows()) + "x" +
                            std::to_string(noise_precision.cols()) +
                            " but alpha has " +
                            std::to_string(alpha.outputs()) + " outputs");
  }
  const Eigen::MatrixXd pair =
      alpha.coeffs * noise_precision * alpha.coeffs.transpose();
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(layout.psi()->size());
  const int n = layout.phi()->size();
  for (int r1 = 0; r1 < n; ++r1) {
    for (int r2 = 0; r2 < n; ++r2) {
      gamma(layout.product_position(r1, r2)) += 0.5 * pair(r1, r2);
    }
  }
  return gamma;
}

Eigen::VectorXd local_beta(const Eigen::Ref<const Eigen::VectorXd>& b_of_z,
                           const BasisExpansion& alpha,
                           const Eigen::Ref<const Eigen::VectorXd>& gamma,
                           const LcLayout& layout) {
  if (gamma.size() != layout.psi()->size()) {
    throw DimensionMismatch("local_beta: gamma has " +
                            std::to_string(gamma.size()) + " entries, psi " +
                            std::to_string(layout.psi()->size()));
  }
  if (alpha.coeffs.rows() != layout.phi()->size() ||
      b_of_z.size() != alpha.outputs()) {
    throw DimensionMismatch("local_beta: alpha / b(z) shape mismatch");
  }
  Eigen::VectorXd beta = -gamma;
  const Eigen::VectorXd projected = alpha.coeffs * b_of_z;
  for (int r = 0; r < layout.phi()->size(); ++r) {
    beta(layout.phi_in_psi(r)) += projected(r);
  }
  return beta;
}

PolynomialJlfStatistic local_polynomial_statistic(
    const GaussianMeasurementModel& model,
    const Eigen::Ref<const Eigen::VectorXd>& z, const LcLayout& layout,
    const Eigen::Ref<const Eigen::MatrixXd>& states, GammaMode mode,
    const LsOptions& options) {
  const BasisExpansion alpha = fit_alpha(model, layout, states, options);
  const Eigen::VectorXd gamma =
      mode == GammaMode::kIndirect
          ? gamma_indirect_gaussian(alpha, model.noise_precision(), layout)
          : gamma_direct(model, layout, states, options);
  const Eigen::VectorXd beta = local_beta(model.b(z), alpha, gamma, layout);
  PolynomialJlfStatistic stat;
  stat.basis = layout.psi();
  stat.constant = beta(0);
  stat.coeffs = beta.tail(beta.size() - 1);
  stat.log_norm = model.log_c(z);
  return stat;
}

GeneralJlfStatistic local_general_statistic(
    const Eigen::Ref<const Eigen::VectorXd>& b_of_z,
    const BasisExpansion& alpha, const Eigen::Ref<const Eigen::VectorXd>& gamma,
    const BasisPtr& psi) {
  if (gamma.size() != psi->size() || b_of_z.size() != alpha.outputs()) {
    throw DimensionMismatch("local_general_statistic: shape mismatch");
  }
  return GeneralJlfStatistic{alpha.basis, psi, alpha.coeffs * b_of_z, gamma,
                             std::nullopt};
}

namespace {

std::optional<double> add_optional(const std::optional<double>& lhs,
                                   const std::optional<double>& rhs) {
  if (!lhs || !rhs) return std::nullopt;
  return *lhs + *rhs;
}

}  // namespace

JlfStatistic sum_local_statistics(std::span<const JlfStatistic> locals) {
  if (locals.empty()) {
    throw std::invalid_argument("sum_local_statistics: no sensors");
  }
  JlfStatistic total = locals.front();
  for (std::size_t k = 1; k < locals.size(); ++k) {
    const JlfStatistic& local = locals[k];
    if (local.index() != total.index()) {
      throw DimensionMismatch("sum_local_statistics: mixed statistic kinds");
    }
    if (auto* g = std::get_if<GeneralJlfStatistic>(&total)) {
      const auto& l = std::get<GeneralJlfStatistic>(local);
      if (!g->phi->same_layout(*l.phi) || !g->psi->same_layout(*l.psi) ||
          g->a_coeffs.size() != l.a_coeffs.size() ||
          g->gamma_coeffs.size() != l.gamma_coeffs.size()) {
        throw DimensionMismatch("sum_local_statistics: layout mismatch");
      }
      g->a_coeffs += l.a_coeffs;
      g->gamma_coeffs += l.gamma_coeffs;
      g->log_norm = add_optional(g->log_norm, l.log_norm);
    } else {
      auto& p = std::get<PolynomialJlfStatistic>(total);
      const auto& l = std::get<PolynomialJlfStatistic>(local);
      if (!p.basis->same_layout(*l.basis) || p.coeffs.size() != l.coeffs.size()) {
        throw DimensionMismatch("sum_local_statistics: layout mismatch");
      }
      p.coeffs += l.coeffs;
      p.constant += l.constant;
      p.log_norm = add_optional(p.log_norm, l.log_norm);
    }
  }
  return total;
}

double eval_log_jlf(const JlfStatistic& stat,
                    const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (const auto* g = std::get_if<GeneralJlfStatistic>(&stat)) {
    return g->a_coeffs.dot(g->phi->evaluate(x)) -
           g->gamma_coeffs.dot(g->psi->evaluate(x));
  }
  const auto& p = std::get<PolynomialJlfStatistic>(stat);
  const Eigen::VectorXd values = p.basis->evaluate(x);
  return values.tail(values.size() - 1).dot(p.coeffs);
}

void eval_log_jlf_batch(const PolynomialJlfStatistic& stat,
                        const Eigen::Ref<const Eigen::MatrixXd>& points,
                        Eigen::Ref<Eigen::VectorXd> out) {
  const int n = stat.basis->size();
  if (stat.coeffs.size() != n - 1) {
    throw DimensionMismatch("eval_log_jlf_batch: coefficient count");
  }
  Eigen::VectorXd values(n);
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    stat.basis->evaluate_into(points.col(j), values);
    out(j) = values.tail(n - 1).dot(stat.coeffs);
  }
}

Eigen::VectorXd exact_sufficient_statistic(
    std::span<const EtaFunction> etas,
    std::span<const Eigen::VectorXd> measurements) {
  if (etas.size() != measurements.size() || etas.empty()) {
    throw DimensionMismatch("exact_sufficient_statistic: one eta and one "
                            "measurement per sensor required");
  }
  Eigen::VectorXd total = etas[0](measurements[0]);
  for (std::size_t k = 1; k < etas.size(); ++k) {
    const Eigen::VectorXd term = etas[k](measurements[k]);
    if (term.size() != total.size()) {
      throw DimensionMismatch("exact_sufficient_statistic: sensor " +
                              std::to_string(k) + " has a different layout");
    }
    total += term;
  }
  return total;
}

EtaFunction exp_family_eta(
    const BasisExpansion& alpha, const Eigen::VectorXd& gamma,
    std::function<Eigen::VectorXd(const Eigen::Ref<const Eigen::VectorXd>&)>
        b) {
  return [coeffs = alpha.coeffs, gamma,
          b = std::move(b)](const Eigen::Ref<const Eigen::VectorXd>& z) {
    Eigen::VectorXd t(coeffs.rows() + gamma.size());
    t.head(coeffs.rows()) = coeffs * b(z);
    t.tail(gamma.size()) = -gamma;
    return t;
  };
}

double log_norm_const(std::span<const double> log_c_values) {
  double total = 0.0;
  for (double v : log_c_values) total += v;
  return total;
}

}  // namespace lc
