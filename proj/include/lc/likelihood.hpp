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

// Exponential-family local likelihoods, the Gaussian measurement model, and
// the sufficient statistic of the approximate joint likelihood function (JLF).
//
// A local likelihood has the form
//   f(z | x) = c(z) exp(a(x)^T b(z) - d(x)).
// Expanding a(x) on a basis {phi_r} and d(x) on a basis {psi_r} turns the
// log-JLF into sum_r A_r phi_r(x) - sum_r Gamma_r psi_r(x), where A_r and
// Gamma_r are sums over sensors and can therefore be computed by consensus.
// With monomial bases both sums collapse into one polynomial sum_r B_r x^r.

#ifndef LC_LIKELIHOOD_HPP_
#define LC_LIKELIHOOD_HPP_

#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "lc/basis.hpp"

namespace lc {

class ExpFamilyLocalModel {
 public:
  virtual ~ExpFamilyLocalModel() = default;

  virtual int state_dim() const = 0;
  virtual int measurement_dim() const = 0;
  // Dimension q of a(x) and b(z).
  virtual int natural_dim() const = 0;

  virtual Eigen::VectorXd a(const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;
  virtual Eigen::VectorXd b(const Eigen::Ref<const Eigen::VectorXd>& z) const = 0;
  virtual double log_c(const Eigen::Ref<const Eigen::VectorXd>& z) const = 0;
  virtual double d(const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;

  // a(x_j)^T for every column of `states` -> J x q.
  virtual Eigen::MatrixXd a_batch(
      const Eigen::Ref<const Eigen::MatrixXd>& states) const;
  // d(x_j) for every column of `states`.
  virtual Eigen::VectorXd d_batch(
      const Eigen::Ref<const Eigen::MatrixXd>& states) const;

  // log c(z) + a(x)^T b(z) - d(x).
  double exp_family_log_likelihood(
      const Eigen::Ref<const Eigen::VectorXd>& z,
      const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

// h(x) written into `out` (length = measurement dimension).
using MeasurementFunction =
    std::function<void(const Eigen::Ref<const Eigen::VectorXd>& x,
                       Eigen::Ref<Eigen::VectorXd> out)>;

// z = h(x) + v, v ~ N(0, Q). Exponential-family form:
//   a = h, b = Q^-1 z, d = h^T Q^-1 h / 2,
//   log c = -(N log(2 pi) + log det Q) / 2 - z^T Q^-1 z / 2.
class GaussianMeasurementModel final : public ExpFamilyLocalModel {
 public:
  GaussianMeasurementModel(int state_dim, MeasurementFunction h,
                           Eigen::MatrixXd noise_cov);

  int state_dim() const override { return state_dim_; }
  int measurement_dim() const override {
    return static_cast<int>(noise_cov_.rows());
  }
  int natural_dim() const override { return measurement_dim(); }

  Eigen::VectorXd a(const Eigen::Ref<const Eigen::VectorXd>& x) const override;
  Eigen::VectorXd b(const Eigen::Ref<const Eigen::VectorXd>& z) const override;
  double log_c(const Eigen::Ref<const Eigen::VectorXd>& z) const override;
  double d(const Eigen::Ref<const Eigen::VectorXd>& x) const override;
  Eigen::MatrixXd a_batch(
      const Eigen::Ref<const Eigen::MatrixXd>& states) const override;
  Eigen::VectorXd d_batch(
      const Eigen::Ref<const Eigen::MatrixXd>& states) const override;

  Eigen::VectorXd h(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  const Eigen::MatrixXd& noise_cov() const { return noise_cov_; }
  const Eigen::MatrixXd& noise_precision() const { return noise_precision_; }
  // Lower Cholesky factor of Q, for sampling noise.
  const Eigen::MatrixXd& noise_cov_sqrt() const { return noise_sqrt_; }

  // Explicit Gaussian density log N(z; h(x), Q).
  double log_density(const Eigen::Ref<const Eigen::VectorXd>& z,
                     const Eigen::Ref<const Eigen::VectorXd>& x) const;
  // Adds log N(z; h(x_j), Q) to acc(j) for every column of `states`.
  void accumulate_log_density(const Eigen::Ref<const Eigen::VectorXd>& z,
                              const Eigen::Ref<const Eigen::MatrixXd>& states,
                              Eigen::Ref<Eigen::VectorXd> acc) const;

 private:
  int state_dim_;
  MeasurementFunction h_;
  Eigen::MatrixXd noise_cov_;
  Eigen::MatrixXd noise_precision_;
  Eigen::MatrixXd noise_sqrt_;
  double log_c_bar_;
};

// The pair of bases shared by all sensors: phi of degree R_p over the selected
// state components and psi of degree 2 R_p, which spans every product
// phi_r1 * phi_r2.
class LcLayout {
 public:
  LcLayout(int degree, std::vector<int> state_vars,
           VariableScaling scaling = {});

  int degree() const { return degree_; }
  const BasisPtr& phi() const { return phi_; }
  const BasisPtr& psi() const { return psi_; }
  const std::vector<int>& state_vars() const { return state_vars_; }
  int basis_dim() const { return static_cast<int>(state_vars_.size()); }

  // Number of B_r coefficients exchanged by consensus: |psi| - 1 (the
  // constant coefficient only scales the JLF).
  int payload_size() const { return psi_->size() - 1; }

  // psi position of phi_r1 * phi_r2.
  int product_position(int r1, int r2) const {
    return product_(r1, r2);
  }
  // psi position of each phi index.
  int phi_in_psi(int r) const { return product_(r, 0); }

  // Rows of `states` that feed the basis (basis_dim x J).
  Eigen::MatrixXd select(const Eigen::Ref<const Eigen::MatrixXd>& states) const;

 private:
  int degree_;
  std::vector<int> state_vars_;
  BasisPtr phi_;
  BasisPtr psi_;
  Eigen::MatrixXi product_;
};

// Approximate log-JLF sum_r A_r phi_r(x) - sum_r Gamma_r psi_r(x).
struct GeneralJlfStatistic {
  BasisPtr phi;
  BasisPtr psi;
  Eigen::VectorXd a_coeffs;
  Eigen::VectorXd gamma_coeffs;
  std::optional<double> log_norm;
};

// Approximate log-JLF sum_{r != 0} B_r x^r over the psi basis. `coeffs` holds
// the |psi| - 1 non-constant coefficients in basis order; the constant is kept
// separately and is not part of the consensus payload.
struct PolynomialJlfStatistic {
  BasisPtr basis;
  Eigen::VectorXd coeffs;
  double constant = 0.0;
  std::optional<double> log_norm;
};

using JlfStatistic = std::variant<GeneralJlfStatistic, PolynomialJlfStatistic>;

// Coefficient count of a statistic (R_a + R_d, or |psi| - 1).
int statistic_size(const JlfStatistic& stat);

// LS expansion of a(x) on phi, fitted at the given states (state_dim x J).
BasisExpansion fit_alpha(const ExpFamilyLocalModel& model,
                         const LcLayout& layout,
                         const Eigen::Ref<const Eigen::MatrixXd>& states,
                         const LsOptions& options = {});

// LS coefficients of d(x) on psi.
Eigen::VectorXd gamma_direct(const ExpFamilyLocalModel& model,
                             const LcLayout& layout,
                             const Eigen::Ref<const Eigen::MatrixXd>& states,
                             const LsOptions& options = {});

// gamma_r = 1/2 sum_{r' + r'' = r} alpha_r'^T Q^-1 alpha_r'', so that
// d~(x) = a~(x)^T Q^-1 a~(x) / 2 exactly.
Eigen::VectorXd gamma_indirect_gaussian(
    const BasisExpansion& alpha,
    const Eigen::Ref<const Eigen::MatrixXd>& noise_precision,
    const LcLayout& layout);

// beta_r = alpha_r^T b(z) - gamma_r for |r| <= R_p and -gamma_r above, over
// the full psi basis (constant included).
Eigen::VectorXd local_beta(const Eigen::Ref<const Eigen::VectorXd>& b_of_z,
                           const BasisExpansion& alpha,
                           const Eigen::Ref<const Eigen::VectorXd>& gamma,
                           const LcLayout& layout);

enum class GammaMode { kIndirect, kDirect };

// One sensor's local contribution (its beta) packaged as a statistic.
PolynomialJlfStatistic local_polynomial_statistic(
    const GaussianMeasurementModel& model,
    const Eigen::Ref<const Eigen::VectorXd>& z, const LcLayout& layout,
    const Eigen::Ref<const Eigen::MatrixXd>& states,
    GammaMode mode = GammaMode::kIndirect, const LsOptions& options = {});

// One sensor's (alpha^T b(z), gamma) pair as a general statistic.
GeneralJlfStatistic local_general_statistic(
    const Eigen::Ref<const Eigen::VectorXd>& b_of_z,
    const BasisExpansion& alpha, const Eigen::Ref<const Eigen::VectorXd>& gamma,
    const BasisPtr& psi);

// Exact elementwise sum over sensors. Throws DimensionMismatch when layouts
// differ.
JlfStatistic sum_local_statistics(std::span<const JlfStatistic> locals);

// Log of the approximate JLF at basis variables x, up to an x-independent
// constant (B_0 and log C are omitted).
double eval_log_jlf(const JlfStatistic& stat,
                    const Eigen::Ref<const Eigen::VectorXd>& x);

// eval_log_jlf at every column of `points` (basis_dim x J).
void eval_log_jlf_batch(const PolynomialJlfStatistic& stat,
                        const Eigen::Ref<const Eigen::MatrixXd>& points,
                        Eigen::Ref<Eigen::VectorXd> out);

using EtaFunction =
    std::function<Eigen::VectorXd(const Eigen::Ref<const Eigen::VectorXd>& z)>;

// t_p = sum_k eta_{k,p}(z_k).
Eigen::VectorXd exact_sufficient_statistic(
    std::span<const EtaFunction> etas,
    std::span<const Eigen::VectorXd> measurements);

// eta for an exponential-family sensor whose a and d are exactly expanded:
// (alpha_1^T b(z) ... alpha_Ra^T b(z), -gamma_1 ... -gamma_Rd).
EtaFunction exp_family_eta(const BasisExpansion& alpha,
                           const Eigen::VectorXd& gamma,
                           std::function<Eigen::VectorXd(
                               const Eigen::Ref<const Eigen::VectorXd>&)> b);

// log C = sum_k log c_k(z_k).
double log_norm_const(std::span<const double> log_c_values);

}  // namespace lc

#endif  // LC_LIKELIHOOD_HPP_
