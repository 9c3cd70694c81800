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

// Multivariate monomial bases and least-squares projection onto them.

#ifndef LC_BASIS_HPP_
#define LC_BASIS_HPP_

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lc/errors.hpp"

namespace lc {

// Exponent tuple (r_1, ..., r_M) of a monomial x_1^r_1 ... x_M^r_M.
// Ordered graded-lexicographically: by total degree, then lexicographically
// on the exponent tuple.
struct MultiIndex {
  std::vector<int> exponents;

  int dim() const { return static_cast<int>(exponents.size()); }
  int total_degree() const;

  std::strong_ordering operator<=>(const MultiIndex& other) const;
  bool operator==(const MultiIndex& other) const = default;
};

// Componentwise sum; the total degrees add.
MultiIndex add_indices(const MultiIndex& lhs, const MultiIndex& rhs);

// C(n, k). Throws std::overflow_error if the result does not fit in 64 bits.
std::uint64_t binomial(int n, int k);

// All multi-indices of dimension `dim` with total degree <= `degree`, in
// graded lexicographic order. The count is C(degree + dim, dim).
std::vector<MultiIndex> enumerate_multi_indices(int dim, int degree);

// Affine change of variables u_m = (x_m - center_m) / scale_m applied before
// the monomials are formed. An empty center/scale means the identity map.
struct VariableScaling {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;

  bool is_identity() const { return center.size() == 0; }
};

// Truncated monomial basis {u^r : |r| <= degree} over `dim` variables.
class PolynomialBasis {
 public:
  PolynomialBasis(int dim, int degree, VariableScaling scaling = {});

  int dim() const { return dim_; }
  int degree() const { return degree_; }
  int size() const { return static_cast<int>(indices_.size()); }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  const VariableScaling& scaling() const { return scaling_; }

  // Position of `index` in the ordered basis, if present.
  std::optional<int> position(const MultiIndex& index) const;

  // Values of every basis function at x (length size()).
  template <typename Derived>
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> evaluate(
      const Eigen::MatrixBase<Derived>& x) const;

  // Writes the basis values at x into `out` (length size()) without
  // allocating.
  template <typename Derived, typename OutDerived>
  void evaluate_into(const Eigen::MatrixBase<Derived>& x,
                     Eigen::MatrixBase<OutDerived> const& out) const;

  // Design matrix with one row per column of `points` (dim x J) -> J x size.
  Eigen::MatrixXd design_matrix(
      const Eigen::Ref<const Eigen::MatrixXd>& points) const;

  bool same_layout(const PolynomialBasis& other) const;

 private:
  void check_dim(Eigen::Index n) const;

  int dim_;
  int degree_;
  VariableScaling scaling_;
  std::vector<MultiIndex> indices_;
  // Monomial i (i > 0) equals monomial parent_[i] times variable var_[i].
  std::vector<int> parent_;
  std::vector<int> var_;
};

using BasisPtr = std::shared_ptr<const PolynomialBasis>;

// Coefficients of a vector-valued function on a basis: one row per basis
// function, one column per output component.
struct BasisExpansion {
  BasisPtr basis;
  Eigen::MatrixXd coeffs;

  int outputs() const { return static_cast<int>(coeffs.cols()); }
  Eigen::VectorXd evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const;
};

Eigen::VectorXd evaluate_basis(const PolynomialBasis& basis,
                               const Eigen::Ref<const Eigen::VectorXd>& x);

struct LsOptions {
  // When the design matrix is numerically rank deficient, fall back to ridge
  // regression with lambda = ridge_scale * trace(Phi^T Phi) / size instead of
  // throwing RankDeficient.
  bool ridge_fallback = true;
  double ridge_scale = 1e-9;
};

// Least-squares coefficients minimizing sum_j ||Phi(x_j) Y - a(x_j)||^2.
// `points` is dim x J, `targets` is J x q.
BasisExpansion ls_fit(BasisPtr basis,
                      const Eigen::Ref<const Eigen::MatrixXd>& points,
                      const Eigen::Ref<const Eigen::MatrixXd>& targets,
                      const LsOptions& options = {});

// ---------------------------------------------------------------------------

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>
PolynomialBasis::evaluate(const Eigen::MatrixBase<Derived>& x) const {
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> out(size());
  evaluate_into(x, out);
  return out;
}

template <typename Derived, typename OutDerived>
void PolynomialBasis::evaluate_into(
    const Eigen::MatrixBase<Derived>& x,
    Eigen::MatrixBase<OutDerived> const& out_const) const {
  using Scalar = typename Derived::Scalar;
  check_dim(x.size());
  auto& out = const_cast<Eigen::MatrixBase<OutDerived>&>(out_const);
  Scalar u[16];
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> heap;
  Scalar* vars = u;
  if (dim_ > 16) {
    heap.resize(dim_);
    vars = heap.data();
  }
  for (int m = 0; m < dim_; ++m) {
    vars[m] = scaling_.is_identity()
                  ? Scalar(x(m))
                  : Scalar((x(m) - scaling_.center(m)) / scaling_.scale(m));
  }
  out(0) = Scalar(1);
  for (int i = 1; i < size(); ++i) out(i) = out(parent_[i]) * vars[var_[i]];
}

}  // namespace lc

#endif  // LC_BASIS_HPP_
