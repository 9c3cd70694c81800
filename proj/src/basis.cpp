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

#include "lc/basis.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lc {

int MultiIndex::total_degree() const {
  return std::accumulate(exponents.begin(), exponents.end(), 0);
}

std::strong_ordering MultiIndex::operator<=>(const MultiIndex& other) const {
  if (auto c = total_degree() <=> other.total_degree(); c != 0) return c;
  return exponents <=> other.exponents;
}

MultiIndex add_indices(const MultiIndex& lhs, const MultiIndex& rhs) {
  if (lhs.dim() != rhs.dim()) {
    throw DimensionMismatch("add_indices: dimensions " +
                            std::to_string(lhs.dim()) + " and " +
                            std::to_string(rhs.dim()));
  }
  MultiIndex sum = lhs;
  for (int m = 0; m < lhs.dim(); ++m) sum.exponents[m] += rhs.exponents[m];
  return sum;
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (int i = 1; i <= k; ++i) {
    // result * (n - k + i) / i is exact at every step.
    const std::uint64_t factor = static_cast<std::uint64_t>(n - k + i);
    if (result > std::numeric_limits<std::uint64_t>::max() / factor) {
      throw std::overflow_error("binomial(" + std::to_string(n) + ", " +
                                std::to_string(k) + ") overflows");
    }
    result = result * factor / static_cast<std::uint64_t>(i);
  }
  return result;
}

namespace {

// Below this reciprocal condition number of Phi^T Phi the fit switches to a
// pivoted QR of Phi itself.
constexpr double kGramRcondFloor = 1e-9;

void enumerate_recursive(int dim, int remaining, std::vector<int>& current,
                         std::vector<MultiIndex>& out) {
  const int m = static_cast<int>(current.size());
  if (m == dim) {
    out.push_back(MultiIndex{current});
    return;
  }
  for (int e = 0; e <= remaining; ++e) {
    current.push_back(e);
    enumerate_recursive(dim, remaining - e, current, out);
    current.pop_back();
  }
}

}  // namespace

std::vector<MultiIndex> enumerate_multi_indices(int dim, int degree) {
  if (dim < 1 || degree < 0) {
    throw std::invalid_argument("enumerate_multi_indices: need dim >= 1, "
                                "degree >= 0");
  }
  const std::uint64_t count = binomial(degree + dim, dim);
  if (count > (std::uint64_t{1} << 26)) {
    throw std::overflow_error("enumerate_multi_indices: " +
                              std::to_string(count) + " indices requested");
  }
  std::vector<MultiIndex> out;
  out.reserve(count);
  std::vector<int> current;
  current.reserve(dim);
  enumerate_recursive(dim, degree, current, out);
  std::sort(out.begin(), out.end());
  return out;
}

PolynomialBasis::PolynomialBasis(int dim, int degree, VariableScaling scaling)
    : dim_(dim),
      degree_(degree),
      scaling_(std::move(scaling)),
      indices_(enumerate_multi_indices(dim, degree)) {
  if (!scaling_.is_identity() &&
      (scaling_.center.size() != dim || scaling_.scale.size() != dim)) {
    throw DimensionMismatch("PolynomialBasis: scaling has wrong dimension");
  }
  parent_.assign(indices_.size(), 0);
  var_.assign(indices_.size(), 0);
  for (int i = 1; i < size(); ++i) {
    MultiIndex reduced = indices_[i];
    int m = 0;
    while (reduced.exponents[m] == 0) ++m;
    --reduced.exponents[m];
    // The reduced index has lower total degree, so it precedes i.
    const auto it =
        std::lower_bound(indices_.begin(), indices_.begin() + i, reduced);
    parent_[i] = static_cast<int>(it - indices_.begin());
    var_[i] = m;
  }
}

std::optional<int> PolynomialBasis::position(const MultiIndex& index) const {
  if (index.dim() != dim_) return std::nullopt;
  const auto it = std::lower_bound(indices_.begin(), indices_.end(), index);
  if (it == indices_.end() || *it != index) return std::nullopt;
  return static_cast<int>(it - indices_.begin());
}

void PolynomialBasis::check_dim(Eigen::Index n) const {
  if (n != dim_) {
    throw DimensionMismatch("basis over " + std::to_string(dim_) +
                            " variables evaluated at a point of dimension " +
                            std::to_string(n));
  }
}

Eigen::MatrixXd PolynomialBasis::design_matrix(
    const Eigen::Ref<const Eigen::MatrixXd>& points) const {
  check_dim(points.rows());
  Eigen::MatrixXd phi(size(), points.cols());
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    evaluate_into(points.col(j), phi.col(j));
  }
  return phi.transpose();
}

bool PolynomialBasis::same_layout(const PolynomialBasis& other) const {
  if (dim_ != other.dim_ || degree_ != other.degree_) return false;
  if (scaling_.is_identity() != other.scaling_.is_identity()) return false;
  if (scaling_.is_identity()) return true;
  return scaling_.center == other.scaling_.center &&
         scaling_.scale == other.scaling_.scale;
}

Eigen::VectorXd BasisExpansion::evaluate(
    const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return coeffs.transpose() * basis->evaluate(x);
}

Eigen::VectorXd evaluate_basis(const PolynomialBasis& basis,
                               const Eigen::Ref<const Eigen::VectorXd>& x) {
  return basis.evaluate(x);
}

BasisExpansion ls_fit(BasisPtr basis,
                      const Eigen::Ref<const Eigen::MatrixXd>& points,
                      const Eigen::Ref<const Eigen::MatrixXd>& targets,
                      const LsOptions& options) {
  const Eigen::Index n_points = points.cols();
  const int n_basis = basis->size();
  if (targets.rows() != n_points) {
    throw DimensionMismatch("ls_fit: " + std::to_string(n_points) +
                            " points but " + std::to_string(targets.rows()) +
                            " target rows");
  }
  if (n_points < n_basis) {
    throw TooFewPoints("ls_fit: " + std::to_string(n_points) +
                       " points for " + std::to_string(n_basis) +
                       " basis functions");
  }
  const Eigen::MatrixXd phi = basis->design_matrix(points);
  // Normal equations are much cheaper for tall designs; they are accurate
  // enough whenever the Gram matrix is well conditioned.
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n_basis, n_basis);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(phi.transpose());
  gram = gram.selfadjointView<Eigen::Lower>();
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() == Eigen::Success && llt.rcond() > kGramRcondFloor) {
    return {std::move(basis), llt.solve(phi.transpose() * targets)};
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
  if (qr.rank() == n_basis) return {std::move(basis), qr.solve(targets)};

  if (!options.ridge_fallback) {
    throw RankDeficient("ls_fit: design matrix rank " +
                        std::to_string(qr.rank()) + " < " +
                        std::to_string(n_basis));
  }
  const double lambda = options.ridge_scale * gram.trace() / n_basis;
  gram.diagonal().array() += lambda > 0.0 ? lambda : options.ridge_scale;
  Eigen::MatrixXd coeffs = gram.ldlt().solve(phi.transpose() * targets);
  return {std::move(basis), std::move(coeffs)};
}

}  // namespace lc
