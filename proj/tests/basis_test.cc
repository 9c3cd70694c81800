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
#include <cmath>
#include <random>
#include <set>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace lc {
namespace {

MultiIndex Mi(std::vector<int> e) { return MultiIndex{std::move(e)}; }

TEST(MultiIndexTest, OneDimensionalDegreeTwo) {
  const auto indices = enumerate_multi_indices(1, 2);
  ASSERT_EQ(indices.size(), 3u);
  EXPECT_EQ(indices[0], Mi({0}));
  EXPECT_EQ(indices[1], Mi({1}));
  EXPECT_EQ(indices[2], Mi({2}));
}

TEST(MultiIndexTest, PaperBasisSizes) {
  EXPECT_EQ(enumerate_multi_indices(4, 2).size(), 15u);
  const auto psi = enumerate_multi_indices(4, 4);
  EXPECT_EQ(psi.size(), 70u);
  EXPECT_EQ(std::count_if(psi.begin(), psi.end(),
                          [](const MultiIndex& r) { return r.total_degree() > 0; }),
            69);
}

TEST(MultiIndexTest, CountLawExhaustive) {
  for (int m = 1; m <= 6; ++m) {
    for (int r = 0; r <= 6; ++r) {
      EXPECT_EQ(enumerate_multi_indices(m, r).size(), binomial(r + m, m))
          << "M=" << m << " R=" << r;
    }
  }
}

TEST(MultiIndexTest, GradedLexicographicOrderIsStrictAndUnique) {
  const auto indices = enumerate_multi_indices(3, 4);
  std::set<std::vector<int>> seen;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    int sum = 0;
    for (int e : indices[i].exponents) sum += e;
    EXPECT_EQ(indices[i].total_degree(), sum);
    EXPECT_TRUE(seen.insert(indices[i].exponents).second);
    if (i > 0) {
      EXPECT_LT(indices[i - 1], indices[i]);
      EXPECT_LE(indices[i - 1].total_degree(), indices[i].total_degree());
    }
  }
}

TEST(MultiIndexTest, AddIndices) {
  EXPECT_EQ(add_indices(Mi({1, 0}), Mi({0, 1})), Mi({1, 1}));
  EXPECT_EQ(add_indices(Mi({0, 0}), Mi({4, 2})), Mi({4, 2}));
  const MultiIndex sum = add_indices(Mi({2, 1}), Mi({1, 3}));
  EXPECT_EQ(sum, Mi({3, 4}));
  EXPECT_EQ(sum.total_degree(), 7);
  EXPECT_THROW(add_indices(Mi({1}), Mi({1, 2})), DimensionMismatch);
}

TEST(MultiIndexTest, AbsurdCountIsReported) {
  EXPECT_THROW(binomial(200, 100), std::overflow_error);
  EXPECT_ANY_THROW(enumerate_multi_indices(40, 40));
}

TEST(PolynomialBasisTest, Evaluate) {
  const PolynomialBasis linear(2, 1);
  EXPECT_EQ(linear.evaluate(Eigen::Vector2d(0, 0)), Eigen::Vector3d(1, 0, 0));
  const PolynomialBasis quad1(1, 2);
  EXPECT_EQ(quad1.evaluate(Eigen::Matrix<double, 1, 1>(2.0)),
            Eigen::Vector3d(1, 2, 4));
  const PolynomialBasis quad2(2, 2);
  EXPECT_EQ(quad2.evaluate(Eigen::Vector2d(1, 1)), Eigen::VectorXd::Ones(6));
  EXPECT_THROW(quad2.evaluate(Eigen::Vector3d(1, 1, 1)), DimensionMismatch);
}

TEST(PolynomialBasisTest, ZeroStateIsConstantIndicator) {
  const PolynomialBasis basis(4, 4);
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(basis.size());
  expected(0) = 1.0;
  EXPECT_EQ(basis.evaluate(Eigen::VectorXd::Zero(4)), expected);
}

TEST(PolynomialBasisTest, MatchesPowOracle) {
  const PolynomialBasis basis(3, 4);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d x(u(rng), u(rng), u(rng));
    const Eigen::VectorXd v = basis.evaluate(x);
    for (int i = 0; i < basis.size(); ++i) {
      EXPECT_NEAR(v(i), oracle::monomial(basis.indices()[i].exponents, x),
                  1e-12 * (1.0 + std::abs(v(i))));
    }
  }
}

TEST(PolynomialBasisTest, ScalingAppliesAffineMap) {
  VariableScaling scaling{Eigen::Vector2d(20, 20), Eigen::Vector2d(20, 10)};
  const PolynomialBasis scaled(2, 2, scaling);
  const PolynomialBasis plain(2, 2);
  const Eigen::Vector2d x(30, 5);
  const Eigen::Vector2d u(0.5, -1.5);
  EXPECT_TRUE(scaled.evaluate(x).isApprox(plain.evaluate(u), 1e-14));
  EXPECT_EQ(scaled.position(Mi({1, 1})), plain.position(Mi({1, 1})));
  EXPECT_FALSE(scaled.same_layout(plain));
}

TEST(PolynomialBasisTest, TemplatedOnScalar) {
  const PolynomialBasis basis(2, 2);
  const Eigen::Vector2f x(2.0f, 3.0f);
  const Eigen::VectorXf v = basis.evaluate(x);
  EXPECT_FLOAT_EQ(v(basis.position(Mi({1, 1})).value()), 6.0f);
  EXPECT_FLOAT_EQ(v(basis.position(Mi({0, 2})).value()), 9.0f);
}

TEST(LsFitTest, ConstantTarget) {
  auto basis = std::make_shared<const PolynomialBasis>(1, 0);
  Eigen::MatrixXd points(1, 3);
  points << 0.5, 1.0, 7.0;
  const BasisExpansion fit =
      ls_fit(basis, points, Eigen::VectorXd::Constant(3, 4.2));
  ASSERT_EQ(fit.coeffs.rows(), 1);
  EXPECT_NEAR(fit.coeffs(0, 0), 4.2, 1e-12);
}

TEST(LsFitTest, SquareInSpan) {
  auto basis = std::make_shared<const PolynomialBasis>(1, 2);
  Eigen::MatrixXd points(1, 5);
  points << -2, -1, 0, 1, 3;
  const Eigen::VectorXd y = points.row(0).array().square().transpose();
  const BasisExpansion fit = ls_fit(basis, points, y);
  EXPECT_NEAR(fit.coeffs(0, 0), 0.0, 1e-10);
  EXPECT_NEAR(fit.coeffs(1, 0), 0.0, 1e-10);
  EXPECT_NEAR(fit.coeffs(2, 0), 1.0, 1e-10);
  const Eigen::VectorXd residual = basis->design_matrix(points) * fit.coeffs - y;
  EXPECT_LT(residual.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LsFitTest, ExponentialMatchesNormalEquationOracle) {
  auto basis = std::make_shared<const PolynomialBasis>(1, 2);
  Eigen::MatrixXd points(1, 10);
  for (int j = 0; j < 10; ++j) points(0, j) = j / 9.0;
  const Eigen::VectorXd y = points.row(0).array().exp().transpose();
  const BasisExpansion fit = ls_fit(basis, points, y);

  Eigen::MatrixXd phi(10, 3);
  for (int j = 0; j < 10; ++j) {
    for (int i = 0; i < 3; ++i) {
      phi(j, i) = oracle::monomial(basis->indices()[i].exponents, points.col(j));
    }
  }
  const Eigen::MatrixXd expected = oracle::normal_equations(phi, y);
  EXPECT_LT((fit.coeffs - expected).cwiseAbs().maxCoeff(), 1e-9);
  const double max_residual = (phi * fit.coeffs - y).cwiseAbs().maxCoeff();
  const double oracle_residual = (phi * expected - y).cwiseAbs().maxCoeff();
  EXPECT_NEAR(max_residual, oracle_residual, 1e-9);
}

TEST(LsFitTest, RecoversGeneratingCoefficientsAndResidualIsOrthogonal) {
  auto basis = std::make_shared<const PolynomialBasis>(3, 3);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  const int count = 200;
  Eigen::MatrixXd points(3, count);
  for (int j = 0; j < count; ++j) {
    for (int m = 0; m < 3; ++m) points(m, j) = n01(rng);
  }
  Eigen::MatrixXd coeffs(basis->size(), 2);
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) coeffs.data()[i] = n01(rng);
  const Eigen::MatrixXd phi = basis->design_matrix(points);
  const BasisExpansion exact = ls_fit(basis, points, phi * coeffs);
  EXPECT_LT((exact.coeffs - coeffs).norm() / coeffs.norm(), 1e-8);

  Eigen::MatrixXd noisy = phi * coeffs;
  for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += n01(rng);
  const BasisExpansion fit = ls_fit(basis, points, noisy);
  const Eigen::MatrixXd normal = phi.transpose() * (noisy - phi * fit.coeffs);
  EXPECT_LE(normal.cwiseAbs().maxCoeff(), 1e-6 * noisy.norm());
}

TEST(LsFitTest, TooFewPoints) {
  auto basis = std::make_shared<const PolynomialBasis>(2, 2);
  EXPECT_THROW(ls_fit(basis, Eigen::MatrixXd::Zero(2, 5), Eigen::VectorXd::Zero(5)),
               TooFewPoints);
}

TEST(LsFitTest, RankDeficientFallsBackOrThrows) {
  auto basis = std::make_shared<const PolynomialBasis>(2, 1);
  // Every point on the line y = x: the columns x and y coincide.
  Eigen::MatrixXd points(2, 6);
  for (int j = 0; j < 6; ++j) points.col(j) = Eigen::Vector2d(j, j);
  const Eigen::VectorXd y = points.row(0).transpose() * 2.0 + Eigen::VectorXd::Ones(6);
  const BasisExpansion fit = ls_fit(basis, points, y);
  EXPECT_LT((basis->design_matrix(points) * fit.coeffs - y).cwiseAbs().maxCoeff(), 1e-6);
  LsOptions strict;
  strict.ridge_fallback = false;
  EXPECT_THROW(ls_fit(basis, points, y, strict), RankDeficient);
}

TEST(LsFitTest, DimensionMismatch) {
  auto basis = std::make_shared<const PolynomialBasis>(2, 1);
  EXPECT_THROW(ls_fit(basis, Eigen::MatrixXd::Zero(3, 5), Eigen::VectorXd::Zero(5)),
               DimensionMismatch);
  EXPECT_THROW(ls_fit(basis, Eigen::MatrixXd::Zero(2, 5), Eigen::VectorXd::Zero(4)),
               DimensionMismatch);
}

}  // namespace
}  // namespace lc
