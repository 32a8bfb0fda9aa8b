#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace shockcast;
using testing_support::Rng;

namespace {

using Rows = std::vector<std::vector<double>>;

PcaBasis fit(const Rows& rows, std::size_t d_prime) { return fit_pca(std::span<const std::vector<double>>(rows), d_prime); }

}  // namespace

TEST(FitPca, VarianceAlongFirstAxis) {
  const Rows rows = {{4, 0}, {-4, 0}, {0, 1}, {0, -1}};
  const auto b = fit(rows, 1);
  EXPECT_NEAR(b.components(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(b.components(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(b.explained_variance[0], 32.0 / 3.0, 1e-12);
  EXPECT_EQ(b.fitted_on, 4u);
}

TEST(FitPca, SignIsCanonicalUnderInputNegation) {
  const Rows rows = {{-4, 0}, {4, 0}, {0, -1}, {0, 1}};
  EXPECT_GT(fit(rows, 1).components(0, 0), 0.0);
}

TEST(FitPca, Errors) {
  EXPECT_THROW(fit({{1, 2}, {1, 2}, {1, 2}}, 1), RankError);
  EXPECT_THROW(fit({{1, 2}}, 1), InsufficientDataError);
  EXPECT_THROW(fit({{1, 2}, {3, 4}}, 2), ValidationError);  // rank at most rows - 1
  EXPECT_THROW(fit({{1, 2}, {3, 4}}, 0), ValidationError);
  EXPECT_THROW(fit({{1, 2}, {3}}, 1), ContractError);
  // Collinear rows cannot supply a second direction.
  EXPECT_THROW(fit({{1, 1}, {2, 2}, {3, 3}, {5, 5}}, 2), RankError);
}

TEST(FitPca, MatchesEigenOracle) {
  Rng rng(5);
  const Rows rows = testing_support::random_rows(rng, 50, 8, {5, 4, 3, 2, 1, 0.5, 0.25, 0.1});
  const auto b = fit(rows, 3);
  const auto o = testing_support::oracle_pca(rows);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(b.explained_variance[c], o.eigenvalues(static_cast<Eigen::Index>(c)), 1e-9);
    double dot = 0;
    for (std::size_t r = 0; r < 8; ++r) dot += b.components(r, c) * o.eigenvectors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    EXPECT_NEAR(std::abs(dot), 1.0, 1e-9);
  }
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(b.mean[j], o.mean(static_cast<Eigen::Index>(j)), 1e-12);
}

TEST(Transform, MeanMapsToZeroAndAxesToUnitVectors) {
  Rng rng(8);
  const Rows rows = testing_support::random_rows(rng, 30, 5, {3, 2, 1, 1, 1});
  const auto b = fit(rows, 2);
  for (double x : transform(b, b.mean)) EXPECT_NEAR(x, 0.0, 1e-12);
  Vector e = b.mean;
  for (std::size_t j = 0; j < 5; ++j) e[j] += b.components(j, 0);
  const auto z = transform(b, e);
  EXPECT_NEAR(z[0], 1.0, 1e-12);
  EXPECT_NEAR(z[1], 0.0, 1e-12);
  EXPECT_THROW(transform(b, Vector(4, 0.0)), ContractError);
}

TEST(PcaProperty, OrthonormalDescendingAndVarianceMatches) {
  Rng rng(42);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t d = 1 + rng() % 6;
    const std::size_t n = d + 2 + rng() % 20;
    std::vector<double> scales(d);
    for (auto& s : scales) s = 0.2 + static_cast<double>(rng() % 50) / 10.0;
    const Rows rows = testing_support::random_rows(rng, n, d, scales);
    const std::size_t dp = 1 + rng() % d;
    const auto b = fit(rows, dp);
    ASSERT_EQ(b.components.rows(), d);
    ASSERT_EQ(b.components.cols(), dp);
    const Eigen::MatrixXd w = testing_support::to_eigen(b.components);
    EXPECT_LT((w.transpose() * w - Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dp), static_cast<Eigen::Index>(dp))).cwiseAbs().maxCoeff(), 1e-10);
    for (std::size_t c = 1; c < dp; ++c) EXPECT_GE(b.explained_variance[c - 1], b.explained_variance[c]);

    // The variance of projected training rows equals the reported explained variance.
    const auto z = transform_rows(b, rows);
    for (std::size_t c = 0; c < dp; ++c) {
      double m = 0, ss = 0;
      for (const auto& r : z) m += r[c];
      m /= static_cast<double>(n);
      for (const auto& r : z) ss += (r[c] - m) * (r[c] - m);
      EXPECT_NEAR(m, 0.0, 1e-9);
      EXPECT_NEAR(ss / static_cast<double>(n - 1), b.explained_variance[c], 1e-8 * (1 + b.explained_variance[c]));
    }

    // W Wᵀ is an orthogonal projector.
    const Eigen::MatrixXd p = w * w.transpose();
    EXPECT_LT((p * p - p).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((p - p.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PcaProperty, FitOnlySeesTrainingRows) {
  Rng rng(1);
  Rows train = testing_support::random_rows(rng, 20, 4);
  const auto before = fit(train, 2);
  Rows test = testing_support::random_rows(rng, 5, 4, {100, 100, 100, 100});
  const auto again = fit(train, 2);
  EXPECT_EQ(before, again);
  train.insert(train.end(), test.begin(), test.end());
  EXPECT_NE(fit(train, 2), before);
}

TEST(JacobiEigen, DiagonalizesSymmetricMatrix) {
  Matrix a(3, 3);
  const double v[3][3] = {{2, -1, 0}, {-1, 2, -1}, {0, -1, 2}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) a(i, j) = v[i][j];
  const auto e = jacobi_eigen(a);
  EXPECT_NEAR(e.values[0], 2 + std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(e.values[1], 2.0, 1e-12);
  EXPECT_NEAR(e.values[2], 2 - std::sqrt(2.0), 1e-12);
  EXPECT_THROW(jacobi_eigen(Matrix(2, 3)), ContractError);
}
