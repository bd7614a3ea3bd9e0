#include <cmath>

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <sketchreg/sketch.hpp>

using namespace sketchreg;

namespace {

Eigen::MatrixXd identity_residual(const SketchOperator& S) {
  return S.gram() - Eigen::MatrixXd::Identity(S.rows(), S.rows());
}

// Sylvester-ordered Walsh-Hadamard matrix, built by Kronecker doubling.
Eigen::MatrixXd hadamard(Eigen::Index N) {
  Eigen::MatrixXd H = Eigen::MatrixXd::Ones(1, 1);
  while (H.rows() < N) {
    const Eigen::Index k = H.rows();
    Eigen::MatrixXd next(2 * k, 2 * k);
    next << H, H, H, -H;
    H = next;
  }
  return H;
}

}  // namespace

TEST(Sketch, KindStrings) {
  for (auto k : {SketchKind::Identity, SketchKind::HaarOrthogonal, SketchKind::SRHT, SketchKind::IIDGaussian})
    EXPECT_EQ(sketch_kind_from_string(to_string(k)), k);
  EXPECT_THROW(sketch_kind_from_string("countsketch"), std::invalid_argument);
}

TEST(Sketch, SizeChecks) {
  EXPECT_THROW(make_haar(11, 10, 1), std::invalid_argument);
  EXPECT_THROW(make_srht(0, 10, 1), std::invalid_argument);
  EXPECT_THROW(make_iid_gaussian(3, 0, 1), std::invalid_argument);
  EXPECT_THROW(make_sketch(SketchKind::Identity, 3, 4, 0), std::invalid_argument);
}

TEST(Sketch, HaarRowsAreOrthonormal) {
  for (Eigen::Index n : {1, 7, 50, 200})
    for (double psi : {0.1, 0.5, 1.0}) {
      const Eigen::Index m = std::max<Eigen::Index>(1, static_cast<Eigen::Index>(psi * n));
      const auto S = make_haar(m, n, 1234 + n);
      EXPECT_LE(identity_residual(S).cwiseAbs().maxCoeff(), 1e-10) << n << " " << m;
      EXPECT_LE(orthogonality_defect(S), 1e-10);
    }
}

TEST(Sketch, SrhtRowsAreOrthonormalForPowerOfTwo) {
  for (Eigen::Index n : {2, 16, 128, 512})
    for (Eigen::Index m : {Eigen::Index{1}, n / 2, n}) {
      const auto S = make_srht(m, n, 99 + m);
      EXPECT_LE(identity_residual(S).cwiseAbs().maxCoeff(), 1e-10) << n << " " << m;
    }
}

TEST(Sketch, SrhtFastTransformMatchesExplicitFactors) {
  const Eigen::Index n = 64, m = 20;
  const auto S = make_srht(m, n, 7);
  const auto& st = S.srht();
  ASSERT_EQ(st.padded, n);
  // S = B H D P with H normalized Hadamard, D = diag(signs), P the permutation
  // taking row permutation[i] of the input to position i, B the row sampler.
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) P(i, st.permutation[static_cast<std::size_t>(i)]) = 1.0;
  const Eigen::MatrixXd H = hadamard(n) / std::sqrt(static_cast<double>(n));
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, n);
  for (Eigen::Index r = 0; r < m; ++r) B(r, st.rows[static_cast<std::size_t>(r)]) = 1.0;
  const Eigen::MatrixXd explicit_S = B * H * st.signs.asDiagonal() * P;
  EXPECT_LE((S.dense() - explicit_S).cwiseAbs().maxCoeff(), 1e-12);

  const Eigen::MatrixXd X = gaussian_matrix(n, 5, 3);
  EXPECT_LE((S.apply(X) - explicit_S * X).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Sketch, SrhtPadsNonPowerOfTwo) {
  const auto S = make_srht(30, 100, 5);
  EXPECT_EQ(S.srht().padded, 128);
  const Eigen::MatrixXd X = gaussian_matrix(100, 4, 8);
  EXPECT_LE((S.apply(X) - S.dense() * X).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Sketch, IidMomentsMatchOneOverN) {
  const Eigen::Index m = 300, n = 400;
  const auto S = make_iid_gaussian(m, n, 2024);
  const Eigen::MatrixXd D = S.dense();
  const double N = static_cast<double>(D.size());
  const double mean = D.mean();
  const double var = (D.array() - mean).square().sum() / (N - 1.0);
  // mean has sd sqrt(1/n / N); the variance estimate has relative sd sqrt(2/N)
  EXPECT_LE(std::abs(mean), 5.0 * std::sqrt(1.0 / n / N));
  EXPECT_NEAR(var * n, 1.0, 5.0 * std::sqrt(2.0 / N));
  EXPECT_GT(orthogonality_defect(S), 1e-3);
}

TEST(Sketch, IdentityActsTrivially) {
  const auto S = make_identity(9);
  const Eigen::MatrixXd X = gaussian_matrix(9, 3, 1);
  EXPECT_EQ(S.apply(X), X);
  EXPECT_EQ(S.dense(), Eigen::MatrixXd::Identity(9, 9));
  EXPECT_DOUBLE_EQ(orthogonality_defect(S), 0.0);
}

TEST(Sketch, SeedDeterminism) {
  for (auto k : {SketchKind::HaarOrthogonal, SketchKind::SRHT, SketchKind::IIDGaussian}) {
    const auto a = make_sketch(k, 10, 32, 42), b = make_sketch(k, 10, 32, 42), c = make_sketch(k, 10, 32, 43);
    EXPECT_EQ(a.dense(), b.dense());
    EXPECT_NE(a.dense(), c.dense());
  }
}

TEST(Sketch, ApplyChecksShapes) {
  const auto S = make_haar(4, 10, 1);
  EXPECT_THROW(S.apply(Eigen::MatrixXd::Zero(9, 2)), std::invalid_argument);
  EXPECT_THROW(S.apply(Eigen::MatrixXd::Zero(10, 2), Eigen::VectorXd::Zero(9)), std::invalid_argument);
  const auto [SX, SY] = S.apply(Eigen::MatrixXd::Ones(10, 2), Eigen::VectorXd::Ones(10));
  EXPECT_EQ(SX.rows(), 4);
  EXPECT_EQ(SY.size(), 4);
  EXPECT_LE((SX.col(0) - SY).norm(), 1e-14);
}

TEST(Sketch, SpecJsonRoundTrip) {
  for (auto k : {SketchKind::HaarOrthogonal, SketchKind::SRHT, SketchKind::IIDGaussian}) {
    const auto S = make_sketch(k, 6, 16, 77);
    const auto j = sketch_spec_json(S);
    EXPECT_FALSE(j.contains("dense"));
    const auto T = sketch_from_json(j);
    EXPECT_EQ(T.kind(), k);
    EXPECT_EQ(S.dense(), T.dense());
  }
}

TEST(Sketch, HaarColumnSpreadIsUniform) {
  // For Haar rows, E[S^T S] = (m/n) I; averaged over draws the diagonal
  // concentrates at m/n.
  const Eigen::Index m = 5, n = 20;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  const int draws = 400;
  for (int d = 0; d < draws; ++d) {
    const Eigen::MatrixXd S = make_haar(m, n, 1000 + d).dense();
    acc += S.transpose() * S;
  }
  acc /= draws;
  EXPECT_LE((acc - 0.25 * Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 0.05);
}
