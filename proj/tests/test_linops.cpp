#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "smf/linops.hpp"

using namespace smf;

namespace {

struct Case {
  LinearOperator op;
  Index in_rows;
  Index in_cols;
};

std::vector<Case> all_variants() {
  return {
      {LinearOperator(op::Identity{}), 4, 6},
      {LinearOperator(op::TemporalConv{1.3333, 0.1, 9}), 9, 5},
      {LinearOperator(op::RandomPhaseConv{6, 5, 3, 42}), 4, 30},
      {LinearOperator(op::RandomPhaseConv{4, 4, 1, 7}), 3, 16},
      {LinearOperator(op::OuterOnes{7}), 11, 1},
  };
}

double inner(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

}  // namespace

TEST(Identity, ApplyAndAdjointAreIdentity) {
  std::mt19937_64 rng(1);
  const LinearOperator I;
  const Matrix X = oracle::random_matrix(3, 4, rng);
  EXPECT_EQ(I.apply(X), X);
  EXPECT_EQ(I.adjoint(X), X);
  EXPECT_EQ(I.op_norm(), 1.0);
  EXPECT_TRUE(I.is_identity());
}

TEST(TemporalConv, FirstColumnIsGeometric) {
  const LinearOperator D(op::TemporalConv{1.0, std::log(2.0), 3});
  Matrix e = Matrix::Zero(3, 1);
  e(0, 0) = 1.0;
  const Matrix out = D.apply(e);
  EXPECT_NEAR(out(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(out(1, 0), 0.5, 1e-15);
  EXPECT_NEAR(out(2, 0), 0.25, 1e-15);
}

TEST(TemporalConv, FastDecayIsNearlyIdentity) {
  std::mt19937_64 rng(2);
  const LinearOperator D(op::TemporalConv{1e-3, 1.0, 6});
  const Matrix X = oracle::random_matrix(6, 3, rng);
  EXPECT_LE((D.apply(X) - X).norm(), 1e-12 * X.norm());
}

TEST(TemporalConv, MatchesDenseToeplitzAndTranspose) {
  for (Index frames : {1, 2, 17, 64}) {
    const double tau = 1.3333, dt = 0.1;
    const LinearOperator D(op::TemporalConv{tau, dt, frames});
    Matrix dense = Matrix::Zero(frames, frames);
    for (Index i = 0; i < frames; ++i)
      for (Index j = 0; j <= i; ++j) dense(i, j) = std::exp(-static_cast<double>(i - j) * dt / tau);
    const Matrix A = oracle::dense_of([&](const Matrix& X) { return D.apply(X); }, frames, 1);
    const Matrix At = oracle::dense_of([&](const Matrix& R) { return D.adjoint(R); }, frames, 1);
    EXPECT_LE((A - dense).norm(), 1e-12 * dense.norm());
    EXPECT_LE((At - dense.transpose()).norm(), 1e-12 * dense.norm());
  }
}

TEST(TemporalConv, TwoFrameOperatorNorm) {
  const LinearOperator D(op::TemporalConv{1.0, std::log(2.0), 2});
  Matrix M(2, 2);
  M << 1.0, 0.0, 0.5, 1.0;
  EXPECT_NEAR(D.op_norm(), oracle::sigma_max(M), 1e-10);
  EXPECT_LE(D.op_norm(), oracle::sigma_max(M) * (1 + 1e-6));
}

TEST(RandomPhaseConv, FullMaskIsIsometry) {
  std::mt19937_64 rng(3);
  for (auto [h, w] : std::vector<std::pair<Index, Index>>{{4, 4}, {5, 6}, {7, 3}, {1, 8}}) {
    const LinearOperator A(op::RandomPhaseConv{h, w, 1, 99});
    const Matrix X = oracle::random_matrix(3, h * w, rng);
    const Matrix Y = A.apply(X);
    EXPECT_NEAR(Y.norm(), X.norm(), 1e-10 * X.norm());
    EXPECT_LE((A.adjoint(Y) - X).norm(), 1e-10 * X.norm());
    EXPECT_NEAR(A.op_norm(), 1.0, 1e-9);
  }
}

TEST(RandomPhaseConv, KeepMaskIsSortedSeededAndShared) {
  const LinearOperator A(op::RandomPhaseConv{8, 8, 4, 5});
  const LinearOperator B(op::RandomPhaseConv{8, 8, 4, 5});
  const LinearOperator C(op::RandomPhaseConv{8, 8, 4, 6});
  ASSERT_EQ(A.keep_mask().size(), 16u);
  EXPECT_TRUE(std::is_sorted(A.keep_mask().begin(), A.keep_mask().end()));
  EXPECT_EQ(A.keep_mask(), B.keep_mask());
  EXPECT_NE(A.keep_mask(), C.keep_mask());
  std::mt19937_64 rng(4);
  const Matrix X = oracle::random_matrix(2, 64, rng);
  EXPECT_EQ(A.apply(X), B.apply(X));
  // Each row is sampled independently with the same operator.
  const Matrix both = A.apply(X);
  EXPECT_EQ(both.row(1), A.apply(X.row(1)));
}

TEST(RandomPhaseConv, KernelHasUnitModulusSpectrum) {
  // With the full mask the operator is a real circulant C; C^T C = I exactly
  // when every frequency has modulus one.
  const Index h = 6, w = 4;
  const LinearOperator A(op::RandomPhaseConv{h, w, 1, 11});
  const Matrix C = oracle::dense_of([&](const Matrix& X) { return A.apply(X); }, 1, h * w);
  EXPECT_LE((C.transpose() * C - Matrix::Identity(h * w, h * w)).norm(), 1e-12);
  Eigen::EigenSolver<Matrix> eig(C);
  for (Index i = 0; i < eig.eigenvalues().size(); ++i) EXPECT_NEAR(std::abs(eig.eigenvalues()[i]), 1.0, 1e-9);
}

TEST(RandomPhaseConv, RejectsBadSpecs) {
  EXPECT_THROW(LinearOperator(op::RandomPhaseConv{0, 4, 1, 0}), std::invalid_argument);
  EXPECT_THROW(LinearOperator(op::RandomPhaseConv{4, 4, 0, 0}), std::invalid_argument);
}

TEST(OuterOnes, BroadcastsAndSums) {
  const LinearOperator B(op::OuterOnes{3});
  Matrix Q(2, 1);
  Q << 1.5, -2.0;
  const Matrix out = B.apply(Q);
  ASSERT_EQ(out.rows(), 3);
  ASSERT_EQ(out.cols(), 2);
  for (Index i = 0; i < 3; ++i) {
    EXPECT_EQ(out(i, 0), 1.5);
    EXPECT_EQ(out(i, 1), -2.0);
  }
  Matrix R(3, 2);
  R << 1, 2, 3, 4, 5, 6;
  const Matrix back = B.adjoint(R);
  EXPECT_EQ(back(0, 0), 9.0);
  EXPECT_EQ(back(1, 0), 12.0);
  EXPECT_NEAR(B.op_norm(), std::sqrt(3.0), 1e-12);
}

TEST(LinearOperator, ShapeMismatchThrows) {
  std::mt19937_64 rng(5);
  EXPECT_THROW(LinearOperator(op::TemporalConv{1, 0.1, 4}).apply(oracle::random_matrix(3, 2, rng)),
               std::invalid_argument);
  EXPECT_THROW(LinearOperator(op::RandomPhaseConv{4, 4, 2, 0}).apply(oracle::random_matrix(2, 15, rng)),
               std::invalid_argument);
  EXPECT_THROW(LinearOperator(op::RandomPhaseConv{4, 4, 2, 0}).adjoint(oracle::random_matrix(2, 16, rng)),
               std::invalid_argument);
  EXPECT_THROW(LinearOperator(op::OuterOnes{4}).apply(oracle::random_matrix(3, 2, rng)), std::invalid_argument);
}

TEST(LinearOperator, AdjointConsistencyOnRandomProbes) {
  std::mt19937_64 rng(6);
  for (const auto& c : all_variants()) {
    const Matrix probe = c.op.apply(Matrix::Zero(c.in_rows, c.in_cols));
    for (int k = 0; k < 50; ++k) {
      const Matrix x = oracle::random_matrix(c.in_rows, c.in_cols, rng);
      const Matrix y = oracle::random_matrix(probe.rows(), probe.cols(), rng);
      const double lhs = inner(c.op.apply(x), y);
      const double rhs = inner(x, c.op.adjoint(y));
      EXPECT_LE(std::abs(lhs - rhs), 1e-10 * x.norm() * y.norm());
    }
  }
}

TEST(LinearOperator, OpNormMatchesDenseSvdAndIsCached) {
  for (const auto& c : all_variants()) {
    // The norm of the row-separable operators equals that of one row.
    const Index rows = std::holds_alternative<op::TemporalConv>(c.op.variant()) ? c.in_rows : 1;
    const Index cols = std::holds_alternative<op::TemporalConv>(c.op.variant()) ? 1 : c.in_cols;
    const Matrix A = oracle::dense_of([&](const Matrix& X) { return c.op.apply(X); }, rows, cols);
    const double want = oracle::sigma_max(A);
    const double got = c.op.op_norm();
    EXPECT_NEAR(got, want, 1e-8 * want);
    EXPECT_LE(got, want * (1 + 1e-6));
    EXPECT_EQ(c.op.op_norm(), got);
    // Copies share the cache.
    const LinearOperator copy = c.op;
    EXPECT_EQ(copy.op_norm(), got);
  }
}
