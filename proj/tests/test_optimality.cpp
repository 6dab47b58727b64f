#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "smf/optimality.hpp"

using namespace smf;

namespace {

ProblemSpec nuclear_problem(Index m, Index n, double lambda, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return ProblemSpec(oracle::random_matrix(m, n, rng), LinearOperator(), std::nullopt,
                     Rank1Regularizer::nuclear(), lambda);
}

Rank1Regularizer l1l2_reg(double a1, double a2, double b1, double b2) {
  return Rank1Regularizer(RegularizerForm::Product, GaugeSpec(a1, 0.0, a2), GaugeSpec(b1, 0.0, b2));
}

// Polar of a 2x2 matrix by brute force over both unit circles.
double polar_by_grid(const Matrix& Z, const Rank1Regularizer& reg, int steps) {
  double best = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double a = 2.0 * std::numbers::pi * i / steps;
    Vector u(2);
    u << std::cos(a), std::sin(a);
    u /= eval_gauge(reg.u_gauge(), u);
    const Vector Zu = Z.transpose() * u;
    for (int j = 0; j < steps; ++j) {
      const double b = 2.0 * std::numbers::pi * j / steps;
      Vector v(2);
      v << std::cos(b), std::sin(b);
      best = std::max(best, Zu.dot(v) / eval_gauge(reg.v_gauge(), v));
    }
  }
  return best;
}

MetaConfig meta_cfg() {
  MetaConfig cfg;
  cfg.solver.init = init::UniformRandom{1};
  cfg.solver.tol_rel_obj = 1e-12;
  cfg.solver.max_iter = 20000;
  return cfg;
}

}  // namespace

TEST(PolarExact, L2L2Examples) {
  Matrix Z(2, 2);
  Z << 3, 0, 0, -5;
  const PolarEstimate e = polar_exact_l2l2(Z);
  EXPECT_TRUE(e.exact);
  EXPECT_NEAR(e.value, 5.0, 1e-12);
  EXPECT_NEAR(e.u.norm(), 1.0, 1e-12);
  EXPECT_NEAR(e.u.dot(Z * e.v), 5.0, 1e-12);
  const PolarEstimate zero = polar_exact_l2l2(Matrix::Zero(3, 2));
  EXPECT_EQ(zero.value, 0.0);
  EXPECT_EQ(zero.u.size(), 3);
}

TEST(PolarExact, L2L2MatchesSvd) {
  std::mt19937_64 rng(1);
  for (Index m : {1, 3, 10, 50}) {
    for (Index n : {1, 7, 50}) {
      const Matrix Z = oracle::random_matrix(m, n, rng);
      const double want = oracle::sigma_max(Z);
      const PolarEstimate e = polar_exact_l2l2(Z);
      EXPECT_NEAR(e.value, want, 1e-8 * want) << m << "x" << n;
    }
  }
}

TEST(PolarExact, L1L1IsLargestEntry) {
  Matrix Z(2, 3);
  Z << 1, -7, 2, 3, 0, -4;
  const PolarEstimate e = polar_exact_l1l1(Z);
  EXPECT_EQ(e.value, 7.0);
  EXPECT_EQ(e.u, (Vector(2) << 1, 0).finished());
  EXPECT_EQ(e.v, (Vector(3) << 0, -1, 0).finished());
  EXPECT_EQ(e.u.dot(Z * e.v), 7.0);
}

TEST(Polar, WeightedExactGauges) {
  std::mt19937_64 rng(2);
  const Matrix Z = oracle::random_matrix(4, 5, rng);
  Rank1Regularizer l2(RegularizerForm::Product, GaugeSpec::l2(2.0), GaugeSpec::l2(0.5));
  const PolarEstimate a = polar(Z, l2, 1, 0);
  EXPECT_TRUE(a.exact);
  EXPECT_NEAR(a.value, oracle::sigma_max(Z), 1e-9);
  EXPECT_NEAR(eval_theta(l2, a.u, a.v), 1.0, 1e-9);
  Rank1Regularizer l1(RegularizerForm::Sum, GaugeSpec::l1(3.0), GaugeSpec::l1(1.0));
  const PolarEstimate b = polar(Z, l1, 1, 0);
  EXPECT_TRUE(b.exact);
  EXPECT_NEAR(b.value, Z.cwiseAbs().maxCoeff() / 3.0, 1e-12);
}

TEST(PolarLowerBound, ReturnsAFeasibleWitness) {
  std::mt19937_64 rng(3);
  auto graph = std::make_shared<const NeighborGraph>(NeighborGraph::chain(6));
  Rank1Regularizer reg(RegularizerForm::Product, GaugeSpec(1.0, 0.0, 1.0, true),
                       GaugeSpec(0.5, 1.0, 1.0, false, graph));
  for (int k = 0; k < 10; ++k) {
    const Matrix Z = oracle::random_matrix(5, 6, rng);
    const PolarEstimate e = polar(Z, reg, 8, k);
    EXPECT_FALSE(e.exact);
    ASSERT_GT(e.value, 0.0);
    EXPECT_GE(e.u.minCoeff(), 0.0);
    EXPECT_NEAR(eval_theta(reg, e.u, e.v), 1.0, 1e-9);
    EXPECT_NEAR(e.u.dot(Z * e.v), e.value, 1e-9 * e.value);
    // sigma >= nu2 |x|_2 gives an upper bound on the polar.
    EXPECT_LE(e.value, oracle::sigma_max(Z) / (1.0 * 1.0) + 1e-12);
  }
}

TEST(PolarLowerBound, AgreesWithExactOnL2Pairs) {
  std::mt19937_64 rng(4);
  const auto reg = Rank1Regularizer::nuclear();
  for (int k = 0; k < 5; ++k) {
    const Matrix Z = oracle::random_matrix(6, 4, rng);
    const double lb = polar_lower_bound(Z, reg, 3, k).value;
    const double ex = polar_exact_l2l2(Z).value;
    EXPECT_LE(lb, ex * (1 + 1e-12));
    EXPECT_GE(lb, ex * (1 - 1e-6));
  }
  EXPECT_THROW(polar_lower_bound(Matrix::Ones(2, 2), reg, 0, 0), std::invalid_argument);
}

TEST(PolarLowerBound, MatchesBruteForceOnTwoByTwo) {
  std::mt19937_64 rng(5);
  const auto reg = l1l2_reg(1.0, 0.7, 0.4, 1.0);
  for (int k = 0; k < 8; ++k) {
    const Matrix Z = oracle::random_matrix(2, 2, rng);
    const double grid = polar_by_grid(Z, reg, 1500);
    const double lb = polar(Z, reg, 10, k).value;
    EXPECT_GE(lb, grid * (1 - 1e-5));
    EXPECT_LE(lb, grid * (1 + 1e-4));
  }
}

TEST(Certificate, SvtSolutionIsCertified) {
  const auto p = nuclear_problem(10, 8, 1.5, 6);
  MetaConfig cfg = meta_cfg();
  cfg.solver.init = init::UniformRandom{8};
  const SolveResult r = run(p, cfg.solver);
  const CertificateReport c = check_certificate(p, r.model, 5, 0);
  EXPECT_EQ(c.status, CertificateStatus::Certified);
  EXPECT_TRUE(c.polar.exact);
  EXPECT_LE(c.polar.value, 1.0 + 1e-3);
  for (double res : c.cond_scaling_residuals) EXPECT_LE(res, 1e-5);
  EXPECT_GE(c.gap_bound, c.objective - oracle::svt_objective(p.Y, p.lambda) - 1e-9);
  EXPECT_NEAR(c.objective, objective(p, r.model), 0.0);
  EXPECT_EQ(to_string(c.status), "certified");
}

TEST(Certificate, ZeroModel) {
  for (double lambda : {0.5, 1.0, 2.0, 8.0}) {
    const auto p = nuclear_problem(6, 5, lambda, 7);
    const FactorModel zero{Matrix::Zero(6, 1), Matrix::Zero(5, 1), std::nullopt};
    const CertificateReport c = check_certificate(p, zero, 3, 0);
    const double smax = oracle::sigma_max(p.Y);
    EXPECT_NEAR(c.polar.value, smax / lambda, 1e-8 * smax / lambda);
    EXPECT_EQ(c.status, smax <= lambda ? CertificateStatus::Certified : CertificateStatus::Rejected);
    const double f = 0.5 * p.Y.squaredNorm();
    EXPECT_NEAR(c.gap_bound, f * std::max(0.0, smax / lambda - 1.0), 1e-8 * f);
    EXPECT_GE(c.gap_bound, f - oracle::svt_objective(p.Y, lambda) - 1e-9);
  }
}

TEST(Certificate, GapBoundDominatesSuboptimalityAtStationaryPoints) {
  // Rank-limited runs stop at stationary points that are not global minima.
  for (std::uint64_t seed : {8, 9, 10}) {
    const auto p = nuclear_problem(7, 6, 0.6, seed);
    for (Index r : {1, 2}) {
      SolverConfig cfg;
      cfg.init = init::UniformRandom{r};
      cfg.tol_rel_obj = 1e-13;
      cfg.max_iter = 20000;
      const SolveResult s = run(p, cfg);
      const CertificateReport c = check_certificate(p, s.model, 3, 0);
      const double fstar = oracle::svt_objective(p.Y, p.lambda);
      EXPECT_GE(c.gap_bound, (c.objective - fstar) * (1 - 1e-6)) << seed << " " << r;
      EXPECT_EQ(c.status, CertificateStatus::Rejected);
    }
  }
}

TEST(Certificate, InexactPolarGivesInfiniteGapBound) {
  std::mt19937_64 rng(11);
  auto graph = std::make_shared<const NeighborGraph>(NeighborGraph::chain(4));
  Rank1Regularizer reg(RegularizerForm::Product, GaugeSpec::l2(), GaugeSpec(0.0, 1.0, 1.0, false, graph));
  ProblemSpec p(oracle::random_matrix(3, 4, rng), LinearOperator(), std::nullopt, reg, 100.0);
  const FactorModel zero{Matrix::Zero(3, 1), Matrix::Zero(4, 1), std::nullopt};
  const CertificateReport c = check_certificate(p, zero, 4, 0);
  EXPECT_FALSE(c.polar.exact);
  EXPECT_TRUE(std::isinf(c.gap_bound));
  EXPECT_EQ(c.status, CertificateStatus::NotGloballyCertified);
}

TEST(Certificate, BackgroundConditionAndScalingResidual) {
  std::mt19937_64 rng(12);
  ProblemSpec p(oracle::random_matrix(4, 3, rng), LinearOperator(), LinearOperator(op::OuterOnes{4}),
                Rank1Regularizer::nuclear(), 100.0);
  FactorModel m{Matrix::Zero(4, 1), Matrix::Zero(3, 1), Matrix::Zero(3, 1)};
  CertificateReport c = check_certificate(p, m, 2, 0);
  EXPECT_NEAR(c.cond_q_residual, p.Y.colwise().sum().norm(), 1e-12);
  EXPECT_EQ(c.status, CertificateStatus::Rejected);
  // The optimal background is the column mean.
  m.Q = p.Y.colwise().mean().transpose();
  c = check_certificate(p, m, 2, 0);
  EXPECT_LE(c.cond_q_residual, 1e-12);
  EXPECT_EQ(c.status, CertificateStatus::Certified);

  // A nonzero column with the wrong scale fails the scaling condition.
  FactorModel big{Matrix::Zero(4, 1), Matrix::Zero(3, 1), m.Q};
  big.U(0, 0) = 1.0;
  big.V(0, 0) = 1.0;
  c = check_certificate(p, big, 2, 0);
  ASSERT_EQ(c.cond_scaling_residuals.size(), 1u);
  EXPECT_GT(c.cond_scaling_residuals[0], 1e-3);
  EXPECT_EQ(c.status, CertificateStatus::Rejected);
  EXPECT_EQ(c.m_X, 0.0);
}

TEST(FindRedundancy, Examples) {
  std::mt19937_64 rng(13);
  FactorModel one{oracle::random_matrix(3, 1, rng), oracle::random_matrix(3, 1, rng), std::nullopt};
  EXPECT_FALSE(find_redundancy(one).has_value());

  FactorModel indep{Matrix::Identity(3, 2), Matrix::Identity(3, 2), std::nullopt};
  EXPECT_FALSE(find_redundancy(indep).has_value());

  FactorModel dup = one;
  dup.U.conservativeResize(Eigen::NoChange, 2);
  dup.V.conservativeResize(Eigen::NoChange, 2);
  dup.U.col(1) = 2.0 * dup.U.col(0);
  dup.V.col(1) = -dup.V.col(0);
  const auto beta = find_redundancy(dup);
  ASSERT_TRUE(beta.has_value());
  EXPECT_NEAR(beta->minCoeff(), -1.0, 1e-12);
  Matrix combo = Matrix::Zero(3, 3);
  for (Index i = 0; i < 2; ++i) combo += (*beta)[i] * dup.U.col(i) * dup.V.col(i).transpose();
  EXPECT_LE(combo.norm(), 1e-10);
}

TEST(FindRedundancy, AlwaysFoundBeyondDimension) {
  std::mt19937_64 rng(14);
  for (int k = 0; k < 20; ++k) {
    FactorModel m{oracle::random_matrix(2, 5, rng), oracle::random_matrix(2, 5, rng), std::nullopt};
    const auto beta = find_redundancy(m);
    ASSERT_TRUE(beta.has_value());
    EXPECT_NEAR(beta->minCoeff(), -1.0, 1e-12);
    Matrix combo = Matrix::Zero(2, 2);
    for (Index i = 0; i < 5; ++i) combo += (*beta)[i] * m.U.col(i) * m.V.col(i).transpose();
    EXPECT_LE(combo.norm(), 1e-8 * m.product().norm() + 1e-12);
  }
}

TEST(MetaStep, CertifyStopWhenZeroColumnAndSmallPolar) {
  const auto p = nuclear_problem(4, 4, 50.0, 15);
  const FactorModel zero{Matrix::Zero(4, 1), Matrix::Zero(4, 1), std::nullopt};
  const MetaStepResult r = meta_step(p, zero, MetaConfig{});
  EXPECT_EQ(r.action, MetaAction::CertifyStop);
  EXPECT_EQ(r.model.rank(), 1);
  EXPECT_EQ(r.objective_after, r.objective_before);
}

TEST(MetaStep, EscapesIntoZeroColumn) {
  const auto p = nuclear_problem(4, 4, 0.2, 16);
  const FactorModel zero{Matrix::Zero(4, 2), Matrix::Zero(4, 2), std::nullopt};
  const MetaStepResult r = meta_step(p, zero, MetaConfig{});
  EXPECT_EQ(r.action, MetaAction::Escaped);
  EXPECT_EQ(r.model.rank(), 2);
  EXPECT_LT(r.objective_after, r.objective_before);
  EXPECT_NEAR(r.objective_after, objective(p, r.model), 1e-12);
  EXPECT_GT(r.tau, 0.0);
  EXPECT_FALSE(r.model.U.col(0).isZero(0.0));
  EXPECT_TRUE(r.model.U.col(1).isZero(0.0));
}

TEST(MetaStep, RescalesRedundantColumns) {
  const auto p = nuclear_problem(3, 3, 0.5, 17);
  std::mt19937_64 rng(18);
  FactorModel m{oracle::random_matrix(3, 2, rng), oracle::random_matrix(3, 2, rng), std::nullopt};
  m.U.col(1) = 3.0 * m.U.col(0);
  m.V.col(1) = 0.5 * m.V.col(0);
  const MetaStepResult r = meta_step(p, m, MetaConfig{});
  EXPECT_EQ(r.action, MetaAction::Rescaled);
  EXPECT_LE(r.objective_after, r.objective_before);
  const bool zeroed = r.model.U.col(0).isZero(1e-12) || r.model.U.col(1).isZero(1e-12);
  EXPECT_TRUE(zeroed);
  // Parallel columns of the same sign: the product is preserved.
  EXPECT_LE((r.model.product() - m.product()).norm(), 1e-10 * m.product().norm());
}

TEST(MetaStep, AppendsWhenNoSlotIsFree) {
  const auto p = nuclear_problem(5, 5, 0.2, 19);
  const FactorModel m{Matrix::Identity(5, 1), Matrix::Identity(5, 1) * 1e-3, std::nullopt};
  const MetaStepResult r = meta_step(p, m, MetaConfig{});
  EXPECT_EQ(r.action, MetaAction::AppendedEscape);
  EXPECT_EQ(r.model.rank(), 2);
  EXPECT_LT(r.objective_after, r.objective_before);

  const auto big = nuclear_problem(5, 5, 100.0, 19);
  const MetaStepResult s = meta_step(big, m, MetaConfig{});
  EXPECT_EQ(s.action, MetaAction::CertifyStop);
  EXPECT_EQ(s.model.rank(), 2);
  EXPECT_TRUE(s.model.U.col(1).isZero(0.0));
}

TEST(MetaStep, ReportsLineSearchFailure) {
  // At the zero model both factors scale with tau, so f decreases only for
  // tau^2 < 2 (sigma1 - lambda).
  const auto base = nuclear_problem(4, 4, 1.0, 20);
  const double s1 = oracle::sigma_max(base.Y);
  const ProblemSpec p(base.Y, LinearOperator(), std::nullopt, Rank1Regularizer::nuclear(), s1 - 0.1);
  const FactorModel zero{Matrix::Zero(4, 1), Matrix::Zero(4, 1), std::nullopt};
  MetaConfig cfg;
  cfg.max_halvings = 0;
  EXPECT_EQ(meta_step(p, zero, cfg).action, MetaAction::LineSearchFailed);
  cfg.max_halvings = 2;
  const MetaStepResult ok = meta_step(p, zero, cfg);
  EXPECT_EQ(ok.action, MetaAction::Escaped);
  EXPECT_EQ(ok.tau, 0.25);
  EXPECT_EQ(to_string(MetaAction::LineSearchFailed), "line-search-failed");
}

TEST(RunMeta, ReachesTheConvexOptimumFromRankOne) {
  for (std::uint64_t seed : {21, 22}) {
    const auto p = nuclear_problem(8, 7, 1.2, seed);
    const MetaResult r = run_meta(p, meta_cfg());
    const double fstar = oracle::svt_objective(p.Y, p.lambda);
    EXPECT_NEAR(objective(p, r.model), fstar, 1e-8 * fstar);
    EXPECT_EQ(r.certificate.status, CertificateStatus::Certified);
    EXPECT_FALSE(r.cap_reached);
    EXPECT_EQ(r.history.back().action, MetaAction::CertifyStop);
    EXPECT_LE(r.model.rank(), 8 * 7 + 1);
    for (std::size_t k = 1; k < r.objective_history.size(); ++k) {
      EXPECT_LE(r.objective_history[k], r.objective_history[k - 1] * (1 + 1e-12));
    }
  }
}

TEST(RunMeta, RoundCapAndValidation) {
  const auto p = nuclear_problem(6, 6, 0.3, 23);
  MetaConfig cfg = meta_cfg();
  cfg.max_rounds = 1;
  const MetaResult r = run_meta(p, cfg);
  EXPECT_TRUE(r.cap_reached);
  EXPECT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.objective_history.size(), 2u);
  cfg.max_rounds = 0;
  EXPECT_THROW(run_meta(p, cfg), std::invalid_argument);
}

TEST(RunMeta, NonnegativeFactorizationIsNotGloballyCertified) {
  std::mt19937_64 rng(24);
  Matrix Y = oracle::random_matrix(5, 6, rng).cwiseAbs();
  Rank1Regularizer reg(RegularizerForm::Product, GaugeSpec(0.5, 0.0, 1.0, true), GaugeSpec(0.5, 0.0, 1.0, true));
  ProblemSpec p(Y, LinearOperator(), std::nullopt, reg, 0.5);
  MetaConfig cfg = meta_cfg();
  cfg.solver.tol_rel_obj = 1e-10;
  const MetaResult r = run_meta(p, cfg);
  EXPECT_GE(r.model.U.minCoeff(), 0.0);
  EXPECT_GE(r.model.V.minCoeff(), 0.0);
  EXPECT_NE(r.certificate.status, CertificateStatus::Certified);
  EXPECT_TRUE(std::isinf(r.certificate.gap_bound));
  for (std::size_t k = 1; k < r.objective_history.size(); ++k) {
    EXPECT_LE(r.objective_history[k], r.objective_history[k - 1] * (1 + 1e-12));
  }
}
