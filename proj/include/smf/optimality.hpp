#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smf/regularizers.hpp"
#include "smf/solver.hpp"
#include "smf/types.hpp"

namespace smf {

/// Estimate of sup u^T Z v over theta(u, v) <= 1. The returned pair is
/// scaled to theta(u, v) = 1 (unless the value is 0).
struct PolarEstimate {
  double value = 0.0;
  Vector u;
  Vector v;
  bool exact = false;
  int restarts_used = 0;
};

/// sigma_max(Z) by power iteration on Z^T Z.
PolarEstimate polar_exact_l2l2(const Matrix& Z);
/// max |Z_ij| with a signed pair of standard basis vectors.
PolarEstimate polar_exact_l1l1(const Matrix& Z);
/// Multi-start projected ascent; a lower bound on the polar for any gauge
/// pair. Restart 0 is seeded from the top singular pair, the others randomly.
PolarEstimate polar_lower_bound(const Matrix& Z, const Rank1Regularizer& reg, int restarts,
                                std::uint64_t seed);
/// Exact value for weighted pure-l2 or pure-l1 gauge pairs, otherwise the
/// lower bound.
PolarEstimate polar(const Matrix& Z, const Rank1Regularizer& reg, int restarts, std::uint64_t seed);

enum class CertificateStatus {
  Certified,             // exact polar <= 1 and conditions 1-2 hold
  Rejected,              // some condition fails (or a polar estimate > 1)
  NotGloballyCertified,  // conditions 1-2 hold, polar is only a lower bound <= 1
};

std::string to_string(CertificateStatus s);

struct CertificateTolerances {
  double residual_tol = 1e-5;
  double polar_tol = 1e-3;
};

struct CertificateReport {
  double cond_q_residual = 0.0;
  std::vector<double> cond_scaling_residuals;
  PolarEstimate polar;
  /// f(m) * max(polar - 1, 0) for an exact polar, +inf otherwise.
  double gap_bound = 0.0;
  double m_X = 0.0;
  double m_Q = 0.0;
  double objective = 0.0;
  CertificateStatus status = CertificateStatus::Rejected;
};

/// Z = -(1/lambda) grad_X loss at the model.
Matrix polar_argument(const ProblemSpec& p, const FactorModel& m);

CertificateReport check_certificate(const ProblemSpec& p, const FactorModel& m, int restarts,
                                    std::uint64_t seed, double m_X = 0.0, double m_Q = 0.0,
                                    const CertificateTolerances& tol = {});

/// Null combination beta with sum_i beta_i U_i V_i^T = 0, scaled so that
/// min_i beta_i = -1. Found from the Gram matrix of the column outer products.
std::optional<Vector> find_redundancy(const FactorModel& m);

enum class MetaAction {
  CertifyStop,       // a zero column exists and the polar estimate is <= 1 + tol
  Rescaled,          // redundant columns rescaled, producing a zero column
  Escaped,           // a zero column slot was filled with a descent pair
  AppendedEscape,    // a new column was appended and filled with a descent pair
  LineSearchFailed,  // polar estimate > 1 but no decrease found (estimate may be spurious)
};

std::string to_string(MetaAction a);

struct MetaConfig {
  SolverConfig solver;
  int max_rounds = 20;
  int polar_restarts = 20;
  std::uint64_t seed = 0;
  double polar_tol = 1e-6;
  double zero_tol = 1e-10;
  int max_halvings = 50;
};

struct MetaStepResult {
  FactorModel model;
  MetaAction action = MetaAction::CertifyStop;
  double objective_before = 0.0;
  double objective_after = 0.0;
  PolarEstimate polar;
  double tau = 0.0;
};

MetaStepResult meta_step(const ProblemSpec& p, const FactorModel& m, const MetaConfig& cfg);

struct MetaRound {
  int round = 0;
  Index rank = 0;
  double objective_after_solve = 0.0;
  double objective_after_step = 0.0;
  MetaAction action = MetaAction::CertifyStop;
  double polar = 0.0;
  int solver_iterations = 0;
};

struct MetaResult {
  FactorModel model;
  CertificateReport certificate;
  std::vector<MetaRound> history;
  /// Objective after every solve and every meta step, in order.
  std::vector<double> objective_history;
  bool cap_reached = false;
};

MetaResult run_meta(const ProblemSpec& p, const MetaConfig& cfg);
MetaResult run_meta(const ProblemSpec& p, const MetaConfig& cfg, FactorModel initial);

}  // namespace smf
