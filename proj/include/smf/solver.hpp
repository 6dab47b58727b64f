#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "smf/linops.hpp"
#include "smf/proximal.hpp"
#include "smf/regularizers.hpp"
#include "smf/types.hpp"

namespace smf {

/// One factorization problem:
///   min 1/2 |Y - A(U V^T) - B(Q)|_F^2 + lambda * sum_i theta(U_i, V_i).
struct ProblemSpec {
  ProblemSpec(Matrix Y, LinearOperator A, std::optional<LinearOperator> B, Rank1Regularizer reg,
              double lambda);

  Matrix Y;
  LinearOperator A;
  std::optional<LinearOperator> B;
  Rank1Regularizer reg;
  double lambda;

  /// Shape of X = U V^T, the input of A.
  Index x_rows() const;
  Index x_cols() const;
};

struct FactorModel {
  Matrix U;
  Matrix V;
  std::optional<Matrix> Q;

  Index rank() const { return U.cols(); }
  Matrix product() const { return U * V.transpose(); }
};

namespace init {
struct Zeros {
  Index count = 1;
};
/// `count` distinct columns of the identity (all of them when count is 0 or
/// equals the row count); V starts at 0.
struct IdentityColumns {
  Index count = 0;
};
/// U entries uniform on [0, 1], V starts at 0.
struct UniformRandom {
  Index count = 1;
};
}  // namespace init

using InitStrategy = std::variant<init::Zeros, init::IdentityColumns, init::UniformRandom>;

enum class Extrapolation {
  Damped,     // mu = (t_{k-1} - 1) / 2
  Classical,  // mu = (t_{k-1} - 1) / t_k
};

struct SolverConfig {
  int max_iter = 2000;
  double tol_rel_obj = 1e-6;
  TVProxConfig prox_cfg;
  std::uint64_t seed = 0;
  InitStrategy init = init::Zeros{};
  Extrapolation extrapolation = Extrapolation::Damped;
  /// Relative objective change is measured across this many iterations.
  int window = 5;
  int prune_patience = 25;
  double prune_rel_tol = 1e-12;
};

struct SolveTrace {
  std::vector<double> objective;  // one entry per accepted iteration
  int iterations = 0;
  int restarts = 0;
  double L_U = 0.0;
  double L_V = 0.0;
  double L_Q = 0.0;
  double final_t = 1.0;
  double max_t = 1.0;
  bool converged = false;
  bool nonfinite = false;
  long prox_nonconverged = 0;
  int pruned_columns = 0;
  std::string diagnostic;
};

struct SolveResult {
  FactorModel model;
  SolveTrace trace;
};

FactorModel initial_model(const ProblemSpec& p, const InitStrategy& init, std::uint64_t seed);

/// A(U V^T) + B(Q) - Y
Matrix residual(const ProblemSpec& p, const FactorModel& m);
double loss(const ProblemSpec& p, const FactorModel& m);
double objective(const ProblemSpec& p, const FactorModel& m);

/// Gradient of the loss with respect to X = U V^T, i.e. A^T(residual).
Matrix grad_X(const ProblemSpec& p, const FactorModel& m);
Matrix grad_U(const ProblemSpec& p, const FactorModel& m);
Matrix grad_V(const ProblemSpec& p, const FactorModel& m);
/// Zero-sized when the problem has no B operator.
Matrix grad_Q(const ProblemSpec& p, const FactorModel& m);

double lipschitz_U(const ProblemSpec& p, const FactorModel& m);
double lipschitz_V(const ProblemSpec& p, const FactorModel& m);
double lipschitz_Q(const ProblemSpec& p);

struct BlockUpdate {
  Matrix Z;
  long prox_nonconverged = 0;
};

/// Per-column prox of the gradient step P = U_hat - G_U / L_U with threshold
/// lambda * sigma_v(V_i) / L_U. `duals` (optional) carries per-column warm
/// starts for the TV prox and is updated in place.
BlockUpdate prox_update_U(const ProblemSpec& p, const Matrix& U_hat, const Matrix& V,
                          const Matrix& G_U, double L_U, const TVProxConfig& cfg,
                          std::vector<Vector>* duals = nullptr);
BlockUpdate prox_update_V(const ProblemSpec& p, const Matrix& V_hat, const Matrix& U,
                          const Matrix& G_V, double L_V, const TVProxConfig& cfg,
                          std::vector<Vector>* duals = nullptr);

struct SolverState {
  FactorModel current;
  FactorModel previous;
  Matrix U_hat;
  Matrix V_hat;
  std::optional<Matrix> Q_hat;
  double t = 1.0;
  double L_U_prev = 0.0;
  double L_V_prev = 0.0;
  double L_Q_prev = 0.0;
  double objective = 0.0;
  std::vector<Vector> u_duals;
  std::vector<Vector> v_duals;
  std::vector<int> small_column_streak;
};

SolverState make_state(const ProblemSpec& p, FactorModel initial);

struct StepInfo {
  bool accepted = false;
  double objective = 0.0;            // objective of the current iterate after the step
  double candidate_objective = 0.0;  // objective of the freshly computed point
  double L_U = 0.0;
  double L_V = 0.0;
  double L_Q = 0.0;
  long prox_nonconverged = 0;
  int pruned_columns = 0;
};

/// One pass of the accelerated alternating proximal-linear scheme (U, V, Q
/// blocks at the extrapolated points). A point that does not strictly
/// decrease the objective is discarded and the next pass restarts from the
/// current iterate without extrapolation.
StepInfo step(const ProblemSpec& p, SolverState& state, const SolverConfig& cfg);

SolveResult run(const ProblemSpec& p, const SolverConfig& cfg);
SolveResult run(const ProblemSpec& p, const SolverConfig& cfg, FactorModel initial);

/// Zeroes both factors of every column whose outer product is exactly zero.
/// Never increases the objective.
void zero_degenerate_columns(FactorModel& m);

}  // namespace smf
