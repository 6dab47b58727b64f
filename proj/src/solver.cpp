#include "smf/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace smf {

ProblemSpec::ProblemSpec(Matrix Y_, LinearOperator A_, std::optional<LinearOperator> B_,
                         Rank1Regularizer reg_, double lambda_)
    : Y(std::move(Y_)), A(std::move(A_)), B(std::move(B_)), reg(std::move(reg_)), lambda(lambda_) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("ProblemSpec: lambda must be positive and finite");
  }
  if (!Y.allFinite()) throw std::invalid_argument("ProblemSpec: data contains non-finite values");
  if (Y.size() == 0) throw std::invalid_argument("ProblemSpec: empty data matrix");
  const Index d = x_rows();
  const Index n = x_cols();
  const auto* ug = reg.u_gauge().graph();
  const auto* vg = reg.v_gauge().graph();
  if (ug && ug->node_count() != d) {
    throw std::invalid_argument("ProblemSpec: u-gauge graph has " + std::to_string(ug->node_count()) +
                                " nodes, U has " + std::to_string(d) + " rows");
  }
  if (vg && vg->node_count() != n) {
    throw std::invalid_argument("ProblemSpec: v-gauge graph has " + std::to_string(vg->node_count()) +
                                " nodes, V has " + std::to_string(n) + " rows");
  }
  // Probe the operators once so shape errors surface here.
  const Matrix probe = A.apply(Matrix::Zero(d, n));
  if (probe.rows() != Y.rows() || probe.cols() != Y.cols()) {
    throw std::invalid_argument("ProblemSpec: A(X) does not match the data shape");
  }
  if (B) {
    const Matrix q = B->adjoint(Y);
    if (B->apply(q).rows() != Y.rows() || B->apply(q).cols() != Y.cols()) {
      throw std::invalid_argument("ProblemSpec: B(Q) does not match the data shape");
    }
  }
}

Index ProblemSpec::x_rows() const { return Y.rows(); }

Index ProblemSpec::x_cols() const {
  if (const auto* rp = std::get_if<op::RandomPhaseConv>(&A.variant())) {
    return rp->height * rp->width;
  }
  return Y.cols();
}

FactorModel initial_model(const ProblemSpec& p, const InitStrategy& init, std::uint64_t seed) {
  const Index d = p.x_rows();
  const Index n = p.x_cols();
  FactorModel m;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, init::Zeros>) {
          if (s.count < 1) throw std::invalid_argument("init::Zeros: count must be >= 1");
          m.U = Matrix::Zero(d, s.count);
        } else if constexpr (std::is_same_v<T, init::IdentityColumns>) {
          const Index count = s.count == 0 ? d : s.count;
          if (count < 1 || count > d) {
            throw std::invalid_argument("init::IdentityColumns: count must be in [1, rows]");
          }
          std::vector<Index> cols(static_cast<std::size_t>(d));
          std::iota(cols.begin(), cols.end(), Index{0});
          if (count < d) {
            std::mt19937_64 rng(seed);
            std::shuffle(cols.begin(), cols.end(), rng);
            cols.resize(static_cast<std::size_t>(count));
            std::sort(cols.begin(), cols.end());
          }
          m.U = Matrix::Zero(d, count);
          for (Index i = 0; i < count; ++i) m.U(cols[static_cast<std::size_t>(i)], i) = 1.0;
        } else {
          if (s.count < 1) throw std::invalid_argument("init::UniformRandom: count must be >= 1");
          std::mt19937_64 rng(seed);
          std::uniform_real_distribution<double> unif(0.0, 1.0);
          m.U.resize(d, s.count);
          for (Index j = 0; j < m.U.cols(); ++j) {
            for (Index i = 0; i < d; ++i) m.U(i, j) = unif(rng);
          }
        }
      },
      init);
  m.V = Matrix::Zero(n, m.U.cols());
  if (p.B) m.Q = Matrix::Zero(p.B->adjoint(p.Y).rows(), p.B->adjoint(p.Y).cols());
  return m;
}

namespace {

void check_model(const ProblemSpec& p, const FactorModel& m) {
  if (m.U.cols() != m.V.cols()) {
    throw std::invalid_argument("FactorModel: U and V column counts differ");
  }
  if (m.U.rows() != p.x_rows() || m.V.rows() != p.x_cols()) {
    throw std::invalid_argument("FactorModel: factor shapes do not match the problem");
  }
  if (p.B && !m.Q) throw std::invalid_argument("FactorModel: Q required when B is present");
}

Matrix residual_at(const ProblemSpec& p, const Matrix& U, const Matrix& V,
                   const std::optional<Matrix>& Q) {
  Matrix R = p.A.apply(U * V.transpose());
  R -= p.Y;
  if (p.B && Q) R += p.B->apply(*Q);
  return R;
}

double sigma_max_squared(const Matrix& F) {
  if (F.cols() == 0) return 0.0;
  const Matrix gram = F.transpose() * F;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  return std::max(0.0, eig.eigenvalues().maxCoeff());
}

constexpr double kLipschitzFloor = 1e-12;

double lipschitz_for(const ProblemSpec& p, const Matrix& other_factor) {
  const double a = p.A.op_norm();
  return std::max(kLipschitzFloor, a * a * sigma_max_squared(other_factor));
}

BlockUpdate prox_columns(const Matrix& hat, const Matrix& G, double L, const GaugeSpec& own,
                         const GaugeSpec& partner_gauge, const Matrix& partner, double lambda,
                         const TVProxConfig& cfg, std::vector<Vector>* duals) {
  BlockUpdate out;
  const Matrix P = hat - G / L;
  out.Z.resize(P.rows(), P.cols());
  if (duals) duals->resize(static_cast<std::size_t>(P.cols()));
  for (Index i = 0; i < P.cols(); ++i) {
    const double weight = lambda * eval_gauge(partner_gauge, partner.col(i));
    if (!std::isfinite(weight)) {
      throw std::runtime_error("prox update: partner factor violates its constraint");
    }
    Vector* warm = duals ? &(*duals)[static_cast<std::size_t>(i)] : nullptr;
    ProxResult r = prox_gauge(P.col(i), weight / L, own, cfg, warm);
    if (!r.converged) ++out.prox_nonconverged;
    out.Z.col(i) = r.x;
    if (warm) *warm = std::move(r.dual);
  }
  return out;
}

void require_product(const ProblemSpec& p) {
  if (p.reg.form() != RegularizerForm::Product) {
    throw std::invalid_argument("solver: only Product-form regularizers have a column prox");
  }
}

}  // namespace

Matrix residual(const ProblemSpec& p, const FactorModel& m) {
  check_model(p, m);
  return residual_at(p, m.U, m.V, m.Q);
}

double loss(const ProblemSpec& p, const FactorModel& m) {
  return 0.5 * residual(p, m).squaredNorm();
}

double objective(const ProblemSpec& p, const FactorModel& m) {
  const double reg = sum_theta(p.reg, m.U, m.V);
  if (std::isinf(reg)) return std::numeric_limits<double>::infinity();
  return loss(p, m) + p.lambda * reg;
}

Matrix grad_X(const ProblemSpec& p, const FactorModel& m) { return p.A.adjoint(residual(p, m)); }

Matrix grad_U(const ProblemSpec& p, const FactorModel& m) { return grad_X(p, m) * m.V; }

Matrix grad_V(const ProblemSpec& p, const FactorModel& m) {
  return grad_X(p, m).transpose() * m.U;
}

Matrix grad_Q(const ProblemSpec& p, const FactorModel& m) {
  if (!p.B) return Matrix(0, 0);
  return p.B->adjoint(residual(p, m));
}

double lipschitz_U(const ProblemSpec& p, const FactorModel& m) { return lipschitz_for(p, m.V); }
double lipschitz_V(const ProblemSpec& p, const FactorModel& m) { return lipschitz_for(p, m.U); }

double lipschitz_Q(const ProblemSpec& p) {
  if (!p.B) return kLipschitzFloor;
  const double b = p.B->op_norm();
  return std::max(kLipschitzFloor, b * b);
}

BlockUpdate prox_update_U(const ProblemSpec& p, const Matrix& U_hat, const Matrix& V,
                          const Matrix& G_U, double L_U, const TVProxConfig& cfg,
                          std::vector<Vector>* duals) {
  require_product(p);
  return prox_columns(U_hat, G_U, L_U, p.reg.u_gauge(), p.reg.v_gauge(), V, p.lambda, cfg, duals);
}

BlockUpdate prox_update_V(const ProblemSpec& p, const Matrix& V_hat, const Matrix& U,
                          const Matrix& G_V, double L_V, const TVProxConfig& cfg,
                          std::vector<Vector>* duals) {
  require_product(p);
  return prox_columns(V_hat, G_V, L_V, p.reg.v_gauge(), p.reg.u_gauge(), U, p.lambda, cfg, duals);
}

SolverState make_state(const ProblemSpec& p, FactorModel initial) {
  require_product(p);
  check_model(p, initial);
  if (!initial.U.allFinite() || !initial.V.allFinite() || (initial.Q && !initial.Q->allFinite())) {
    throw std::invalid_argument("make_state: initial model has non-finite entries");
  }
  SolverState s;
  s.objective = objective(p, initial);
  s.U_hat = initial.U;
  s.V_hat = initial.V;
  s.Q_hat = initial.Q;
  s.previous = initial;
  s.current = std::move(initial);
  const auto r = static_cast<std::size_t>(s.current.rank());
  s.u_duals.resize(r);
  s.v_duals.resize(r);
  s.small_column_streak.assign(r, 0);
  return s;
}

namespace {

int prune_small_columns(const ProblemSpec& p, SolverState& s, const SolverConfig& cfg) {
  const Index r = s.current.rank();
  std::vector<double> theta(static_cast<std::size_t>(r));
  double max_theta = 0.0;
  for (Index i = 0; i < r; ++i) {
    theta[static_cast<std::size_t>(i)] = eval_theta(p.reg, s.current.U.col(i), s.current.V.col(i));
    max_theta = std::max(max_theta, theta[static_cast<std::size_t>(i)]);
  }
  std::vector<Index> to_zero;
  for (Index i = 0; i < r; ++i) {
    auto& streak = s.small_column_streak[static_cast<std::size_t>(i)];
    const bool nonzero = s.current.U.col(i).squaredNorm() > 0.0 || s.current.V.col(i).squaredNorm() > 0.0;
    if (nonzero && theta[static_cast<std::size_t>(i)] <= cfg.prune_rel_tol * max_theta) {
      if (++streak >= cfg.prune_patience) to_zero.push_back(i);
    } else {
      streak = 0;
    }
  }
  if (to_zero.empty()) return 0;

  FactorModel trial = s.current;
  for (Index i : to_zero) {
    trial.U.col(i).setZero();
    trial.V.col(i).setZero();
  }
  const double trial_obj = objective(p, trial);
  // Keep the accepted sequence monotone even at round-off level.
  if (!(trial_obj <= s.objective)) return 0;
  for (Index i : to_zero) {
    s.current.U.col(i).setZero();
    s.current.V.col(i).setZero();
    s.U_hat.col(i).setZero();
    s.V_hat.col(i).setZero();
    s.small_column_streak[static_cast<std::size_t>(i)] = 0;
  }
  s.objective = trial_obj;
  return static_cast<int>(to_zero.size());
}

}  // namespace

StepInfo step(const ProblemSpec& p, SolverState& s, const SolverConfig& cfg) {
  StepInfo info;
  const FactorModel& cur = s.current;

  // U block at the extrapolated point, V and Q at their current values.
  info.L_U = lipschitz_for(p, cur.V);
  const Matrix gx_u = p.A.adjoint(residual_at(p, s.U_hat, cur.V, cur.Q));
  const Matrix G_U = gx_u * cur.V;
  BlockUpdate ub = prox_update_U(p, s.U_hat, cur.V, G_U, info.L_U, cfg.prox_cfg, &s.u_duals);

  info.L_V = lipschitz_for(p, ub.Z);
  const Matrix gx_v = p.A.adjoint(residual_at(p, ub.Z, s.V_hat, cur.Q));
  const Matrix G_V = gx_v.transpose() * ub.Z;
  BlockUpdate vb = prox_update_V(p, s.V_hat, ub.Z, G_V, info.L_V, cfg.prox_cfg, &s.v_duals);

  FactorModel cand{std::move(ub.Z), std::move(vb.Z), std::nullopt};
  if (p.B) {
    info.L_Q = lipschitz_Q(p);
    const Matrix G_Q = p.B->adjoint(residual_at(p, cand.U, cand.V, s.Q_hat));
    cand.Q = *s.Q_hat - G_Q / info.L_Q;
  }
  info.prox_nonconverged = ub.prox_nonconverged + vb.prox_nonconverged;
  info.candidate_objective = objective(p, cand);

  if (info.candidate_objective < s.objective) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * s.t * s.t));
    const double mu = cfg.extrapolation == Extrapolation::Damped ? (s.t - 1.0) / 2.0
                                                                : (s.t - 1.0) / t_next;
    auto weight = [mu](double prev_L, double L) {
      return prev_L > 0.0 ? std::min(mu, std::sqrt(prev_L / L)) : mu;
    };
    const double mu_U = weight(s.L_U_prev, info.L_U);
    const double mu_V = weight(s.L_V_prev, info.L_V);
    s.U_hat = cand.U + mu_U * (cand.U - cur.U);
    s.V_hat = cand.V + mu_V * (cand.V - cur.V);
    if (p.B) {
      const double mu_Q = weight(s.L_Q_prev, info.L_Q);
      s.Q_hat = *cand.Q + mu_Q * (*cand.Q - *cur.Q);
    }
    s.previous = std::move(s.current);
    s.current = std::move(cand);
    s.t = t_next;
    s.objective = info.candidate_objective;
    info.accepted = true;
    info.pruned_columns = prune_small_columns(p, s, cfg);
  } else {
    s.U_hat = s.current.U;
    s.V_hat = s.current.V;
    s.Q_hat = s.current.Q;
  }
  s.L_U_prev = info.L_U;
  s.L_V_prev = info.L_V;
  s.L_Q_prev = info.L_Q;
  info.objective = s.objective;
  return info;
}

void zero_degenerate_columns(FactorModel& m) {
  for (Index i = 0; i < m.U.cols(); ++i) {
    if (m.U.col(i).isZero(0.0) || m.V.col(i).isZero(0.0)) {
      m.U.col(i).setZero();
      m.V.col(i).setZero();
    }
  }
}

SolveResult run(const ProblemSpec& p, const SolverConfig& cfg) {
  return run(p, cfg, initial_model(p, cfg.init, cfg.seed));
}

SolveResult run(const ProblemSpec& p, const SolverConfig& cfg, FactorModel initial) {
  if (cfg.max_iter < 1 || !(cfg.tol_rel_obj > 0.0) || cfg.window < 1) {
    throw std::invalid_argument("run: invalid SolverConfig");
  }
  SolveResult result;
  SolveTrace& trace = result.trace;
  SolverState s = make_state(p, std::move(initial));
  trace.objective.push_back(s.objective);
  if (!std::isfinite(s.objective)) {
    trace.nonfinite = true;
    trace.diagnostic = "initial objective is not finite";
    result.model = std::move(s.current);
    return result;
  }

  std::vector<double> history{s.objective};
  for (int k = 0; k < cfg.max_iter; ++k) {
    const StepInfo info = step(p, s, cfg);
    ++trace.iterations;
    trace.prox_nonconverged += info.prox_nonconverged;
    trace.pruned_columns += info.pruned_columns;
    trace.L_U = info.L_U;
    trace.L_V = info.L_V;
    trace.L_Q = info.L_Q;
    if (std::isnan(info.candidate_objective)) {
      trace.nonfinite = true;
      trace.diagnostic = "objective became NaN at iteration " + std::to_string(k + 1);
      break;
    }
    if (info.accepted) {
      trace.objective.push_back(s.objective);
    } else {
      ++trace.restarts;
    }
    trace.max_t = std::max(trace.max_t, s.t);
    history.push_back(s.objective);
    const std::size_t w = static_cast<std::size_t>(cfg.window);
    if (history.size() > w) {
      const double past = history[history.size() - 1 - w];
      const double change = std::abs(past - s.objective);
      if (change <= cfg.tol_rel_obj * std::abs(s.objective)) {
        trace.converged = true;
        break;
      }
    }
  }
  trace.final_t = s.t;
  result.model = std::move(s.current);
  zero_degenerate_columns(result.model);
  return result;
}

}  // namespace smf
