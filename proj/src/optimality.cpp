#include "smf/optimality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace smf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vector random_unit(std::mt19937_64& rng, Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = normal(rng);
  const double nrm = x.norm();
  return nrm > 0.0 ? Vector(x / nrm) : Vector::Ones(n) / std::sqrt(static_cast<double>(n));
}

// Subgradient of a gauge at x (x inside the domain).
Vector gauge_subgradient(const GaugeSpec& g, const Vector& x) {
  Vector s = Vector::Zero(x.size());
  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  if (g.nu1() > 0.0) s += g.nu1() * x.unaryExpr(sign);
  if (g.nu_tv() > 0.0) {
    for (const auto& e : g.graph()->edges()) {
      const double d = g.nu_tv() * sign(x[e.a] - x[e.b]);
      s[e.a] += d;
      s[e.b] -= d;
    }
  }
  if (g.nu2() > 0.0) {
    const double nrm = x.norm();
    if (nrm > 0.0) s += g.nu2() * x / nrm;
  }
  return s;
}

Vector project_if(const GaugeSpec& g, Vector x) {
  if (g.nonneg()) x = x.cwiseMax(0.0);
  return x;
}

// Ratio u^T Z v / (sigma_u(u) sigma_v(v)): the value reached after rescaling
// (u, v) onto the theta = 1 level set with balanced factors.
double polar_ratio(const Matrix& Z, const Rank1Regularizer& reg, const Vector& u, const Vector& v) {
  const double su = eval_gauge(reg.u_gauge(), u);
  const double sv = eval_gauge(reg.v_gauge(), v);
  if (!(su > 0.0) || !(sv > 0.0) || std::isinf(su) || std::isinf(sv)) return -kInf;
  return u.dot(Z * v) / (su * sv);
}

void normalize_pair(const Rank1Regularizer& reg, Vector& u, Vector& v) {
  u /= eval_gauge(reg.u_gauge(), u);
  v /= eval_gauge(reg.v_gauge(), v);
}

struct Candidate {
  Vector u;
  Vector v;
  double value = -kInf;
};

// Monotone normalized ascent on log(u^T Z v) - log sigma_u(u) - log sigma_v(v).
Candidate ascend(const Matrix& Z, const Rank1Regularizer& reg, Vector u, Vector v) {
  const auto& gu = reg.u_gauge();
  const auto& gv = reg.v_gauge();
  Candidate best;
  u = project_if(gu, std::move(u));
  v = project_if(gv, std::move(v));
  double value = polar_ratio(Z, reg, u, v);
  if (value == -kInf) return best;
  if (value < 0.0) {
    // Flip one factor when allowed; the negated pair has the opposite sign.
    if (!gu.nonneg()) {
      u = -u;
    } else if (!gv.nonneg()) {
      v = -v;
    }
    value = polar_ratio(Z, reg, u, v);
    if (value == -kInf) return best;
  }
  normalize_pair(reg, u, v);
  double step = 0.5;
  for (int it = 0; it < 400 && step > 1e-9; ++it) {
    const double inner = u.dot(Z * v);
    if (!(inner > 0.0)) break;
    bool improved = false;
    // u then v, each a normalized ascent step with backtracking.
    for (int block = 0; block < 2; ++block) {
      Vector& x = block == 0 ? u : v;
      const GaugeSpec& g = block == 0 ? gu : gv;
      const Vector grad_lin = block == 0 ? Vector(Z * v) : Vector(Z.transpose() * u);
      const double cur_inner = u.dot(Z * v);
      Vector dir = grad_lin / cur_inner - gauge_subgradient(g, x) / eval_gauge(g, x);
      const double dn = dir.norm();
      if (!(dn > 0.0)) continue;
      dir *= x.norm() / dn;
      Vector trial = project_if(g, x + step * dir);
      if (!(trial.squaredNorm() > 0.0)) continue;
      const Vector saved = x;
      x = trial;
      const double cand = polar_ratio(Z, reg, u, v);
      if (cand > value) {
        value = cand;
        normalize_pair(reg, u, v);
        improved = true;
      } else {
        x = saved;
      }
    }
    step = improved ? std::min(step * 1.5, 4.0) : step * 0.5;
  }
  best.u = std::move(u);
  best.v = std::move(v);
  best.value = value;
  return best;
}

}  // namespace

PolarEstimate polar_exact_l2l2(const Matrix& Z) {
  PolarEstimate est;
  est.exact = true;
  est.u = Vector::Zero(Z.rows());
  est.v = Vector::Zero(Z.cols());
  if (Z.size() == 0 || Z.isZero(0.0)) return est;

  std::mt19937_64 rng(0x5eed);
  Vector v = random_unit(rng, Z.cols());
  Vector u = Z * v;
  double sigma = 0.0;
  for (int it = 0; it < 100000; ++it) {
    u = Z * v;
    const double un = u.norm();
    if (un == 0.0) {
      v = random_unit(rng, Z.cols());
      continue;
    }
    u /= un;
    v = Z.transpose() * u;
    sigma = v.norm();
    v /= sigma;
    if ((Z * v - sigma * u).norm() <= 1e-10 * sigma) break;
  }
  est.value = u.dot(Z * v);
  est.u = u;
  est.v = v;
  return est;
}

PolarEstimate polar_exact_l1l1(const Matrix& Z) {
  PolarEstimate est;
  est.exact = true;
  est.u = Vector::Zero(Z.rows());
  est.v = Vector::Zero(Z.cols());
  if (Z.size() == 0) return est;
  Index i = 0;
  Index j = 0;
  const double value = Z.cwiseAbs().maxCoeff(&i, &j);
  est.value = value;
  if (value > 0.0) {
    est.u[i] = 1.0;
    est.v[j] = Z(i, j) > 0.0 ? 1.0 : -1.0;
  }
  return est;
}

PolarEstimate polar_lower_bound(const Matrix& Z, const Rank1Regularizer& reg, int restarts,
                                std::uint64_t seed) {
  if (restarts < 1) throw std::invalid_argument("polar_lower_bound: restarts must be >= 1");
  PolarEstimate est;
  est.u = Vector::Zero(Z.rows());
  est.v = Vector::Zero(Z.cols());
  est.restarts_used = restarts;
  if (Z.size() == 0 || Z.isZero(0.0)) return est;

  Candidate best;
  auto consider = [&](Candidate c) {
    if (c.value > best.value) best = std::move(c);
  };

  // Deterministic seeds: the top singular pair and the largest entry.
  const PolarEstimate svd = polar_exact_l2l2(Z);
  consider(ascend(Z, reg, svd.u, svd.v));
  consider(ascend(Z, reg, -svd.u, -svd.v));
  const PolarEstimate entry = polar_exact_l1l1(Z);
  consider(ascend(Z, reg, entry.u, entry.v));

  for (int k = 1; k < restarts; ++k) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(k) * 0x9e3779b97f4a7c15ULL);
    Vector u = random_unit(rng, Z.rows());
    Vector v = random_unit(rng, Z.cols());
    if (reg.u_gauge().nonneg()) u = u.cwiseAbs();
    if (reg.v_gauge().nonneg()) v = v.cwiseAbs();
    consider(ascend(Z, reg, std::move(u), std::move(v)));
  }

  if (best.value > 0.0) {
    est.value = best.value;
    est.u = std::move(best.u);
    est.v = std::move(best.v);
  }
  return est;
}

PolarEstimate polar(const Matrix& Z, const Rank1Regularizer& reg, int restarts, std::uint64_t seed) {
  const auto& gu = reg.u_gauge();
  const auto& gv = reg.v_gauge();
  // The Sum form has the same polar as the Product form (balanced rescaling).
  if (gu.is_pure_l2() && gv.is_pure_l2()) {
    PolarEstimate est = polar_exact_l2l2(Z);
    const double scale = gu.nu2() * gv.nu2();
    est.value /= scale;
    est.u /= gu.nu2();
    est.v /= gv.nu2();
    return est;
  }
  if (gu.is_pure_l1() && gv.is_pure_l1()) {
    PolarEstimate est = polar_exact_l1l1(Z);
    est.value /= gu.nu1() * gv.nu1();
    est.u /= gu.nu1();
    est.v /= gv.nu1();
    return est;
  }
  return polar_lower_bound(Z, reg, restarts, seed);
}

std::string to_string(CertificateStatus s) {
  switch (s) {
    case CertificateStatus::Certified:
      return "certified";
    case CertificateStatus::Rejected:
      return "rejected";
    case CertificateStatus::NotGloballyCertified:
      return "not globally certified";
  }
  return "unknown";
}

Matrix polar_argument(const ProblemSpec& p, const FactorModel& m) {
  return -grad_X(p, m) / p.lambda;
}

CertificateReport check_certificate(const ProblemSpec& p, const FactorModel& m, int restarts,
                                    std::uint64_t seed, double m_X, double m_Q,
                                    const CertificateTolerances& tol) {
  if (!m.U.allFinite() || !m.V.allFinite()) {
    throw std::invalid_argument("check_certificate: model has non-finite entries");
  }
  CertificateReport rep;
  rep.m_X = m_X;
  rep.m_Q = m_Q;
  rep.objective = objective(p, m);
  const Matrix Z = polar_argument(p, m);
  if (p.B) rep.cond_q_residual = grad_Q(p, m).norm();

  bool conditions_hold = rep.cond_q_residual <= tol.residual_tol;
  rep.cond_scaling_residuals.reserve(static_cast<std::size_t>(m.rank()));
  for (Index i = 0; i < m.rank(); ++i) {
    const double theta = eval_theta(p.reg, m.U.col(i), m.V.col(i));
    const double inner = m.U.col(i).dot(Z * m.V.col(i));
    const double res = std::abs(inner - theta) / std::max(1.0, theta);
    rep.cond_scaling_residuals.push_back(res);
    if (!(res <= tol.residual_tol)) conditions_hold = false;
  }
  rep.polar = polar(Z, p.reg, restarts, seed);
  // The minimizer's regularizer value is bounded by f(m) / lambda; the
  // strong-convexity terms need the unknown minimizer and are non-negative,
  // so leaving them out keeps the bound valid.
  rep.gap_bound = rep.polar.exact ? rep.objective * std::max(0.0, rep.polar.value - 1.0) : kInf;

  if (!conditions_hold || rep.polar.value > 1.0 + tol.polar_tol) {
    rep.status = CertificateStatus::Rejected;
  } else {
    rep.status = rep.polar.exact ? CertificateStatus::Certified
                                 : CertificateStatus::NotGloballyCertified;
  }
  return rep;
}

std::optional<Vector> find_redundancy(const FactorModel& m) {
  const Index r = m.rank();
  if (r < 2) return std::nullopt;
  const Matrix gram = (m.U.transpose() * m.U).cwiseProduct(m.V.transpose() * m.V);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const double trace = gram.trace();
  if (eig.eigenvalues()[0] > 1e-10 * trace) return std::nullopt;
  Vector beta = eig.eigenvectors().col(0);
  if (beta.minCoeff() >= 0.0) beta = -beta;
  beta /= -beta.minCoeff();
  return beta;
}

std::string to_string(MetaAction a) {
  switch (a) {
    case MetaAction::CertifyStop:
      return "certify-stop";
    case MetaAction::Rescaled:
      return "rescaled";
    case MetaAction::Escaped:
      return "escaped";
    case MetaAction::AppendedEscape:
      return "appended-escape";
    case MetaAction::LineSearchFailed:
      return "line-search-failed";
  }
  return "unknown";
}

namespace {

FactorModel with_zero_column(const FactorModel& m) {
  FactorModel out = m;
  out.U.conservativeResize(Eigen::NoChange, m.rank() + 1);
  out.V.conservativeResize(Eigen::NoChange, m.rank() + 1);
  out.U.col(m.rank()).setZero();
  out.V.col(m.rank()).setZero();
  return out;
}

// Backtracking from tau = 1 with halving; any strict decrease is accepted.
bool escape_into(const ProblemSpec& p, FactorModel& m, Index slot, const PolarEstimate& pe,
                 double f0, int max_halvings, MetaStepResult& out) {
  double tau = 1.0;
  for (int h = 0; h <= max_halvings; ++h, tau *= 0.5) {
    FactorModel trial = m;
    trial.U.col(slot) = tau * pe.u;
    trial.V.col(slot) = tau * pe.v;
    const double f = objective(p, trial);
    if (f < f0) {
      m = std::move(trial);
      out.tau = tau;
      out.objective_after = f;
      return true;
    }
  }
  return false;
}

}  // namespace

MetaStepResult meta_step(const ProblemSpec& p, const FactorModel& m, const MetaConfig& cfg) {
  MetaStepResult out;
  out.objective_before = objective(p, m);
  out.objective_after = out.objective_before;
  out.model = m;
  const double f0 = out.objective_before;
  out.polar = polar(polar_argument(p, m), p.reg, cfg.polar_restarts, cfg.seed);
  const bool descent_exists = out.polar.value > 1.0 + cfg.polar_tol;

  const double zero_threshold = cfg.zero_tol * (1.0 + f0 / p.lambda);
  std::optional<Index> zero_col;
  std::vector<double> theta(static_cast<std::size_t>(m.rank()));
  for (Index i = 0; i < m.rank(); ++i) {
    theta[static_cast<std::size_t>(i)] = eval_theta(p.reg, m.U.col(i), m.V.col(i));
    if (!zero_col && theta[static_cast<std::size_t>(i)] <= zero_threshold) zero_col = i;
  }

  if (zero_col) {
    if (!descent_exists) {
      out.action = MetaAction::CertifyStop;
      return out;
    }
    out.action = escape_into(p, out.model, *zero_col, out.polar, f0, cfg.max_halvings, out)
                     ? MetaAction::Escaped
                     : MetaAction::LineSearchFailed;
    return out;
  }

  if (auto beta = find_redundancy(m)) {
    Vector b = *beta;
    double weighted = 0.0;
    for (Index i = 0; i < b.size(); ++i) weighted += b[i] * theta[static_cast<std::size_t>(i)];
    // Both signs are null combinations; pick the one that does not raise the
    // regularizer.
    if (weighted > 0.0) {
      b = -b;
      b /= -b.minCoeff();
    }
    FactorModel scaled = m;
    for (Index i = 0; i < b.size(); ++i) {
      const double s = std::sqrt(std::max(0.0, 1.0 + b[i]));
      scaled.U.col(i) *= s;
      scaled.V.col(i) *= s;
    }
    const double f1 = objective(p, scaled);
    if (f1 <= f0) {
      out.model = std::move(scaled);
      out.objective_after = f1;
      out.action = MetaAction::Rescaled;
      return out;
    }
  }

  out.model = with_zero_column(m);
  if (!descent_exists) {
    out.action = MetaAction::CertifyStop;
    return out;
  }
  out.action = escape_into(p, out.model, m.rank(), out.polar, f0, cfg.max_halvings, out)
                   ? MetaAction::AppendedEscape
                   : MetaAction::LineSearchFailed;
  return out;
}

MetaResult run_meta(const ProblemSpec& p, const MetaConfig& cfg) {
  return run_meta(p, cfg, initial_model(p, cfg.solver.init, cfg.solver.seed));
}

MetaResult run_meta(const ProblemSpec& p, const MetaConfig& cfg, FactorModel initial) {
  if (cfg.max_rounds < 1) throw std::invalid_argument("run_meta: max_rounds must be >= 1");
  const Index rank_cap = std::max(p.x_rows() * p.x_cols() + 1, initial.rank());
  MetaResult result;
  FactorModel model = std::move(initial);
  result.cap_reached = true;
  for (int round = 1; round <= cfg.max_rounds; ++round) {
    SolveResult solved = run(p, cfg.solver, std::move(model));
    MetaRound rec;
    rec.round = round;
    rec.objective_after_solve = objective(p, solved.model);
    rec.solver_iterations = solved.trace.iterations;
    result.objective_history.push_back(rec.objective_after_solve);

    MetaConfig step_cfg = cfg;
    step_cfg.seed = cfg.seed + static_cast<std::uint64_t>(round);
    MetaStepResult ms = meta_step(p, solved.model, step_cfg);
    rec.action = ms.action;
    rec.polar = ms.polar.value;
    rec.objective_after_step = ms.objective_after;
    rec.rank = ms.model.rank();
    result.objective_history.push_back(ms.objective_after);
    result.history.push_back(rec);
    model = std::move(ms.model);
    if (model.rank() > rank_cap) {
      throw std::logic_error("run_meta: factor count exceeded max(DN + 1, r_init)");
    }
    if (ms.action == MetaAction::CertifyStop || ms.action == MetaAction::LineSearchFailed) {
      result.cap_reached = false;
      break;
    }
  }
  result.certificate = check_certificate(p, model, cfg.polar_restarts, cfg.seed);
  result.model = std::move(model);
  return result;
}

}  // namespace smf
