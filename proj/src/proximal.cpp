#include "smf/proximal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace smf {

Vector prox_l1(const VectorRef& y, double t) {
  if (t < 0.0) throw std::invalid_argument("prox_l1: negative threshold");
  return y.unaryExpr([t](double v) {
    const double mag = std::abs(v) - t;
    return mag > 0.0 ? std::copysign(mag, v) : 0.0;
  });
}

Vector prox_l2(const VectorRef& y, double t) {
  if (t < 0.0) throw std::invalid_argument("prox_l2: negative threshold");
  const double norm = y.norm();
  if (norm <= t) return Vector::Zero(y.size());
  return (1.0 - t / norm) * y;
}

Vector project_nonneg(const VectorRef& y) { return y.cwiseMax(0.0); }

namespace {

struct DualProblem {
  const VectorRef& y;
  double a;  // l1 weight t*nu1
  double b;  // tv weight t*nu_tv
  const NeighborGraph* graph;
  bool nonneg;

  Index n() const { return y.size(); }

  // w = y - G^T g
  Vector residual(const VectorRef& dual) const {
    Vector w = y;
    if (a > 0.0) w.noalias() -= a * dual.head(n());
    if (b > 0.0) {
      const auto& edges = graph->edges();
      for (std::size_t k = 0; k < edges.size(); ++k) {
        const double g = b * dual[n() + static_cast<Index>(k)];
        w[edges[k].a] -= g;
        w[edges[k].b] += g;
      }
    }
    return w;
  }

  Vector primal_from(const Vector& w) const { return nonneg ? Vector(w.cwiseMax(0.0)) : w; }

  double primal_value(const Vector& x) const {
    double p = 0.5 * (y - x).squaredNorm();
    if (a > 0.0) p += a * x.lpNorm<1>();
    if (b > 0.0) p += b * eval_tv(*graph, x);
    return p;
  }

  // Dual objective in maximization form; x is the primal built from w.
  double dual_value(const Vector& x) const { return 0.5 * (y.squaredNorm() - x.squaredNorm()); }
};

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

double tv_duality_gap(const VectorRef& y, const VectorRef& dual, double t, double nu1,
                      double nu_tv, const NeighborGraph* graph, bool nonneg) {
  const double a = t * nu1;
  const double b = t * nu_tv;
  if (b > 0.0 && !graph) throw std::invalid_argument("tv_duality_gap: graph required");
  if (graph && graph->node_count() != y.size()) {
    throw std::invalid_argument("tv_duality_gap: graph size does not match y");
  }
  const Index edges = graph ? static_cast<Index>(graph->edge_count()) : 0;
  if (dual.size() != y.size() + edges) {
    throw std::invalid_argument("tv_duality_gap: dual vector has the wrong length");
  }
  DualProblem prob{y, a, b, graph, nonneg};
  const Vector x = prob.primal_from(prob.residual(dual));
  const double gap = prob.primal_value(x) - prob.dual_value(x);
  return gap < 0.0 && gap >= -1e-12 ? 0.0 : gap;
}

ProxResult prox_l1_tv(const VectorRef& y, double t, double nu1, double nu_tv,
                      const NeighborGraph* graph, bool nonneg, const TVProxConfig& cfg,
                      const Vector* warm_dual) {
  if (t < 0.0 || nu1 < 0.0 || nu_tv < 0.0) {
    throw std::invalid_argument("prox_l1_tv: thresholds and weights must be nonnegative");
  }
  if (!std::isfinite(t * (nu1 + nu_tv))) {
    throw std::invalid_argument("prox_l1_tv: threshold must be finite");
  }
  if (cfg.max_sweeps < 1 || !(cfg.gap_tol > 0.0)) {
    throw std::invalid_argument("prox_l1_tv: invalid TVProxConfig");
  }
  if (graph && graph->node_count() != y.size()) {
    throw std::invalid_argument("prox_l1_tv: graph size does not match y");
  }
  const double a = t * nu1;
  const double b = t * nu_tv;
  if (b > 0.0 && !graph) throw std::invalid_argument("prox_l1_tv: graph required when nu_tv > 0");

  const Index n = y.size();
  const Index m = graph ? static_cast<Index>(graph->edge_count()) : 0;
  ProxResult out;
  out.dual = Vector::Zero(n + m);
  if (warm_dual && warm_dual->size() == n + m) {
    out.dual = warm_dual->unaryExpr([](double v) { return clamp_unit(v); });
  }
  if (a == 0.0) out.dual.head(n).setZero();
  if (b == 0.0) out.dual.tail(m).setZero();

  DualProblem prob{y, a, b, graph, nonneg};

  if (b == 0.0 || m == 0) {
    // Separable: soft threshold (shifted projection when nonneg).
    if (nonneg) {
      out.x = (y.array() - a).cwiseMax(0.0).matrix();
      if (a > 0.0) out.dual.head(n).setOnes();
    } else {
      out.x = prox_l1(y, a);
      if (a > 0.0) out.dual.head(n) = (y / a).unaryExpr([](double v) { return clamp_unit(v); });
    }
    out.dual_gap = std::max(0.0, prob.primal_value(out.x) - prob.dual_value(out.x));
    out.relative_gap = out.dual_gap / std::max(1.0, prob.primal_value(out.x));
    return out;
  }

  const auto& edges = graph->edges();
  Vector w = prob.residual(out.dual);
  Vector& g = out.dual;
  const double inv2b = 0.5 / b;
  out.converged = false;

  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    if (a > 0.0) {
      if (nonneg) {
        // With x >= 0 the l1 term is linear; g = 1 is always optimal and
        // leaves the most room for the edge coordinates.
        for (Index i = 0; i < n; ++i) {
          w[i] -= a * (1.0 - g[i]);
          g[i] = 1.0;
        }
      } else {
        for (Index i = 0; i < n; ++i) {
          const double c = w[i] + a * g[i];
          g[i] = clamp_unit(c / a);
          w[i] = c - a * g[i];
        }
      }
    }
    for (Index k = 0; k < m; ++k) {
      const Index i = edges[static_cast<std::size_t>(k)].a;
      const Index j = edges[static_cast<std::size_t>(k)].b;
      double& gk = g[n + k];
      const double ci = w[i] + b * gk;
      const double cj = w[j] - b * gk;
      // Same minimizer with and without the positive part: either the
      // unique root or the midpoint of the flat region.
      gk = clamp_unit((ci - cj) * inv2b);
      w[i] = ci - b * gk;
      w[j] = cj + b * gk;
    }

    w = prob.residual(g);
    const Vector x = prob.primal_from(w);
    const double primal = prob.primal_value(x);
    const double gap = std::max(0.0, primal - prob.dual_value(x));
    out.sweeps_used = sweep;
    out.dual_gap = gap;
    out.relative_gap = gap / std::max(1.0, primal);
    if (out.relative_gap <= cfg.gap_tol) {
      out.converged = true;
      break;
    }
  }
  out.x = prob.primal_from(w);
  return out;
}

ProxResult prox_gauge(const VectorRef& y, double t, const GaugeSpec& g, const TVProxConfig& cfg,
                      const Vector* warm_dual) {
  if (t < 0.0) throw std::invalid_argument("prox_gauge: negative threshold");
  if (g.graph() && g.graph()->node_count() != y.size()) {
    throw std::invalid_argument("prox_gauge: vector length does not match the gauge graph");
  }
  const double l2_threshold = t * g.nu2();
  const Index dual_size =
      y.size() + (g.graph() ? static_cast<Index>(g.graph()->edge_count()) : 0);

  // Both stages are nonexpansive and fix the origin, so |stage1(y)| <= |y|
  // and the l2 shrink kills the column outright.
  if (l2_threshold > 0.0 && y.norm() <= l2_threshold) {
    ProxResult out;
    out.x = Vector::Zero(y.size());
    out.dual = (warm_dual && warm_dual->size() == dual_size) ? *warm_dual
                                                              : Vector::Zero(dual_size);
    return out;
  }

  ProxResult out;
  if (g.nu1() == 0.0 && g.nu_tv() == 0.0) {
    out.x = g.nonneg() ? project_nonneg(y) : Vector(y);
    out.dual = Vector::Zero(dual_size);
  } else {
    out = prox_l1_tv(y, t, g.nu1(), g.nu_tv(), g.graph(), g.nonneg(), cfg, warm_dual);
  }
  if (l2_threshold > 0.0) out.x = prox_l2(out.x, l2_threshold);
  return out;
}

}  // namespace smf
