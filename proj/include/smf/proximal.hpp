#pragma once

#include "smf/regularizers.hpp"
#include "smf/types.hpp"

namespace smf {

struct TVProxConfig {
  int max_sweeps = 500;
  /// Relative duality gap, measured against max(1, primal value).
  double gap_tol = 1e-8;
};

struct ProxResult {
  Vector x;
  /// Dual point: first node_count entries are the l1 block, the rest follow
  /// the graph edge order. Reusable as a warm start.
  Vector dual;
  double dual_gap = 0.0;      // absolute primal - dual
  double relative_gap = 0.0;  // dual_gap / max(1, primal)
  int sweeps_used = 0;
  bool converged = true;
};

Vector prox_l1(const VectorRef& y, double t);
Vector prox_l2(const VectorRef& y, double t);
Vector project_nonneg(const VectorRef& y);

/// argmin_x 1/2|y - x|^2 + t*nu1*|x|_1 + t*nu_tv*TV(x)  [s.t. x >= 0]
///
/// Solved on the dual  min_g 1/2|(y - G^T g)|^2, |g|_inf <= 1, where
/// G = [t*nu1 I; t*nu_tv D] and D is the edge difference operator. With the
/// nonnegativity constraint the dual objective uses the positive part of
/// y - G^T g, which keeps every box point feasible. Coordinates are updated
/// in a fixed cyclic order (l1 block, then edges) with exact scalar
/// minimization; the primal point is x = y - G^T g (clipped at 0 when
/// nonneg). Stops when the relative duality gap reaches cfg.gap_tol or after
/// cfg.max_sweeps; `converged` is false in the latter case.
ProxResult prox_l1_tv(const VectorRef& y, double t, double nu1, double nu_tv,
                      const NeighborGraph* graph, bool nonneg, const TVProxConfig& cfg,
                      const Vector* warm_dual = nullptr);

/// Prox of t*sigma for a column gauge: the l1/TV/nonneg part first, then the
/// l2 block shrink with threshold t*nu2.
ProxResult prox_gauge(const VectorRef& y, double t, const GaugeSpec& g, const TVProxConfig& cfg,
                      const Vector* warm_dual = nullptr);

/// Absolute duality gap of the l1+TV prox problem at the dual point `dual`;
/// the primal point is rebuilt from it. Values below -1e-12 are left as is
/// (they indicate a bug), tiny negatives are clamped to 0.
double tv_duality_gap(const VectorRef& y, const VectorRef& dual, double t, double nu1,
                      double nu_tv, const NeighborGraph* graph, bool nonneg);

}  // namespace smf
