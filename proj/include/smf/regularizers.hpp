#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "smf/types.hpp"

namespace smf {

struct Edge {
  Index a;
  Index b;
};

enum class Connectivity { Four, Eight };

/// Undirected neighbourhood graph used by the total-variation term.
/// Edges are stored with a < b, each unordered pair at most once.
class NeighborGraph {
 public:
  NeighborGraph(Index node_count, std::vector<Edge> edges);

  static NeighborGraph chain(Index n);
  /// Pixel (row, col) maps to node row * width + col.
  static NeighborGraph lattice(Index height, Index width, Connectivity conn);

  Index node_count() const { return node_count_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t edge_count() const { return edges_.size(); }

 private:
  Index node_count_;
  std::vector<Edge> edges_;
};

/// Anisotropic TV: sum over edges of |x_a - x_b|.
double eval_tv(const NeighborGraph& graph, const VectorRef& x);

/// Weighted column gauge nu1*|x|_1 + nu_tv*TV(x) + nu2*|x|_2, optionally
/// restricted to the nonnegative orthant.
class GaugeSpec {
 public:
  GaugeSpec(double nu1, double nu_tv, double nu2, bool nonneg = false,
            std::shared_ptr<const NeighborGraph> graph = nullptr);

  static GaugeSpec l1(double weight = 1.0) { return GaugeSpec(weight, 0.0, 0.0); }
  static GaugeSpec l2(double weight = 1.0) { return GaugeSpec(0.0, 0.0, weight); }

  double nu1() const { return nu1_; }
  double nu_tv() const { return nu_tv_; }
  double nu2() const { return nu2_; }
  bool nonneg() const { return nonneg_; }
  const NeighborGraph* graph() const { return graph_.get(); }
  const std::shared_ptr<const NeighborGraph>& graph_ptr() const { return graph_; }

  bool is_pure_l2() const { return nu1_ == 0.0 && nu_tv_ == 0.0 && !nonneg_; }
  bool is_pure_l1() const { return nu_tv_ == 0.0 && nu2_ == 0.0 && !nonneg_; }

 private:
  double nu1_;
  double nu_tv_;
  double nu2_;
  bool nonneg_;
  std::shared_ptr<const NeighborGraph> graph_;
};

/// Returns +infinity when the nonnegativity indicator is violated.
double eval_gauge(const GaugeSpec& g, const VectorRef& x);

enum class RegularizerForm { Product, Sum };

/// theta(u, v) = sigma_u(u) * sigma_v(v)          (Product)
/// theta(u, v) = (sigma_u(u)^2 + sigma_v(v)^2) / 2  (Sum)
class Rank1Regularizer {
 public:
  Rank1Regularizer(RegularizerForm form, GaugeSpec u_gauge, GaugeSpec v_gauge)
      : form_(form), u_gauge_(std::move(u_gauge)), v_gauge_(std::move(v_gauge)) {}

  /// Nuclear-norm generating regularizer |u|_2 |v|_2.
  static Rank1Regularizer nuclear() {
    return {RegularizerForm::Product, GaugeSpec::l2(), GaugeSpec::l2()};
  }

  RegularizerForm form() const { return form_; }
  const GaugeSpec& u_gauge() const { return u_gauge_; }
  const GaugeSpec& v_gauge() const { return v_gauge_; }

 private:
  RegularizerForm form_;
  GaugeSpec u_gauge_;
  GaugeSpec v_gauge_;
};

double combine_theta(RegularizerForm form, double sigma_u, double sigma_v);
double eval_theta(const Rank1Regularizer& reg, const VectorRef& u, const VectorRef& v);
/// Sum of theta over paired columns of U and V.
double sum_theta(const Rank1Regularizer& reg, const Matrix& U, const Matrix& V);

struct RegularizerSample {
  Vector u;
  Vector v;
  double alpha = 0.0;
  double violation = 0.0;
};

struct RegularizerValidation {
  bool passed = true;
  int samples_checked = 0;
  double worst_homogeneity_error = 0.0;
  std::optional<RegularizerSample> failing_sample;
};

/// Sample-based check of the rank-1 regularizer axioms: degree-2 positive
/// homogeneity, nonnegativity, theta(0,0) = 0 and theta > 0 off the zero
/// product. Never throws on a violation; the worst sample is reported.
/// Vector lengths default to the gauge graph size (or 8 without a graph).
RegularizerValidation validate_rank1_regularizer(const Rank1Regularizer& reg, int samples,
                                                 std::uint64_t seed, Index u_dim = 0,
                                                 Index v_dim = 0);

}  // namespace smf
