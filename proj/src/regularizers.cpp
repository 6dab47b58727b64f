#include "smf/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

namespace smf {

NeighborGraph::NeighborGraph(Index node_count, std::vector<Edge> edges)
    : node_count_(node_count), edges_(std::move(edges)) {
  if (node_count_ <= 0) {
    throw std::invalid_argument("NeighborGraph: node_count must be positive");
  }
  std::set<std::pair<Index, Index>> seen;
  for (auto& e : edges_) {
    if (e.a == e.b) {
      throw std::invalid_argument("NeighborGraph: self-loop at node " + std::to_string(e.a));
    }
    if (e.a < 0 || e.b < 0 || e.a >= node_count_ || e.b >= node_count_) {
      throw std::invalid_argument("NeighborGraph: edge index out of range");
    }
    if (e.a > e.b) std::swap(e.a, e.b);
    if (!seen.emplace(e.a, e.b).second) {
      throw std::invalid_argument("NeighborGraph: duplicate edge (" + std::to_string(e.a) +
                                  ", " + std::to_string(e.b) + ")");
    }
  }
}

NeighborGraph NeighborGraph::chain(Index n) {
  std::vector<Edge> edges;
  for (Index i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
  return NeighborGraph(n, std::move(edges));
}

NeighborGraph NeighborGraph::lattice(Index height, Index width, Connectivity conn) {
  if (height <= 0 || width <= 0) {
    throw std::invalid_argument("NeighborGraph::lattice: dimensions must be positive");
  }
  std::vector<Edge> edges;
  auto id = [width](Index r, Index c) { return r * width + c; };
  for (Index r = 0; r < height; ++r) {
    for (Index c = 0; c < width; ++c) {
      if (c + 1 < width) edges.push_back({id(r, c), id(r, c + 1)});
      if (r + 1 < height) edges.push_back({id(r, c), id(r + 1, c)});
      if (conn == Connectivity::Eight && r + 1 < height) {
        if (c + 1 < width) edges.push_back({id(r, c), id(r + 1, c + 1)});
        if (c > 0) edges.push_back({id(r, c), id(r + 1, c - 1)});
      }
    }
  }
  return NeighborGraph(height * width, std::move(edges));
}

double eval_tv(const NeighborGraph& graph, const VectorRef& x) {
  if (x.size() != graph.node_count()) {
    throw std::invalid_argument("eval_tv: vector length " + std::to_string(x.size()) +
                                " != graph size " + std::to_string(graph.node_count()));
  }
  double tv = 0.0;
  for (const auto& e : graph.edges()) tv += std::abs(x[e.a] - x[e.b]);
  return tv;
}

GaugeSpec::GaugeSpec(double nu1, double nu_tv, double nu2, bool nonneg,
                     std::shared_ptr<const NeighborGraph> graph)
    : nu1_(nu1), nu_tv_(nu_tv), nu2_(nu2), nonneg_(nonneg), graph_(std::move(graph)) {
  if (!(nu1_ >= 0.0) || !(nu_tv_ >= 0.0) || !(nu2_ >= 0.0) || !std::isfinite(nu1_) ||
      !std::isfinite(nu_tv_) || !std::isfinite(nu2_)) {
    throw std::invalid_argument("GaugeSpec: weights must be finite and nonnegative");
  }
  // TV alone vanishes on constant vectors, so a strictly positive l1 or l2
  // weight is needed for the gauge to be positive off the origin.
  if (!(nu1_ + nu2_ > 0.0)) {
    throw std::invalid_argument("GaugeSpec: nu1 + nu2 must be positive");
  }
  if (nu_tv_ > 0.0 && !graph_) {
    throw std::invalid_argument("GaugeSpec: a neighbour graph is required when nu_tv > 0");
  }
}

double eval_gauge(const GaugeSpec& g, const VectorRef& x) {
  if (g.graph() && x.size() != g.graph()->node_count()) {
    throw std::invalid_argument("eval_gauge: vector length does not match the graph");
  }
  if (g.nonneg() && (x.array() < 0.0).any()) return std::numeric_limits<double>::infinity();
  double value = 0.0;
  if (g.nu1() > 0.0) value += g.nu1() * x.lpNorm<1>();
  if (g.nu_tv() > 0.0) value += g.nu_tv() * eval_tv(*g.graph(), x);
  if (g.nu2() > 0.0) value += g.nu2() * x.norm();
  return value;
}

double combine_theta(RegularizerForm form, double sigma_u, double sigma_v) {
  if (form == RegularizerForm::Product) {
    // 0 * inf: the indicator still applies, so an infeasible factor wins.
    if (std::isinf(sigma_u) || std::isinf(sigma_v)) {
      return std::numeric_limits<double>::infinity();
    }
    return sigma_u * sigma_v;
  }
  return 0.5 * (sigma_u * sigma_u + sigma_v * sigma_v);
}

double eval_theta(const Rank1Regularizer& reg, const VectorRef& u, const VectorRef& v) {
  return combine_theta(reg.form(), eval_gauge(reg.u_gauge(), u), eval_gauge(reg.v_gauge(), v));
}

double sum_theta(const Rank1Regularizer& reg, const Matrix& U, const Matrix& V) {
  if (U.cols() != V.cols()) {
    throw std::invalid_argument("sum_theta: U has " + std::to_string(U.cols()) +
                                " columns but V has " + std::to_string(V.cols()));
  }
  double total = 0.0;
  for (Index i = 0; i < U.cols(); ++i) total += eval_theta(reg, U.col(i), V.col(i));
  return total;
}

namespace {

Index default_dim(const GaugeSpec& g, Index requested) {
  if (requested > 0) return requested;
  if (g.graph()) return g.graph()->node_count();
  return 8;
}

Vector draw(std::mt19937_64& rng, Index n, bool nonneg) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = nonneg ? std::abs(normal(rng)) : normal(rng);
  return x;
}

}  // namespace

RegularizerValidation validate_rank1_regularizer(const Rank1Regularizer& reg, int samples,
                                                 std::uint64_t seed, Index u_dim, Index v_dim) {
  if (samples < 1) throw std::invalid_argument("validate_rank1_regularizer: samples must be >= 1");
  const Index m = default_dim(reg.u_gauge(), u_dim);
  const Index n = default_dim(reg.v_gauge(), v_dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> alpha_dist(0.0, 4.0);

  RegularizerValidation report;
  auto record = [&report](RegularizerSample s) {
    report.passed = false;
    if (!report.failing_sample || s.violation > report.failing_sample->violation) {
      report.failing_sample = std::move(s);
    }
  };

  if (eval_theta(reg, Vector::Zero(m), Vector::Zero(n)) != 0.0) {
    record({Vector::Zero(m), Vector::Zero(n), 0.0, 1.0});
  }
  for (int s = 0; s < samples; ++s) {
    Vector u = draw(rng, m, reg.u_gauge().nonneg());
    Vector v = draw(rng, n, reg.v_gauge().nonneg());
    const double alpha = alpha_dist(rng);
    const double base = eval_theta(reg, u, v);
    const double scaled = eval_theta(reg, alpha * u, alpha * v);
    const double expected = alpha * alpha * base;
    const double err = std::abs(scaled - expected) / std::max(1.0, expected);
    report.worst_homogeneity_error = std::max(report.worst_homogeneity_error, err);
    ++report.samples_checked;
    if (!(err <= 1e-10)) record({u, v, alpha, err});
    // u v^T != 0 for continuous draws, so theta must be strictly positive.
    if (!(base > 0.0)) record({u, v, alpha, 1.0});
  }
  return report;
}

}  // namespace smf
