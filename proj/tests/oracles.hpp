// Reference computations used only by the tests. Deliberately naive: dense
// linear algebra and slow first-order loops, independent of the library's
// own algorithms.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "smf/linops.hpp"
#include "smf/regularizers.hpp"

namespace oracle {

using smf::Index;
using smf::Matrix;
using smf::Vector;

inline Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix M(r, c);
  for (Index i = 0; i < M.size(); ++i) M.data()[i] = n(rng);
  return M;
}

inline Vector random_vector(Index n, std::mt19937_64& rng) { return random_matrix(n, 1, rng).col(0); }

inline double sigma_max(const Matrix& Z) {
  if (Z.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(Z);
  return svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
}

/// Singular value soft-thresholding.
inline Matrix svt(const Matrix& Y, double lambda) {
  Eigen::JacobiSVD<Matrix> svd(Y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector s = (svd.singularValues().array() - lambda).max(0.0).matrix();
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

/// Optimal value of 1/2|Y - X|^2 + lambda |X|_* .
inline double svt_objective(const Matrix& Y, double lambda) {
  Eigen::JacobiSVD<Matrix> svd(Y);
  const Vector s = (svd.singularValues().array() - lambda).max(0.0).matrix();
  const Matrix X = svt(Y, lambda);
  return 0.5 * (Y - X).squaredNorm() + lambda * s.sum();
}

/// Edge-node incidence matrix: row k is e_a - e_b for edge k.
inline Matrix incidence(const smf::NeighborGraph& g) {
  Matrix D = Matrix::Zero(static_cast<Index>(g.edge_count()), g.node_count());
  for (std::size_t k = 0; k < g.edge_count(); ++k) {
    D(static_cast<Index>(k), g.edges()[k].a) = 1.0;
    D(static_cast<Index>(k), g.edges()[k].b) = -1.0;
  }
  return D;
}

inline double gauge(const Vector& x, double nu1, double nu_tv, double nu2, const Matrix& D, bool nonneg) {
  if (nonneg && (x.array() < 0.0).any()) return INFINITY;
  double v = nu1 * x.lpNorm<1>() + nu2 * x.norm();
  if (nu_tv > 0.0) v += nu_tv * (D * x).lpNorm<1>();
  return v;
}

/// argmin_x 1/2|x - y|^2 + t (nu1|x|_1 + nu_tv|Dx|_1 + nu2|x|_2) [+ x >= 0],
/// by accelerated projected gradient on the joint dual (box x box x ball)
/// with function-value restarts.
inline Vector prox_by_dual_fista(const Vector& y, double t, double nu1, double nu_tv, double nu2, const Matrix& D,
                                 bool nonneg, int iters = 100000) {
  const Index n = y.size();
  const Index m = D.rows();
  const double a = t * nu1;
  const double b = t * nu_tv;
  const double c = t * nu2;
  // Columns of G^T: [a I, b D^T, c I].
  auto combine = [&](const Vector& g1, const Vector& g2, const Vector& g3) {
    Vector w = a * g1 + c * g3;
    if (m > 0) w += b * D.transpose() * g2;
    return w;
  };
  auto primal = [&](const Vector& w) {
    Vector x = y - w;
    return nonneg ? Vector(x.cwiseMax(0.0)) : x;
  };
  auto value = [&](const Vector& w) { return 0.5 * primal(w).squaredNorm(); };
  double dnorm2 = 0.0;
  if (m > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(D.transpose() * D);
    dnorm2 = eig.eigenvalues().maxCoeff();
  }
  const double L = a * a + b * b * dnorm2 + c * c + 1e-300;
  Vector g1 = Vector::Zero(n), g2 = Vector::Zero(m), g3 = Vector::Zero(n);
  Vector h1 = g1, h2 = g2, h3 = g3;
  double tk = 1.0;
  double fprev = value(combine(g1, g2, g3));
  for (int k = 0; k < iters; ++k) {
    const Vector x = primal(combine(h1, h2, h3));
    // Gradient of 1/2|(y - G^T g)_+|^2 with respect to g is -G x.
    Vector n1 = (h1 + (a / L) * x).cwiseMax(-1.0).cwiseMin(1.0);
    Vector n2 = m > 0 ? Vector((h2 + (b / L) * (D * x)).cwiseMax(-1.0).cwiseMin(1.0)) : Vector(h2);
    Vector n3 = h3 + (c / L) * x;
    if (n3.norm() > 1.0) n3 /= n3.norm();
    const double f = value(combine(n1, n2, n3));
    double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    if (f > fprev) {
      tn = 1.0;
      h1 = g1;
      h2 = g2;
      h3 = g3;
      tk = 1.0;
      continue;
    }
    const double mom = (tk - 1.0) / tn;
    h1 = n1 + mom * (n1 - g1);
    h2 = n2 + mom * (n2 - g2);
    h3 = n3 + mom * (n3 - g3);
    g1 = n1;
    g2 = n2;
    g3 = n3;
    tk = tn;
    fprev = f;
  }
  return primal(combine(g1, g2, g3));
}

/// dist(y - x, t * subdifferential of the gauge at x). Entries or edge
/// differences with magnitude <= tie_tol are treated as ties (free
/// subgradient in [-1, 1]); the remaining bounded least-squares problem is
/// solved by projected gradient followed by an exact active-set polish.
inline double subgradient_residual(const Vector& y, const Vector& x, double t, double nu1, double nu_tv, double nu2,
                                   const Matrix& D, bool nonneg, double tie_tol = 1e-9) {
  const Index n = x.size();
  const Index m = D.rows();
  // Free variables: l1 entries at 0, edges with ties, normal-cone entries
  // at 0 (nonneg), and the l2 ball when x = 0.
  Vector target = y - x;
  std::vector<Vector> cols;
  std::vector<std::pair<double, double>> bounds;
  for (Index i = 0; i < n; ++i) {
    const double sgn = x[i] > tie_tol ? 1.0 : (x[i] < -tie_tol ? -1.0 : 0.0);
    if (sgn != 0.0) {
      target[i] -= t * nu1 * sgn;
    } else if (nu1 > 0.0) {
      Vector e = Vector::Zero(n);
      e[i] = t * nu1;
      cols.push_back(e);
      bounds.emplace_back(-1.0, 1.0);
    }
    if (nonneg && x[i] <= tie_tol) {
      Vector e = Vector::Zero(n);
      e[i] = 1.0;
      cols.push_back(e);
      bounds.emplace_back(-INFINITY, 0.0);
    }
  }
  for (Index k = 0; k < m && nu_tv > 0.0; ++k) {
    const double d = D.row(k).dot(x);
    const Vector col = t * nu_tv * D.row(k).transpose();
    if (d > tie_tol) {
      target -= col;
    } else if (d < -tie_tol) {
      target += col;
    } else {
      cols.push_back(col);
      bounds.emplace_back(-1.0, 1.0);
    }
  }
  const bool zero = x.norm() <= tie_tol;
  if (!zero && nu2 > 0.0) target -= t * nu2 * x / x.norm();

  const Index p = static_cast<Index>(cols.size());
  Matrix M(n, p + (zero && nu2 > 0.0 ? n : 0));
  for (Index j = 0; j < p; ++j) M.col(j) = cols[j];
  const bool ball = zero && nu2 > 0.0;
  if (ball) M.rightCols(n) = t * nu2 * Matrix::Identity(n, n);
  const Index q = M.cols();
  if (q == 0) return target.norm();

  auto project = [&](Vector& z) {
    for (Index j = 0; j < p; ++j) z[j] = std::clamp(z[j], bounds[j].first, bounds[j].second);
    if (ball) {
      const double nb = z.tail(n).norm();
      if (nb > 1.0) z.tail(n) /= nb;
    }
  };
  Eigen::SelfAdjointEigenSolver<Matrix> eig(M.transpose() * M);
  const double L = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
  Vector z = Vector::Zero(q), zh = z, zprev = z;
  double tk = 1.0;
  double best = (target - M * z).norm();
  for (int k = 0; k < 20000; ++k) {
    Vector zn = zh + M.transpose() * (target - M * zh) / L;
    project(zn);
    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    zh = zn + ((tk - 1.0) / tn) * (zn - z);
    z = zn;
    tk = tn;
    best = std::min(best, (target - M * z).norm());
    if (k % 200 == 199 && (z - zprev).norm() < 1e-15) break;
    if (k % 200 == 199) zprev = z;
  }
  if (!ball) {
    // Polish: fix variables at their bounds, solve exactly for the rest.
    std::vector<Index> free_idx;
    Vector fixed_part = Vector::Zero(n);
    for (Index j = 0; j < p; ++j) {
      const bool at_lo = std::isfinite(bounds[j].first) && z[j] <= bounds[j].first + 1e-7;
      const bool at_hi = z[j] >= bounds[j].second - 1e-7;
      if (at_lo || at_hi) {
        fixed_part += M.col(j) * (at_lo ? bounds[j].first : bounds[j].second);
      } else {
        free_idx.push_back(j);
      }
    }
    Matrix F(n, static_cast<Index>(free_idx.size()));
    for (std::size_t j = 0; j < free_idx.size(); ++j) F.col(static_cast<Index>(j)) = M.col(free_idx[j]);
    const Vector rhs = target - fixed_part;
    Vector zf = F.cols() > 0 ? Vector(F.completeOrthogonalDecomposition().solve(rhs)) : Vector();
    bool feasible = true;
    for (std::size_t j = 0; j < free_idx.size(); ++j) {
      const auto [lo, hi] = bounds[free_idx[j]];
      if (zf[static_cast<Index>(j)] < lo - 1e-9 || zf[static_cast<Index>(j)] > hi + 1e-9) feasible = false;
    }
    if (feasible) best = std::min(best, (rhs - (F.cols() > 0 ? Vector(F * zf) : Vector::Zero(n))).norm());
  }
  return best;
}

/// Dense matrix of a linear map on vec(X) (column-major), built column by
/// column from unit inputs.
inline Matrix dense_of(const std::function<Matrix(const Matrix&)>& f, Index rows, Index cols) {
  Matrix probe = Matrix::Zero(rows, cols);
  const Matrix first = f(probe);
  Matrix out(first.size(), rows * cols);
  for (Index j = 0; j < rows * cols; ++j) {
    probe.setZero();
    probe.data()[j] = 1.0;
    const Matrix img = f(probe);
    out.col(j) = Eigen::Map<const Vector>(img.data(), img.size());
  }
  return out;
}

/// Central differences of a scalar function of a matrix.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& at, double h = 1e-6) {
  Matrix g(at.rows(), at.cols());
  Matrix probe = at;
  for (Index i = 0; i < at.size(); ++i) {
    const double keep = probe.data()[i];
    probe.data()[i] = keep + h;
    const double fp = f(probe);
    probe.data()[i] = keep - h;
    const double fm = f(probe);
    probe.data()[i] = keep;
    g.data()[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace oracle
