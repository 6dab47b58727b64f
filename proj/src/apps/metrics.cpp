#include "smf/apps/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace smf::apps {

double recovery_error(const Matrix& X_true, const Matrix& U, const Matrix& V) {
  if (U.rows() != X_true.rows() || V.rows() != X_true.cols() || U.cols() != V.cols()) {
    throw std::invalid_argument("recovery_error: shape mismatch");
  }
  const Matrix X = U * V.transpose();
  const double ref = X_true.norm();
  if (ref == 0.0) return X.norm();
  return (X_true - X).norm() / ref;
}

double iou(const Mask& a, const Mask& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("iou: mask shapes differ");
  }
  const auto inter = (a && b).count();
  const auto uni = (a || b).count();
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

Mask label_mask(const LabelImage& labels, int label) {
  return (labels.array() == label);
}

std::vector<double> best_iou_per_region(const LabelImage& truth, const std::vector<Mask>& found) {
  const int n = truth.size() > 0 ? truth.maxCoeff() : 0;
  std::vector<double> best(static_cast<std::size_t>(std::max(n, 0)), 0.0);
  for (int k = 1; k <= n; ++k) {
    const Mask region = label_mask(truth, k);
    for (const Mask& m : found) best[k - 1] = std::max(best[k - 1], iou(region, m));
  }
  return best;
}

}  // namespace smf::apps
