#pragma once

#include <vector>

#include "smf/types.hpp"

namespace smf::apps {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using LabelImage = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

/// |X_true - U V^T|_F / |X_true|_F, or |U V^T|_F when X_true is zero.
double recovery_error(const Matrix& X_true, const Matrix& U, const Matrix& V);

/// Intersection over union; 1 when both masks are empty.
double iou(const Mask& a, const Mask& b);

/// Pixels carrying `label`.
Mask label_mask(const LabelImage& labels, int label);

/// For each true label 1..max, the best IoU against any candidate mask.
std::vector<double> best_iou_per_region(const LabelImage& truth, const std::vector<Mask>& found);

}  // namespace smf::apps
