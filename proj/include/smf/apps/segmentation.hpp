#pragma once

#include <vector>

#include "smf/apps/metrics.hpp"
#include "smf/types.hpp"

namespace smf::apps {

struct Component {
  std::vector<Index> pixels;   // sorted linear indices, p = row * width + col
  std::vector<Index> columns;  // source columns of V
};

struct SegmentationResult {
  LabelImage labels;  // 0 = background, k = components[k - 1]
  std::vector<Component> components;

  Mask component_mask(std::size_t k) const;
  std::vector<Mask> masks() const;
};

/// Connected components (8-neighbourhood) of each column's support
/// |V_ji| > support_tol * max_j |V_ji|; components of different columns whose
/// overlap exceeds overlap_thresh of the smaller one are merged. Components
/// are ordered by their smallest pixel. A pixel covered by several components
/// is labelled with the one whose columns reach the largest normalized
/// magnitude there.
SegmentationResult segment(const Matrix& V, Index height, Index width, double support_tol = 0.05,
                           double overlap_thresh = 0.10);

}  // namespace smf::apps
