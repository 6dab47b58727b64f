#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "smf/apps/config.hpp"
#include "smf/apps/metrics.hpp"
#include "smf/apps/segmentation.hpp"
#include "smf/solver.hpp"
#include "smf/types.hpp"

namespace smf::apps {

struct PhantomSpec {
  Index height = 32;
  Index width = 32;
  Index frames = 60;
  Index n_regions = 6;
  Index spikes_per_region = 3;
  double tau = 1.3333;
  double dt = 0.1;
  double snr_db = -16.0;  // +inf for noiseless data
  std::uint64_t seed = 0;
  Index min_side = 4;
  Index max_side = 5;
  Index gap = 3;  // minimum number of background pixels between regions

  static PhantomSpec paper_scale();
};

struct PhantomData {
  Matrix Y;       // frames x pixels
  Matrix U_true;  // spike trains, frames x regions
  Matrix V_true;  // region indicators, pixels x regions
  LabelImage labels;
  double noise_sigma = 0.0;
};

/// Disjoint axis-aligned rectangles (at least `gap` pixels apart), random spike
/// frames per region, Y = D U_true V_true^T + noise with
/// SNR = 10 log10(mean clean^2 / sigma^2).
PhantomData gen_phantom(const PhantomSpec& spec);

struct PhantomRunSettings {
  RegPreset preset = presets::phantom_slrtv();
  InitStrategy init = init::IdentityColumns{};
  SolverConfig solver;
  double support_tol = 0.05;
  double overlap_thresh = 0.10;
  double iou_threshold = 0.8;
};

struct PhantomRunResult {
  SolveResult solve;
  SegmentationResult segmentation;
  std::vector<double> region_iou;  // best IoU per true region
  Index recovered = 0;             // regions with IoU >= iou_threshold
  double lambda = 0.0;
  double objective = 0.0;
};

/// Builds the calcium problem (A = temporal decay filter, V gauge on an
/// 8-connected lattice), solves it and segments the spatial factors.
ProblemSpec phantom_problem(const PhantomData& data, const PhantomSpec& spec, const RegPreset& preset);
PhantomRunResult run_phantom(const PhantomData& data, const PhantomSpec& spec,
                             const PhantomRunSettings& settings);

}  // namespace smf::apps
