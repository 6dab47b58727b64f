#pragma once

#include <cstdint>
#include <optional>

#include "smf/linops.hpp"
#include "smf/solver.hpp"
#include "smf/types.hpp"

namespace smf::apps {

struct HsiSpec {
  Index height = 32;
  Index width = 32;
  Index bands = 20;
  Index true_rank = 5;
  Index sample_ratio = 4;
  std::optional<double> sampling_snr_db;
  std::uint64_t seed = 0;
  bool mixed_borders = false;  // 3x3 box blur of the abundance maps

  static HsiSpec paper_scale();
};

struct HsiData {
  Matrix X_true;  // bands x pixels
  Matrix spectra;     // bands x true_rank
  Matrix abundances;  // pixels x true_rank
  LinearOperator A;
  Matrix Y;  // bands x kept samples
  double noise_sigma = 0.0;
};

/// Smooth nonnegative spectra times one-hot abundance maps of a random
/// material layout, sampled by a random-phase convolution with one kept sample per
/// `sample_ratio` pixels.
HsiData hsi_simulate(const HsiSpec& spec);

struct HsiRunSettings {
  Index columns = 15;
  /// lambda = lambda_rel * |A^T(Y)|_2.
  double lambda_rel = 1e-3;
  double nu_tv = 0.3;
  SolverConfig solver;
  std::uint64_t init_seed = 0;
};

struct HsiRunResult {
  SolveResult solve;
  double error = 0.0;
  double lambda = 0.0;
};

/// U in R^{bands x columns} with an l2 gauge, V with TV + l2 on the pixel
/// lattice; U starts at 0 and each V column at one random pixel.
HsiRunResult run_hsi(const HsiData& data, const HsiSpec& spec, const HsiRunSettings& settings);

}  // namespace smf::apps
