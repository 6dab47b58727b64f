#include "smf/apps/hsi.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <vector>
#include <stdexcept>

#include "smf/apps/metrics.hpp"
#include "smf/optimality.hpp"

namespace smf::apps {

HsiSpec HsiSpec::paper_scale() {
  HsiSpec s;
  s.height = 256;
  s.width = 256;
  s.bands = 180;
  s.true_rank = 15;
  return s;
}

namespace {

// 3x3 box blur, clamped at the borders.
Matrix blur(const Matrix& img) {
  Matrix out(img.rows(), img.cols());
  for (Index i = 0; i < img.rows(); ++i) {
    for (Index j = 0; j < img.cols(); ++j) {
      double s = 0.0;
      int n = 0;
      for (Index di = -1; di <= 1; ++di) {
        for (Index dj = -1; dj <= 1; ++dj) {
          const Index a = i + di;
          const Index b = j + dj;
          if (a < 0 || b < 0 || a >= img.rows() || b >= img.cols()) continue;
          s += img(a, b);
          ++n;
        }
      }
      out(i, j) = s / n;
    }
  }
  return out;
}

}  // namespace

HsiData hsi_simulate(const HsiSpec& spec) {
  const Index npix = spec.height * spec.width;
  if (spec.height < 1 || spec.width < 1 || spec.bands < 1) throw std::invalid_argument("hsi: empty shape");
  if (spec.true_rank < 1 || spec.true_rank > std::min(spec.bands, npix)) {
    throw std::invalid_argument("hsi: true_rank must be in [1, min(bands, pixels)]");
  }
  if (spec.sample_ratio < 1) throw std::invalid_argument("hsi: sample_ratio must be >= 1");

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Matrix spectra(spec.bands, spec.true_rank);
  for (Index k = 0; k < spec.true_rank; ++k) {
    for (Index b = 0; b < spec.bands; ++b) spectra(b, k) = 0.1;
    for (int bump = 0; bump < 2; ++bump) {
      const double center = unit(rng) * static_cast<double>(spec.bands);
      const double width = (0.1 + 0.15 * unit(rng)) * static_cast<double>(spec.bands);
      const double amp = 0.5 + 0.5 * unit(rng);
      for (Index b = 0; b < spec.bands; ++b) {
        const double z = (static_cast<double>(b) - center) / width;
        spectra(b, k) += amp * std::exp(-0.5 * z * z);
      }
    }
  }

  // Material map: a background material overpainted with two random
  // rectangles per remaining material; abundances are the one-hot labels.
  std::vector<Index> label(static_cast<std::size_t>(npix), 0);
  for (Index k = 1; k < spec.true_rank; ++k) {
    for (int rect = 0; rect < 2; ++rect) {
      const Index h = std::max<Index>(1, static_cast<Index>((0.2 + 0.3 * unit(rng)) * spec.height));
      const Index w = std::max<Index>(1, static_cast<Index>((0.2 + 0.3 * unit(rng)) * spec.width));
      const Index r0 = std::uniform_int_distribution<Index>(0, spec.height - h)(rng);
      const Index c0 = std::uniform_int_distribution<Index>(0, spec.width - w)(rng);
      for (Index i = r0; i < r0 + h; ++i)
        for (Index j = c0; j < c0 + w; ++j) label[static_cast<std::size_t>(i * spec.width + j)] = k;
    }
  }
  Matrix abundances(npix, spec.true_rank);
  for (Index k = 0; k < spec.true_rank; ++k) {
    Matrix img(spec.height, spec.width);
    for (Index i = 0; i < spec.height; ++i)
      for (Index j = 0; j < spec.width; ++j)
        img(i, j) = label[static_cast<std::size_t>(i * spec.width + j)] == k ? 1.0 : 0.0;
    if (spec.mixed_borders) img = blur(img);
    for (Index i = 0; i < spec.height; ++i)
      for (Index j = 0; j < spec.width; ++j) abundances(i * spec.width + j, k) = img(i, j);
  }

  HsiData d{spectra * abundances.transpose(), spectra, abundances,
            LinearOperator(op::RandomPhaseConv{spec.height, spec.width, spec.sample_ratio, spec.seed ^ 0xa5a5}),
            Matrix(), 0.0};
  d.Y = d.A.apply(d.X_true);
  if (spec.sampling_snr_db) {
    const double power = d.Y.squaredNorm() / static_cast<double>(d.Y.size());
    d.noise_sigma = std::sqrt(power / std::pow(10.0, *spec.sampling_snr_db / 10.0));
    std::normal_distribution<double> noise(0.0, d.noise_sigma);
    for (Index i = 0; i < d.Y.rows(); ++i)
      for (Index j = 0; j < d.Y.cols(); ++j) d.Y(i, j) += noise(rng);
  }
  return d;
}

HsiRunResult run_hsi(const HsiData& data, const HsiSpec& spec, const HsiRunSettings& settings) {
  if (settings.columns < 1) throw std::invalid_argument("hsi: columns must be >= 1");
  const Index npix = spec.height * spec.width;
  const double scale = polar_exact_l2l2(data.A.adjoint(data.Y)).value;
  const double lambda = settings.lambda_rel * (scale > 0.0 ? scale : 1.0);

  auto lattice = std::make_shared<const NeighborGraph>(
      NeighborGraph::lattice(spec.height, spec.width, Connectivity::Four));
  GaugeSpec gu(0.0, 0.0, 1.0);
  GaugeSpec gv(0.0, settings.nu_tv, 1.0, false, settings.nu_tv > 0.0 ? lattice : nullptr);
  const ProblemSpec p(data.Y, data.A, std::nullopt, Rank1Regularizer(RegularizerForm::Product, gu, gv),
                      lambda);

  FactorModel init{Matrix::Zero(spec.bands, settings.columns), Matrix::Zero(npix, settings.columns),
                   std::nullopt};
  std::mt19937_64 rng(settings.init_seed);
  std::vector<Index> pixels(static_cast<std::size_t>(npix));
  std::iota(pixels.begin(), pixels.end(), Index{0});
  std::shuffle(pixels.begin(), pixels.end(), rng);
  for (Index k = 0; k < settings.columns; ++k) init.V(pixels[k % npix], k) = 1.0;

  HsiRunResult out;
  out.lambda = lambda;
  out.solve = run(p, settings.solver, std::move(init));
  out.error = recovery_error(data.X_true, out.solve.model.U, out.solve.model.V);
  return out;
}

}  // namespace smf::apps
