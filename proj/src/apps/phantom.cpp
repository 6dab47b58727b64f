#include "smf/apps/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>

namespace smf::apps {

PhantomSpec PhantomSpec::paper_scale() {
  PhantomSpec s;
  s.height = 120;
  s.width = 125;
  s.frames = 200;
  s.n_regions = 19;
  s.spikes_per_region = 5;
  s.max_side = 16;
  s.gap = 1;
  return s;
}

namespace {

struct Rect {
  Index r0, c0, h, w;
  bool near(const Rect& o, Index gap) const {
    return r0 < o.r0 + o.h + gap && o.r0 < r0 + h + gap && c0 < o.c0 + o.w + gap && o.c0 < c0 + w + gap;
  }
};

void validate(const PhantomSpec& s) {
  if (s.height < 1 || s.width < 1 || s.frames < 1) throw std::invalid_argument("phantom: empty shape");
  if (s.n_regions < 0 || s.spikes_per_region < 0 || s.spikes_per_region > s.frames) {
    throw std::invalid_argument("phantom: bad region or spike count");
  }
  if (s.min_side < 1 || s.max_side < s.min_side || s.max_side > std::min(s.height, s.width)) {
    throw std::invalid_argument("phantom: bad region side range");
  }
  if (s.gap < 1) throw std::invalid_argument("phantom: gap must be >= 1");
  if (!(s.tau > 0.0) || !(s.dt > 0.0)) throw std::invalid_argument("phantom: tau and dt must be > 0");
  if (std::isnan(s.snr_db) || s.snr_db == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("phantom: snr_db must be a number or +inf");
  }
}

}  // namespace

PhantomData gen_phantom(const PhantomSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<Index> side(spec.min_side, spec.max_side);

  std::vector<Rect> rects;
  int attempts = 0;
  while (static_cast<Index>(rects.size()) < spec.n_regions) {
    if (++attempts > 100000) throw std::invalid_argument("phantom: regions do not fit disjointly");
    Rect r{0, 0, side(rng), side(rng)};
    r.r0 = std::uniform_int_distribution<Index>(0, spec.height - r.h)(rng);
    r.c0 = std::uniform_int_distribution<Index>(0, spec.width - r.w)(rng);
    if (std::none_of(rects.begin(), rects.end(), [&](const Rect& o) { return r.near(o, spec.gap); })) {
      rects.push_back(r);
    }
  }

  const Index npix = spec.height * spec.width;
  PhantomData d;
  d.U_true = Matrix::Zero(spec.frames, spec.n_regions);
  d.V_true = Matrix::Zero(npix, spec.n_regions);
  d.labels = LabelImage::Zero(spec.height, spec.width);
  std::vector<Index> frames(static_cast<std::size_t>(spec.frames));
  for (Index k = 0; k < spec.n_regions; ++k) {
    const Rect& r = rects[k];
    for (Index i = r.r0; i < r.r0 + r.h; ++i) {
      for (Index j = r.c0; j < r.c0 + r.w; ++j) {
        d.V_true(i * spec.width + j, k) = 1.0;
        d.labels(i, j) = static_cast<int>(k + 1);
      }
    }
    std::iota(frames.begin(), frames.end(), Index{0});
    std::shuffle(frames.begin(), frames.end(), rng);
    for (Index s = 0; s < spec.spikes_per_region; ++s) d.U_true(frames[s], k) = 1.0;
  }

  const LinearOperator D(op::TemporalConv{spec.tau, spec.dt, spec.frames});
  d.Y = D.apply(d.U_true * d.V_true.transpose());
  if (std::isfinite(spec.snr_db)) {
    const double power = d.Y.squaredNorm() / static_cast<double>(d.Y.size());
    d.noise_sigma = std::sqrt(power / std::pow(10.0, spec.snr_db / 10.0));
    std::normal_distribution<double> noise(0.0, d.noise_sigma);
    for (Index i = 0; i < d.Y.rows(); ++i)
      for (Index j = 0; j < d.Y.cols(); ++j) d.Y(i, j) += noise(rng);
  }
  return d;
}

namespace {

double data_std(const Matrix& Y) {
  const double mean = Y.mean();
  return std::sqrt((Y.array() - mean).square().mean());
}

}  // namespace

ProblemSpec phantom_problem(const PhantomData& data, const PhantomSpec& spec, const RegPreset& preset) {
  double sigma = preset.noise_sigma ? data.noise_sigma : data_std(data.Y);
  if (!(sigma > 0.0)) sigma = data_std(data.Y);
  const double lambda = preset.lambda_scale * sigma;

  auto chain = preset.nu_u[1] > 0.0 ? std::make_shared<const NeighborGraph>(NeighborGraph::chain(spec.frames))
                                    : nullptr;
  auto lattice = preset.nu_v[1] > 0.0
                     ? std::make_shared<const NeighborGraph>(
                           NeighborGraph::lattice(spec.height, spec.width, Connectivity::Eight))
                     : nullptr;
  GaugeSpec gu(preset.nu_u[0], preset.nu_u[1], preset.nu_u[2], false, chain);
  GaugeSpec gv(preset.nu_v[0], preset.nu_v[1], preset.nu_v[2], false, lattice);
  return ProblemSpec(data.Y, LinearOperator(op::TemporalConv{spec.tau, spec.dt, spec.frames}), std::nullopt,
                     Rank1Regularizer(RegularizerForm::Product, gu, gv), lambda);
}

PhantomRunResult run_phantom(const PhantomData& data, const PhantomSpec& spec,
                             const PhantomRunSettings& settings) {
  const ProblemSpec p = phantom_problem(data, spec, settings.preset);
  SolverConfig cfg = settings.solver;
  cfg.init = settings.init;

  PhantomRunResult out;
  out.lambda = p.lambda;
  out.solve = run(p, cfg);
  out.objective = objective(p, out.solve.model);
  out.segmentation =
      segment(out.solve.model.V, spec.height, spec.width, settings.support_tol, settings.overlap_thresh);
  out.region_iou = best_iou_per_region(data.labels, out.segmentation.masks());
  out.recovered = std::count_if(out.region_iou.begin(), out.region_iou.end(),
                                [&](double v) { return v >= settings.iou_threshold; });
  return out;
}

}  // namespace smf::apps
