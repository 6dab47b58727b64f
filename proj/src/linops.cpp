#include "smf/linops.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace smf {

namespace {

// Plan creation in FFTW is not thread-safe; execution with the new-array
// interface is.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::string shape_str(const Matrix& X) {
  return std::to_string(X.rows()) + "x" + std::to_string(X.cols());
}

[[noreturn]] void shape_error(const char* what, const Matrix& X) {
  throw std::invalid_argument(std::string(what) + ": incompatible shape " + shape_str(X));
}

}  // namespace

struct LinearOperator::Impl {
  // RandomPhaseConv state
  Index height = 0;
  Index width = 0;
  Index half_width = 0;  // width / 2 + 1
  std::vector<std::complex<double>> kernel;  // height x half_width frequency response
  std::vector<Index> keep;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  // TemporalConv decay per frame
  double decay = 0.0;

  std::mutex norm_mutex;
  std::optional<double> cached_norm;

  Impl() = default;
  Impl(const Impl&) = delete;
  Impl& operator=(const Impl&) = delete;
  ~Impl() {
    std::lock_guard lock(fftw_planner_mutex());
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }

  void init_random_phase(const op::RandomPhaseConv& spec) {
    if (spec.height <= 0 || spec.width <= 0 || spec.sample_ratio < 1) {
      throw std::invalid_argument("RandomPhaseConv: invalid dimensions or sample ratio");
    }
    height = spec.height;
    width = spec.width;
    half_width = width / 2 + 1;
    const Index pixels = height * width;

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    // Hermitian symmetry phi(-k) = -phi(k) keeps the output real; the
    // self-conjugate bins (DC, Nyquist) get phase 0.
    std::vector<double> phase(static_cast<std::size_t>(pixels), 0.0);
    std::vector<bool> assigned(static_cast<std::size_t>(pixels), false);
    for (Index k1 = 0; k1 < height; ++k1) {
      for (Index k2 = 0; k2 < width; ++k2) {
        const Index idx = k1 * width + k2;
        if (assigned[static_cast<std::size_t>(idx)]) continue;
        const Index p1 = (height - k1) % height;
        const Index p2 = (width - k2) % width;
        const Index partner = p1 * width + p2;
        assigned[static_cast<std::size_t>(idx)] = true;
        if (partner == idx) continue;
        const double phi = phase_dist(rng);
        phase[static_cast<std::size_t>(idx)] = phi;
        phase[static_cast<std::size_t>(partner)] = -phi;
        assigned[static_cast<std::size_t>(partner)] = true;
      }
    }
    kernel.resize(static_cast<std::size_t>(height * half_width));
    for (Index k1 = 0; k1 < height; ++k1) {
      for (Index k2 = 0; k2 < half_width; ++k2) {
        kernel[static_cast<std::size_t>(k1 * half_width + k2)] =
            std::polar(1.0, phase[static_cast<std::size_t>(k1 * width + k2)]);
      }
    }

    // Uniform random subset, shared by all rows.
    const Index kept = std::max<Index>(1, pixels / spec.sample_ratio);
    std::vector<Index> order(static_cast<std::size_t>(pixels));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    keep.assign(order.begin(), order.begin() + kept);
    std::sort(keep.begin(), keep.end());

    std::vector<double> real_buf(static_cast<std::size_t>(pixels));
    std::vector<std::complex<double>> freq_buf(static_cast<std::size_t>(height * half_width));
    std::lock_guard lock(fftw_planner_mutex());
    forward = fftw_plan_dft_r2c_2d(static_cast<int>(height), static_cast<int>(width),
                                   real_buf.data(),
                                   reinterpret_cast<fftw_complex*>(freq_buf.data()),
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    backward = fftw_plan_dft_c2r_2d(static_cast<int>(height), static_cast<int>(width),
                                    reinterpret_cast<fftw_complex*>(freq_buf.data()),
                                    real_buf.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!forward || !backward) throw std::runtime_error("RandomPhaseConv: FFTW planning failed");
  }

  // In-place circular convolution of one image with the kernel (or its
  // conjugate for the adjoint).
  void convolve(std::vector<double>& image, bool conjugate) const {
    std::vector<std::complex<double>> freq(static_cast<std::size_t>(height * half_width));
    fftw_execute_dft_r2c(forward, image.data(), reinterpret_cast<fftw_complex*>(freq.data()));
    for (std::size_t k = 0; k < freq.size(); ++k) {
      freq[k] *= conjugate ? std::conj(kernel[k]) : kernel[k];
    }
    fftw_execute_dft_c2r(backward, reinterpret_cast<fftw_complex*>(freq.data()), image.data());
    const double scale = 1.0 / static_cast<double>(height * width);
    for (double& v : image) v *= scale;
  }
};

LinearOperator::LinearOperator() : LinearOperator(op::Identity{}) {}

LinearOperator::LinearOperator(OperatorVariant variant)
    : variant_(std::move(variant)), impl_(std::make_shared<Impl>()) {
  if (const auto* tc = std::get_if<op::TemporalConv>(&variant_)) {
    if (tc->frames <= 0 || !(tc->tau > 0.0) || !(tc->dt > 0.0)) {
      throw std::invalid_argument("TemporalConv: frames, tau and dt must be positive");
    }
    impl_->decay = std::exp(-tc->dt / tc->tau);
  } else if (const auto* rp = std::get_if<op::RandomPhaseConv>(&variant_)) {
    impl_->init_random_phase(*rp);
  } else if (const auto* oo = std::get_if<op::OuterOnes>(&variant_)) {
    if (oo->frames <= 0) throw std::invalid_argument("OuterOnes: frames must be positive");
  }
}

const std::vector<Index>& LinearOperator::keep_mask() const { return impl_->keep; }

Matrix LinearOperator::apply(const Matrix& X) const {
  return std::visit(
      [&](const auto& spec) -> Matrix {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, op::Identity>) {
          return X;
        } else if constexpr (std::is_same_v<T, op::TemporalConv>) {
          if (X.rows() != spec.frames) shape_error("TemporalConv::apply", X);
          Matrix out = X;
          for (Index k = 1; k < out.rows(); ++k) out.row(k) += impl_->decay * out.row(k - 1);
          return out;
        } else if constexpr (std::is_same_v<T, op::RandomPhaseConv>) {
          const Index pixels = impl_->height * impl_->width;
          if (X.cols() != pixels) shape_error("RandomPhaseConv::apply", X);
          const auto& keep = impl_->keep;
          Matrix out(X.rows(), static_cast<Index>(keep.size()));
          std::vector<double> image(static_cast<std::size_t>(pixels));
          for (Index r = 0; r < X.rows(); ++r) {
            for (Index p = 0; p < pixels; ++p) image[static_cast<std::size_t>(p)] = X(r, p);
            impl_->convolve(image, false);
            for (std::size_t j = 0; j < keep.size(); ++j) {
              out(r, static_cast<Index>(j)) = image[static_cast<std::size_t>(keep[j])];
            }
          }
          return out;
        } else {
          if (X.cols() != 1) shape_error("OuterOnes::apply", X);
          return Vector::Ones(spec.frames) * X.transpose();
        }
      },
      variant_);
}

Matrix LinearOperator::adjoint(const Matrix& R) const {
  return std::visit(
      [&](const auto& spec) -> Matrix {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, op::Identity>) {
          return R;
        } else if constexpr (std::is_same_v<T, op::TemporalConv>) {
          if (R.rows() != spec.frames) shape_error("TemporalConv::adjoint", R);
          Matrix out = R;
          for (Index k = out.rows() - 2; k >= 0; --k) out.row(k) += impl_->decay * out.row(k + 1);
          return out;
        } else if constexpr (std::is_same_v<T, op::RandomPhaseConv>) {
          const Index pixels = impl_->height * impl_->width;
          const auto& keep = impl_->keep;
          if (R.cols() != static_cast<Index>(keep.size())) shape_error("RandomPhaseConv::adjoint", R);
          Matrix out(R.rows(), pixels);
          std::vector<double> image(static_cast<std::size_t>(pixels));
          for (Index r = 0; r < R.rows(); ++r) {
            std::fill(image.begin(), image.end(), 0.0);
            for (std::size_t j = 0; j < keep.size(); ++j) {
              image[static_cast<std::size_t>(keep[j])] = R(r, static_cast<Index>(j));
            }
            impl_->convolve(image, true);
            for (Index p = 0; p < pixels; ++p) out(r, p) = image[static_cast<std::size_t>(p)];
          }
          return out;
        } else {
          if (R.rows() != spec.frames) shape_error("OuterOnes::adjoint", R);
          return R.colwise().sum().transpose();
        }
      },
      variant_);
}

double LinearOperator::op_norm(int iters, std::uint64_t seed) const {
  if (iters < 1) throw std::invalid_argument("op_norm: iters must be >= 1");
  std::lock_guard lock(impl_->norm_mutex);
  if (impl_->cached_norm) return *impl_->cached_norm;

  Matrix probe;
  std::visit(
      [&](const auto& spec) {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, op::Identity>) {
          probe.resize(0, 0);
        } else if constexpr (std::is_same_v<T, op::TemporalConv>) {
          probe.resize(spec.frames, 1);
        } else if constexpr (std::is_same_v<T, op::RandomPhaseConv>) {
          probe.resize(1, spec.height * spec.width);
        } else {
          probe.resize(1, 1);
        }
      },
      variant_);

  double estimate = 1.0;
  if (probe.size() > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index i = 0; i < probe.size(); ++i) probe.data()[i] = normal(rng);
    probe /= probe.norm();
    estimate = 0.0;
    for (int it = 0; it < iters; ++it) {
      Matrix next = adjoint(apply(probe));
      const double lambda = std::sqrt(std::max(0.0, (probe.array() * next.array()).sum()));
      const double nrm = next.norm();
      if (nrm == 0.0) {
        estimate = 0.0;
        break;
      }
      probe = next / nrm;
      const bool settled = std::abs(lambda - estimate) <= 1e-14 * std::max(1.0, lambda);
      estimate = lambda;
      if (settled) break;
    }
  }
  impl_->cached_norm = estimate;
  return estimate;
}

}  // namespace smf
