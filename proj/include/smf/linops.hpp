#pragma once

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "smf/types.hpp"

namespace smf {

namespace op {

struct Identity {};

/// Causal exponential decay along the rows (time axis): D is lower-triangular
/// Toeplitz with first column exp(-k*dt/tau).
struct TemporalConv {
  double tau = 1.3333;
  double dt = 0.1;
  Index frames = 0;
};

/// Per-row 2-D circular convolution with a unit-modulus random-phase kernel,
/// followed by keeping a seeded random subset of height*width/sample_ratio
/// pixels (the same subset for every row).
struct RandomPhaseConv {
  Index height = 0;
  Index width = 0;
  Index sample_ratio = 1;
  std::uint64_t seed = 0;
};

/// Q (p x 1) -> 1 Q^T (frames x p).
struct OuterOnes {
  Index frames = 0;
};

}  // namespace op

using OperatorVariant = std::variant<op::Identity, op::TemporalConv, op::RandomPhaseConv, op::OuterOnes>;

/// Linear measurement operator acting on data matrices (rows = bands/frames,
/// columns = pixels) with an exact adjoint. Cheap to copy; copies share the
/// precomputed kernel and the cached operator norm.
class LinearOperator {
 public:
  LinearOperator();
  explicit LinearOperator(OperatorVariant variant);

  Matrix apply(const Matrix& X) const;
  Matrix adjoint(const Matrix& R) const;

  /// Largest singular value by power iteration on A^T A (cached after the
  /// first call).
  double op_norm(int iters = 1000, std::uint64_t seed = 0) const;

  const OperatorVariant& variant() const { return variant_; }
  bool is_identity() const { return std::holds_alternative<op::Identity>(variant_); }

  /// Kept pixel indices (sorted) for RandomPhaseConv, empty otherwise.
  const std::vector<Index>& keep_mask() const;

 private:
  struct Impl;
  OperatorVariant variant_;
  std::shared_ptr<Impl> impl_;
};

}  // namespace smf
