#pragma once

#include <array>
#include <vector>

#include "ionhom/geometry_grid.hpp"

namespace ionhom {

/// Periodic corrector chi^j on the cells of one compartment of the unit cell.
struct CorrectorField {
  Phase phase = Phase::E;
  int direction = 0;           // 0: y1, 1: y2
  std::vector<double> values;  // one per grid cell; 0 on cells of the other compartment
  int components = 0;
  int iterations = 0;
  double residual = 0.0;
};

struct Tensor2 {
  std::array<std::array<double, 2>, 2> m{};

  double operator()(int k, int j) const { return m[k][j]; }
  /// |M - M^T| / max(|M|, scale) in the Frobenius norm (0 for the zero matrix).
  /// A reference scale keeps roundoff-level tensors from reading as asymmetric.
  double asymmetry(double scale = 0.0) const;
  /// Eigenvalues of the symmetric part, ascending.
  std::array<double, 2> eigenvalues() const;
};

struct EffectiveTensor {
  Phase phase = Phase::E;
  Tensor2 matrix;
  double measure = 0.0;  // |Y_s|
  std::array<CorrectorField, 2> correctors;
};

/// Finite-volume corrector solve with periodic wrap and no-flux membrane faces.
/// Each connected component of Y_s gets its own zero-mean normalization.
CorrectorField solve_corrector(const TaggedGrid& cell, Phase phase, int direction,
                               double diffusion, double tol = 1e-12);

/// M_kj = sum over s-s faces normal to k of D h^2 (d_k chi^j + delta_kj).
EffectiveTensor effective_tensor(const TaggedGrid& cell, Phase phase,
                                 const std::array<CorrectorField, 2>& correctors,
                                 double diffusion);

/// Both corrector solves followed by the tensor quadrature.
EffectiveTensor compute_effective_tensor(const TaggedGrid& cell, Phase phase, double diffusion,
                                         double tol = 1e-12);

/// Closed form for the stripe: across-stripe entry 0, along-stripe D times the
/// compartment's width (theta for E, 1 - theta for I).
Tensor2 stripe_tensor_analytic(double theta, double diffusion, Phase phase);

}  // namespace ionhom
