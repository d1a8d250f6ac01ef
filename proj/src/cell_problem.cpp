#include "ionhom/cell_problem.hpp"

#include <algorithm>
#include <cmath>

#include "ionhom/errors.hpp"
#include "ionhom/linear_numerics.hpp"

namespace ionhom {

double Tensor2::asymmetry(double scale) const {
  double norm = 0.0;
  for (const auto& row : m) {
    for (double x : row) norm += x * x;
  }
  norm = std::max(std::sqrt(norm), scale);
  if (norm == 0.0) return 0.0;
  return std::sqrt(2.0) * std::abs(m[0][1] - m[1][0]) / norm;
}

std::array<double, 2> Tensor2::eigenvalues() const {
  const double a = m[0][0];
  const double d = m[1][1];
  const double b = 0.5 * (m[0][1] + m[1][0]);
  const double mean = 0.5 * (a + d);
  const double radius = std::hypot(0.5 * (a - d), b);
  return {mean - radius, mean + radius};
}

namespace {

// Upper neighbour of cell c along axis, with periodic wrap.
int upper(const TaggedGrid& g, int c, int axis) {
  const int i = c % g.n;
  const int j = c / g.n;
  return axis == 0 ? g.index((i + 1) % g.n, j) : g.index(i, (j + 1) % g.n);
}

void require_unit_cell(const TaggedGrid& cell, Phase phase) {
  if (!cell.periodic) fail(ErrorKind::InvalidInput, "cell problems need a periodic unit-cell grid");
  if (cell.count(phase) == 0) {
    fail(ErrorKind::InvalidInput, std::string("compartment ") + phase_letter(phase) + " is empty");
  }
}

}  // namespace

CorrectorField solve_corrector(const TaggedGrid& cell, Phase phase, int direction,
                               double diffusion, double tol) {
  require_unit_cell(cell, phase);
  if (direction != 0 && direction != 1) fail(ErrorKind::InvalidInput, "direction must be 0 or 1");

  const int total = static_cast<int>(cell.cell_count());
  std::vector<int> local(total, -1);
  std::vector<int> global;
  for (int c = 0; c < total; ++c) {
    if (cell.tags[c] == phase) {
      local[c] = static_cast<int>(global.size());
      global.push_back(c);
    }
  }
  const int m = static_cast<int>(global.size());

  TripletBuilder builder(m);
  std::vector<double> rhs(m, 0.0);
  for (int c : global) {
    for (int axis = 0; axis < 2; ++axis) {
      const int nb = upper(cell, c, axis);
      if (cell.tags[nb] != phase) continue;
      builder.add_edge(local[c], local[nb], diffusion);
      if (axis == direction) {
        rhs[local[c]] += diffusion * cell.h;
        rhs[local[nb]] -= diffusion * cell.h;
      }
    }
  }

  const Components comps = connected_components(cell, phase);
  std::vector<int> labels(m);
  for (int k = 0; k < m; ++k) labels[k] = comps.labels[global[k]];

  SparseSystem system{builder.build(), std::move(rhs),
                      NullSpace::from_components(labels, comps.count)};
  CgOptions options;
  options.tol = tol;
  const CgResult solved = solve_spd(system, options);

  CorrectorField out;
  out.phase = phase;
  out.direction = direction;
  out.values.assign(total, 0.0);
  for (int k = 0; k < m; ++k) out.values[global[k]] = solved.x[k];
  out.components = comps.count;
  out.iterations = solved.iterations;
  out.residual = solved.relative_residual;
  return out;
}

EffectiveTensor effective_tensor(const TaggedGrid& cell, Phase phase,
                                 const std::array<CorrectorField, 2>& correctors,
                                 double diffusion) {
  require_unit_cell(cell, phase);
  EffectiveTensor out;
  out.phase = phase;
  out.measure = cell.measure(phase);
  out.correctors = correctors;
  const double weight = diffusion * cell.h * cell.h;
  for (int c = 0; c < static_cast<int>(cell.cell_count()); ++c) {
    if (cell.tags[c] != phase) continue;
    for (int k = 0; k < 2; ++k) {
      const int nb = upper(cell, c, k);
      if (cell.tags[nb] != phase) continue;
      for (int j = 0; j < 2; ++j) {
        const auto& chi = correctors[j].values;
        const double grad = (chi[nb] - chi[c]) / cell.h + (k == j ? 1.0 : 0.0);
        out.matrix.m[k][j] += weight * grad;
      }
    }
  }
  return out;
}

EffectiveTensor compute_effective_tensor(const TaggedGrid& cell, Phase phase, double diffusion,
                                         double tol) {
  std::array<CorrectorField, 2> chi{solve_corrector(cell, phase, 0, diffusion, tol),
                                    solve_corrector(cell, phase, 1, diffusion, tol)};
  return effective_tensor(cell, phase, chi, diffusion);
}

Tensor2 stripe_tensor_analytic(double theta, double diffusion, Phase phase) {
  if (!(theta > 0.0 && theta < 1.0)) fail(ErrorKind::InvalidInput, "stripe width must lie in (0,1)");
  Tensor2 t;
  t.m[1][1] = diffusion * (phase == Phase::E ? theta : 1.0 - theta);
  return t;
}

}  // namespace ionhom
