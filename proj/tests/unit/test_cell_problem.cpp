#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ionhom/cell_problem.hpp"
#include "ionhom/errors.hpp"

using namespace ionhom;

namespace {

// Independent oracle: Gauss-Seidel minimization of the discrete energy
//   sum over s-s faces  D h^2 ((chi_nb - chi_c)/h + delta_kj)^2
// followed by the energy form of the tensor entry.
struct Oracle {
  const TaggedGrid& g;
  Phase phase;
  double d;

  bool in(int i, int j) const { return g.tag((i + g.n) % g.n, (j + g.n) % g.n) == phase; }

  std::vector<double> corrector(int dir) const {
    const int n = g.n;
    std::vector<double> chi(n * n, 0.0);
    for (int sweep = 0; sweep < 200000; ++sweep) {
      double change = 0.0;
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          if (!in(i, j)) continue;
          double sum = 0.0;
          int count = 0;
          const int di[4] = {1, -1, 0, 0};
          const int dj[4] = {0, 0, 1, -1};
          for (int q = 0; q < 4; ++q) {
            const int ii = i + di[q];
            const int jj = j + dj[q];
            if (!in(ii, jj)) continue;
            const int axis = q < 2 ? 0 : 1;
            const double sgn = (q % 2 == 0) ? 1.0 : -1.0;
            const double shift = axis == dir ? sgn * g.h : 0.0;
            sum += chi[g.index((ii + n) % n, (jj + n) % n)] + shift;
            ++count;
          }
          if (count == 0) continue;
          const double next = sum / count;
          change = std::max(change, std::abs(next - chi[g.index(i, j)]));
          chi[g.index(i, j)] = next;
        }
      }
      if (change < 1e-15) break;
    }
    return chi;
  }

  double energy(const std::vector<double>& a, const std::vector<double>& b, int da, int db) const {
    double e = 0.0;
    for (int j = 0; j < g.n; ++j) {
      for (int i = 0; i < g.n; ++i) {
        if (!in(i, j)) continue;
        for (int axis = 0; axis < 2; ++axis) {
          const int ii = axis == 0 ? i + 1 : i;
          const int jj = axis == 1 ? j + 1 : j;
          if (!in(ii, jj)) continue;
          const int c = g.index(i, j);
          const int nb = g.index(ii % g.n, jj % g.n);
          const double ga = (a[nb] - a[c]) / g.h + (axis == da ? 1.0 : 0.0);
          const double gb = (b[nb] - b[c]) / g.h + (axis == db ? 1.0 : 0.0);
          e += d * g.h * g.h * ga * gb;
        }
      }
    }
    return e;
  }
};

double component_mean_max(const TaggedGrid& g, Phase p, const std::vector<double>& chi) {
  const Components comps = connected_components(g, p);
  std::vector<double> sums(comps.count, 0.0);
  for (std::size_t c = 0; c < chi.size(); ++c) {
    if (comps.labels[c] >= 0) sums[comps.labels[c]] += chi[c] * g.cell_area();
  }
  double worst = 0.0;
  for (double s : sums) worst = std::max(worst, std::abs(s));
  return worst;
}

}  // namespace

TEST_CASE("empty geometry gives the bare diffusion tensor") {
  const TaggedGrid cell = voxelize_unit_cell(UnitCellGeometry::empty(), 32);
  const EffectiveTensor t = compute_effective_tensor(cell, Phase::E, 1.7);
  for (const auto& chi : t.correctors) {
    for (double x : chi.values) CHECK(std::abs(x) <= 1e-12);
  }
  CHECK(std::abs(t.matrix(0, 0) - 1.7) <= 1e-12);
  CHECK(std::abs(t.matrix(1, 1) - 1.7) <= 1e-12);
  CHECK(std::abs(t.matrix(0, 1)) <= 1e-12);
  CHECK(std::abs(t.matrix(1, 0)) <= 1e-12);
  CHECK(t.measure == 1.0);
  CHECK_THROWS_AS(compute_effective_tensor(cell, Phase::I, 1.0), Error);
}

TEST_CASE("stripe tensor matches the closed form") {
  for (double theta : {0.25, 0.5, 0.75}) {
    const TaggedGrid cell = voxelize_unit_cell(UnitCellGeometry::stripe(theta), 64);
    for (Phase p : {Phase::E, Phase::I}) {
      const EffectiveTensor t = compute_effective_tensor(cell, p, 1.0);
      const Tensor2 ref = stripe_tensor_analytic(theta, 1.0, p);
      CHECK(std::abs(t.matrix(0, 0)) <= 1e-8);
      CHECK(std::abs(t.matrix(1, 1) - ref(1, 1)) <= 1e-8);
      CHECK(std::abs(t.matrix(0, 1)) <= 1e-8);
      CHECK(std::abs(t.matrix(1, 0)) <= 1e-8);
      for (double x : t.correctors[1].values) CHECK(std::abs(x) <= 1e-12);
    }
  }
  const Tensor2 half = stripe_tensor_analytic(0.5, 1.0, Phase::E);
  CHECK(half(1, 1) == 0.5);
  CHECK(half(0, 0) == 0.0);
  CHECK_THROWS_AS(stripe_tensor_analytic(1.0, 1.0, Phase::E), Error);
}

TEST_CASE("square inclusion: symmetric, isotropic, bounded") {
  const TaggedGrid cell = voxelize_unit_cell(UnitCellGeometry::square(0.5), 64);
  const EffectiveTensor t = compute_effective_tensor(cell, Phase::E, 1.0);
  CHECK(t.matrix.asymmetry() <= 1e-10);
  CHECK(std::abs(t.matrix(0, 0) - t.matrix(1, 1)) <= 1e-8);
  const auto ev = t.matrix.eigenvalues();
  CHECK(ev[0] > 0.0);
  CHECK(ev[1] <= 0.75 + 1e-10);
  CHECK(t.measure == 0.75);
  for (const auto& chi : t.correctors) CHECK(component_mean_max(cell, Phase::E, chi.values) <= 1e-10);

  const EffectiveTensor inner = compute_effective_tensor(cell, Phase::I, 1.0);
  for (int k = 0; k < 2; ++k) {
    for (int j = 0; j < 2; ++j) CHECK(std::abs(inner.matrix(k, j)) <= 1e-10);
  }
}

TEST_CASE("square corrector is antisymmetric about the centre line") {
  const TaggedGrid cell = voxelize_unit_cell(UnitCellGeometry::square(0.5), 32);
  const CorrectorField chi = solve_corrector(cell, Phase::E, 0, 1.0);
  const int n = cell.n;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double a = chi.values[cell.index(i, j)];
      const double b = chi.values[cell.index(n - 1 - i, j)];
      CHECK(std::abs(a + b) <= 1e-8);
    }
  }
}

TEST_CASE("library tensor agrees with the energy oracle") {
  for (const auto& geom : {UnitCellGeometry::square(0.5), UnitCellGeometry::cross(0.5)}) {
    const TaggedGrid cell = voxelize_unit_cell(geom, 16);
    for (Phase p : {Phase::E, Phase::I}) {
      const EffectiveTensor t = compute_effective_tensor(cell, p, 0.8);
      const Oracle o{cell, p, 0.8};
      const auto x0 = o.corrector(0);
      const auto x1 = o.corrector(1);
      CHECK(t.matrix(0, 0) == doctest::Approx(o.energy(x0, x0, 0, 0)).epsilon(1e-8).scale(1.0));
      CHECK(t.matrix(1, 1) == doctest::Approx(o.energy(x1, x1, 1, 1)).epsilon(1e-8).scale(1.0));
      CHECK(t.matrix(0, 1) == doctest::Approx(o.energy(x0, x1, 0, 1)).epsilon(1e-8).scale(1.0));
    }
  }
}

TEST_CASE("cross channel tensors are isotropic and bounded") {
  const TaggedGrid cell = voxelize_unit_cell(UnitCellGeometry::cross(0.5), 64);
  for (Phase p : {Phase::E, Phase::I}) {
    const EffectiveTensor t = compute_effective_tensor(cell, p, 1.0);
    CHECK(t.matrix.asymmetry(t.measure) <= 1e-10);
    CHECK(std::abs(t.matrix(0, 0) - t.matrix(1, 1)) <= 1e-8);
    const auto ev = t.matrix.eigenvalues();
    CHECK(ev[0] >= -1e-10);
    CHECK(ev[1] <= t.measure + 1e-10);
    for (const auto& chi : t.correctors) CHECK(component_mean_max(cell, p, chi.values) <= 1e-10);
  }
}

TEST_CASE("non-periodic grids are rejected") {
  const TaggedGrid tissue = tile_domain(UnitCellGeometry::square(0.5), 2, 8);
  CHECK_THROWS_AS(solve_corrector(tissue, Phase::E, 0, 1.0), Error);
  const TaggedGrid cell = voxelize_unit_cell(UnitCellGeometry::square(0.5), 8);
  CHECK_THROWS_AS(solve_corrector(cell, Phase::E, 2, 1.0), Error);
}

TEST_CASE("tensor computation is deterministic") {
  const TaggedGrid cell = voxelize_unit_cell(UnitCellGeometry::square(0.5), 32);
  const EffectiveTensor a = compute_effective_tensor(cell, Phase::E, 1.0);
  const EffectiveTensor b = compute_effective_tensor(cell, Phase::E, 1.0);
  CHECK(a.matrix.m == b.matrix.m);
  CHECK(a.correctors[0].values == b.correctors[0].values);
}
