#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "ionhom/errors.hpp"
#include "ionhom/micro_solver.hpp"

using namespace ionhom;

namespace {

RunConfig small_run(int eps_inv = 2, int n_per_cell = 8, double dt = 1e-3) {
  RunConfig cfg;
  cfg.epsilon_inv = eps_inv;
  cfg.n_per_cell = n_per_cell;
  cfg.dt = dt;
  return cfg;
}

MicroSolver make_solver(const PhysicalParams& p, const RunConfig& cfg,
                        UnitCellGeometry geom = UnitCellGeometry::square(0.5)) {
  return MicroSolver(tile_domain(geom, cfg.epsilon_inv, cfg.n_per_cell), p, cfg);
}

double max_abs(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

InitialData perturbed(const DefaultSetup& d, double amp) {
  InitialData init = d.init;
  // Na and Cl move together so the extracellular data stays electroneutral.
  const double na = d.c_extra[0];
  const double cl = d.c_extra[2];
  init.c_extra[1] = [k = d.c_extra[1]](Point) { return k; };
  init.c_extra[0] = [na, amp](Point p) {
    return na + amp * na * std::cos(M_PI * p.x) * std::cos(M_PI * p.y);
  };
  init.c_extra[2] = [cl, na, amp](Point p) {
    return cl + amp * na * std::cos(M_PI * p.x) * std::cos(M_PI * p.y);
  };
  return init;
}

}  // namespace

TEST_CASE("constant initial jump gives a consistent initial potential") {
  const DefaultSetup d = default_params();
  MicroSolver ms = make_solver(d.params, small_run());
  SUBCASE("zero jump") {
    const MicroState s = ms.initialize(InitialData::uniform(d.c_intra, d.c_extra, 0.0));
    CHECK(max_abs(s.phi) <= 1e-12);
  }
  SUBCASE("nonzero jump") {
    const MicroState s = ms.initialize(d.init);
    for (double v : ms.jumps(s.phi)) CHECK(std::abs(v - d.phi0) <= 1e-12);
    double mean_e = 0.0;
    int count = 0;
    for (std::size_t c = 0; c < s.phi.size(); ++c) {
      if (ms.grid().tags[c] == Phase::E) {
        mean_e += s.phi[c];
        ++count;
      }
    }
    CHECK(std::abs(mean_e / count) <= 1e-12);
  }
}

TEST_CASE("Donnan-type equilibrium is a fixed point") {
  PhysicalParams p = default_params().params;
  p.pump = {};
  p.conductance = {1.0, 2.0, 0.0};
  const Species3 ci{10.0, 60.0, 70.0};
  const Species3 ce{20.0, 120.0, 140.0};
  MicroSolver ms = make_solver(p, small_run());
  MicroState s = ms.initialize(InitialData::uniform(ci, ce, std::log(2.0)));
  const MicroState s0 = s;
  for (int k = 0; k < 5; ++k) s = ms.step(s);
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    for (std::size_t c = 0; c < s.c[i].size(); ++c) CHECK(std::abs(s.c[i][c] - s0.c[i][c]) <= 1e-10);
  }
  for (double v : s.v) CHECK(std::abs(v - std::log(2.0)) <= 1e-10);
}

TEST_CASE("conservation and electroneutrality with the pump on") {
  const DefaultSetup d = default_params();
  for (const auto& geom : {UnitCellGeometry::square(0.5), UnitCellGeometry::cross(0.5)}) {
    MicroSolver ms = make_solver(d.params, small_run(), geom);
    MicroState s = ms.initialize(perturbed(d, 0.2));
    const Species3 t0 = ms.totals(s);
    double en = 0.0;
    for (int k = 0; k < 50; ++k) {
      s = ms.step(s);
      en = std::max(en, ms.en_drift(s));
    }
    const Species3 t1 = ms.totals(s);
    for (std::size_t i = 0; i < kSpeciesCount; ++i) CHECK(std::abs(t1[i] - t0[i]) <= 1e-8 * t0[i]);
    CHECK(en <= 1e-10);
  }
}

TEST_CASE("step residuals vanish at the converged iterate") {
  const DefaultSetup d = default_params();
  MicroSolver ms = make_solver(d.params, small_run());
  const MicroState s0 = ms.initialize(perturbed(d, 0.2));
  const MicroState s1 = ms.step(s0);
  const MicroResiduals r = ms.residuals(s0, s1);
  CHECK(max_abs(r.potential) <= 1e-9);
  for (const auto& ri : r.species) CHECK(max_abs(ri) <= 1e-9);
}

TEST_CASE("residuals see only potential differences") {
  const DefaultSetup d = default_params();
  MicroSolver ms = make_solver(d.params, small_run());
  const MicroState s0 = ms.initialize(perturbed(d, 0.2));
  MicroState s1 = ms.step(s0);
  for (double& x : s1.phi) x = std::round(x * 1048576.0) / 1048576.0;
  s1.v = ms.jumps(s1.phi);
  MicroState shifted = s1;
  for (double& x : shifted.phi) x += 0.25;
  const MicroResiduals a = ms.residuals(s0, s1);
  const MicroResiduals b = ms.residuals(s0, shifted);
  CHECK(a.potential == b.potential);
  for (std::size_t i = 0; i < kSpeciesCount; ++i) CHECK(a.species[i] == b.species[i]);
}

TEST_CASE("backward Euler converges at first order in time") {
  const DefaultSetup d = default_params();
  const double t_end = 0.04;
  std::vector<MacroFields> out;
  for (double dt : {0.01, 0.005, 0.0025}) {
    MicroSolver ms = make_solver(d.params, small_run(2, 8, dt));
    MicroState s = ms.initialize(perturbed(d, 0.2));
    const int steps = static_cast<int>(std::llround(t_end / dt));
    for (int k = 0; k < steps; ++k) s = ms.step(s);
    out.push_back(average_fields(ms.grid(), s, 1));
  }
  const double e1 = std::abs(out[0].v[0] - out[1].v[0]);
  const double e2 = std::abs(out[1].v[0] - out[2].v[0]);
  REQUIRE(e1 > 0.0);
  CHECK(std::abs(e2 / e1 - 0.5) <= 0.1);
  const double k1 = std::abs(out[0].c_intra[1][0] - out[1].c_intra[1][0]);
  const double k2 = std::abs(out[1].c_intra[1][0] - out[2].c_intra[1][0]);
  REQUIRE(k1 > 0.0);
  CHECK(std::abs(k2 / k1 - 0.5) <= 0.1);
}

TEST_CASE("nonpositive initial data raises PositivityLoss") {
  const DefaultSetup d = default_params();
  MicroSolver ms = make_solver(d.params, small_run());
  Species3 bad = d.c_intra;
  bad[0] = 0.0;
  try {
    ms.initialize(InitialData::uniform(bad, d.c_extra, 0.0));
    FAIL("expected PositivityLoss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::PositivityLoss);
  }
}

TEST_CASE("block averages") {
  const DefaultSetup d = default_params();
  MicroSolver ms = make_solver(d.params, small_run(4, 8));
  MicroState s = ms.initialize(d.init);
  SUBCASE("uniform fields") {
    const MacroFields f = average_fields(ms.grid(), s, 4);
    CHECK(f.n == 4);
    for (std::size_t k = 0; k < 16; ++k) {
      for (std::size_t i = 0; i < kSpeciesCount; ++i) {
        CHECK(f.c_intra[i][k] == doctest::Approx(d.c_intra[i]).epsilon(1e-14));
        CHECK(f.c_extra[i][k] == doctest::Approx(d.c_extra[i]).epsilon(1e-14));
      }
      CHECK(std::abs(f.v[k] - d.phi0) <= 1e-12);
    }
  }
  SUBCASE("linear field averages to the block centre") {
    for (std::size_t c = 0; c < s.c[0].size(); ++c) s.c[0][c] = ms.grid().center(c).x;
    const MacroFields f = average_fields(ms.grid(), s, 4);
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < 4; ++i) {
        CHECK(f.c_extra[0][j * 4 + i] == doctest::Approx((i + 0.5) / 4.0).epsilon(1e-13));
        CHECK(f.c_intra[0][j * 4 + i] == doctest::Approx((i + 0.5) / 4.0).epsilon(1e-13));
      }
    }
  }
  SUBCASE("single block is the compartment mean") {
    const MacroFields f = average_fields(ms.grid(), s, 1);
    CHECK(f.c_intra[1][0] == doctest::Approx(d.c_intra[1]).epsilon(1e-14));
  }
  SUBCASE("incommensurate blocks") {
    CHECK_THROWS_AS(average_fields(ms.grid(), s, 3), Error);
    try {
      average_fields(ms.grid(), s, 5);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ResolutionMismatch);
    }
  }
}

TEST_CASE("micro runs are bit-reproducible") {
  const DefaultSetup d = default_params();
  auto run = [&] {
    MicroSolver ms = make_solver(d.params, small_run());
    MicroState s = ms.initialize(perturbed(d, 0.2));
    for (int k = 0; k < 5; ++k) s = ms.step(s);
    return s;
  };
  const MicroState a = run();
  const MicroState b = run();
  CHECK(a.phi == b.phi);
  for (std::size_t i = 0; i < kSpeciesCount; ++i) CHECK(a.c[i] == b.c[i]);
}
