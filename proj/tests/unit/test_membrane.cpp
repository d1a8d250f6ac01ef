#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "ionhom/errors.hpp"
#include "ionhom/membrane.hpp"

using namespace ionhom;

namespace {

PhysicalParams pump_off() {
  PhysicalParams p;
  p.pump.i_max1 = 0.0;
  p.pump.i_max2 = 0.0;
  return p;
}

}  // namespace

TEST_CASE("Nernst potential") {
  CHECK(nernst_potential(1, 5.0, 5.0) == 0.0);
  // ln(5/135) = -ln 27 = -3 ln 3
  const long double ref = -3.0L * std::log(3.0L);
  CHECK(nernst_potential(1, 135.0, 5.0) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-15));
  CHECK(nernst_potential(-1, 145.0, 145.0) == 0.0);
  CHECK(nernst_potential(-1, 135.0, 5.0) == -nernst_potential(1, 135.0, 5.0));
  CHECK(nernst_potential(2, 135.0, 5.0) == doctest::Approx(0.5 * nernst_potential(1, 135.0, 5.0)));
  CHECK_THROWS_AS(nernst_potential(1, 0.0, 5.0), Error);
  CHECK_THROWS_AS(nernst_potential(1, 5.0, -1.0), Error);
  CHECK_THROWS_AS(nernst_potential(0, 5.0, 5.0), Error);
}

TEST_CASE("channel current") {
  CHECK(channel_current(1.5, 0.3, 0.3) == 0.0);
  CHECK(channel_current(2.0, 0.5, -0.5) == 2.0);
  CHECK(channel_current(0.0, 7.0, -3.0) == 0.0);
  CHECK(channel_current(1.0, 0.3, 0.2) != 0.0);
}

TEST_CASE("pump current") {
  PumpParams p{1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  CHECK(pump_current(p, 0.0, 5.0) == 0.0);
  CHECK(pump_current(p, 5.0, 0.0) == 0.0);
  CHECK(pump_current(p, 1.0, 1.0) == 0.0625);
  // Monotone in both arguments and bounded by I_max1 + I_max2.
  double prev = 0.0;
  for (double c = 0.5; c < 1000.0; c *= 2.0) {
    const double ip = pump_current(p, c, 3.0);
    CHECK(ip >= prev);
    CHECK(ip <= p.i_max1 + p.i_max2);
    prev = ip;
  }
  prev = 0.0;
  for (double c = 0.5; c < 1000.0; c *= 2.0) {
    const double ip = pump_current(p, 3.0, c);
    CHECK(ip >= prev);
    prev = ip;
  }
}

TEST_CASE("pump split onto species") {
  const Species3 zero = pump_species_currents(0.0);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
  CHECK(zero[2] == 0.0);
  const Species3 p = pump_species_currents(0.0625);
  CHECK(p[0] == 0.1875);
  CHECK(p[1] == -0.125);
  CHECK(p[2] == 0.0);
  const PhysicalParams params;
  for (double ip : {0.0, 0.0625, 0.3, 2.5}) {
    const Species3 s = pump_species_currents(ip);
    double net = 0.0;
    for (std::size_t i = 0; i < 3; ++i) net += params.species.valence(i) * s[i];
    CHECK(net == doctest::Approx(ip).epsilon(1e-15));
  }
}

TEST_CASE("species interface flux examples") {
  SUBCASE("full equilibrium") {
    const PhysicalParams p = pump_off();
    MembraneSample s{nernst_potential(1, 20.0, 4.0), {20.0, 4.0, 24.0}, {4.0, 4.0, 8.0}, 0.0};
    CHECK(std::abs(species_interface_flux(0, s, p)) < 1e-15);
  }
  SUBCASE("pure channel") {
    PhysicalParams p = pump_off();
    p.capacitance = 0.0;
    MembraneSample s{1.0, {5.0, 5.0, 10.0}, {5.0, 5.0, 10.0}, 0.0};
    CHECK(species_interface_flux(0, s, p) == 1.0);
  }
  SUBCASE("pure capacitor partition") {
    PhysicalParams p = pump_off();
    p.conductance = {0.0, 0.0, 0.0};
    p.capacitance = 3.0;
    MembraneSample s{0.7, {5.0, 5.0, 10.0}, {3.0, 5.0, 8.0}, 2.0};
    CHECK(species_interface_flux(1, s, p) == doctest::Approx(2.0).epsilon(1e-15));
  }
}

TEST_CASE("total membrane current examples") {
  PhysicalParams p = pump_off();
  MembraneSample eq{0.0, {5.0, 5.0, 10.0}, {5.0, 5.0, 10.0}, 0.0};
  CHECK(total_membrane_current(eq, p) == 0.0);
  MembraneSample s{1.0, {5.0, 5.0, 10.0}, {5.0, 5.0, 10.0}, 0.0};
  CHECK(total_membrane_current(s, p) == 3.0);
}

TEST_CASE("flux sum equals total current on random samples") {
  std::mt19937_64 rng(20260101);
  std::uniform_real_distribution<double> conc(1.0, 200.0);
  std::uniform_real_distribution<double> sym(-2.0, 2.0);
  std::uniform_real_distribution<double> pos(0.0, 3.0);
  for (int k = 0; k < 100; ++k) {
    PhysicalParams p;
    p.conductance = {pos(rng), pos(rng), pos(rng)};
    p.capacitance = pos(rng);
    p.pump = {pos(rng), pos(rng), 0.1 + pos(rng), 0.1 + pos(rng), 0.1 + pos(rng), 0.1 + pos(rng)};
    MembraneSample s{sym(rng), {conc(rng), conc(rng), conc(rng)},
                     {conc(rng), conc(rng), conc(rng)}, sym(rng)};
    double sum = 0.0;
    for (std::size_t i = 0; i < 3; ++i) sum += species_interface_flux(i, s, p);
    const double total = total_membrane_current(s, p);
    CHECK(std::abs(sum - total) <= 1e-13 * std::max(1.0, std::abs(total)));
  }
}

TEST_CASE("resting potential") {
  SUBCASE("common reversal") {
    const PhysicalParams p = pump_off();
    // Equal ratio 2 for the cations and 1/2 for the anion gives E = ln 2 for all three.
    const Species3 ci{10.0, 20.0, 30.0};
    const Species3 ce{20.0, 40.0, 15.0};
    const RestingPotential r = resting_potential(ci, ce, p);
    CHECK(r.closed_form == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(std::abs(r.bisection - r.closed_form) <= 1e-10);
  }
  SUBCASE("symmetric reversals") {
    const PhysicalParams p = pump_off();
    const double e = std::exp(1.0);
    // E = (1, -1, 0)
    const RestingPotential r = resting_potential({10.0, 10.0 * e, 20.0}, {10.0 * e, 10.0, 20.0}, p);
    CHECK(std::abs(r.closed_form) < 1e-14);
    CHECK(std::abs(r.bisection) <= 1e-10);
  }
  SUBCASE("pump shift") {
    // I_p = 0.3 with all E = 0: K thresholds chosen so the pump evaluates to 0.3 exactly.
    PhysicalParams p;
    p.pump = {0.3 * 32.0, 0.0, 1.0, 1.0, 1.0, 1.0};
    const Species3 c{1.0, 1.0, 2.0};
    const double ip = pump_current(p.pump, c[0], c[1]);
    CHECK(ip == doctest::Approx(0.3).epsilon(1e-15));
    const RestingPotential r = resting_potential(c, c, p);
    CHECK(r.closed_form == doctest::Approx(-0.1).epsilon(1e-14));
    CHECK(std::abs(r.bisection - r.closed_form) <= 1e-10);
  }
  SUBCASE("residual at the default traces") {
    PhysicalParams p;
    p.pump = {0.5, 0.5, 1.0, 1.0, 1.0, 1.0};
    const Species3 ci{10.0, 135.0, 145.0}, ce{140.0, 5.0, 145.0};
    const RestingPotential r = resting_potential(ci, ce, p);
    const MembraneTerms t = membrane_terms(ci, ce, p);
    CHECK(std::abs(p.total_conductance() * r.closed_form + t.offset) <= 1e-10);
    CHECK(std::abs(p.total_conductance() * r.bisection + t.offset) <= 1e-10);
  }
  SUBCASE("no conductance") {
    PhysicalParams p;
    p.conductance = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(resting_potential({1, 1, 2}, {1, 1, 2}, p), Error);
  }
}
