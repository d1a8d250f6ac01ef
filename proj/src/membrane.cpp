#include "ionhom/membrane.hpp"

#include <cmath>
#include <sstream>

#include "ionhom/errors.hpp"

namespace ionhom {

double nernst_potential(int z, double c_intra, double c_extra) {
  if (z == 0) fail(ErrorKind::DomainError, "zero valence");
  if (!(c_intra > 0.0) || !(c_extra > 0.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "nonpositive trace concentration (C_I=" << c_intra << ", C_E=" << c_extra << ")";
    fail(ErrorKind::DomainError, os.str());
  }
  return (std::log(c_extra) - std::log(c_intra)) / z;
}

double channel_current(double conductance, double v, double reversal) {
  return conductance * (v - reversal);
}

double pump_current(const PumpParams& pump, double c_na_intra, double c_k_extra) {
  auto term = [&](double i_max, double k_na, double k_k) {
    const double na = c_na_intra / (c_na_intra + k_na);
    const double k = c_k_extra / (c_k_extra + k_k);
    return i_max * na * na * na * k * k;
  };
  return term(pump.i_max1, pump.k_na1, pump.k_k1) + term(pump.i_max2, pump.k_na2, pump.k_k2);
}

Species3 pump_species_currents(double ip) { return {3.0 * ip, -2.0 * ip, 0.0}; }

MembraneTerms membrane_terms(const Species3& c_intra, const Species3& c_extra,
                             const PhysicalParams& params) {
  MembraneTerms t;
  t.pump = pump_current(params.pump, c_intra[0], c_extra[1]);
  t.pump_species = pump_species_currents(t.pump);
  t.offset = t.pump;
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    t.nernst[i] = nernst_potential(params.species.valence(i), c_intra[i], c_extra[i]);
    t.offset -= params.conductance[i] * t.nernst[i];
  }
  return t;
}

double species_flux(std::size_t i, const MembraneTerms& terms, double v, double dvdt,
                    const PhysicalParams& params) {
  return channel_current(params.conductance[i], v, terms.nernst[i]) + terms.pump_species[i] +
         params.species.capacitor_weight(i) * params.capacitance * dvdt;
}

double species_interface_flux(std::size_t i, const MembraneSample& s,
                              const PhysicalParams& params) {
  return species_flux(i, membrane_terms(s.c_intra, s.c_extra, params), s.v, s.dvdt, params);
}

double total_membrane_current(const MembraneSample& s, const PhysicalParams& params) {
  const auto terms = membrane_terms(s.c_intra, s.c_extra, params);
  double current = terms.pump + params.capacitance * s.dvdt;
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    current += channel_current(params.conductance[i], s.v, terms.nernst[i]);
  }
  return current;
}

RestingPotential resting_potential(const Species3& c_intra, const Species3& c_extra,
                                   const PhysicalParams& params) {
  const double g_total = params.total_conductance();
  if (!(g_total > 0.0)) {
    fail(ErrorKind::InvalidInput, "resting potential undefined: all conductances vanish");
  }
  const auto terms = membrane_terms(c_intra, c_extra, params);

  RestingPotential result;
  result.closed_form = -terms.offset / g_total;

  // f is affine with slope sum G_i > 0.
  auto f = [&](double v) {
    double current = terms.pump;
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      current += channel_current(params.conductance[i], v, terms.nernst[i]);
    }
    return current;
  };
  double lo = -1.0;
  double hi = 1.0;
  while (f(lo) > 0.0) lo *= 2.0;
  while (f(hi) < 0.0) hi *= 2.0;
  while (hi - lo > 1e-13) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  result.bisection = 0.5 * (lo + hi);
  return result;
}

}  // namespace ionhom
