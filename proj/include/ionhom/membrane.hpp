#pragma once

#include "ionhom/model_params.hpp"

namespace ionhom {

/// Local state on one side-pair of a membrane patch.
struct MembraneSample {
  double v = 0.0;  // [[phi]] = phi_I - phi_E
  Species3 c_intra{};
  Species3 c_extra{};
  double dvdt = 0.0;
};

/// (1/z) ln(C_E / C_I). Throws DomainError on nonpositive concentration or z == 0.
double nernst_potential(int z, double c_intra, double c_extra);

/// G (v - E).
double channel_current(double conductance, double v, double reversal);

/// Two-term Hill-type Na/K pump current, always >= 0.
double pump_current(const PumpParams& pump, double c_na_intra, double c_k_extra);

/// Pump split onto species: (3 I_p, -2 I_p, 0).
Species3 pump_species_currents(double pump_current);

/// Concentration-dependent part of the membrane law, shared by all flux evaluations.
/// Everything except the v and dv/dt terms is fixed by the two trace states.
struct MembraneTerms {
  Species3 nernst{};
  double pump = 0.0;
  Species3 pump_species{};
  /// sum_i -G_i E_i + I_p: the total current at v = 0, dv/dt = 0.
  double offset = 0.0;
};

MembraneTerms membrane_terms(const Species3& c_intra, const Species3& c_extra,
                             const PhysicalParams& params);

/// z_i J_i . n divided by epsilon: G_i (v - E_i) + P_i + lambda_i P_m dv/dt.
double species_flux(std::size_t i, const MembraneTerms& terms, double v, double dvdt,
                    const PhysicalParams& params);

double species_interface_flux(std::size_t i, const MembraneSample& sample,
                              const PhysicalParams& params);

/// sum_i G_i (v - E_i) + I_p + P_m dv/dt.
double total_membrane_current(const MembraneSample& sample, const PhysicalParams& params);

struct RestingPotential {
  double closed_form = 0.0;
  double bisection = 0.0;
};

/// Zero of v -> sum_i G_i (v - E_i) + I_p, by closed form and by bracketing bisection.
/// Throws InvalidInput when all conductances vanish.
RestingPotential resting_potential(const Species3& c_intra, const Species3& c_extra,
                                   const PhysicalParams& params);

}  // namespace ionhom
