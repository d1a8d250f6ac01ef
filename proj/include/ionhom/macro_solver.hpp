#pragma once

#include <array>
#include <vector>

#include "ionhom/cell_problem.hpp"
#include "ionhom/diagnostics.hpp"
#include "ionhom/linear_numerics.hpp"
#include "ionhom/micro_solver.hpp"
#include "ionhom/model_params.hpp"

namespace ionhom {

/// Unit-cell constants entering the homogenized equations.
struct CellMeasures {
  double intra = 0.0;      // |Y_I|
  double extra = 0.0;      // |Y_E|
  double interface = 0.0;  // |Gamma|
};

struct MacroState {
  double t = 0.0;
  std::array<std::vector<double>, kSpeciesCount> c_intra;
  std::array<std::vector<double>, kSpeciesCount> c_extra;
  std::vector<double> phi_intra;
  std::vector<double> phi_extra;
  std::vector<double> v;
  int picard_iterations = 0;
};

struct MacroSetup {
  int n = 8;  // macro cells per side
  PhysicalParams params;
  RunConfig config;
  CellMeasures measures;
  Tensor2 d_intra;
  Tensor2 d_extra;
};

/// Structural quantities recorded by the most recent step.
struct MacroStepChecks {
  double phi_extra_max = 0.0;             // con-discon: the extracellular potential
  double potential_sum_residual = 0.0;    // con-con: |A_I phi_I + A_E phi_E|_max
};

/// Potential-equation residuals per macro cell (con-con: I rows then E rows).
struct MacroResiduals {
  std::vector<double> potential;
  std::array<std::vector<double>, kSpeciesCount> intra;
  std::array<std::vector<double>, kSpeciesCount> extra;
};

/// Backward Euler + Picard for the two homogenized systems on an n x n grid with
/// no-flux boundary. Only the diagonal of each effective tensor is used.
class MacroSolver {
 public:
  explicit MacroSolver(MacroSetup setup);

  const MacroSetup& setup() const { return setup_; }
  Connectivity model() const { return setup_.config.connectivity; }

  /// Samples the initial data at macro cell centres; phi_E = 0 and phi_I = v.
  MacroState initialize(const InitialData& init) const;
  MacroState step(const MacroState& state);
  const MacroStepChecks& last_checks() const { return checks_; }

  /// Residuals of  prev -> next  with next's concentrations as lagged coefficients.
  MacroResiduals residuals(const MacroState& prev, const MacroState& next) const;

  /// |Y_I| int C_I + |Y_E| int C_E per species.
  Species3 totals(const MacroState& state) const;
  Species3 compartment_totals(const MacroState& state, Phase phase) const;
  double en_drift(const MacroState& state) const;
  DiagnosticsRow diagnostics(const MacroState& state) const;

 private:
  using Fields = std::array<std::vector<double>, kSpeciesCount>;

  MacroState step_condiscon(const MacroState& state);
  MacroState step_concon(const MacroState& state);
  struct Lagged;
  Lagged lagged(const Fields& c_intra, const Fields& c_extra) const;
  std::vector<double> sigma_weights(const std::vector<double>& sigma_face,
                                    const std::array<double, 2>& d) const;
  Fields advance_species(const DirectSpdSolver& solver, double measure, const Fields& c_old,
                         const Fields& c_face, const std::array<double, 2>& d,
                         const std::vector<double>& phi, const Fields& source, double sign) const;

  MacroSetup setup_;
  int cells_ = 0;
  double h_ = 0.0;
  std::array<double, 2> d_intra_{};
  std::array<double, 2> d_extra_{};
  std::vector<GraphOperator::Edge> faces_;
  std::vector<int> face_axis_;
  GraphOperator extra_op_;
  GraphOperator coupled_op_;
  GraphComponents coupled_comps_;
  DirectSpdSolver potential_solver_;
  DirectSpdSolver intra_species_;
  DirectSpdSolver extra_species_;
  bool intra_diffuses_ = false;
  MacroStepChecks checks_;
};

MacroFields to_fields(const MacroState& state, int n);

/// Averages an n x n field set onto blocks x blocks (n divisible by blocks).
MacroFields coarsen(const MacroFields& fields, int blocks);

/// Diagonal of an effective tensor as used by the macro solver: entries below
/// 1e-10 D (including round-off negatives) become 0; a non-negligible
/// off-diagonal part throws InvalidInput.
std::array<double, 2> macro_diagonal(const Tensor2& t, double diffusion);

}  // namespace ionhom
