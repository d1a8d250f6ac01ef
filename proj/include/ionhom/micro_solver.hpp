#pragma once

#include <array>
#include <vector>

#include "ionhom/diagnostics.hpp"
#include "ionhom/geometry_grid.hpp"
#include "ionhom/linear_numerics.hpp"
#include "ionhom/model_params.hpp"

namespace ionhom {

/// Microscale fields at one time level. Each cell carries the concentrations
/// and potential of its own compartment; v lives on the interface faces.
struct MicroState {
  double t = 0.0;
  std::array<std::vector<double>, kSpeciesCount> c;
  std::vector<double> phi;
  std::vector<double> v;
  int picard_iterations = 0;
};

/// Discrete residuals of the implicit step equations, row per cell.
struct MicroResiduals {
  std::vector<double> potential;
  std::array<std::vector<double>, kSpeciesCount> species;
};

/// Backward Euler + Picard for the electroneutral bidomain Nernst-Planck system
/// on a tagged tissue grid. Membrane faces carry the interface law with the
/// epsilon prefactor realized through the face length.
class MicroSolver {
 public:
  MicroSolver(TaggedGrid grid, PhysicalParams params, RunConfig config, Bounds bounds = {});

  const TaggedGrid& grid() const { return grid_; }
  const PhysicalParams& params() const { return params_; }
  const RunConfig& config() const { return config_; }

  /// Samples the initial data and computes a potential consistent with v = phi0.
  MicroState initialize(const InitialData& init);
  MicroState step(const MicroState& state);

  /// Residuals of the step  prev -> next, evaluated with next's concentrations
  /// as the lagged coefficients. Only potential differences enter.
  MicroResiduals residuals(const MicroState& prev, const MicroState& next) const;

  /// phi_I - phi_E on every interface face.
  std::vector<double> jumps(const std::vector<double>& phi) const;

  DiagnosticsRow diagnostics(const MicroState& state) const;
  Species3 totals(const MicroState& state) const;
  double en_drift(const MicroState& state) const;

 private:
  struct Coefficients;
  Coefficients lagged(const std::array<std::vector<double>, kSpeciesCount>& c) const;
  std::vector<double> solve_potential(const Coefficients& k, const std::vector<double>& v_old);
  void fix_gauge(std::vector<double>& phi, const std::vector<double>& v_ref,
                 const GraphComponents& comps) const;
  void check_positive(const std::array<std::vector<double>, kSpeciesCount>& c) const;

  TaggedGrid grid_;
  PhysicalParams params_;
  RunConfig config_;
  Bounds bounds_;
  int cells_ = 0;
  double face_weight_ = 0.0;  // epsilon * h
  std::vector<GraphOperator::Edge> bulk_;
  GraphOperator potential_op_;
  GraphComponents potential_comps_;
  DirectSpdSolver potential_solver_;
  DirectSpdSolver species_solver_;
};

/// Per-block compartment averages on a blocks x blocks macro grid.
struct MacroFields {
  int n = 0;
  std::array<std::vector<double>, kSpeciesCount> c_intra;
  std::array<std::vector<double>, kSpeciesCount> c_extra;
  std::vector<double> phi_intra;
  std::vector<double> phi_extra;
  std::vector<double> v;
};

/// Block averages over the s-tagged cells (and the interface faces, for v) of each
/// block; a face belongs to the block of its intracellular cell.
MacroFields average_fields(const TaggedGrid& grid, const MicroState& state, int blocks);

}  // namespace ionhom
