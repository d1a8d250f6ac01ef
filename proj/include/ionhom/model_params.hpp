#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ionhom {

inline constexpr std::size_t kSpeciesCount = 3;

/// Per-species quantity, indexed Na, K, Cl.
using Species3 = std::array<double, kSpeciesCount>;

/// Intracellular (I) or extracellular (E) compartment.
enum class Phase : std::uint8_t { I = 0, E = 1 };

constexpr char phase_letter(Phase p) { return p == Phase::I ? 'I' : 'E'; }

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct SpeciesSpec {
  std::string name;
  int valence = 0;
  double capacitor_weight = 0.0;
};

/// Ordered species list. Construction enforces three species, admissible
/// valences and capacitor weights summing to one.
class SpeciesSet {
 public:
  explicit SpeciesSet(std::vector<SpeciesSpec> species);

  const SpeciesSpec& operator[](std::size_t i) const { return species_[i]; }
  std::size_t size() const { return species_.size(); }
  int valence(std::size_t i) const { return species_[i].valence; }
  double capacitor_weight(std::size_t i) const { return species_[i].capacitor_weight; }
  auto begin() const { return species_.begin(); }
  auto end() const { return species_.end(); }

  /// Na+, K+, Cl- with equal capacitor weights.
  static SpeciesSet sodium_potassium_chloride();

 private:
  std::vector<SpeciesSpec> species_;
};

/// Two-term Na/K pump: maximum currents and half-saturation thresholds.
struct PumpParams {
  double i_max1 = 0.0;
  double i_max2 = 0.0;
  double k_na1 = 1.0;
  double k_na2 = 1.0;
  double k_k1 = 1.0;
  double k_k2 = 1.0;
};

struct PhysicalParams {
  SpeciesSet species = SpeciesSet::sodium_potassium_chloride();
  double diffusion = 1.0;     // shared by all species
  Species3 conductance{1.0, 1.0, 1.0};
  double capacitance = 1.0;   // P_m
  PumpParams pump{};

  double total_conductance() const {
    return conductance[0] + conductance[1] + conductance[2];
  }
};

using ScalarField = std::function<double(Point)>;

struct InitialData {
  std::array<ScalarField, kSpeciesCount> c_intra;
  std::array<ScalarField, kSpeciesCount> c_extra;
  ScalarField phi0;  // initial membrane jump [[phi]]

  static InitialData uniform(const Species3& c_intra, const Species3& c_extra, double phi0);

  Species3 intra_at(Point p) const;
  Species3 extra_at(Point p) const;
};

/// Standing positivity bounds: C_d <= C <= C_u and sum z^2 C >= C_l.
struct Bounds {
  double c_d = 1.0;
  double c_u = 200.0;
  double c_l = 1.0;
};

enum class Connectivity { ConnectedDisconnected, ConnectedConnected };

struct RunConfig {
  int epsilon_inv = 4;
  int n_per_cell = 16;
  double dt = 1e-3;
  double t_end = 0.5;
  double picard_tol = 1e-10;
  int picard_max_iter = 50;
  double picard_damping = 1.0;
  double linear_tol = 1e-12;
  Connectivity connectivity = Connectivity::ConnectedDisconnected;

  int grid_resolution() const { return epsilon_inv * n_per_cell; }
  double epsilon() const { return 1.0 / epsilon_inv; }
  /// Throws InvalidInput on any violated invariant.
  void validate() const;
};

/// Where initial data is checked, together with the compartment that lives there.
struct SamplePoint {
  Point location;
  Phase phase;
};

struct CheckResult {
  std::string name;
  bool passed = true;
  std::string detail;
  std::optional<Point> location;
};

struct ValidationReport {
  std::vector<CheckResult> checks;

  bool ok() const;
  std::string summary() const;
};

/// Checks parameters and initial data against the standing assumptions.
/// Violations are reported, not thrown; only structural problems throw.
ValidationReport validate_params(const PhysicalParams& params, const InitialData& init,
                                 const Bounds& bounds, const std::vector<SamplePoint>& samples);

/// Same, sampling both compartments at the centres of an n x n grid on (0,1)^2.
ValidationReport validate_params(const PhysicalParams& params, const InitialData& init,
                                 const Bounds& bounds, int sample_n = 32);

struct DefaultSetup {
  PhysicalParams params;
  InitialData init;
  Species3 c_intra;
  Species3 c_extra;
  double phi0;
};

/// Nondimensional O(1) parameter set with a K-like intra/extra asymmetry.
/// The values are arbitrary but satisfy every standing assumption.
DefaultSetup default_params();

}  // namespace ionhom
