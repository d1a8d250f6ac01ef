#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ionhom/cell_problem.hpp"
#include "ionhom/diagnostics.hpp"
#include "ionhom/geometry_grid.hpp"
#include "ionhom/macro_solver.hpp"
#include "ionhom/micro_solver.hpp"
#include "ionhom/model_params.hpp"

namespace ionhom {

enum class RunMode { Micro, Macro, CellProblem };

/// Everything a run needs, resolved from a flat `key = value` file.
struct Config {
  PhysicalParams params;
  Species3 c_intra{10.0, 135.0, 145.0};
  Species3 c_extra{140.0, 5.0, 145.0};
  double phi0 = 0.0;
  /// Relative amplitude a of the smooth factor 1 + a cos(pi x) cos(pi y) applied to
  /// every initial concentration (keeps electroneutrality).
  double perturbation = 0.0;
  Bounds bounds;
  /// Empty shape name means: square for con_discon, cross for con_con.
  std::string shape;
  double shape_size = 0.5;
  RunConfig run;
  RunMode mode = RunMode::Micro;
  int macro_n = 8;
  std::vector<int> study_epsilons{2, 4, 8};
  std::vector<double> snapshot_fractions{0.25, 0.5, 1.0};

  UnitCellGeometry geometry() const;
};

Config default_config();
/// Parses on top of the defaults. Unknown keys and malformed values throw InvalidInput.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);
/// Canonical, fully resolved listing of every key.
std::string echo_config(const Config& cfg);
/// FNV-1a over the canonical listing.
std::uint64_t config_hash(const Config& cfg);
std::string hash_hex(std::uint64_t h);

InitialData make_initial_data(const Config& cfg);
ValidationReport validate_config(const Config& cfg);

/// Unit-cell grid, its measures and both effective tensors.
struct CellData {
  TaggedGrid cell;
  CellMeasures measures;
  EffectiveTensor intra;
  EffectiveTensor extra;
};

CellData compute_cell_data(const Config& cfg);
MacroSetup make_macro_setup(const Config& cfg, const CellData& cell, int n);

/// Step indices (1-based step counts) at which snapshots are taken.
std::vector<int> snapshot_steps(const Config& cfg);

/// Files written into a run directory, relative to it.
struct RunSummary {
  std::vector<std::string> files;
  DiagnosticsSummary diagnostics;
};

/// Executes the run selected by cfg.mode and writes CSV artifacts plus manifest.txt.
RunSummary run_single(const Config& cfg, const std::filesystem::path& out);

/// Per-field errors of one epsilon leg, one entry per snapshot.
struct LegResult {
  int epsilon_inv = 0;
  bool ok = false;
  std::string error;
  std::vector<std::vector<double>> errors;  // [field][snapshot]
  DiagnosticsSummary diagnostics;
};

struct ConvergenceReport {
  std::vector<std::string> fields;
  std::vector<double> snapshot_times;
  std::vector<LegResult> legs;  // epsilon strictly decreasing

  /// errors(k+1) / errors(k) between consecutive successful legs; NaN if either failed.
  double ratio(std::size_t leg, std::size_t field, std::size_t snapshot) const;
  /// Every ratio < 1, for every field and snapshot, and every leg succeeded.
  bool monotone() const;
};

/// Field order used by the convergence study.
std::vector<std::string> study_field_names();

/// Normalized discrete L2 distance  |a - b| / scale  on a uniform n x n grid.
double normalized_l2_error(const std::vector<double>& a, const std::vector<double>& b,
                           double scale);

/// Runs macro once on cfg.macro_n, micro once per epsilon (isolated directories
/// under out), compares epsilon-cell averages with block-averaged macro fields.
ConvergenceReport run_convergence_study(const Config& cfg, const std::vector<int>& epsilons,
                                        const std::filesystem::path& out);

/// errors.csv plus one plot_error_<field>.csv per field. Returns the file names.
std::vector<std::string> emit_plot_data(const ConvergenceReport& report,
                                        const std::filesystem::path& out);

/// Tabulated membrane currents over a v grid at the configured initial traces.
std::string membrane_probe_csv(const Config& cfg, double v_min, double v_max, int points);

/// Tensor CSV: subdomain,entry,value rows plus a symmetry row per subdomain.
std::string tensor_csv(const CellData& data, double diffusion);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string error_json(const std::string& kind, const std::string& message);

}  // namespace ionhom
