#pragma once

#include <string>
#include <vector>

#include "ionhom/model_params.hpp"

namespace ionhom {

/// One time level of the monitored quantities.
struct DiagnosticsRow {
  double t = 0.0;
  Species3 totals{};
  double en_drift = 0.0;       // max over cells of |sum_i z_i C_i|
  double min_c = 0.0;
  double max_c = 0.0;
  double min_sigma = 0.0;
  double norm_c = 0.0;         // ||C(t)||_{L2}
  double norm_grad_c = 0.0;    // ||grad C(t)||_{L2}, broken across the membrane
  double norm_c_gamma = 0.0;   // sqrt(eps) ||C(t)||_{L2(Gamma_eps)}, both traces
  double norm_jump_gamma = 0.0;  // sqrt(eps) ||[[phi]](t)||_{L2(Gamma_eps)}
  double norm_phi_h1 = 0.0;    // ||phi(t)||_{H1}, broken
  int picard_iterations = 0;
};

/// Space-time norms accumulated over a trajectory.
struct DiagnosticsSummary {
  double c_linf_l2 = 0.0;
  double grad_c_l2_l2 = 0.0;
  double c_gamma_l2_l2 = 0.0;
  double jump_gamma_l2_l2 = 0.0;
  double phi_l2_h1 = 0.0;
  double max_en_drift = 0.0;
  Species3 max_relative_total_drift{};
};

struct DiagnosticsRecord {
  std::vector<DiagnosticsRow> rows;
  std::vector<double> wall_seconds;  // per step, kept out of the CSV for reproducibility

  void push(const DiagnosticsRow& row, double wall = 0.0);
  DiagnosticsSummary summary() const;
  std::string csv() const;
  static std::string csv_header();
};

std::string summary_csv(const DiagnosticsSummary& s);

/// "%.17g": round-trip exact and locale independent.
std::string format_double(double x);

}  // namespace ionhom
