#include "ionhom/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ionhom {

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void DiagnosticsRecord::push(const DiagnosticsRow& row, double wall) {
  rows.push_back(row);
  wall_seconds.push_back(wall);
}

DiagnosticsSummary DiagnosticsRecord::summary() const {
  DiagnosticsSummary s;
  if (rows.empty()) return s;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    s.c_linf_l2 = std::max(s.c_linf_l2, r.norm_c);
    s.max_en_drift = std::max(s.max_en_drift, r.en_drift);
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      const double base = rows.front().totals[i];
      const double drift = std::abs(r.totals[i] - base) / (base != 0.0 ? std::abs(base) : 1.0);
      s.max_relative_total_drift[i] = std::max(s.max_relative_total_drift[i], drift);
    }
    if (k == 0) continue;
    const double dt = r.t - rows[k - 1].t;
    s.grad_c_l2_l2 += dt * r.norm_grad_c * r.norm_grad_c;
    s.c_gamma_l2_l2 += dt * r.norm_c_gamma * r.norm_c_gamma;
    s.jump_gamma_l2_l2 += dt * r.norm_jump_gamma * r.norm_jump_gamma;
    s.phi_l2_h1 += dt * r.norm_phi_h1 * r.norm_phi_h1;
  }
  s.grad_c_l2_l2 = std::sqrt(s.grad_c_l2_l2);
  s.c_gamma_l2_l2 = std::sqrt(s.c_gamma_l2_l2);
  s.jump_gamma_l2_l2 = std::sqrt(s.jump_gamma_l2_l2);
  s.phi_l2_h1 = std::sqrt(s.phi_l2_h1);
  return s;
}

std::string DiagnosticsRecord::csv_header() {
  return "t,total_Na,total_K,total_Cl,en_drift,min_c,max_c,min_sigma,norm_c_l2,norm_grad_c_l2,"
         "norm_c_gamma,norm_jump_gamma,norm_phi_h1,picard_iterations\n";
}

std::string DiagnosticsRecord::csv() const {
  std::string out = csv_header();
  for (const auto& r : rows) {
    const double values[] = {r.t,        r.totals[0], r.totals[1],    r.totals[2],
                             r.en_drift, r.min_c,     r.max_c,        r.min_sigma,
                             r.norm_c,   r.norm_grad_c, r.norm_c_gamma, r.norm_jump_gamma,
                             r.norm_phi_h1};
    for (double v : values) {
      out += format_double(v);
      out += ',';
    }
    out += std::to_string(r.picard_iterations);
    out += '\n';
  }
  return out;
}

std::string summary_csv(const DiagnosticsSummary& s) {
  std::string out = "quantity,value\n";
  auto row = [&](const char* name, double v) {
    out += name;
    out += ',';
    out += format_double(v);
    out += '\n';
  };
  row("c_linf_l2", s.c_linf_l2);
  row("grad_c_l2_l2", s.grad_c_l2_l2);
  row("c_gamma_l2_l2", s.c_gamma_l2_l2);
  row("jump_gamma_l2_l2", s.jump_gamma_l2_l2);
  row("phi_l2_h1", s.phi_l2_h1);
  row("max_en_drift", s.max_en_drift);
  row("max_total_drift_Na", s.max_relative_total_drift[0]);
  row("max_total_drift_K", s.max_relative_total_drift[1]);
  row("max_total_drift_Cl", s.max_relative_total_drift[2]);
  return out;
}

}  // namespace ionhom
