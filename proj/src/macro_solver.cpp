#include "ionhom/macro_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ionhom/errors.hpp"
#include "ionhom/membrane.hpp"

namespace ionhom {

namespace {

using Fields = std::array<std::vector<double>, kSpeciesCount>;

std::vector<double> pack(const Fields& a, const Fields& b) {
  std::vector<double> x;
  for (const auto& f : a) x.insert(x.end(), f.begin(), f.end());
  for (const auto& f : b) x.insert(x.end(), f.begin(), f.end());
  return x;
}

void unpack(const std::vector<double>& x, int cells, Fields& a, Fields& b) {
  auto it = x.begin();
  for (auto& f : a) {
    f.assign(it, it + cells);
    it += cells;
  }
  for (auto& f : b) {
    f.assign(it, it + cells);
    it += cells;
  }
}

Species3 at(const Fields& c, int cell) { return {c[0][cell], c[1][cell], c[2][cell]}; }

void check_positive(const Fields& c, Phase phase, const PhysicalParams& params) {
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    for (std::size_t k = 0; k < c[i].size(); ++k) {
      if (!(c[i][k] > 0.0) || !std::isfinite(c[i][k])) {
        std::ostringstream os;
        os << params.species[i].name << "," << phase_letter(phase) << " = " << c[i][k]
           << " in macro cell " << k;
        fail(ErrorKind::PositivityLoss, os.str());
      }
    }
  }
}

}  // namespace

std::array<double, 2> macro_diagonal(const Tensor2& t, double diffusion) {
  const double scale = std::max({std::abs(t.m[0][0]), std::abs(t.m[1][1]), diffusion});
  if (std::abs(t.m[0][1]) > 1e-8 * scale || std::abs(t.m[1][0]) > 1e-8 * scale) {
    fail(ErrorKind::InvalidInput, "macro solver supports diagonal effective tensors only");
  }
  std::array<double, 2> d{t.m[0][0], t.m[1][1]};
  for (double& x : d) {
    if (x < -1e-10 * diffusion) fail(ErrorKind::InvalidInput, "negative effective diffusivity");
    if (x < 1e-10 * diffusion) x = 0.0;
  }
  return d;
}

struct MacroSolver::Lagged {
  std::vector<MembraneTerms> terms;  // per cell
  Fields face_intra;
  Fields face_extra;
  std::vector<double> sigma_intra;
  std::vector<double> sigma_extra;
};

MacroSolver::MacroSolver(MacroSetup setup) : setup_(std::move(setup)) {
  setup_.config.validate();
  const int n = setup_.n;
  if (n < 1) fail(ErrorKind::InvalidInput, "macro grid needs at least one cell");
  const auto& m = setup_.measures;
  if (!(m.intra > 0.0 && m.extra > 0.0 && m.interface >= 0.0)) {
    fail(ErrorKind::InvalidInput, "cell measures must satisfy |Y_I|, |Y_E| > 0, |Gamma| >= 0");
  }
  cells_ = n * n;
  h_ = 1.0 / n;
  const double diffusion = setup_.params.diffusion;
  d_intra_ = macro_diagonal(setup_.d_intra, diffusion);
  d_extra_ = macro_diagonal(setup_.d_extra, diffusion);

  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int c = j * n + i;
      if (i + 1 < n) {
        faces_.emplace_back(c, c + 1);
        face_axis_.push_back(0);
      }
      if (j + 1 < n) {
        faces_.emplace_back(c, c + n);
        face_axis_.push_back(1);
      }
    }
  }
  const double dt = setup_.config.dt;
  auto active_faces = [&](const std::array<double, 2>& d) {
    std::vector<char> a(faces_.size());
    for (std::size_t e = 0; e < faces_.size(); ++e) a[e] = d[face_axis_[e]] > 0.0;
    return a;
  };
  auto factor_species = [&](DirectSpdSolver& solver, double measure,
                            const std::array<double, 2>& d) {
    GraphOperator op(cells_, faces_);
    std::vector<double> diag(cells_, measure * h_ * h_ / dt);
    std::vector<double> w(faces_.size());
    for (std::size_t e = 0; e < faces_.size(); ++e) w[e] = d[face_axis_[e]];
    solver.factorize(op.assemble(diag, w));
  };

  factor_species(extra_species_, m.extra, d_extra_);
  if (model() == Connectivity::ConnectedDisconnected) {
    if (n > 1 && (d_extra_[0] <= 0.0 || d_extra_[1] <= 0.0)) {
      fail(ErrorKind::SingularSystem, "connected-disconnected model needs a positive-definite D_E*");
    }
    extra_op_ = GraphOperator(cells_, faces_);
    coupled_comps_ = graph_components(cells_, faces_, active_faces(d_extra_));
  } else {
    intra_diffuses_ = true;
    factor_species(intra_species_, m.intra, d_intra_);
    std::vector<GraphOperator::Edge> edges;
    std::vector<char> active;
    const auto ai = active_faces(d_intra_);
    const auto ae = active_faces(d_extra_);
    for (std::size_t e = 0; e < faces_.size(); ++e) {
      edges.push_back(faces_[e]);
      active.push_back(ai[e]);
    }
    for (std::size_t e = 0; e < faces_.size(); ++e) {
      edges.emplace_back(faces_[e].first + cells_, faces_[e].second + cells_);
      active.push_back(ae[e]);
    }
    const double coupling =
        m.interface * (setup_.params.total_conductance() + setup_.params.capacitance / dt);
    for (int c = 0; c < cells_; ++c) {
      edges.emplace_back(c, c + cells_);
      active.push_back(coupling > 0.0);
    }
    coupled_comps_ = graph_components(2 * cells_, edges, active);
    if (coupled_comps_.count != 1) {
      std::ostringstream os;
      os << "coupled potential operator has a " << coupled_comps_.count
         << "-dimensional null space after removing the constant gauge";
      fail(ErrorKind::SingularSystem, os.str());
    }
    coupled_op_ = GraphOperator(2 * cells_, std::move(edges));
  }
}

MacroState MacroSolver::initialize(const InitialData& init) const {
  MacroState s;
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    s.c_intra[i].resize(cells_);
    s.c_extra[i].resize(cells_);
  }
  s.v.resize(cells_);
  s.phi_extra.assign(cells_, 0.0);
  const int n = setup_.n;
  for (int c = 0; c < cells_; ++c) {
    const Point p{((c % n) + 0.5) * h_, ((c / n) + 0.5) * h_};
    const Species3 ci = init.intra_at(p);
    const Species3 ce = init.extra_at(p);
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      s.c_intra[i][c] = ci[i];
      s.c_extra[i][c] = ce[i];
    }
    s.v[c] = init.phi0 ? init.phi0(p) : 0.0;
  }
  check_positive(s.c_intra, Phase::I, setup_.params);
  check_positive(s.c_extra, Phase::E, setup_.params);
  s.phi_intra = s.v;
  return s;
}

MacroSolver::Lagged MacroSolver::lagged(const Fields& c_intra, const Fields& c_extra) const {
  Lagged k;
  k.terms.reserve(cells_);
  for (int c = 0; c < cells_; ++c) {
    k.terms.push_back(membrane_terms(at(c_intra, c), at(c_extra, c), setup_.params));
  }
  k.sigma_intra.assign(faces_.size(), 0.0);
  k.sigma_extra.assign(faces_.size(), 0.0);
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    const double z = setup_.params.species.valence(i);
    k.face_intra[i].resize(faces_.size());
    k.face_extra[i].resize(faces_.size());
    for (std::size_t e = 0; e < faces_.size(); ++e) {
      const auto [a, b] = faces_[e];
      k.face_intra[i][e] = 0.5 * (c_intra[i][a] + c_intra[i][b]);
      k.face_extra[i][e] = 0.5 * (c_extra[i][a] + c_extra[i][b]);
      k.sigma_intra[e] += z * z * k.face_intra[i][e];
      k.sigma_extra[e] += z * z * k.face_extra[i][e];
    }
  }
  return k;
}

std::vector<double> MacroSolver::sigma_weights(const std::vector<double>& sigma_face,
                                               const std::array<double, 2>& d) const {
  std::vector<double> w(faces_.size());
  for (std::size_t e = 0; e < faces_.size(); ++e) w[e] = sigma_face[e] * d[face_axis_[e]];
  return w;
}

MacroSolver::Fields MacroSolver::advance_species(const DirectSpdSolver& solver, double measure,
                                                 const Fields& c_old, const Fields& c_face,
                                                 const std::array<double, 2>& d,
                                                 const std::vector<double>& phi,
                                                 const Fields& source, double sign) const {
  const double weight = measure * h_ * h_ / setup_.config.dt;
  Fields out;
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    const double z = setup_.params.species.valence(i);
    std::vector<double> rhs(cells_);
    for (int c = 0; c < cells_; ++c) rhs[c] = weight * c_old[i][c] + sign * source[i][c];
    for (std::size_t e = 0; e < faces_.size(); ++e) {
      const auto [a, b] = faces_[e];
      const double drift = d[face_axis_[e]] * z * c_face[i][e] * (phi[a] - phi[b]);
      rhs[a] -= drift;
      rhs[b] += drift;
    }
    out[i] = solver.solve(rhs);
  }
  return out;
}

MacroState MacroSolver::step(const MacroState& state) {
  return model() == Connectivity::ConnectedDisconnected ? step_condiscon(state)
                                                        : step_concon(state);
}

MacroState MacroSolver::step_condiscon(const MacroState& state) {
  const auto& p = setup_.params;
  const double dt = setup_.config.dt;
  const double gamma = setup_.measures.interface;
  const double h2 = h_ * h_;
  const double denom = p.capacitance / dt + p.total_conductance();
  std::vector<double> v(cells_), phi_e(cells_, 0.0);
  double phi_max = 0.0;

  auto sweep = [&](const std::vector<double>& x) {
    Fields ci, ce;
    unpack(x, cells_, ci, ce);
    check_positive(ci, Phase::I, p);
    check_positive(ce, Phase::E, p);
    const Lagged k = lagged(ci, ce);

    for (int c = 0; c < cells_; ++c) {
      const double s = k.terms[c].offset;
      if (denom > 0.0) {
        v[c] = (p.capacitance * state.v[c] / dt - s) / denom;
      } else if (s == 0.0) {
        v[c] = state.v[c];
      } else {
        fail(ErrorKind::SingularSystem, "membrane equation has no solution with P_m = G = 0");
      }
    }

    if (cells_ > 1) {
      potential_solver_.factorize(
          extra_op_.assemble({}, sigma_weights(k.sigma_extra, d_extra_)),
          NullSpace::from_components(coupled_comps_.labels, coupled_comps_.count));
      phi_e = potential_solver_.solve(std::vector<double>(cells_, 0.0));
    }
    phi_max = 0.0;
    for (double x : phi_e) phi_max = std::max(phi_max, std::abs(x));
    if (phi_max > setup_.config.linear_tol) {
      std::ostringstream os;
      os << "extracellular potential " << phi_max << " exceeds linear_tol";
      fail(ErrorKind::InvariantViolation, os.str());
    }

    Fields source;
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      const double z = p.species.valence(i);
      source[i].resize(cells_);
      for (int c = 0; c < cells_; ++c) {
        const double f = species_flux(i, k.terms[c], v[c], (v[c] - state.v[c]) / dt, p);
        source[i][c] = h2 * gamma * f / z;
      }
    }
    const Fields next_e = advance_species(extra_species_, setup_.measures.extra, state.c_extra,
                                          k.face_extra, d_extra_, phi_e, source, +1.0);
    Fields next_i;
    const double local = dt / (h2 * setup_.measures.intra);
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      next_i[i].resize(cells_);
      for (int c = 0; c < cells_; ++c) {
        next_i[i][c] = state.c_intra[i][c] - local * source[i][c];
      }
    }
    return pack(next_i, next_e);
  };

  const auto& cfg = setup_.config;
  const PicardResult r = picard_loop(sweep, pack(state.c_intra, state.c_extra),
                                     {cfg.picard_tol, cfg.picard_max_iter, cfg.picard_damping});
  MacroState out;
  out.t = state.t + dt;
  unpack(r.x, cells_, out.c_intra, out.c_extra);
  check_positive(out.c_intra, Phase::I, p);
  check_positive(out.c_extra, Phase::E, p);
  out.v = v;
  out.phi_extra = phi_e;
  out.phi_intra.resize(cells_);
  for (int c = 0; c < cells_; ++c) out.phi_intra[c] = phi_e[c] + v[c];
  out.picard_iterations = r.iterations;
  checks_ = {phi_max, 0.0};
  return out;
}

MacroState MacroSolver::step_concon(const MacroState& state) {
  const auto& p = setup_.params;
  const double dt = setup_.config.dt;
  const double gamma = setup_.measures.interface;
  const double h2 = h_ * h_;
  const double coupling = h2 * gamma * (p.total_conductance() + p.capacitance / dt);
  std::vector<double> phi_i(cells_), phi_e(cells_), v(cells_);
  double sum_residual = 0.0;

  auto sweep = [&](const std::vector<double>& x) {
    Fields ci, ce;
    unpack(x, cells_, ci, ce);
    check_positive(ci, Phase::I, p);
    check_positive(ce, Phase::E, p);
    const Lagged k = lagged(ci, ce);

    const auto wi = sigma_weights(k.sigma_intra, d_intra_);
    const auto we = sigma_weights(k.sigma_extra, d_extra_);
    std::vector<double> weights(wi);
    weights.insert(weights.end(), we.begin(), we.end());
    weights.resize(weights.size() + cells_, coupling);
    std::vector<double> rhs(2 * cells_);
    for (int c = 0; c < cells_; ++c) {
      const double r = h2 * gamma * (k.terms[c].offset - p.capacitance * state.v[c] / dt);
      rhs[c] = -r;
      rhs[c + cells_] = r;
    }
    potential_solver_.factorize(
        coupled_op_.assemble({}, weights),
        NullSpace::from_components(coupled_comps_.labels, coupled_comps_.count));
    const std::vector<double> phi = potential_solver_.solve(rhs);
    double mean_e = 0.0;
    for (int c = 0; c < cells_; ++c) mean_e += phi[c + cells_];
    mean_e /= cells_;
    for (int c = 0; c < cells_; ++c) {
      phi_i[c] = phi[c] - mean_e;
      phi_e[c] = phi[c + cells_] - mean_e;
      v[c] = phi_i[c] - phi_e[c];
    }

    // The membrane terms cancel in the sum of the two potential equations.
    std::vector<double> sum(cells_, 0.0);
    for (std::size_t e = 0; e < faces_.size(); ++e) {
      const auto [a, b] = faces_[e];
      const double flux = wi[e] * (phi_i[a] - phi_i[b]) + we[e] * (phi_e[a] - phi_e[b]);
      sum[a] += flux;
      sum[b] -= flux;
    }
    sum_residual = 0.0;
    for (double s : sum) sum_residual = std::max(sum_residual, std::abs(s));

    Fields source;
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      const double z = p.species.valence(i);
      source[i].resize(cells_);
      for (int c = 0; c < cells_; ++c) {
        const double f = species_flux(i, k.terms[c], v[c], (v[c] - state.v[c]) / dt, p);
        source[i][c] = h2 * gamma * f / z;
      }
    }
    const Fields next_i = advance_species(intra_species_, setup_.measures.intra, state.c_intra,
                                          k.face_intra, d_intra_, phi_i, source, -1.0);
    const Fields next_e = advance_species(extra_species_, setup_.measures.extra, state.c_extra,
                                          k.face_extra, d_extra_, phi_e, source, +1.0);
    return pack(next_i, next_e);
  };

  const auto& cfg = setup_.config;
  const PicardResult r = picard_loop(sweep, pack(state.c_intra, state.c_extra),
                                     {cfg.picard_tol, cfg.picard_max_iter, cfg.picard_damping});
  if (sum_residual > cfg.linear_tol) {
    std::ostringstream os;
    os << "potential-sum residual " << sum_residual << " exceeds linear_tol";
    fail(ErrorKind::InvariantViolation, os.str());
  }
  MacroState out;
  out.t = state.t + dt;
  unpack(r.x, cells_, out.c_intra, out.c_extra);
  check_positive(out.c_intra, Phase::I, p);
  check_positive(out.c_extra, Phase::E, p);
  out.phi_intra = phi_i;
  out.phi_extra = phi_e;
  out.v = v;
  out.picard_iterations = r.iterations;
  checks_ = {0.0, sum_residual};
  return out;
}

MacroResiduals MacroSolver::residuals(const MacroState& prev, const MacroState& next) const {
  const auto& p = setup_.params;
  const double dt = setup_.config.dt;
  const double gamma = setup_.measures.interface;
  const double h2 = h_ * h_;
  const Lagged k = lagged(next.c_intra, next.c_extra);
  const bool concon = model() == Connectivity::ConnectedConnected;
  const std::array<double, 2> di = concon ? d_intra_ : std::array<double, 2>{0.0, 0.0};
  const auto wi = sigma_weights(k.sigma_intra, di);
  const auto we = sigma_weights(k.sigma_extra, d_extra_);

  MacroResiduals r;
  r.potential.assign(2 * cells_, 0.0);
  std::vector<double> v(cells_);
  for (int c = 0; c < cells_; ++c) v[c] = next.phi_intra[c] - next.phi_extra[c];
  for (std::size_t e = 0; e < faces_.size(); ++e) {
    const auto [a, b] = faces_[e];
    const double fi = wi[e] * (next.phi_intra[a] - next.phi_intra[b]);
    const double fe = we[e] * (next.phi_extra[a] - next.phi_extra[b]);
    r.potential[a] += fi;
    r.potential[b] -= fi;
    r.potential[a + cells_] += fe;
    r.potential[b + cells_] -= fe;
  }
  Fields source;
  for (std::size_t i = 0; i < kSpeciesCount; ++i) source[i].resize(cells_);
  for (int c = 0; c < cells_; ++c) {
    const double dvdt = (v[c] - prev.v[c]) / dt;
    double total = 0.0;
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      const double f = species_flux(i, k.terms[c], v[c], dvdt, p);
      total += f;
      source[i][c] = h2 * gamma * f / p.species.valence(i);
    }
    if (concon) {
      r.potential[c] += h2 * gamma * total;
      r.potential[c + cells_] -= h2 * gamma * total;
    } else {
      // Membrane equation in place of the intracellular potential equation.
      r.potential[c] = h2 * gamma * total;
    }
  }
  auto species = [&](const Fields& c_new, const Fields& c_old, const Fields& c_face,
                     const std::array<double, 2>& d, const std::vector<double>& phi,
                     double measure, double sign, Fields& out) {
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      const double z = p.species.valence(i);
      out[i].resize(cells_);
      for (int c = 0; c < cells_; ++c) {
        out[i][c] = measure * h2 * (c_new[i][c] - c_old[i][c]) / dt - sign * source[i][c];
      }
      for (std::size_t e = 0; e < faces_.size(); ++e) {
        const auto [a, b] = faces_[e];
        const double flux = d[face_axis_[e]] * ((c_new[i][a] - c_new[i][b]) +
                                                z * c_face[i][e] * (phi[a] - phi[b]));
        out[i][a] += flux;
        out[i][b] -= flux;
      }
    }
  };
  species(next.c_intra, prev.c_intra, k.face_intra, di, next.phi_intra, setup_.measures.intra,
          -1.0, r.intra);
  species(next.c_extra, prev.c_extra, k.face_extra, d_extra_, next.phi_extra,
          setup_.measures.extra, +1.0, r.extra);
  return r;
}

Species3 MacroSolver::compartment_totals(const MacroState& state, Phase phase) const {
  const auto& c = phase == Phase::I ? state.c_intra : state.c_extra;
  const double measure = phase == Phase::I ? setup_.measures.intra : setup_.measures.extra;
  Species3 t{};
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    double s = 0.0;
    for (double x : c[i]) s += x;
    t[i] = measure * h_ * h_ * s;
  }
  return t;
}

Species3 MacroSolver::totals(const MacroState& state) const {
  const Species3 a = compartment_totals(state, Phase::I);
  const Species3 b = compartment_totals(state, Phase::E);
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

double MacroSolver::en_drift(const MacroState& state) const {
  double worst = 0.0;
  for (const auto* c : {&state.c_intra, &state.c_extra}) {
    for (int k = 0; k < cells_; ++k) {
      double q = 0.0;
      for (std::size_t i = 0; i < kSpeciesCount; ++i) {
        q += setup_.params.species.valence(i) * (*c)[i][k];
      }
      worst = std::max(worst, std::abs(q));
    }
  }
  return worst;
}

DiagnosticsRow MacroSolver::diagnostics(const MacroState& state) const {
  DiagnosticsRow row;
  row.t = state.t;
  row.totals = totals(state);
  row.en_drift = en_drift(state);
  row.picard_iterations = state.picard_iterations;
  const double h2 = h_ * h_;
  const auto& m = setup_.measures;
  row.min_c = state.c_intra[0][0];
  row.max_c = state.c_intra[0][0];
  row.min_sigma = -1.0;
  double c2 = 0.0, grad2 = 0.0, phi2 = 0.0, dphi2 = 0.0, v2 = 0.0, cg2 = 0.0;
  for (int k = 0; k < cells_; ++k) {
    double si = 0.0, se = 0.0;
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      const double z2 = std::pow(setup_.params.species.valence(i), 2);
      const double ci = state.c_intra[i][k];
      const double ce = state.c_extra[i][k];
      si += z2 * ci;
      se += z2 * ce;
      row.min_c = std::min({row.min_c, ci, ce});
      row.max_c = std::max({row.max_c, ci, ce});
      c2 += h2 * (m.intra * ci * ci + m.extra * ce * ce);
      cg2 += h2 * m.interface * (ci * ci + ce * ce);
    }
    const double smin = std::min(si, se);
    row.min_sigma = row.min_sigma < 0.0 ? smin : std::min(row.min_sigma, smin);
    phi2 += h2 * (m.intra * state.phi_intra[k] * state.phi_intra[k] +
                  m.extra * state.phi_extra[k] * state.phi_extra[k]);
    v2 += h2 * m.interface * state.v[k] * state.v[k];
  }
  for (const auto& [a, b] : faces_) {
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      const double di = state.c_intra[i][a] - state.c_intra[i][b];
      const double de = state.c_extra[i][a] - state.c_extra[i][b];
      grad2 += m.intra * di * di + m.extra * de * de;
    }
    const double pi = state.phi_intra[a] - state.phi_intra[b];
    const double pe = state.phi_extra[a] - state.phi_extra[b];
    dphi2 += m.intra * pi * pi + m.extra * pe * pe;
  }
  row.norm_c = std::sqrt(c2);
  row.norm_grad_c = std::sqrt(grad2);
  row.norm_c_gamma = std::sqrt(cg2);
  row.norm_jump_gamma = std::sqrt(v2);
  row.norm_phi_h1 = std::sqrt(phi2 + dphi2);
  return row;
}

MacroFields to_fields(const MacroState& state, int n) {
  MacroFields f;
  f.n = n;
  f.c_intra = state.c_intra;
  f.c_extra = state.c_extra;
  f.phi_intra = state.phi_intra;
  f.phi_extra = state.phi_extra;
  f.v = state.v;
  return f;
}

MacroFields coarsen(const MacroFields& fields, int blocks) {
  if (blocks < 1 || fields.n % blocks != 0) {
    std::ostringstream os;
    os << "macro grid of " << fields.n << " cells per side cannot be averaged onto " << blocks;
    fail(ErrorKind::ResolutionMismatch, os.str());
  }
  const int b = fields.n / blocks;
  const std::size_t m = static_cast<std::size_t>(blocks) * blocks;
  auto average = [&](const std::vector<double>& src) {
    std::vector<double> out(m, 0.0);
    for (int c = 0; c < fields.n * fields.n; ++c) {
      const int k = ((c / fields.n) / b) * blocks + (c % fields.n) / b;
      out[k] += src[c];
    }
    for (double& x : out) x /= static_cast<double>(b) * b;
    return out;
  };
  MacroFields out;
  out.n = blocks;
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    out.c_intra[i] = average(fields.c_intra[i]);
    out.c_extra[i] = average(fields.c_extra[i]);
  }
  out.phi_intra = average(fields.phi_intra);
  out.phi_extra = average(fields.phi_extra);
  out.v = average(fields.v);
  return out;
}

}  // namespace ionhom
