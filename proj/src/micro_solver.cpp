#include "ionhom/micro_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ionhom/errors.hpp"
#include "ionhom/membrane.hpp"

namespace ionhom {

struct MicroSolver::Coefficients {
  std::array<std::vector<double>, kSpeciesCount> c_face;  // bulk-face means
  std::vector<double> sigma_face;
  std::vector<MembraneTerms> terms;  // per interface face
};

namespace {

using Fields = std::array<std::vector<double>, kSpeciesCount>;

std::vector<double> pack(const Fields& c) {
  std::vector<double> x;
  x.reserve(c[0].size() * kSpeciesCount);
  for (const auto& f : c) x.insert(x.end(), f.begin(), f.end());
  return x;
}

Fields unpack(const std::vector<double>& x, int cells) {
  Fields c;
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    c[i].assign(x.begin() + i * cells, x.begin() + (i + 1) * cells);
  }
  return c;
}

Species3 at(const Fields& c, int cell) { return {c[0][cell], c[1][cell], c[2][cell]}; }

}  // namespace

MicroSolver::MicroSolver(TaggedGrid grid, PhysicalParams params, RunConfig config, Bounds bounds)
    : grid_(std::move(grid)), params_(std::move(params)), config_(config), bounds_(bounds) {
  config_.validate();
  cells_ = static_cast<int>(grid_.cell_count());
  face_weight_ = grid_.epsilon() * grid_.h;

  const int n = grid_.n;
  for (int c = 0; c < cells_; ++c) {
    const int i = c % n;
    const int j = c / n;
    const int right = (i + 1 < n) ? grid_.index(i + 1, j) : (grid_.periodic ? grid_.index(0, j) : -1);
    const int up = (j + 1 < n) ? grid_.index(i, j + 1) : (grid_.periodic ? grid_.index(i, 0) : -1);
    for (int nb : {right, up}) {
      if (nb >= 0 && grid_.tags[nb] == grid_.tags[c]) bulk_.emplace_back(c, nb);
    }
  }

  std::vector<GraphOperator::Edge> edges = bulk_;
  for (const auto& f : grid_.interface_faces) edges.emplace_back(f.intra_cell, f.extra_cell);
  const double kappa = params_.total_conductance() + params_.capacitance / config_.dt;
  std::vector<char> active(edges.size(), 1);
  if (!(kappa > 0.0)) std::fill(active.begin() + bulk_.size(), active.end(), 0);
  potential_comps_ = graph_components(cells_, edges, active);
  potential_op_ = GraphOperator(cells_, std::move(edges));

  GraphOperator species_op(cells_, bulk_);
  const std::vector<double> diag(cells_, grid_.cell_area() / config_.dt);
  const std::vector<double> w(bulk_.size(), params_.diffusion);
  species_solver_.factorize(species_op.assemble(diag, w));
}

void MicroSolver::check_positive(const Fields& c) const {
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    for (int cell = 0; cell < cells_; ++cell) {
      const double x = c[i][cell];
      if (!(x > 0.0) || !std::isfinite(x)) {
        std::ostringstream os;
        const Point p = grid_.center(cell);
        os << params_.species[i].name << " concentration " << x << " at (" << p.x << ", " << p.y
           << ")";
        fail(ErrorKind::PositivityLoss, os.str());
      }
    }
  }
}

MicroSolver::Coefficients MicroSolver::lagged(const Fields& c) const {
  Coefficients k;
  k.sigma_face.assign(bulk_.size(), 0.0);
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    const double z = params_.species.valence(i);
    k.c_face[i].resize(bulk_.size());
    for (std::size_t e = 0; e < bulk_.size(); ++e) {
      const double mean = 0.5 * (c[i][bulk_[e].first] + c[i][bulk_[e].second]);
      k.c_face[i][e] = mean;
      k.sigma_face[e] += z * z * mean;
    }
  }
  k.terms.reserve(grid_.interface_faces.size());
  for (const auto& f : grid_.interface_faces) {
    k.terms.push_back(membrane_terms(at(c, f.intra_cell), at(c, f.extra_cell), params_));
  }
  return k;
}

std::vector<double> MicroSolver::jumps(const std::vector<double>& phi) const {
  std::vector<double> v(grid_.interface_faces.size());
  for (std::size_t f = 0; f < v.size(); ++f) {
    v[f] = phi[grid_.interface_faces[f].intra_cell] - phi[grid_.interface_faces[f].extra_cell];
  }
  return v;
}

void MicroSolver::fix_gauge(std::vector<double>& phi, const std::vector<double>& v_ref,
                            const GraphComponents& comps) const {
  std::vector<double> sum_e(comps.count, 0.0);
  std::vector<int> count_e(comps.count, 0);
  for (int c = 0; c < cells_; ++c) {
    if (grid_.tags[c] != Phase::E) continue;
    sum_e[comps.labels[c]] += phi[c];
    count_e[comps.labels[c]]++;
  }
  std::vector<double> shift(comps.count, 0.0);
  for (int l = 0; l < comps.count; ++l) {
    if (count_e[l] > 0) shift[l] = -sum_e[l] / count_e[l];
  }
  for (int c = 0; c < cells_; ++c) phi[c] += shift[comps.labels[c]];

  // Intracellular components cut off from E keep the mean membrane jump of v_ref.
  std::vector<double> mismatch(comps.count, 0.0);
  std::vector<int> faces(comps.count, 0);
  for (std::size_t f = 0; f < grid_.interface_faces.size(); ++f) {
    const auto& face = grid_.interface_faces[f];
    const int l = comps.labels[face.intra_cell];
    if (count_e[l] > 0) continue;
    mismatch[l] += v_ref[f] - (phi[face.intra_cell] - phi[face.extra_cell]);
    faces[l]++;
  }
  for (int c = 0; c < cells_; ++c) {
    const int l = comps.labels[c];
    if (faces[l] > 0) phi[c] += mismatch[l] / faces[l];
  }
}

std::vector<double> MicroSolver::solve_potential(const Coefficients& k,
                                                 const std::vector<double>& v_old) {
  const double dt = config_.dt;
  const double pm = params_.capacitance;
  const double kappa = face_weight_ * (params_.total_conductance() + pm / dt);
  std::vector<double> weights;
  weights.reserve(potential_op_.edges().size());
  for (double s : k.sigma_face) weights.push_back(params_.diffusion * s);
  weights.resize(potential_op_.edges().size(), kappa);

  std::vector<double> rhs(cells_, 0.0);
  for (std::size_t f = 0; f < grid_.interface_faces.size(); ++f) {
    const auto& face = grid_.interface_faces[f];
    const double r = face_weight_ * (k.terms[f].offset - pm * v_old[f] / dt);
    rhs[face.intra_cell] -= r;
    rhs[face.extra_cell] += r;
  }
  potential_solver_.factorize(potential_op_.assemble({}, weights),
                              NullSpace::from_components(potential_comps_.labels,
                                                         potential_comps_.count));
  std::vector<double> phi = potential_solver_.solve(rhs);
  fix_gauge(phi, v_old, potential_comps_);
  return phi;
}

MicroState MicroSolver::initialize(const InitialData& init) {
  MicroState s;
  s.t = 0.0;
  for (auto& f : s.c) f.resize(cells_);
  for (int c = 0; c < cells_; ++c) {
    const Point p = grid_.center(c);
    const Species3 val = grid_.tags[c] == Phase::I ? init.intra_at(p) : init.extra_at(p);
    for (std::size_t i = 0; i < kSpeciesCount; ++i) s.c[i][c] = val[i];
  }
  check_positive(s.c);
  s.v.resize(grid_.interface_faces.size());
  for (std::size_t f = 0; f < s.v.size(); ++f) {
    const auto& face = grid_.interface_faces[f];
    Point p = grid_.center(face.intra_cell);
    (face.axis == 0 ? p.x : p.y) += 0.5 * face.sign * grid_.h;
    s.v[f] = init.phi0 ? init.phi0(p) : 0.0;
  }

  // Elliptic solve with a penalized jump: exact when phi0 is constant.
  const Coefficients k = lagged(s.c);
  const double beta = face_weight_ * (params_.capacitance > 0.0
                                          ? params_.capacitance / config_.dt
                                          : params_.total_conductance());
  std::vector<double> weights;
  for (double sig : k.sigma_face) weights.push_back(params_.diffusion * sig);
  weights.resize(potential_op_.edges().size(), beta);
  std::vector<double> rhs(cells_, 0.0);
  for (std::size_t f = 0; f < s.v.size(); ++f) {
    const auto& face = grid_.interface_faces[f];
    rhs[face.intra_cell] += beta * s.v[f];
    rhs[face.extra_cell] -= beta * s.v[f];
  }
  DirectSpdSolver solver;
  solver.factorize(potential_op_.assemble({}, weights),
                   NullSpace::from_components(potential_comps_.labels, potential_comps_.count));
  s.phi = solver.solve(rhs);
  fix_gauge(s.phi, s.v, potential_comps_);
  return s;
}

MicroState MicroSolver::step(const MicroState& state) {
  const double dt = config_.dt;
  const double h2 = grid_.cell_area();
  std::vector<double> phi;
  std::vector<double> v;

  auto sweep = [&](const std::vector<double>& x) {
    const Fields lag = unpack(x, cells_);
    check_positive(lag);
    const Coefficients k = lagged(lag);
    phi = solve_potential(k, state.v);
    v = jumps(phi);

    Fields next;
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      const double z = params_.species.valence(i);
      std::vector<double> rhs(cells_);
      for (int c = 0; c < cells_; ++c) rhs[c] = h2 * state.c[i][c] / dt;
      for (std::size_t e = 0; e < bulk_.size(); ++e) {
        const auto [a, b] = bulk_[e];
        const double drift = params_.diffusion * z * k.c_face[i][e] * (phi[a] - phi[b]);
        rhs[a] -= drift;
        rhs[b] += drift;
      }
      for (std::size_t f = 0; f < grid_.interface_faces.size(); ++f) {
        const auto& face = grid_.interface_faces[f];
        const double flux =
            face_weight_ * species_flux(i, k.terms[f], v[f], (v[f] - state.v[f]) / dt, params_) / z;
        rhs[face.intra_cell] -= flux;
        rhs[face.extra_cell] += flux;
      }
      next[i] = species_solver_.solve(rhs);
    }
    return pack(next);
  };

  PicardSettings settings{config_.picard_tol, config_.picard_max_iter, config_.picard_damping};
  const PicardResult result = picard_loop(sweep, pack(state.c), settings);

  MicroState out;
  out.t = state.t + dt;
  out.c = unpack(result.x, cells_);
  check_positive(out.c);
  out.phi = std::move(phi);
  out.v = std::move(v);
  out.picard_iterations = result.iterations;
  return out;
}

MicroResiduals MicroSolver::residuals(const MicroState& prev, const MicroState& next) const {
  const double dt = config_.dt;
  const double h2 = grid_.cell_area();
  const Coefficients k = lagged(next.c);
  const std::vector<double> v = jumps(next.phi);
  MicroResiduals r;
  r.potential.assign(cells_, 0.0);
  for (std::size_t e = 0; e < bulk_.size(); ++e) {
    const auto [a, b] = bulk_[e];
    const double flux = params_.diffusion * k.sigma_face[e] * (next.phi[a] - next.phi[b]);
    r.potential[a] += flux;
    r.potential[b] -= flux;
  }
  for (std::size_t f = 0; f < grid_.interface_faces.size(); ++f) {
    const auto& face = grid_.interface_faces[f];
    const double dvdt = (v[f] - prev.v[f]) / dt;
    double total = 0.0;
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      total += species_flux(i, k.terms[f], v[f], dvdt, params_);
    }
    r.potential[face.intra_cell] += face_weight_ * total;
    r.potential[face.extra_cell] -= face_weight_ * total;
  }
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    const double z = params_.species.valence(i);
    auto& ri = r.species[i];
    ri.resize(cells_);
    for (int c = 0; c < cells_; ++c) ri[c] = h2 * (next.c[i][c] - prev.c[i][c]) / dt;
    for (std::size_t e = 0; e < bulk_.size(); ++e) {
      const auto [a, b] = bulk_[e];
      const double flux = params_.diffusion * ((next.c[i][a] - next.c[i][b]) +
                                               z * k.c_face[i][e] * (next.phi[a] - next.phi[b]));
      ri[a] += flux;
      ri[b] -= flux;
    }
    for (std::size_t f = 0; f < grid_.interface_faces.size(); ++f) {
      const auto& face = grid_.interface_faces[f];
      const double flux = face_weight_ *
                          species_flux(i, k.terms[f], v[f], (v[f] - prev.v[f]) / dt, params_) / z;
      ri[face.intra_cell] += flux;
      ri[face.extra_cell] -= flux;
    }
  }
  return r;
}

Species3 MicroSolver::totals(const MicroState& state) const {
  Species3 t{};
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    double s = 0.0;
    for (double x : state.c[i]) s += x;
    t[i] = s * grid_.cell_area();
  }
  return t;
}

double MicroSolver::en_drift(const MicroState& state) const {
  double worst = 0.0;
  for (int c = 0; c < cells_; ++c) {
    double q = 0.0;
    for (std::size_t i = 0; i < kSpeciesCount; ++i) q += params_.species.valence(i) * state.c[i][c];
    worst = std::max(worst, std::abs(q));
  }
  return worst;
}

DiagnosticsRow MicroSolver::diagnostics(const MicroState& state) const {
  DiagnosticsRow row;
  row.t = state.t;
  row.totals = totals(state);
  row.en_drift = en_drift(state);
  row.picard_iterations = state.picard_iterations;
  const double h2 = grid_.cell_area();
  row.min_c = state.c[0][0];
  row.max_c = state.c[0][0];
  row.min_sigma = 0.0;
  double c2 = 0.0;
  double grad2 = 0.0;
  for (int c = 0; c < cells_; ++c) {
    double sigma = 0.0;
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      const double x = state.c[i][c];
      const double z = params_.species.valence(i);
      sigma += z * z * x;
      row.min_c = std::min(row.min_c, x);
      row.max_c = std::max(row.max_c, x);
      c2 += x * x * h2;
    }
    row.min_sigma = c == 0 ? sigma : std::min(row.min_sigma, sigma);
  }
  double dphi2 = 0.0;
  for (const auto& [a, b] : bulk_) {
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      const double d = state.c[i][a] - state.c[i][b];
      grad2 += d * d;
    }
    const double d = state.phi[a] - state.phi[b];
    dphi2 += d * d;
  }
  double phi2 = 0.0;
  for (double p : state.phi) phi2 += p * p * h2;
  double cg2 = 0.0;
  double vg2 = 0.0;
  for (std::size_t f = 0; f < grid_.interface_faces.size(); ++f) {
    const auto& face = grid_.interface_faces[f];
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      const double ci = state.c[i][face.intra_cell];
      const double ce = state.c[i][face.extra_cell];
      cg2 += (ci * ci + ce * ce) * grid_.h;
    }
    vg2 += state.v[f] * state.v[f] * grid_.h;
  }
  row.norm_c = std::sqrt(c2);
  row.norm_grad_c = std::sqrt(grad2);
  row.norm_c_gamma = std::sqrt(grid_.epsilon() * cg2);
  row.norm_jump_gamma = std::sqrt(grid_.epsilon() * vg2);
  row.norm_phi_h1 = std::sqrt(phi2 + dphi2);
  return row;
}

MacroFields average_fields(const TaggedGrid& grid, const MicroState& state, int blocks) {
  if (blocks < 1 || grid.n % blocks != 0) {
    std::ostringstream os;
    os << "grid of " << grid.n << " cells per side cannot be split into " << blocks << " blocks";
    fail(ErrorKind::ResolutionMismatch, os.str());
  }
  const int b = grid.n / blocks;
  const std::size_t m = static_cast<std::size_t>(blocks) * blocks;
  MacroFields out;
  out.n = blocks;
  auto block_of = [&](int cell) { return ((cell / grid.n) / b) * blocks + (cell % grid.n) / b; };
  std::vector<int> count_i(m, 0), count_e(m, 0), count_f(m, 0);
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    out.c_intra[i].assign(m, 0.0);
    out.c_extra[i].assign(m, 0.0);
  }
  out.phi_intra.assign(m, 0.0);
  out.phi_extra.assign(m, 0.0);
  out.v.assign(m, 0.0);
  for (int c = 0; c < static_cast<int>(grid.cell_count()); ++c) {
    const int k = block_of(c);
    const bool intra = grid.tags[c] == Phase::I;
    (intra ? count_i : count_e)[k]++;
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      (intra ? out.c_intra : out.c_extra)[i][k] += state.c[i][c];
    }
    (intra ? out.phi_intra : out.phi_extra)[k] += state.phi[c];
  }
  for (std::size_t f = 0; f < grid.interface_faces.size(); ++f) {
    const int k = block_of(grid.interface_faces[f].intra_cell);
    out.v[k] += state.v[f];
    count_f[k]++;
  }
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      if (count_i[k]) out.c_intra[i][k] /= count_i[k];
      if (count_e[k]) out.c_extra[i][k] /= count_e[k];
    }
    if (count_i[k]) out.phi_intra[k] /= count_i[k];
    if (count_e[k]) out.phi_extra[k] /= count_e[k];
    if (count_f[k]) out.v[k] /= count_f[k];
  }
  return out;
}

}  // namespace ionhom
