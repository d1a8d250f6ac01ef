#include "ionhom/model_params.hpp"

#include <cmath>
#include <sstream>

#include "ionhom/errors.hpp"

namespace ionhom {

SpeciesSet::SpeciesSet(std::vector<SpeciesSpec> species) : species_(std::move(species)) {
  if (species_.size() != kSpeciesCount) {
    fail(ErrorKind::InvalidInput, "species list must have exactly 3 entries, got " +
                                      std::to_string(species_.size()));
  }
  double weight_sum = 0.0;
  for (const auto& s : species_) {
    if (s.valence != -2 && s.valence != -1 && s.valence != 1 && s.valence != 2) {
      fail(ErrorKind::InvalidInput,
           "species '" + s.name + "' has inadmissible valence " + std::to_string(s.valence));
    }
    weight_sum += s.capacitor_weight;
  }
  if (std::abs(weight_sum - 1.0) > 1e-14) {
    std::ostringstream os;
    os.precision(17);
    os << "capacitor weights must sum to 1, got " << weight_sum;
    fail(ErrorKind::InvalidInput, os.str());
  }
}

SpeciesSet SpeciesSet::sodium_potassium_chloride() {
  constexpr double third = 1.0 / 3.0;
  return SpeciesSet({{"Na", 1, third}, {"K", 1, third}, {"Cl", -1, third}});
}

InitialData InitialData::uniform(const Species3& c_intra, const Species3& c_extra, double phi0) {
  InitialData init;
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    init.c_intra[i] = [value = c_intra[i]](Point) { return value; };
    init.c_extra[i] = [value = c_extra[i]](Point) { return value; };
  }
  init.phi0 = [phi0](Point) { return phi0; };
  return init;
}

Species3 InitialData::intra_at(Point p) const {
  return {c_intra[0](p), c_intra[1](p), c_intra[2](p)};
}

Species3 InitialData::extra_at(Point p) const {
  return {c_extra[0](p), c_extra[1](p), c_extra[2](p)};
}

void RunConfig::validate() const {
  if (epsilon_inv < 1) fail(ErrorKind::InvalidInput, "1/epsilon must be a positive integer");
  if (n_per_cell < 1) fail(ErrorKind::InvalidInput, "cells per unit cell must be positive");
  if (!(dt > 0.0)) fail(ErrorKind::InvalidInput, "dt must be positive");
  if (!(t_end >= 0.0)) fail(ErrorKind::InvalidInput, "T_end must be nonnegative");
  if (!(picard_tol > 0.0)) fail(ErrorKind::InvalidInput, "picard_tol must be positive");
  if (picard_max_iter < 1) fail(ErrorKind::InvalidInput, "picard_max_iter must be >= 1");
  if (!(picard_damping > 0.0 && picard_damping <= 1.0)) {
    fail(ErrorKind::InvalidInput, "picard damping must lie in (0,1]");
  }
  if (!(linear_tol > 0.0)) fail(ErrorKind::InvalidInput, "linear_tol must be positive");
}

bool ValidationReport::ok() const {
  for (const auto& c : checks) {
    if (!c.passed) return false;
  }
  return true;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  os.precision(12);
  for (const auto& c : checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) os << ": " << c.detail;
    if (c.location) os << " at (" << c.location->x << ", " << c.location->y << ")";
    os << '\n';
  }
  return os.str();
}

namespace {

CheckResult passed(std::string name) { return {std::move(name), true, {}, std::nullopt}; }

void record_failure(CheckResult& check, const std::string& detail, std::optional<Point> where) {
  if (!check.passed) return;  // keep the first violation only
  check.passed = false;
  check.detail = detail;
  check.location = where;
}

std::string describe(const std::string& what, double value) {
  std::ostringstream os;
  os.precision(17);
  os << what << " = " << value;
  return os.str();
}

}  // namespace

ValidationReport validate_params(const PhysicalParams& params, const InitialData& init,
                                 const Bounds& bounds, const std::vector<SamplePoint>& samples) {
  if (params.species.size() != kSpeciesCount) {
    fail(ErrorKind::InvalidInput, "wrong species count");
  }
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    if (!init.c_intra[i] || !init.c_extra[i]) {
      fail(ErrorKind::InvalidInput, "initial concentration field missing");
    }
  }
  if (!init.phi0) fail(ErrorKind::InvalidInput, "initial membrane jump field missing");

  ValidationReport report;

  auto diffusion = passed("diffusion");
  if (!(params.diffusion > 0.0)) record_failure(diffusion, describe("D", params.diffusion), {});
  report.checks.push_back(diffusion);

  auto conductance = passed("conductance");
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    if (!(params.conductance[i] >= 0.0)) {
      record_failure(conductance, describe("G_" + params.species[i].name, params.conductance[i]),
                     {});
    }
  }
  report.checks.push_back(conductance);

  auto capacitance = passed("capacitance");
  if (!(params.capacitance >= 0.0)) {
    record_failure(capacitance, describe("P_m", params.capacitance), {});
  }
  report.checks.push_back(capacitance);

  auto pump = passed("pump");
  const auto& pp = params.pump;
  if (!(pp.i_max1 >= 0.0)) record_failure(pump, describe("I_max1", pp.i_max1), {});
  if (!(pp.i_max2 >= 0.0)) record_failure(pump, describe("I_max2", pp.i_max2), {});
  if (!(pp.k_na1 > 0.0)) record_failure(pump, describe("K_Na1", pp.k_na1), {});
  if (!(pp.k_na2 > 0.0)) record_failure(pump, describe("K_Na2", pp.k_na2), {});
  if (!(pp.k_k1 > 0.0)) record_failure(pump, describe("K_K1", pp.k_k1), {});
  if (!(pp.k_k2 > 0.0)) record_failure(pump, describe("K_K2", pp.k_k2), {});
  report.checks.push_back(pump);

  auto bounds_check = passed("bounds");
  if (!(bounds.c_d > 0.0 && bounds.c_u >= bounds.c_d && bounds.c_l > 0.0)) {
    record_failure(bounds_check, "require 0 < C_d <= C_u and C_l > 0", {});
  }
  report.checks.push_back(bounds_check);

  auto positivity = passed("positivity");
  auto neutrality = passed("electroneutrality");
  auto sigma_floor = passed("sigma_floor");
  auto jump = passed("initial_jump");
  for (const auto& sample : samples) {
    const Species3 c =
        sample.phase == Phase::I ? init.intra_at(sample.location) : init.extra_at(sample.location);
    const std::string side = std::string(1, phase_letter(sample.phase));
    double charge = 0.0;
    double charge_scale = 0.0;
    double sigma = 0.0;
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      const double z = params.species.valence(i);
      if (!(c[i] >= bounds.c_d && c[i] <= bounds.c_u)) {
        record_failure(positivity, describe("C_" + params.species[i].name + "," + side, c[i]),
                       sample.location);
      }
      charge += z * c[i];
      charge_scale += std::abs(z * c[i]);
      sigma += z * z * c[i];
    }
    if (std::abs(charge) > 1e-12 * charge_scale) {
      record_failure(neutrality, describe("sum z_i C_i," + side, charge), sample.location);
    }
    if (!(sigma >= bounds.c_l)) {
      record_failure(sigma_floor, describe("sum z_i^2 C_i," + side, sigma), sample.location);
    }
    const double phi = init.phi0(sample.location);
    if (!std::isfinite(phi)) record_failure(jump, describe("phi0", phi), sample.location);
  }
  report.checks.push_back(positivity);
  report.checks.push_back(neutrality);
  report.checks.push_back(sigma_floor);
  report.checks.push_back(jump);
  return report;
}

ValidationReport validate_params(const PhysicalParams& params, const InitialData& init,
                                 const Bounds& bounds, int sample_n) {
  std::vector<SamplePoint> samples;
  samples.reserve(2 * static_cast<std::size_t>(sample_n) * sample_n);
  const double h = 1.0 / sample_n;
  for (int j = 0; j < sample_n; ++j) {
    for (int i = 0; i < sample_n; ++i) {
      const Point p{(i + 0.5) * h, (j + 0.5) * h};
      samples.push_back({p, Phase::I});
      samples.push_back({p, Phase::E});
    }
  }
  return validate_params(params, init, bounds, samples);
}

DefaultSetup default_params() {
  DefaultSetup setup;
  setup.params.diffusion = 1.0;
  setup.params.conductance = {1.0, 1.0, 1.0};
  setup.params.capacitance = 1.0;
  setup.params.pump = PumpParams{0.5, 0.5, 1.0, 1.0, 1.0, 1.0};
  setup.c_intra = {10.0, 135.0, 145.0};
  setup.c_extra = {140.0, 5.0, 145.0};
  setup.phi0 = 0.0;
  setup.init = InitialData::uniform(setup.c_intra, setup.c_extra, setup.phi0);
  return setup;
}

}  // namespace ionhom
