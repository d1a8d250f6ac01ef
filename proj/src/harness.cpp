#include "ionhom/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "ionhom/errors.hpp"
#include "ionhom/membrane.hpp"
#include "json.hpp"

namespace ionhom {

namespace fs = std::filesystem;

namespace {

constexpr const char* kSpeciesKeys[] = {"Na", "K", "Cl"};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double x = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(x)) {
    fail(ErrorKind::InvalidInput, "key '" + key + "': '" + value + "' is not a number");
  }
  return x;
}

int parse_int(const std::string& key, const std::string& value) {
  const double x = parse_double(key, value);
  if (x != std::floor(x) || std::abs(x) > 1e9) {
    fail(ErrorKind::InvalidInput, "key '" + key + "': '" + value + "' is not an integer");
  }
  return static_cast<int>(x);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string connectivity_name(Connectivity c) {
  return c == Connectivity::ConnectedDisconnected ? "con_discon" : "con_con";
}

std::string mode_name(RunMode m) {
  switch (m) {
    case RunMode::Micro: return "micro";
    case RunMode::Macro: return "macro";
    case RunMode::CellProblem: return "cell-problem";
  }
  return "micro";
}

// Mutable view used while parsing; species are rebuilt once all keys are read.
struct Draft {
  Config cfg;
  std::array<SpeciesSpec, kSpeciesCount> species;
};

using Setter = std::function<void(Draft&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto real = [&](const std::string& key, auto member) {
      t[key] = [member](Draft& d, const std::string& k, const std::string& v) {
        member(d) = parse_double(k, v);
      };
    };
    real("physics.D", [](Draft& d) -> double& { return d.cfg.params.diffusion; });
    real("physics.P_m", [](Draft& d) -> double& { return d.cfg.params.capacitance; });
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      const std::string s = kSpeciesKeys[i];
      real("physics.G." + s, [i](Draft& d) -> double& { return d.cfg.params.conductance[i]; });
      real("physics.lambda." + s, [i](Draft& d) -> double& { return d.species[i].capacitor_weight; });
      t["physics.z." + s] = [i](Draft& d, const std::string& k, const std::string& v) {
        d.species[i].valence = parse_int(k, v);
      };
      real("init.C_I." + s, [i](Draft& d) -> double& { return d.cfg.c_intra[i]; });
      real("init.C_E." + s, [i](Draft& d) -> double& { return d.cfg.c_extra[i]; });
    }
    real("pump.I_max1", [](Draft& d) -> double& { return d.cfg.params.pump.i_max1; });
    real("pump.I_max2", [](Draft& d) -> double& { return d.cfg.params.pump.i_max2; });
    real("pump.K_Na1", [](Draft& d) -> double& { return d.cfg.params.pump.k_na1; });
    real("pump.K_Na2", [](Draft& d) -> double& { return d.cfg.params.pump.k_na2; });
    real("pump.K_K1", [](Draft& d) -> double& { return d.cfg.params.pump.k_k1; });
    real("pump.K_K2", [](Draft& d) -> double& { return d.cfg.params.pump.k_k2; });
    real("init.phi0", [](Draft& d) -> double& { return d.cfg.phi0; });
    real("init.perturbation", [](Draft& d) -> double& { return d.cfg.perturbation; });
    real("bounds.C_d", [](Draft& d) -> double& { return d.cfg.bounds.c_d; });
    real("bounds.C_u", [](Draft& d) -> double& { return d.cfg.bounds.c_u; });
    real("bounds.C_l", [](Draft& d) -> double& { return d.cfg.bounds.c_l; });
    t["geometry.shape"] = [](Draft& d, const std::string& k, const std::string& v) {
      if (v != "auto" && v != "square" && v != "cross" && v != "stripe" && v != "empty") {
        fail(ErrorKind::InvalidInput, "key '" + k + "': unknown shape '" + v + "'");
      }
      d.cfg.shape = v == "auto" ? "" : v;
    };
    for (const char* alias : {"geometry.size", "geometry.a", "geometry.w", "geometry.theta"}) {
      real(alias, [](Draft& d) -> double& { return d.cfg.shape_size; });
    }
    t["geometry.n_per_cell"] = [](Draft& d, const std::string& k, const std::string& v) {
      d.cfg.run.n_per_cell = parse_int(k, v);
    };
    t["run.epsilon_inv"] = [](Draft& d, const std::string& k, const std::string& v) {
      d.cfg.run.epsilon_inv = parse_int(k, v);
    };
    t["run.epsilon"] = [](Draft& d, const std::string& k, const std::string& v) {
      const double eps = parse_double(k, v);
      const double inv = 1.0 / eps;
      if (!(eps > 0.0) || inv < 1.0 - 1e-12 || std::abs(inv - std::round(inv)) > 1e-9 * inv) {
        fail(ErrorKind::InvalidInput, "run.epsilon = " + v + ": 1/epsilon is not a positive integer");
      }
      d.cfg.run.epsilon_inv = static_cast<int>(std::round(inv));
    };
    real("run.dt", [](Draft& d) -> double& { return d.cfg.run.dt; });
    real("run.T_end", [](Draft& d) -> double& { return d.cfg.run.t_end; });
    real("run.picard_tol", [](Draft& d) -> double& { return d.cfg.run.picard_tol; });
    real("run.picard_damping", [](Draft& d) -> double& { return d.cfg.run.picard_damping; });
    real("run.linear_tol", [](Draft& d) -> double& { return d.cfg.run.linear_tol; });
    t["run.picard_max_iter"] = [](Draft& d, const std::string& k, const std::string& v) {
      d.cfg.run.picard_max_iter = parse_int(k, v);
    };
    t["run.connectivity"] = [](Draft& d, const std::string& k, const std::string& v) {
      if (v == "con_discon") {
        d.cfg.run.connectivity = Connectivity::ConnectedDisconnected;
      } else if (v == "con_con") {
        d.cfg.run.connectivity = Connectivity::ConnectedConnected;
      } else {
        fail(ErrorKind::InvalidInput, "key '" + k + "': expected con_discon or con_con");
      }
    };
    t["run.mode"] = [](Draft& d, const std::string& k, const std::string& v) {
      if (v == "micro") {
        d.cfg.mode = RunMode::Micro;
      } else if (v == "macro") {
        d.cfg.mode = RunMode::Macro;
      } else if (v == "macro-con-discon") {
        d.cfg.mode = RunMode::Macro;
        d.cfg.run.connectivity = Connectivity::ConnectedDisconnected;
      } else if (v == "macro-con-con") {
        d.cfg.mode = RunMode::Macro;
        d.cfg.run.connectivity = Connectivity::ConnectedConnected;
      } else if (v == "cell-problem") {
        d.cfg.mode = RunMode::CellProblem;
      } else {
        fail(ErrorKind::InvalidInput, "key '" + k + "': unknown mode '" + v + "'");
      }
    };
    t["run.macro_n"] = [](Draft& d, const std::string& k, const std::string& v) {
      d.cfg.macro_n = parse_int(k, v);
    };
    t["study.epsilons"] = [](Draft& d, const std::string& k, const std::string& v) {
      d.cfg.study_epsilons.clear();
      for (const auto& item : split_list(v)) d.cfg.study_epsilons.push_back(parse_int(k, item));
    };
    t["study.snapshots"] = [](Draft& d, const std::string& k, const std::string& v) {
      d.cfg.snapshot_fractions.clear();
      for (const auto& item : split_list(v)) {
        d.cfg.snapshot_fractions.push_back(parse_double(k, item));
      }
    };
    return t;
  }();
  return table;
}

void write_csv_row(std::string& out, std::initializer_list<double> values) {
  bool first = true;
  for (double v : values) {
    if (!first) out += ',';
    out += format_double(v);
    first = false;
  }
  out += '\n';
}

std::string join_ints(const std::vector<int>& xs) {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? "," : "") + std::to_string(xs[k]);
  return s;
}

std::string join_doubles(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? "," : "") + format_double(xs[k]);
  return s;
}

void check_study_inputs(const Config& cfg, const std::vector<int>& epsilons) {
  if (epsilons.empty()) fail(ErrorKind::InvalidInput, "epsilon list is empty");
  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    if (epsilons[k] < 1) fail(ErrorKind::InvalidInput, "1/epsilon must be a positive integer");
    if (k > 0 && epsilons[k] <= epsilons[k - 1]) {
      fail(ErrorKind::InvalidInput, "epsilon list must be strictly decreasing");
    }
    if (cfg.macro_n % epsilons[k] != 0) {
      fail(ErrorKind::ResolutionMismatch,
           "macro grid n=" + std::to_string(cfg.macro_n) + " is not divisible by 1/epsilon=" +
               std::to_string(epsilons[k]));
    }
  }
  for (double f : cfg.snapshot_fractions) {
    if (!(f > 0.0 && f <= 1.0)) fail(ErrorKind::InvalidInput, "snapshot fractions must lie in (0,1]");
  }
}

class Manifest {
 public:
  explicit Manifest(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }
  void write(const std::string& name, const std::string& text) {
    write_text(dir_ / name, text);
    files_.push_back(name);
  }
  void add(const std::string& name) { files_.push_back(name); }
  const std::vector<std::string>& files() const { return files_; }
  void finish(const Config& cfg) {
    std::string text = "config_hash = " + hash_hex(config_hash(cfg)) + "\n";
    std::vector<std::string> sorted = files_;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& f : sorted) text += f + "\n";
    write_text(dir_ / "manifest.txt", text);
  }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

void require_valid(const Config& cfg) {
  cfg.run.validate();
  const ValidationReport report = validate_config(cfg);
  if (!report.ok()) fail(ErrorKind::InvalidInput, "initial data rejected:\n" + report.summary());
}

std::string micro_fields_csv(const TaggedGrid& grid, const MicroState& s) {
  std::string out = "t,cell,i,j,phase,C_Na,C_K,C_Cl,phi\n";
  for (int c = 0; c < static_cast<int>(grid.cell_count()); ++c) {
    out += format_double(s.t) + ',' + std::to_string(c) + ',' + std::to_string(c % grid.n) + ',' +
           std::to_string(c / grid.n) + ',' + phase_letter(grid.tags[c]) + ',';
    write_csv_row(out, {s.c[0][c], s.c[1][c], s.c[2][c], s.phi[c]});
  }
  return out;
}

std::string micro_interface_csv(const TaggedGrid& grid, const MicroState& s) {
  std::string out = "t,face,intra_cell,extra_cell,axis,v\n";
  for (std::size_t f = 0; f < grid.interface_faces.size(); ++f) {
    const auto& face = grid.interface_faces[f];
    out += format_double(s.t) + ',' + std::to_string(f) + ',' + std::to_string(face.intra_cell) +
           ',' + std::to_string(face.extra_cell) + ',' + std::to_string(face.axis) + ',' +
           format_double(s.v[f]) + '\n';
  }
  return out;
}

std::string macro_fields_csv(const MacroFields& f, double t) {
  std::string out = "t,cell,i,j,C_Na_I,C_K_I,C_Cl_I,C_Na_E,C_K_E,C_Cl_E,phi_I,phi_E,v\n";
  for (int c = 0; c < f.n * f.n; ++c) {
    out += format_double(t) + ',' + std::to_string(c) + ',' + std::to_string(c % f.n) + ',' +
           std::to_string(c / f.n) + ',';
    write_csv_row(out, {f.c_intra[0][c], f.c_intra[1][c], f.c_intra[2][c], f.c_extra[0][c],
                        f.c_extra[1][c], f.c_extra[2][c], f.phi_intra[c], f.phi_extra[c], f.v[c]});
  }
  return out;
}

std::string conservation_csv(const DiagnosticsRecord& rec) {
  std::string out = "t,total_Na,total_K,total_Cl,rel_drift_Na,rel_drift_K,rel_drift_Cl\n";
  if (rec.rows.empty()) return out;
  const Species3 base = rec.rows.front().totals;
  for (const auto& r : rec.rows) {
    auto rel = [&](std::size_t i) { return (r.totals[i] - base[i]) / base[i]; };
    write_csv_row(out, {r.t, r.totals[0], r.totals[1], r.totals[2], rel(0), rel(1), rel(2)});
  }
  return out;
}

std::string timing_text(const DiagnosticsRecord& rec) {
  double total = 0.0;
  double worst = 0.0;
  for (double w : rec.wall_seconds) {
    total += w;
    worst = std::max(worst, w);
  }
  const std::size_t steps = rec.wall_seconds.empty() ? 0 : rec.wall_seconds.size() - 1;
  std::ostringstream os;
  os << "steps " << steps << "\ntotal_seconds " << total << "\nmax_step_seconds " << worst
     << "\n";
  return os.str();
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct MicroRun {
  DiagnosticsRecord record;
  std::vector<MacroFields> averages;  // one per snapshot
};

// Shared by run_single and the convergence legs.
MicroRun execute_micro(const Config& cfg, Manifest& manifest, int average_blocks) {
  const TaggedGrid grid = tile_domain(cfg.geometry(), cfg.run.epsilon_inv, cfg.run.n_per_cell);
  MicroSolver solver(grid, cfg.params, cfg.run, cfg.bounds);
  const auto snaps = snapshot_steps(cfg);
  const int steps = snaps.empty() ? 0 : *std::max_element(snaps.begin(), snaps.end());
  const int total_steps = static_cast<int>(std::llround(cfg.run.t_end / cfg.run.dt));

  MicroRun run;
  auto t0 = Clock::now();
  MicroState state = solver.initialize(make_initial_data(cfg));
  run.record.push(solver.diagnostics(state), seconds_since(t0));
  auto snapshot = [&](int index) {
    const std::string tag = "s" + std::to_string(index + 1);
    if (average_blocks > 0) {
      run.averages.push_back(average_fields(grid, state, average_blocks));
      manifest.write("averaged_" + tag + ".csv", macro_fields_csv(run.averages.back(), state.t));
    } else {
      manifest.write("fields_" + tag + ".csv", micro_fields_csv(grid, state));
      manifest.write("interface_" + tag + ".csv", micro_interface_csv(grid, state));
    }
  };
  for (int k = 1; k <= std::max(steps, total_steps); ++k) {
    t0 = Clock::now();
    state = solver.step(state);
    run.record.push(solver.diagnostics(state), seconds_since(t0));
    for (std::size_t s = 0; s < snaps.size(); ++s) {
      if (snaps[s] == k) snapshot(static_cast<int>(s));
    }
  }
  manifest.write("diagnostics.csv", run.record.csv());
  manifest.write("diagnostics_summary.csv", summary_csv(run.record.summary()));
  manifest.write("conservation.csv", conservation_csv(run.record));
  return run;
}

struct MacroRun {
  DiagnosticsRecord record;
  MacroFields initial;
  std::vector<MacroFields> snapshots;
};

MacroRun execute_macro(const Config& cfg, const CellData& cell, Manifest& manifest) {
  MacroSolver solver(make_macro_setup(cfg, cell, cfg.macro_n));
  const auto snaps = snapshot_steps(cfg);
  const int total_steps = static_cast<int>(std::llround(cfg.run.t_end / cfg.run.dt));
  MacroRun run;
  auto t0 = Clock::now();
  MacroState state = solver.initialize(make_initial_data(cfg));
  run.initial = to_fields(state, cfg.macro_n);
  run.record.push(solver.diagnostics(state), seconds_since(t0));
  std::string structural = "t,phi_extra_max,potential_sum_residual\n";
  std::string compartments =
      "t,intra_Na,intra_K,intra_Cl,extra_Na,extra_K,extra_Cl\n";
  auto log_compartments = [&] {
    const Species3 a = solver.compartment_totals(state, Phase::I);
    const Species3 b = solver.compartment_totals(state, Phase::E);
    write_csv_row(compartments, {state.t, a[0], a[1], a[2], b[0], b[1], b[2]});
  };
  log_compartments();
  for (int k = 1; k <= total_steps; ++k) {
    t0 = Clock::now();
    state = solver.step(state);
    run.record.push(solver.diagnostics(state), seconds_since(t0));
    write_csv_row(structural, {state.t, solver.last_checks().phi_extra_max,
                               solver.last_checks().potential_sum_residual});
    log_compartments();
    for (std::size_t s = 0; s < snaps.size(); ++s) {
      if (snaps[s] != k) continue;
      run.snapshots.push_back(to_fields(state, cfg.macro_n));
      manifest.write("fields_s" + std::to_string(s + 1) + ".csv",
                     macro_fields_csv(run.snapshots.back(), state.t));
    }
  }
  manifest.write("diagnostics.csv", run.record.csv());
  manifest.write("diagnostics_summary.csv", summary_csv(run.record.summary()));
  manifest.write("conservation.csv", conservation_csv(run.record));
  manifest.write("compartment_totals.csv", compartments);
  manifest.write("structural.csv", structural);
  return run;
}

const std::vector<double>& field_of(const MacroFields& f, std::size_t index) {
  if (index < 3) return f.c_intra[index];
  if (index < 6) return f.c_extra[index - 3];
  return f.v;
}

double l2_norm(const std::vector<double>& a) {
  double s = 0.0;
  for (double x : a) s += x * x;
  return std::sqrt(s / static_cast<double>(a.size()));
}

}  // namespace

UnitCellGeometry Config::geometry() const {
  std::string s = shape;
  if (s.empty()) s = run.connectivity == Connectivity::ConnectedDisconnected ? "square" : "cross";
  if (s == "square") return UnitCellGeometry::square(shape_size);
  if (s == "cross") return UnitCellGeometry::cross(shape_size);
  if (s == "stripe") return UnitCellGeometry::stripe(shape_size);
  return UnitCellGeometry::empty();
}

Config default_config() {
  Config cfg;
  const DefaultSetup d = default_params();
  cfg.params = d.params;
  cfg.c_intra = d.c_intra;
  cfg.c_extra = d.c_extra;
  cfg.phi0 = d.phi0;
  return cfg;
}

Config parse_config(std::string_view text) {
  Draft draft;
  draft.cfg = default_config();
  for (std::size_t i = 0; i < kSpeciesCount; ++i) draft.species[i] = draft.cfg.params.species[i];
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::InvalidInput, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      fail(ErrorKind::InvalidInput, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    it->second(draft, key, value);
  }
  draft.cfg.params.species =
      SpeciesSet({draft.species.begin(), draft.species.end()});
  draft.cfg.run.validate();
  return draft.cfg;
}

Config load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidInput, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string echo_config(const Config& cfg) {
  std::string out;
  auto line = [&](const std::string& key, const std::string& value) {
    out += key + " = " + value + "\n";
  };
  auto real = [&](const std::string& key, double v) { line(key, format_double(v)); };
  const auto& p = cfg.params;
  real("physics.D", p.diffusion);
  real("physics.P_m", p.capacitance);
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    const std::string s = kSpeciesKeys[i];
    real("physics.G." + s, p.conductance[i]);
    real("physics.lambda." + s, p.species.capacitor_weight(i));
    line("physics.z." + s, std::to_string(p.species.valence(i)));
  }
  real("pump.I_max1", p.pump.i_max1);
  real("pump.I_max2", p.pump.i_max2);
  real("pump.K_Na1", p.pump.k_na1);
  real("pump.K_Na2", p.pump.k_na2);
  real("pump.K_K1", p.pump.k_k1);
  real("pump.K_K2", p.pump.k_k2);
  for (std::size_t i = 0; i < kSpeciesCount; ++i) {
    real(std::string("init.C_I.") + kSpeciesKeys[i], cfg.c_intra[i]);
    real(std::string("init.C_E.") + kSpeciesKeys[i], cfg.c_extra[i]);
  }
  real("init.phi0", cfg.phi0);
  real("init.perturbation", cfg.perturbation);
  real("bounds.C_d", cfg.bounds.c_d);
  real("bounds.C_u", cfg.bounds.c_u);
  real("bounds.C_l", cfg.bounds.c_l);
  const UnitCellGeometry g = cfg.geometry();
  const char* shapes[] = {"square", "cross", "stripe", "empty"};
  line("geometry.shape", shapes[static_cast<int>(g.shape)]);
  real("geometry.size", cfg.shape_size);
  line("geometry.n_per_cell", std::to_string(cfg.run.n_per_cell));
  line("run.epsilon_inv", std::to_string(cfg.run.epsilon_inv));
  real("run.dt", cfg.run.dt);
  real("run.T_end", cfg.run.t_end);
  real("run.picard_tol", cfg.run.picard_tol);
  line("run.picard_max_iter", std::to_string(cfg.run.picard_max_iter));
  real("run.picard_damping", cfg.run.picard_damping);
  real("run.linear_tol", cfg.run.linear_tol);
  line("run.connectivity", connectivity_name(cfg.run.connectivity));
  line("run.mode", mode_name(cfg.mode));
  line("run.macro_n", std::to_string(cfg.macro_n));
  line("study.epsilons", join_ints(cfg.study_epsilons));
  line("study.snapshots", join_doubles(cfg.snapshot_fractions));
  return out;
}

std::uint64_t config_hash(const Config& cfg) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : echo_config(cfg)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

InitialData make_initial_data(const Config& cfg) {
  InitialData init = InitialData::uniform(cfg.c_intra, cfg.c_extra, cfg.phi0);
  if (cfg.perturbation != 0.0) {
    const double a = cfg.perturbation;
    auto shaped = [a](double base) {
      return [a, base](Point p) {
        return base * (1.0 + a * std::cos(std::numbers::pi * p.x) * std::cos(std::numbers::pi * p.y));
      };
    };
    for (std::size_t i = 0; i < kSpeciesCount; ++i) {
      init.c_intra[i] = shaped(cfg.c_intra[i]);
      init.c_extra[i] = shaped(cfg.c_extra[i]);
    }
  }
  return init;
}

ValidationReport validate_config(const Config& cfg) {
  return validate_params(cfg.params, make_initial_data(cfg), cfg.bounds);
}

CellData compute_cell_data(const Config& cfg) {
  CellData d;
  d.cell = voxelize_unit_cell(cfg.geometry(), cfg.run.n_per_cell);
  d.measures = {d.cell.measure(Phase::I), d.cell.measure(Phase::E), d.cell.interface_measure()};
  const double tol = 1e-12;
  for (Phase p : {Phase::I, Phase::E}) {
    EffectiveTensor& t = p == Phase::I ? d.intra : d.extra;
    if (d.cell.count(p) > 0) {
      t = compute_effective_tensor(d.cell, p, cfg.params.diffusion, tol);
    } else {
      t.phase = p;
    }
  }
  return d;
}

MacroSetup make_macro_setup(const Config& cfg, const CellData& cell, int n) {
  MacroSetup s;
  s.n = n;
  s.params = cfg.params;
  s.config = cfg.run;
  s.measures = cell.measures;
  s.d_intra = cell.intra.matrix;
  s.d_extra = cell.extra.matrix;
  return s;
}

std::vector<int> snapshot_steps(const Config& cfg) {
  const long long total = std::llround(cfg.run.t_end / cfg.run.dt);
  std::vector<int> steps;
  for (double f : cfg.snapshot_fractions) {
    steps.push_back(static_cast<int>(std::llround(f * static_cast<double>(total))));
  }
  return steps;
}

std::string tensor_csv(const CellData& data, double diffusion) {
  std::string out = "subdomain,entry,value\n";
  for (const EffectiveTensor* t : {&data.intra, &data.extra}) {
    const std::string s(1, phase_letter(t->phase));
    const char* names[2][2] = {{"M11", "M12"}, {"M21", "M22"}};
    for (int k = 0; k < 2; ++k) {
      for (int j = 0; j < 2; ++j) out += s + "," + names[k][j] + "," + format_double(t->matrix(k, j)) + "\n";
    }
    out += s + ",symmetry," + format_double(t->matrix.asymmetry(diffusion * t->measure)) + "\n";
  }
  return out;
}

RunSummary run_single(const Config& cfg, const fs::path& out) {
  require_valid(cfg);
  Manifest manifest(out);
  manifest.write("config.txt", echo_config(cfg));
  RunSummary summary;
  DiagnosticsRecord record;
  switch (cfg.mode) {
    case RunMode::CellProblem: {
      const CellData data = compute_cell_data(cfg);
      manifest.write("tensor.csv", tensor_csv(data, cfg.params.diffusion));
      std::string measures = "quantity,value\n";
      measures += "measure_I," + format_double(data.measures.intra) + "\n";
      measures += "measure_E," + format_double(data.measures.extra) + "\n";
      measures += "interface," + format_double(data.measures.interface) + "\n";
      manifest.write("measures.csv", measures);
      manifest.write("tags.csv", tag_raster_csv(data.cell));
      for (const EffectiveTensor* t : {&data.intra, &data.extra}) {
        if (t->measure == 0.0) continue;
        for (int j = 0; j < 2; ++j) {
          std::string csv = "cell,i,j,chi\n";
          const auto& chi = t->correctors[j].values;
          for (int c = 0; c < static_cast<int>(chi.size()); ++c) {
            if (data.cell.tags[c] != t->phase) continue;
            csv += std::to_string(c) + ',' + std::to_string(c % data.cell.n) + ',' +
                   std::to_string(c / data.cell.n) + ',' + format_double(chi[c]) + '\n';
          }
          manifest.write(std::string("corrector_") + phase_letter(t->phase) + std::to_string(j + 1) +
                             ".csv",
                         csv);
        }
      }
      break;
    }
    case RunMode::Micro: {
      MicroRun run = execute_micro(cfg, manifest, 0);
      record = std::move(run.record);
      break;
    }
    case RunMode::Macro: {
      MacroRun run = execute_macro(cfg, compute_cell_data(cfg), manifest);
      record = std::move(run.record);
      break;
    }
  }
  if (!record.rows.empty()) {
    write_text(out / "timing.txt", timing_text(record));
    manifest.add("timing.txt");
    summary.diagnostics = record.summary();
  }
  manifest.finish(cfg);
  summary.files = manifest.files();
  return summary;
}

std::vector<std::string> study_field_names() {
  return {"C_Na_I", "C_K_I", "C_Cl_I", "C_Na_E", "C_K_E", "C_Cl_E", "v"};
}

double normalized_l2_error(const std::vector<double>& a, const std::vector<double>& b,
                           double scale) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s / static_cast<double>(a.size())) / scale;
}

double ConvergenceReport::ratio(std::size_t leg, std::size_t field, std::size_t snapshot) const {
  if (leg == 0 || leg >= legs.size() || !legs[leg].ok || !legs[leg - 1].ok) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return legs[leg].errors[field][snapshot] / legs[leg - 1].errors[field][snapshot];
}

bool ConvergenceReport::monotone() const {
  for (const auto& leg : legs) {
    if (!leg.ok) return false;
  }
  for (std::size_t k = 1; k < legs.size(); ++k) {
    for (std::size_t f = 0; f < fields.size(); ++f) {
      for (std::size_t s = 0; s < snapshot_times.size(); ++s) {
        if (!(ratio(k, f, s) < 1.0)) return false;
      }
    }
  }
  return true;
}

ConvergenceReport run_convergence_study(const Config& cfg, const std::vector<int>& epsilons,
                                        const fs::path& out) {
  require_valid(cfg);
  check_study_inputs(cfg, epsilons);
  Manifest top(out);
  top.write("config.txt", echo_config(cfg));

  ConvergenceReport report;
  report.fields = study_field_names();
  const auto steps = snapshot_steps(cfg);
  for (int s : steps) report.snapshot_times.push_back(s * cfg.run.dt);

  const CellData cell = compute_cell_data(cfg);
  top.write("tensor.csv", tensor_csv(cell, cfg.params.diffusion));
  Manifest macro_manifest(out / "macro");
  macro_manifest.write("config.txt", echo_config(cfg));
  const MacroRun macro = execute_macro(cfg, cell, macro_manifest);
  write_text(out / "macro" / "timing.txt", timing_text(macro.record));
  macro_manifest.add("timing.txt");
  macro_manifest.finish(cfg);

  std::vector<double> scale(report.fields.size());
  for (std::size_t f = 0; f < report.fields.size(); ++f) scale[f] = l2_norm(field_of(macro.initial, f));

  std::string norms = "epsilon_inv,status,c_linf_l2,grad_c_l2_l2,c_gamma_l2_l2,jump_gamma_l2_l2,phi_l2_h1,max_en_drift\n";
  for (int eps : epsilons) {
    LegResult leg;
    leg.epsilon_inv = eps;
    const fs::path dir = out / ("eps_" + std::to_string(eps));
    Config leg_cfg = cfg;
    leg_cfg.run.epsilon_inv = eps;
    try {
      fs::remove_all(dir);
      Manifest manifest(dir);
      manifest.write("config.txt", echo_config(leg_cfg));
      MicroRun run = execute_micro(leg_cfg, manifest, eps);
      write_text(dir / "timing.txt", timing_text(run.record));
      manifest.add("timing.txt");
      manifest.finish(leg_cfg);
      leg.diagnostics = run.record.summary();
      leg.errors.assign(report.fields.size(), std::vector<double>(steps.size()));
      for (std::size_t s = 0; s < steps.size(); ++s) {
        const MacroFields ref = coarsen(macro.snapshots[s], eps);
        for (std::size_t f = 0; f < report.fields.size(); ++f) {
          double sc = scale[f];
          if (sc == 0.0) sc = l2_norm(field_of(ref, f));
          if (sc == 0.0) sc = 1.0;
          leg.errors[f][s] = normalized_l2_error(field_of(run.averages[s], f), field_of(ref, f), sc);
        }
      }
      leg.ok = true;
    } catch (const std::exception& e) {
      leg.ok = false;
      leg.error = e.what();
      const auto* err = dynamic_cast<const Error*>(&e);
      fs::create_directories(dir);
      write_text(dir / "error.json",
                 error_json(err ? std::string(to_string(err->kind())) : "Exception", e.what()));
    }
    const auto& d = leg.diagnostics;
    norms += std::to_string(eps) + (leg.ok ? ",ok," : ",failed,");
    write_csv_row(norms, {d.c_linf_l2, d.grad_c_l2_l2, d.c_gamma_l2_l2, d.jump_gamma_l2_l2,
                          d.phi_l2_h1, d.max_en_drift});
    report.legs.push_back(std::move(leg));
  }
  top.write("norms_summary.csv", norms);
  for (const auto& f : emit_plot_data(report, out)) top.add(f);
  top.finish(cfg);
  return report;
}

std::vector<std::string> emit_plot_data(const ConvergenceReport& report, const fs::path& out) {
  fs::create_directories(out);
  std::vector<std::string> files;
  auto cell = [](double x) { return std::isnan(x) ? std::string() : format_double(x); };
  std::string errors = "epsilon_inv,epsilon,status,field,snapshot_time,error,ratio\n";
  for (std::size_t k = 0; k < report.legs.size(); ++k) {
    const auto& leg = report.legs[k];
    for (std::size_t f = 0; f < report.fields.size(); ++f) {
      for (std::size_t s = 0; s < report.snapshot_times.size(); ++s) {
        errors += std::to_string(leg.epsilon_inv) + ',' + format_double(1.0 / leg.epsilon_inv) +
                  (leg.ok ? ",ok," : ",failed,") + report.fields[f] + ',' +
                  format_double(report.snapshot_times[s]) + ',' +
                  (leg.ok ? format_double(leg.errors[f][s]) : std::string("nan")) + ',' +
                  cell(report.ratio(k, f, s)) + '\n';
      }
    }
  }
  write_text(out / "errors.csv", errors);
  files.push_back("errors.csv");
  for (std::size_t f = 0; f < report.fields.size(); ++f) {
    std::string csv = "epsilon";
    for (double t : report.snapshot_times) {
      csv += ",error_t" + format_double(t) + ",ratio_t" + format_double(t);
    }
    csv += '\n';
    for (std::size_t k = 0; k < report.legs.size(); ++k) {
      const auto& leg = report.legs[k];
      csv += format_double(1.0 / leg.epsilon_inv);
      for (std::size_t s = 0; s < report.snapshot_times.size(); ++s) {
        csv += ',' + (leg.ok ? format_double(leg.errors[f][s]) : std::string("nan"));
        csv += ',' + cell(report.ratio(k, f, s));
      }
      csv += '\n';
    }
    const std::string name = "plot_error_" + report.fields[f] + ".csv";
    write_text(out / name, csv);
    files.push_back(name);
  }
  return files;
}

std::string membrane_probe_csv(const Config& cfg, double v_min, double v_max, int points) {
  if (points < 2 || !(v_max > v_min)) fail(ErrorKind::InvalidInput, "probe needs v_max > v_min and >= 2 points");
  const auto& p = cfg.params;
  const MembraneTerms terms = membrane_terms(cfg.c_intra, cfg.c_extra, p);
  std::string out = "v,channel_Na,channel_K,channel_Cl,pump,flux_Na,flux_K,flux_Cl,total\n";
  for (int k = 0; k < points; ++k) {
    const double v = v_min + (v_max - v_min) * k / (points - 1);
    MembraneSample s{v, cfg.c_intra, cfg.c_extra, 0.0};
    write_csv_row(out, {v, channel_current(p.conductance[0], v, terms.nernst[0]),
                        channel_current(p.conductance[1], v, terms.nernst[1]),
                        channel_current(p.conductance[2], v, terms.nernst[2]), terms.pump,
                        species_interface_flux(0, s, p), species_interface_flux(1, s, p),
                        species_interface_flux(2, s, p), total_membrane_current(s, p)});
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.filename().empty()) return;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::InvalidInput, "cannot write " + path.string());
  f << text;
}

std::string error_json(const std::string& kind, const std::string& message) {
  nlohmann::json j;
  j["status"] = "error";
  j["kind"] = kind;
  j["message"] = message;
  return j.dump(2) + "\n";
}

}  // namespace ionhom
