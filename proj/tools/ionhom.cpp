// ionhom: command-line entry point for the multiscale ion-transport simulator.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ionhom/errors.hpp"
#include "ionhom/harness.hpp"

namespace fs = std::filesystem;
using namespace ionhom;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& c, bool needs_out) {
  app->add_option("--config", c.config, "flat key = value config file");
  auto* out = app->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
  app->add_option("--set", c.overrides, "extra key=value override (repeatable)");
}

Config resolve(const Common& c) {
  std::string text;
  if (!c.config.empty()) {
    std::ifstream in(c.config);
    if (!in) fail(ErrorKind::InvalidInput, "cannot read config file " + c.config);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  for (const auto& o : c.overrides) text += "\n" + o;
  return parse_config(text);
}

void print_files(const fs::path& dir, const std::vector<std::string>& files) {
  for (const auto& f : files) std::cout << (dir / f).string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Homogenized ion transport in periodic tissue"};
  app.require_subcommand(1);

  Common validate_opts, cell_opts, micro_opts, macro_opts, converge_opts, membrane_opts;
  auto* validate = app.add_subcommand("validate", "check a config and echo it fully resolved");
  add_common(validate, validate_opts, false);

  auto* cell = app.add_subcommand("cell-problem", "effective tensors of the unit cell");
  add_common(cell, cell_opts, true);
  std::string shape;
  double size = 0.0;
  int n = 0;
  cell->add_option("--geometry", shape, "square | cross | stripe | empty");
  cell->add_option("--size", size, "inclusion side, arm width or stripe width");
  cell->add_option("--n", n, "unit-cell resolution");

  auto* micro = app.add_subcommand("micro", "microscale run");
  add_common(micro, micro_opts, true);

  auto* macro = app.add_subcommand("macro", "homogenized run");
  add_common(macro, macro_opts, true);
  std::string model;
  macro->add_option("--model", model, "con_discon | con_con");

  auto* converge = app.add_subcommand("converge", "micro vs macro convergence study");
  add_common(converge, converge_opts, true);
  std::string epsilons;
  std::string converge_model;
  converge->add_option("--epsilons", epsilons, "comma-separated 1/epsilon values, e.g. 2,4,8");
  converge->add_option("--model", converge_model, "con_discon | con_con");

  auto* membrane = app.add_subcommand("membrane", "membrane current tables");
  add_common(membrane, membrane_opts, false);
  bool probe = false;
  double v_min = -2.0, v_max = 2.0;
  int points = 41;
  membrane->add_flag("--probe", probe, "tabulate currents over a v grid")->required();
  membrane->add_option("--v-min", v_min);
  membrane->add_option("--v-max", v_max);
  membrane->add_option("--points", points);

  CLI11_PARSE(app, argc, argv);

  std::string out_dir;
  try {
    if (validate->parsed()) {
      const Config cfg = resolve(validate_opts);
      std::cout << echo_config(cfg);
      std::cout << "config_hash = " << hash_hex(config_hash(cfg)) << "\n";
      const ValidationReport report = validate_config(cfg);
      std::cout << report.summary();
      return report.ok() ? 0 : 2;
    }
    if (cell->parsed()) {
      out_dir = cell_opts.out;
      Common c = cell_opts;
      if (!shape.empty()) c.overrides.push_back("geometry.shape = " + shape);
      if (size > 0.0) c.overrides.push_back("geometry.size = " + std::to_string(size));
      if (n > 0) c.overrides.push_back("geometry.n_per_cell = " + std::to_string(n));
      c.overrides.push_back("run.mode = cell-problem");
      print_files(out_dir, run_single(resolve(c), out_dir).files);
      return 0;
    }
    if (micro->parsed()) {
      out_dir = micro_opts.out;
      Common c = micro_opts;
      c.overrides.push_back("run.mode = micro");
      print_files(out_dir, run_single(resolve(c), out_dir).files);
      return 0;
    }
    if (macro->parsed()) {
      out_dir = macro_opts.out;
      Common c = macro_opts;
      c.overrides.push_back("run.mode = macro");
      if (!model.empty()) c.overrides.push_back("run.connectivity = " + model);
      print_files(out_dir, run_single(resolve(c), out_dir).files);
      return 0;
    }
    if (converge->parsed()) {
      out_dir = converge_opts.out;
      Common c = converge_opts;
      if (!epsilons.empty()) c.overrides.push_back("study.epsilons = " + epsilons);
      if (!converge_model.empty()) c.overrides.push_back("run.connectivity = " + converge_model);
      const Config cfg = resolve(c);
      const ConvergenceReport report = run_convergence_study(cfg, cfg.study_epsilons, out_dir);
      std::cout << "field,epsilon_inv,snapshot_time,error,ratio\n";
      for (std::size_t k = 0; k < report.legs.size(); ++k) {
        const auto& leg = report.legs[k];
        if (!leg.ok) {
          std::cout << "# epsilon_inv " << leg.epsilon_inv << " failed: " << leg.error << "\n";
          continue;
        }
        for (std::size_t f = 0; f < report.fields.size(); ++f) {
          for (std::size_t s = 0; s < report.snapshot_times.size(); ++s) {
            std::cout << report.fields[f] << ',' << leg.epsilon_inv << ','
                      << report.snapshot_times[s] << ',' << leg.errors[f][s] << ','
                      << report.ratio(k, f, s) << "\n";
          }
        }
      }
      std::cout << (report.monotone() ? "monotone decrease: yes\n" : "monotone decrease: no\n");
      bool any_failed = false;
      for (const auto& leg : report.legs) any_failed |= !leg.ok;
      return any_failed ? 1 : 0;
    }
    if (membrane->parsed()) {
      const std::string csv = membrane_probe_csv(resolve(membrane_opts), v_min, v_max, points);
      if (membrane_opts.out.empty()) {
        std::cout << csv;
      } else {
        out_dir = membrane_opts.out;
        write_text(fs::path(out_dir) / "membrane_probe.csv", csv);
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    if (!out_dir.empty()) {
      write_text(fs::path(out_dir) / "error.json", error_json(std::string(to_string(e.kind())), e.what()));
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    if (!out_dir.empty()) write_text(fs::path(out_dir) / "error.json", error_json("Exception", e.what()));
    return 1;
  }
  return 0;
}
