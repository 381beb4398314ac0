// Command-line front end over the scenario runner.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "spectrum/csv.hpp"
#include "spectrum/scenario.hpp"

namespace fs = std::filesystem;
using namespace spectrum;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitSolver = 2;

struct Common {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("scenario", c.scenario, "Scenario YAML file")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", c.out, "Output directory (default: out/<scenario name>)");
  cmd->add_option("--seed", c.seed, "Override dynamics.seed");
  cmd->add_option("--tol", c.tol, "Override dynamics.tol");
}

ScenarioConfig load(const Common& c) {
  ScenarioConfig cfg = load_scenario(c.scenario);
  if (c.seed) cfg.dynamics.seed = *c.seed;
  if (c.tol) cfg.dynamics.tol = *c.tol;
  validate_scenario(cfg);
  return cfg;
}

fs::path out_dir(const Common& c, const ScenarioConfig& cfg) {
  return c.out.empty() ? fs::path("out") / cfg.name : fs::path(c.out);
}

void report(const ExperimentManifest& m, const fs::path& dir) {
  std::cout << "scenario " << m.scenario << " (" << m.scenario_hash.substr(0, 12) << ") -> "
            << dir.string() << "\n";
  for (const auto& f : m.files) {
    std::cout << "  " << f.name << "  rows=" << f.rows << "  sha256=" << f.sha256 << "\n";
  }
  std::cout << "  time " << m.timings_s.at("total") << " s"
            << (m.within_budget ? "" : " (over budget)") << ", failed points " << m.failed_points
            << "\n";
}

bool is_static(GameType g) { return !is_dynamic(g); }

bool is_sweep(const ScenarioConfig& cfg) { return !cfg.sweep.empty(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capacity-constrained spectrum market equilibria and price dynamics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kArtifactVersion));

  Common run_o, solve_o, sim_o, sweep_o, ver_o;
  auto* run = app.add_subcommand("run", "Run any scenario and write its outputs");
  add_common(run, run_o);
  auto* solve = app.add_subcommand("solve", "Static equilibrium of a scenario (sweep ignored); prints the result");
  add_common(solve, solve_o);
  auto* simulate = app.add_subcommand("simulate", "Run a price-dynamics scenario");
  add_common(simulate, sim_o);
  auto* sweep = app.add_subcommand("sweep", "Run a scenario that declares a sweep");
  add_common(sweep, sweep_o);
  auto* verify = app.add_subcommand("verify", "Run a scenario and compare it with golden outputs");
  add_common(verify, ver_o);
  std::string golden;
  std::vector<std::string> col_tols;
  GoldenTolerance tol;
  bool exact = false;
  verify->add_option("-g,--golden", golden, "Golden directory (default: golden/<scenario name>)");
  verify->add_option("--col-tol", col_tols, "Per-column absolute tolerance, NAME=VALUE (repeatable)");
  verify->add_option("--abs-tol", tol.abs, "Default absolute tolerance")->capture_default_str();
  verify->add_option("--rel-tol", tol.rel, "Default relative tolerance")->capture_default_str();
  verify->add_flag("--exact", exact, "Also require byte-identical checksums");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run || *simulate || *sweep) {
      const Common& c = *run ? run_o : (*simulate ? sim_o : sweep_o);
      ScenarioConfig cfg = load(c);
      if (*simulate && !is_dynamic(cfg.game)) {
        throw Error(ErrorKind::kValidationError, "game: simulate needs a dynamic game, got " +
                                                     std::string(to_string(cfg.game)));
      }
      if (*sweep && !is_sweep(cfg)) {
        throw Error(ErrorKind::kValidationError, "sweep: scenario declares no sweep");
      }
      const fs::path dir = out_dir(c, cfg);
      report(run_scenario(cfg, dir), dir);
    } else if (*solve) {
      ScenarioConfig cfg = load(solve_o);
      if (!is_static(cfg.game)) {
        throw Error(ErrorKind::kValidationError, "game: solve needs a static game, got " +
                                                     std::string(to_string(cfg.game)));
      }
      cfg.sweep.clear();
      const fs::path dir = out_dir(solve_o, cfg);
      const ExperimentManifest m = run_scenario(cfg, dir);
      std::ifstream in(dir / m.files.front().name);
      std::cout << in.rdbuf();
    } else if (*verify) {
      ScenarioConfig cfg = load(ver_o);
      for (const auto& spec : col_tols) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) {
          throw Error(ErrorKind::kValidationError, "--col-tol: expected NAME=VALUE, got " + spec);
        }
        tol.per_column[spec.substr(0, eq)] = parse_quantity(spec.substr(eq + 1));
      }
      const fs::path dir = ver_o.out.empty() ? fs::temp_directory_path() / ("spectrum_verify_" + cfg.name)
                                             : fs::path(ver_o.out);
      const fs::path gdir = golden.empty() ? fs::path("golden") / cfg.name : fs::path(golden);
      const ExperimentManifest m = run_scenario(cfg, dir);
      const GoldenReport rep = verify_golden(m, dir, gdir, tol);
      for (const auto& p : rep.problems) std::cout << "problem: " << p << "\n";
      for (const auto& col : rep.columns) {
        if (!col.ok) {
          std::cout << "mismatch: " << col.file << " column " << col.column
                    << " max_abs=" << format_double(col.max_abs) << "\n";
        }
      }
      const bool pass = rep.ok && (!exact || rep.checksums_match);
      std::cout << (pass ? "PASS " : "FAIL ") << cfg.name
                << (rep.checksums_match ? " (checksums identical)" : " (checksums differ)") << "\n";
      return pass ? kExitOk : kExitInvalid;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::kValidationError:
      case ErrorKind::kParseError:
      case ErrorKind::kInvalidArgument:
      case ErrorKind::kDimensionMismatch:
        return kExitInvalid;
      default:
        return kExitSolver;
    }
  }
  return kExitOk;
}
