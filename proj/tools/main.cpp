#include <sstream>

#include "CLI11.hpp"
#include "phtp/cli.hpp"

namespace {

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) v.push_back(std::stod(item));
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Port-Hamiltonian optimal control and turnpike analysis"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", phtp::cli::kVersion);

  phtp::cli::RunConfig cfg;
  double tol = 0.0, horizon = 0.0;
  int steps = 0;
  std::string grid;

  const std::vector<std::pair<std::string, std::string>> subs{
      {"validate", "Check the pH matrix conditions of a system file"},
      {"analyze-pencil", "Regularity, index and dH certificate of (E, (J-R)Q)"},
      {"analyze-control", "Kalman subspace, R-controllability, steady states"},
      {"reduce", "Reduce a pH-DAE to an ODE with feed-through"},
      {"solve", "Solve the minimal energy supply problem"},
      {"turnpike", "Solve and compute turnpike statistics and bounds"},
      {"reproduce", "Run a built-in study (msd | robot)"}};
  for (const auto& [name, help] : subs) {
    CLI::App* sc = app.add_subcommand(name, help);
    sc->add_option("--input", cfg.input, "Input JSON file");
    sc->add_option("--out", cfg.out, "Output directory")->capture_default_str();
    sc->add_option("--tol", tol, "QP tolerance override");
    sc->add_option("--horizon", horizon, "Horizon T override");
    sc->add_option("--steps", steps, "Grid size N override");
    sc->add_option("--eps-grid", grid, "Comma-separated epsilon grid");
    sc->add_option("--example", cfg.example, "msd | robot (reproduce)");
    sc->add_option("example_name", cfg.example, "msd | robot (reproduce)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : phtp::cli::kIoError;
  }
  cfg.subcommand = app.get_subcommands().front()->get_name();
  if (tol != 0.0) cfg.tol = tol;
  if (horizon != 0.0) cfg.horizon = horizon;
  if (steps != 0) cfg.steps = steps;
  try {
    if (!grid.empty()) cfg.eps_grid = parse_grid(grid);
  } catch (const std::exception&) {
    std::cerr << "phtp: --eps-grid must be comma-separated numbers\n";
    return phtp::cli::kIoError;
  }
  return phtp::cli::run(cfg);
}
