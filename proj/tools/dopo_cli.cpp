// ============================================================================
// dopo: squeezing spectra of the DOPO bright cavity soliton.
//
//   dopo eigs    [-c config] [--set key=value ...]   eigenvalues + profile
//   dopo squeeze [-c config] [--set key=value ...]   spectra / sweeps
//   dopo oracle  [-c config] [--set key=value ...]   stochastic cross-check
//
// Exit codes: 0 success, 2 parameter/existence error, 3 numerical failure.
// ============================================================================

#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dopo/cli.hpp"

namespace {

std::string key_listing() {
  std::string s = "Configuration keys (key = value file and --set overrides):\n";
  for (const auto& [k, v] : dopo::RunConfig::defaults())
    s += "  " + k + " (default: " + (v.empty() ? "<empty>" : v) + ")\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"linearized quantum fluctuations of the DOPO bright cavity "
               "soliton: eigensystems, squeezing spectra, stochastic oracle"};
  app.require_subcommand(1);
  app.footer(key_listing());

  std::string config_path;
  std::vector<std::string> overrides;
  std::string command;
  const std::vector<std::pair<std::string, std::string>> subcommands = {
      {"eigs", "soliton profile, eigenvalue table, tagged modes"},
      {"squeeze", "squeezing / intensity spectra and parameter sweeps"},
      {"oracle", "stochastic Langevin cross-check with z-scores"}};
  for (const auto& [name, help] : subcommands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path,
                    "configuration file (key = value lines)");
    sub->add_option("--set", overrides, "override a key: --set key=value")
        ->take_all();
    sub->callback([&command, name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    dopo::RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const std::string& kv : overrides) cfg.set_pair(kv);
    return dopo::run_command(command, cfg);
  } catch (const dopo::config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const dopo::numerical_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
