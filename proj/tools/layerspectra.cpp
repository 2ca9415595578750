#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "layerspectra/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace layerspectra;
  CLI::App app{"Quantum layers over rotational hypersurfaces: admissibility, invariants, certificates, spectra"};
  app.set_version_flag("--version", version_string());

  std::string command;
  std::string config_path;
  std::string out_dir;
  int workers = 1;
  app.add_option("command", command, "validate | invariants | certify | solve | sweep | report")->required();
  app.add_option("--config", config_path, "run configuration (JSON, schema v1)")->required();
  app.add_option("--out", out_dir, "output root (overrides LAYERSPECTRA_OUT and the config)");
  app.add_option("--workers", workers, "concurrent sweep points")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (!is_command(command)) {
    std::cerr << "layerspectra: unknown command '" << command << "'\n";
    return 2;
  }

  RunConfig config;
  try {
    config = load_config(config_path);
  } catch (const Error& e) {
    std::cerr << "layerspectra: " << e.what() << '\n';
    return 2;
  }
  // The command line wins over the command stored in the config.
  config.command = command;

  const RunOutcome outcome = run(config, output_root(config, out_dir), workers);
  if (outcome.exit_code == 0) {
    std::cout << outcome.run_dir.string() << '\n' << outcome.message << '\n';
  } else {
    std::cerr << "layerspectra: " << outcome.message << '\n';
    if (!outcome.run_dir.empty()) std::cerr << "record: " << outcome.run_dir.string() << '\n';
  }
  return outcome.exit_code;
}
