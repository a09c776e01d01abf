#include "nlirf/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear impulse response toolkit"};
  app.require_subcommand(1);
  std::string config, out = ".";
  std::uint64_t seed = 0;
  auto* config_opt = app.add_option("--config", config, "JSON config or manifest file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--out", out, "output directory");
  for (const auto& name : nlirf::subcommand_names()) app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << '\n';
    return 2;
  }
  const std::string sub = app.get_subcommands().front()->get_name();
  std::optional<std::filesystem::path> cfg;
  if (*config_opt) cfg = config;
  std::optional<std::uint64_t> s;
  if (*seed_opt) s = seed;
  return nlirf::run(sub, cfg, s, out, std::cerr);
}
