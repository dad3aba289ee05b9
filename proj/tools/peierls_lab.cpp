// peierls-lab: command line front end to the pipeline.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "peierls/pipeline.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

int exit_code(const peierls::Error& e) {
  if (dynamic_cast<const peierls::ConfigError*>(&e)) return 2;
  if (dynamic_cast<const peierls::InvariantError*>(&e)) return 4;
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Magnetic Peierls reduction lab"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  int workers = 0;
  std::optional<std::uint64_t> seed;

  const char* commands[] = {"bands", "frame", "effective", "compare", "evolve", "butterfly", "validate"};
  for (const char* name : commands) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " stage");
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (default: run.output_dir)");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "override run.seed");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // usage errors share the exit code of configuration errors
    return app.exit(e) == 0 ? 0 : 2;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  try {
    nlohmann::json raw;
    {
      std::ifstream in(config_path);
      try {
        in >> raw;
      } catch (const nlohmann::json::exception& e) {
        throw peierls::ConfigError(std::string("config: ") + e.what());
      }
    }
    if (seed) raw["run"]["seed"] = *seed;
    if (workers > 0) raw["run"]["workers"] = workers;
    const peierls::RunConfig cfg = peierls::parse_config(raw);
#ifdef _OPENMP
    omp_set_num_threads(cfg.run.workers);
#endif
    const std::filesystem::path out = out_dir.empty() ? cfg.run.output_dir : std::filesystem::path(out_dir);

    nlohmann::json summary;
    if (cmd == "bands") summary = peierls::cmd_bands(cfg, out);
    if (cmd == "frame") summary = peierls::cmd_frame(cfg, out);
    if (cmd == "effective") summary = peierls::cmd_effective(cfg, out);
    if (cmd == "compare") summary = peierls::cmd_compare(cfg, out);
    if (cmd == "evolve") summary = peierls::cmd_evolve(cfg, out);
    if (cmd == "butterfly") summary = peierls::cmd_butterfly(cfg, out);
    if (cmd == "validate") {
      const peierls::RunReport rep = peierls::cmd_validate(cfg, out);
      for (const auto& c : rep.checks) {
        std::cout << c.status << "  " << c.name << "  " << c.detail << "\n";
      }
      std::cout << (rep.ok() ? "validate: all checks passed" : "validate: FAILED") << "\n";
      return rep.ok() ? 0 : 4;
    }
    std::cout << summary.dump(1) << "\n";
    return 0;
  } catch (const peierls::Error& e) {
    std::cerr << "peierls-lab " << cmd << ": " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "peierls-lab " << cmd << ": " << e.what() << "\n";
    return 3;
  }
}
