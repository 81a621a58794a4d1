// Command-line entry point: runs a JSON-described experiment and writes the
// CSV tables plus a JSON sidecar.
#include <cstdio>
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "kerrw/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kerr-oscillator phase-space toolkit"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "execute a run configuration");
  std::string config_path;
  std::string out_dir = ".";
  int threads = 0;
  run->add_option("config", config_path, "JSON run configuration")->required();
  run->add_option("--out", out_dir, "output directory (default: current)");
  run->add_option("--threads", threads, "worker threads (0 = hardware default)");

  CLI11_PARSE(app, argc, argv);

  try {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
    kerrw::harness::RunConfig cfg = kerrw::harness::load_config(config_path);
    kerrw::harness::run_to_files(cfg, out_dir);
    std::cout << "wrote " << out_dir << "/" << cfg.out_prefix << ".csv\n";
  } catch (const kerrw::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
