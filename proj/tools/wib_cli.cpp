// wib <command> --config <path> [--out <dir>] [--workers N] [--seed S]
//
// Exit codes: 0 success, 1 internal error, 2 invalid config or usage,
// 3 non-converged or unstable rows (files are still written), 4 unwritable output.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "wib/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Weighted infinitesimal boundedness workbench"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir = ".";
  int workers = 0;
  long long seed = -1;
  for (const std::string& name : wib::command_names()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "strict JSON config")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--workers", workers, "worker threads (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "random seed (overrides the config)")->check(CLI::NonNegativeNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::fprintf(stderr, "%s: cannot read config\n", config_path.c_str());
    return 2;
  }
  std::stringstream buf;
  buf << in.rdbuf();

  wib::ExperimentConfig cfg;
  try {
    cfg = wib::parse_config(buf.str(), command);
    wib::validate_experiment(cfg);
  } catch (const wib::ConfigError& e) {
    std::fprintf(stderr, "%s:%d: %s\n", config_path.c_str(), e.line(), e.what());
    return 2;
  }

  std::optional<int> w;
  if (workers > 0) w = workers;
  std::optional<std::uint64_t> s;
  if (seed >= 0) s = static_cast<std::uint64_t>(seed);

  wib::RunReport report;
  try {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) throw wib::OutputError("cannot create output directory " + out_dir);
    report = wib::run_experiment(cfg, w, s);
    for (const auto& path : wib::write_report(report, out_dir)) std::printf("wrote %s\n", path.string().c_str());
  } catch (const wib::OutputError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 4;
  } catch (const wib::ConfigError& e) {
    std::fprintf(stderr, "%s:%d: %s\n", config_path.c_str(), e.line(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  for (const auto& note : report.notes) std::printf("note: %s\n", note.c_str());
  if (!report.flagged.empty()) {
    for (const auto& f : report.flagged) std::fprintf(stderr, "flagged: %s\n", f.c_str());
    return 3;
  }
  return 0;
}
