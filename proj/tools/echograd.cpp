#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "echograd/bench.hpp"

namespace {

using namespace echograd;

std::size_t jobs_or_env(std::optional<std::size_t> jobs) {
  if (jobs) return *jobs;
  if (const char* env = std::getenv("ECHOGRAD_JOBS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw Error(std::string("invalid ECHOGRAD_JOBS value '") + env + "'");
  }
  return 1;
}

void add_experiment_flags(CLI::App* cmd, bench::ExperimentConfig& cfg, std::optional<double>& psnr,
                          std::optional<std::size_t>& max_sources) {
  cmd->add_option("--rooms", cfg.num_rooms, "Number of rooms")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", cfg.master_seed, "Master seed");
  cmd->add_option("--fs", cfg.fs_hz, "Sample rate (Hz)")->check(CLI::PositiveNumber);
  cmd->add_option("--scale", cfg.array_scale, "em32 array scale factor")->check(CLI::PositiveNumber);
  cmd->add_option("--tmax", cfg.tmax_s, "Observation length (s)")->check(CLI::PositiveNumber);
  cmd->add_option("--psnr", psnr, "Peak signal-to-noise ratio (dB); noiseless if omitted");
  cmd->add_option("--max-sources", max_sources, "Keep only rooms with fewer audible sources");
}

int print_solve(const bench::SolveSummary& s) {
  std::cout << "solved " << s.solved << ", skipped " << s.skipped << ", failed " << s.failures.size() << '\n';
  for (const auto& [id, err] : s.failures) std::cerr << id << ": " << err << '\n';
  return s.failures.empty() ? 0 : 2;
}

int print_table(const bench::Evaluation& e) {
  write_table_csv(std::cout, e.table);
  for (const auto& id : e.missing) std::cerr << "missing result: " << id << '\n';
  return e.missing.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gridless image-source recovery from multichannel room impulse responses"};
  app.require_subcommand(1);

  bench::ExperimentConfig cfg;
  std::optional<double> psnr;
  std::optional<std::size_t> max_sources;
  std::optional<std::size_t> jobs;
  std::optional<std::string> config_path;
  std::string out;
  std::string dataset;
  std::string results;
  std::string axis;
  std::vector<double> values;

  auto* sim = app.add_subcommand("simulate", "Generate a dataset of random rooms");
  add_experiment_flags(sim, cfg, psnr, max_sources);
  sim->add_option("--out", out, "Dataset directory")->required();

  auto* sol = app.add_subcommand("solve", "Run the solver on every room of a dataset");
  sol->add_option("dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  sol->add_option("--config", config_path, "Solver config JSON");
  sol->add_option("--jobs", jobs, "Parallel rooms (default: ECHOGRAD_JOBS or 1)")->check(CLI::PositiveNumber);
  sol->add_option("--out", out, "Results directory")->required();

  auto* ev = app.add_subcommand("evaluate", "Match estimates to ground truth and write the summary table");
  ev->add_option("dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("results", results, "Results directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--out", out, "Output directory")->required();

  auto* sw = app.add_subcommand("sweep", "Recall against PSNR, sample rate or array scale");
  add_experiment_flags(sw, cfg, psnr, max_sources);
  sw->add_option("--axis", axis, "psnr, fs or scale")->required();
  sw->add_option("--values", values, "Axis values (inf = noiseless for psnr)")->required()->delimiter(',');
  sw->add_option("--config", config_path, "Solver config JSON");
  sw->add_option("--jobs", jobs, "Parallel rooms (default: ECHOGRAD_JOBS or 1)")->check(CLI::PositiveNumber);
  sw->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    cfg.psnr_db = psnr;
    cfg.max_sources = max_sources;
    cfg.output_dir = out;
    if (config_path) cfg.solver_config = *config_path;
    if (*sim) {
      const auto data = bench::simulate(cfg);
      std::cout << "wrote " << data.rooms.size() << " rooms to " << out << '\n';
      return 0;
    }
    if (*sol) {
      const auto config = bench::load_solver_config(cfg.solver_config);
      return print_solve(bench::solve(dataset, out, config, jobs_or_env(jobs)));
    }
    if (*ev) return print_table(bench::evaluate(dataset, results, out));
    if (*sw) {
      cfg.jobs = jobs_or_env(jobs);
      const auto config = bench::load_solver_config(cfg.solver_config);
      const auto cells = bench::sweep(cfg, bench::parse_axis(axis), values, config);
      int code = 0;
      for (const auto& c : cells) {
        if (!c.solve.failures.empty() || !c.evaluation.missing.empty()) code = 2;
      }
      std::cout << "wrote " << (std::filesystem::path(out) / "sweep.csv").string() << '\n';
      return code;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
