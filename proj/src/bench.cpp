#include "echograd/bench.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "echograd/io.hpp"
#include "echograd/room_sim.hpp"

namespace echograd::bench {

using io::json;

namespace {

void run_parallel(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) task(i);
  };
  if (jobs == 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
}

SceneConstraints constraints_for(const ExperimentConfig& config) {
  SceneConstraints c;
  c.sample_rate_hz = config.fs_hz;
  return c;
}

std::vector<std::string> room_dirs(const fs::path& dataset_dir) {
  const json manifest = io::read_json(dataset_dir / "manifest.json");
  std::vector<std::string> ids;
  for (const auto& r : manifest.at("rooms")) ids.push_back(r.at("id").get<std::string>());
  return ids;
}

std::string format_value(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (num_rooms < 1) throw Error("num_rooms must be at least 1");
  if (!(tmax_s > 0.0)) throw Error("tmax_s must be positive");
  if (!(fs_hz > 0.0)) throw Error("fs_hz must be positive");
  if (!(array_scale > 0.0)) throw Error("array_scale must be positive");
  if (psnr_db && !std::isfinite(*psnr_db)) throw Error("psnr_db must be finite");
}

std::size_t ExperimentConfig::num_samples() const {
  return static_cast<std::size_t>(std::llround(tmax_s * fs_hz)) + 1;
}

std::string room_id(std::size_t index) {
  std::ostringstream s;
  s << "room_" << std::setw(4) << std::setfill('0') << index;
  return s.str();
}

Dataset select_rooms(const ExperimentConfig& config) {
  config.validate();
  Dataset out;
  const auto constraints = constraints_for(config);
  const std::size_t n = config.num_samples();
  for (std::uint64_t j = 0; out.rooms.size() < config.num_rooms; ++j) {
    const std::uint64_t seed = derive_seed(config.master_seed, j);
    try {
      const RoomScene scene = sample_scene(seed, config.array_scale, constraints);
      const std::size_t audible = audible_source_count(scene, n);
      if (config.max_sources && audible >= *config.max_sources) {
        out.events.push_back("seed " + std::to_string(seed) + ": " + std::to_string(audible) +
                             " audible sources, skipped");
        continue;
      }
      out.rooms.push_back({room_id(out.rooms.size()), seed, audible, scene.volume()});
    } catch (const PlacementFailed&) {
      out.events.push_back("seed " + std::to_string(seed) + ": placement failed, resampled");
    } catch (const EmptyRoom&) {
      out.events.push_back("seed " + std::to_string(seed) + ": direct path outside the window, resampled");
    }
  }
  return out;
}

Dataset simulate(const ExperimentConfig& config, const std::optional<std::vector<std::uint64_t>>& seeds) {
  config.validate();
  Dataset dataset;
  if (seeds) {
    for (std::size_t i = 0; i < seeds->size(); ++i) dataset.rooms.push_back({room_id(i), (*seeds)[i], 0, 0.0});
  } else {
    dataset = select_rooms(config);
  }
  fs::create_directories(config.output_dir);
  const auto constraints = constraints_for(config);
  const std::size_t n = config.num_samples();
  const PhysicalConstants constants;
  for (auto& room : dataset.rooms) {
    const RoomScene scene = sample_scene(room.seed, config.array_scale, constraints);
    auto rir = synthesize_rir(scene, n, constants);
    if (config.psnr_db) rir.observation = add_noise(rir.observation, {config.psnr_db, derive_seed(room.seed, 1)});
    room.audible_sources = rir.truth.size();
    room.volume_m3 = scene.volume();
    const fs::path dir = config.output_dir / room.id;
    fs::create_directories(dir);
    io::write_json(dir / "scene.json", io::scene_to_json(scene, constants));
    io::write_json(dir / "truth.json", io::measure_to_json(rir.truth));
    io::write_rir(dir / "rir.bin", rir.observation);
  }

  json rooms = json::array();
  for (const auto& r : dataset.rooms) {
    rooms.push_back({{"id", r.id}, {"seed", r.seed}, {"audible_sources", r.audible_sources}, {"volume_m3", r.volume_m3}});
  }
  json manifest = {{"master_seed", config.master_seed},
                   {"array_scale", config.array_scale},
                   {"fs_hz", config.fs_hz},
                   {"tmax_s", config.tmax_s},
                   {"num_samples", n},
                   {"psnr_db", config.psnr_db ? json(*config.psnr_db) : json(nullptr)},
                   {"rooms", rooms},
                   {"events", dataset.events}};
  io::write_json(config.output_dir / "manifest.json", manifest);
  return dataset;
}

SolveSummary solve(const fs::path& dataset_dir, const fs::path& results_dir, const SolverConfig& config,
                   std::size_t jobs) {
  config.validate();
  const auto ids = room_dirs(dataset_dir);
  fs::create_directories(results_dir);

  std::mutex mutex;
  SolveSummary summary;
  std::vector<json> status(ids.size());
  auto write_manifest = [&] {
    json rooms = json::array();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      rooms.push_back(status[i].is_null() ? json{{"id", ids[i]}, {"status", "pending"}} : status[i]);
    }
    io::write_json(results_dir / "manifest.json", {{"config", io::solver_config_to_json(config)}, {"rooms", rooms}});
  };

  run_parallel(ids.size(), jobs, [&](std::size_t i) {
    const fs::path in = dataset_dir / ids[i];
    const fs::path out = results_dir / ids[i];
    json entry = {{"id", ids[i]}};
    if (fs::exists(out / "estimate.json")) {
      entry["status"] = "skipped";
    } else {
      try {
        PhysicalConstants constants;
        const RoomScene scene = io::scene_from_json(io::read_json(in / "scene.json"), &constants);
        const Observation obs = io::read_rir(in / "rir.bin", scene.array.sample_rate_hz());
        const SolveResult result = sfw_solve(obs, scene.array, config, constants);
        fs::create_directories(out);
        io::write_json(out / "trace.json", io::trace_to_json(result.trace, config));
        io::write_json(out / "estimate.json", io::measure_to_json(result.measure));
        entry["status"] = "ok";
        entry["num_spikes"] = result.measure.size();
        entry["seconds"] = result.trace.seconds;
      } catch (const std::exception& e) {
        entry["status"] = "failed";
        entry["error"] = e.what();
      }
    }
    std::lock_guard lock(mutex);
    if (entry["status"] == "ok") ++summary.solved;
    if (entry["status"] == "skipped") ++summary.skipped;
    if (entry["status"] == "failed") summary.failures.emplace_back(ids[i], entry["error"].get<std::string>());
    status[i] = std::move(entry);
    write_manifest();
  });
  std::lock_guard lock(mutex);
  write_manifest();
  return summary;
}

Evaluation evaluate(const fs::path& dataset_dir, const fs::path& results_dir, const fs::path& out_dir,
                    const MatchTolerance& tolerance) {
  const auto ids = room_dirs(dataset_dir);
  Evaluation out;
  std::vector<RoomSummary> summaries;
  json rooms = json::array();
  for (const auto& id : ids) {
    const fs::path estimate = results_dir / id / "estimate.json";
    if (!fs::exists(estimate)) {
      out.missing.push_back(id);
      continue;
    }
    const RoomScene scene = io::scene_from_json(io::read_json(dataset_dir / id / "scene.json"));
    const SparseMeasure truth = io::measure_from_json(io::read_json(dataset_dir / id / "truth.json"));
    const SparseMeasure est = io::measure_from_json(io::read_json(estimate));
    RoomSummary summary{match_sources(est, truth, scene.array_center, tolerance), truth.size(), scene.volume()};
    json r = io::report_to_json(summary.report);
    r["id"] = id;
    r["volume_m3"] = summary.room_volume;
    rooms.push_back(std::move(r));
    summaries.push_back(summary);
    out.rooms.push_back({id, std::move(summary)});
  }
  out.table = aggregate(summaries);
  fs::create_directories(out_dir);
  std::ostringstream csv;
  write_table_csv(csv, out.table);
  io::write_text(out_dir / "table.csv", csv.str());
  io::write_json(out_dir / "rooms.json", {{"rooms", rooms}, {"missing", out.missing}});
  return out;
}

SweepAxis parse_axis(const std::string& name) {
  if (name == "psnr") return SweepAxis::Psnr;
  if (name == "fs") return SweepAxis::Fs;
  if (name == "scale") return SweepAxis::Scale;
  throw Error("unknown sweep axis '" + name + "' (expected psnr, fs or scale)");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Psnr: return "psnr";
    case SweepAxis::Fs: return "fs";
    case SweepAxis::Scale: return "scale";
  }
  return "?";
}

std::vector<SweepCell> sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values,
                             const SolverConfig& solver) {
  if (values.empty()) throw Error("sweep needs at least one value");
  const Dataset selected = select_rooms(base);
  std::vector<std::uint64_t> seeds;
  for (const auto& r : selected.rooms) seeds.push_back(r.seed);

  std::vector<SweepCell> cells;
  for (double v : values) {
    ExperimentConfig cell = base;
    switch (axis) {
      // A non-finite PSNR stands for the noiseless case.
      case SweepAxis::Psnr: cell.psnr_db = std::isfinite(v) ? std::optional<double>(v) : std::nullopt; break;
      case SweepAxis::Fs: cell.fs_hz = v; break;
      case SweepAxis::Scale: cell.array_scale = v; break;
    }
    const fs::path dir = base.output_dir / (to_string(axis) + "_" + format_value(v));
    cell.output_dir = dir / "dataset";
    simulate(cell, seeds);
    SweepCell result;
    result.value = v;
    result.solve = solve(cell.output_dir, dir / "results", solver, base.jobs);
    result.evaluation = evaluate(cell.output_dir, dir / "results", dir / "eval");
    cells.push_back(std::move(result));
  }

  std::ostringstream csv;
  csv << "axis,value,bin,num_rooms,recall_pct,precision_pct\n" << std::setprecision(10);
  json series = json::object();
  for (const auto& c : cells) {
    for (const auto& row : c.evaluation.table) {
      csv << to_string(axis) << ',' << c.value << ',' << row.bin.label() << ',' << row.num_rooms << ','
          << 100.0 * row.recall << ',' << 100.0 * row.precision << '\n';
      series[row.bin.label()].push_back({{"value", std::isfinite(c.value) ? json(c.value) : json(nullptr)},
                                         {"recall", row.recall},
                                         {"precision", row.precision},
                                         {"num_rooms", row.num_rooms}});
    }
  }
  fs::create_directories(base.output_dir);
  io::write_text(base.output_dir / "sweep.csv", csv.str());
  io::write_json(base.output_dir / "sweep.json", {{"axis", to_string(axis)}, {"seeds", seeds}, {"series", series}});
  return cells;
}

SolverConfig load_solver_config(const std::optional<fs::path>& path) {
  if (!path) return {};
  return io::solver_config_from_json(io::read_json(*path));
}

}  // namespace echograd::bench
