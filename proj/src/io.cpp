#include "echograd/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

namespace echograd::io {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

json vec3_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw FormatError(std::string(what) + " must be an array of 3 numbers");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

const json& require(const json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing key '") + key + "'");
  return j.at(key);
}

// NaN means "undefined" in reports and is stored as null.
json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw FormatError("truncated RIR file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

json qn_config_json(const QuasiNewtonConfig& c) {
  return {{"gradient_tolerance", c.gradient_tolerance},
          {"function_tolerance", c.function_tolerance},
          {"max_iterations", c.max_iterations},
          {"armijo", c.armijo},
          {"curvature", c.curvature},
          {"max_step_length", c.max_step_length},
          {"max_line_search_evaluations", c.max_line_search_evaluations},
          {"memory", c.memory}};
}

void check_keys(const json& j, const std::set<std::string>& allowed, const char* what) {
  if (!j.is_object()) throw FormatError(std::string(what) + " must be a JSON object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) throw FormatError(std::string("unknown key '") + item.key() + "' in " + what);
  }
}

QuasiNewtonConfig qn_config_from(const json& j, QuasiNewtonConfig c) {
  check_keys(j,
             {"gradient_tolerance", "function_tolerance", "max_iterations", "armijo", "curvature", "max_step_length",
              "max_line_search_evaluations", "memory"},
             "quasi-Newton config");
  c.gradient_tolerance = j.value("gradient_tolerance", c.gradient_tolerance);
  c.function_tolerance = j.value("function_tolerance", c.function_tolerance);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.armijo = j.value("armijo", c.armijo);
  c.curvature = j.value("curvature", c.curvature);
  c.max_step_length = j.value("max_step_length", c.max_step_length);
  c.max_line_search_evaluations = j.value("max_line_search_evaluations", c.max_line_search_evaluations);
  c.memory = j.value("memory", c.memory);
  return c;
}

}  // namespace

json scene_to_json(const RoomScene& scene, const PhysicalConstants& constants) {
  json mics = json::array();
  for (const auto& m : scene.array.positions()) mics.push_back(vec3_json(m));
  return {{"dimensions", vec3_json(scene.dimensions)},
          {"absorptions", scene.wall_absorptions},
          {"source", vec3_json(scene.source_position)},
          {"mic_positions", mics},
          {"array_center", vec3_json(scene.array_center)},
          {"fs_hz", scene.array.sample_rate_hz()},
          {"filter_cutoff_hz", scene.array.filter().cutoff_hz},
          {"c_mps", constants.speed_of_sound_mps}};
}

RoomScene scene_from_json(const json& j, PhysicalConstants* constants) {
  try {
    const json& abs = require(j, "absorptions");
    if (!abs.is_array() || abs.size() != 6) throw FormatError("absorptions must be an array of 6 numbers");
    std::array<double, 6> absorptions{};
    for (std::size_t i = 0; i < 6; ++i) absorptions[i] = abs.at(i).get<double>();
    std::vector<Vec3> mics;
    for (const auto& m : require(j, "mic_positions")) mics.push_back(vec3_from(m, "mic position"));
    const double fs = require(j, "fs_hz").get<double>();
    const double cutoff = j.value("filter_cutoff_hz", fs / 2.0);
    MicArray array(mics, fs, FilterSpec{FilterKind::IdealLowpass, cutoff});
    const Vec3 center = j.contains("array_center") ? vec3_from(j.at("array_center"), "array_center") : array.center();
    RoomScene scene{vec3_from(require(j, "dimensions"), "dimensions"), absorptions,
                    vec3_from(require(j, "source"), "source"), std::move(array), center};
    if (constants) constants->speed_of_sound_mps = require(j, "c_mps").get<double>();
    scene.validate();
    return scene;
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid scene: ") + e.what());
  }
}

json measure_to_json(const SparseMeasure& measure) {
  json out = json::array();
  for (const auto& s : measure.spikes()) out.push_back({{"a", s.amplitude}, {"r", vec3_json(s.position)}});
  return out;
}

SparseMeasure measure_from_json(const json& j) {
  if (!j.is_array()) throw FormatError("measure must be a JSON array");
  try {
    SparseMeasure out;
    for (const auto& item : j) out.add(require(item, "a").get<double>(), vec3_from(require(item, "r"), "r"));
    return out;
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid measure: ") + e.what());
  }
}

json solver_config_to_json(const SolverConfig& c) {
  return {{"lambda", c.lambda},
          {"alpha_min", c.alpha_min},
          {"prune_threshold", c.prune_threshold},
          {"grid_angular_spacing_deg", c.grid_angular_spacing_deg},
          {"grid_radial_offsets_m", c.grid_radial_offsets_m},
          {"num_peak_mics", c.num_peak_mics},
          {"moving_average_len", c.moving_average_len},
          {"schedule", c.schedule},
          {"max_spikes", c.max_spikes},
          {"max_iterations_per_stage", c.max_iterations_per_stage},
          {"sliding", c.sliding},
          {"grid_upsampling", c.grid_upsampling},
          {"grid_kernel_halfwidth", c.grid_kernel_halfwidth},
          {"grid_rescore", c.grid_rescore},
          {"spike_search", qn_config_json(c.spike_search)},
          {"sliding_search", qn_config_json(c.sliding_search)},
          {"lasso",
           {{"step_tolerance", c.lasso.step_tolerance},
            {"gap_tolerance", c.lasso.gap_tolerance},
            {"max_sweeps", c.lasso.max_sweeps}}}};
}

SolverConfig solver_config_from_json(const json& j) {
  SolverConfig c;
  try {
    check_keys(j,
               {"lambda", "alpha_min", "prune_threshold", "grid_angular_spacing_deg", "grid_radial_offsets_m",
                "num_peak_mics", "moving_average_len", "schedule", "max_spikes", "max_iterations_per_stage", "sliding",
                "grid_upsampling", "grid_kernel_halfwidth", "grid_rescore", "spike_search", "sliding_search", "lasso"},
               "solver config");
    c.lambda = j.value("lambda", c.lambda);
    c.alpha_min = j.value("alpha_min", c.alpha_min);
    c.prune_threshold = j.value("prune_threshold", c.prune_threshold);
    c.grid_angular_spacing_deg = j.value("grid_angular_spacing_deg", c.grid_angular_spacing_deg);
    c.grid_radial_offsets_m = j.value("grid_radial_offsets_m", c.grid_radial_offsets_m);
    c.num_peak_mics = j.value("num_peak_mics", c.num_peak_mics);
    c.moving_average_len = j.value("moving_average_len", c.moving_average_len);
    c.schedule = j.value("schedule", c.schedule);
    c.max_spikes = j.value("max_spikes", c.max_spikes);
    c.max_iterations_per_stage = j.value("max_iterations_per_stage", c.max_iterations_per_stage);
    c.sliding = j.value("sliding", c.sliding);
    c.grid_upsampling = j.value("grid_upsampling", c.grid_upsampling);
    c.grid_kernel_halfwidth = j.value("grid_kernel_halfwidth", c.grid_kernel_halfwidth);
    c.grid_rescore = j.value("grid_rescore", c.grid_rescore);
    if (j.contains("spike_search")) c.spike_search = qn_config_from(j.at("spike_search"), c.spike_search);
    if (j.contains("sliding_search")) c.sliding_search = qn_config_from(j.at("sliding_search"), c.sliding_search);
    if (j.contains("lasso")) {
      const json& l = j.at("lasso");
      check_keys(l, {"step_tolerance", "gap_tolerance", "max_sweeps"}, "lasso config");
      c.lasso.step_tolerance = l.value("step_tolerance", c.lasso.step_tolerance);
      c.lasso.gap_tolerance = l.value("gap_tolerance", c.lasso.gap_tolerance);
      c.lasso.max_sweeps = l.value("max_sweeps", c.lasso.max_sweeps);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid solver config: ") + e.what());
  }
  c.validate();
  return c;
}

json trace_to_json(const SolveTrace& trace, const SolverConfig& config) {
  json iterations = json::array();
  for (const auto& r : trace.iterations) {
    iterations.push_back({{"stage", r.stage},
                          {"cut_length", r.cut_length},
                          {"added", r.added},
                          {"position", vec3_json(r.position)},
                          {"grid_start", vec3_json(r.grid_start)},
                          {"amplitude", r.amplitude},
                          {"objective_before", r.objective_before},
                          {"objective_after", r.objective_after},
                          {"objective_after_prune", r.objective_after_prune},
                          {"residual_norm", r.residual_norm},
                          {"grid_size", r.grid_size},
                          {"num_spikes", r.num_spikes},
                          {"pruned", r.pruned},
                          {"lasso_sweeps", r.lasso_sweeps},
                          {"ascent_iterations", r.ascent_iterations},
                          {"ascent_status", r.ascent_status},
                          {"seconds", r.seconds}});
  }
  const auto& s = trace.sliding;
  return {{"schedule", trace.schedule},
          {"config", solver_config_to_json(config)},
          {"iterations", iterations},
          {"sliding",
           {{"performed", s.performed},
            {"spikes_before", s.spikes_before},
            {"spikes_after", s.spikes_after},
            {"objective_before", s.objective_before},
            {"objective_after", s.objective_after},
            {"iterations", s.iterations},
            {"evaluations", s.evaluations},
            {"status", s.status},
            {"seconds", s.seconds}}},
          {"seconds", trace.seconds}};
}

json report_to_json(const MatchReport& r) {
  json assignment = json::array();
  for (const auto& a : r.assignment) assignment.push_back(a ? json(*a) : json(nullptr));
  return {{"recall", r.recall},
          {"precision", r.precision},
          {"mean_radial_error_m", number_or_null(r.mean_radial_error_m)},
          {"mean_angular_error_deg", number_or_null(r.mean_angular_error_deg)},
          {"mean_euclidean_error_m", number_or_null(r.mean_euclidean_error_m)},
          {"mean_amplitude_error", number_or_null(r.mean_amplitude_error)},
          {"num_true", r.num_true},
          {"num_estimated", r.num_estimated},
          {"num_recovered", r.num_recovered},
          {"num_assigned", r.num_assigned},
          {"assignment", assignment}};
}

void write_rir(const std::filesystem::path& path, const Observation& obs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write("RIRF", 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(obs.num_mics()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(obs.num_samples()));
  put_le<std::uint32_t>(out, 0);
  const auto& x = obs.samples();
  for (Eigen::Index m = 0; m < x.rows(); ++m) {
    for (Eigen::Index n = 0; n < x.cols(); ++n) put_le<double>(out, x(m, n));
  }
  if (!out) throw Error("failed writing " + path.string());
}

Observation read_rir(const std::filesystem::path& path, double sample_rate_hz) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "RIRF", 4) != 0) throw FormatError(path.string() + ": bad magic");
  const auto m = get_le<std::uint32_t>(in);
  const auto n = get_le<std::uint32_t>(in);
  (void)get_le<std::uint32_t>(in);
  RowMatrix x(m, n);
  for (std::uint32_t i = 0; i < m; ++i) {
    for (std::uint32_t k = 0; k < n; ++k) x(i, k) = get_le<double>(in);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes");
  return {std::move(x), sample_rate_hz};
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace echograd::io
