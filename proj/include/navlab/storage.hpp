#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "navlab/gnn.hpp"
#include "navlab/labeling.hpp"
#include "navlab/mining.hpp"
#include "navlab/report.hpp"
#include "navlab/scenario.hpp"
#include "navlab/simulation.hpp"

namespace navlab {

struct StorageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : StorageError {
  using StorageError::StorageError;
};
struct TruncatedError : StorageError {
  using StorageError::StorageError;
};
struct ChecksumError : StorageError {
  using StorageError::StorageError;
};
struct VersionError : StorageError {
  using StorageError::StorageError;
};
struct ParseError : StorageError {
  using StorageError::StorageError;
};

constexpr std::uint32_t kFormatVersion = 1;

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

using json = nlohmann::json;

inline json parse_json(const std::string& text, const std::string& what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("invalid JSON in " + what);
  return j;
}

inline void check_header(const json& j, const char* format,
                         const std::string& what) {
  if (!j.is_object() || !j.contains("format") || !j.contains("version")) {
    throw ParseError(what + ": missing format header");
  }
  if (j["format"] != format) {
    throw ParseError(what + ": unexpected format '" +
                     j["format"].get<std::string>() + "'");
  }
  const auto version = j["version"].get<std::uint32_t>();
  if (version > kFormatVersion) {
    throw VersionError(what + ": version " + std::to_string(version) +
                       " exceeds supported " + std::to_string(kFormatVersion));
  }
}

inline json scenario_to_json(const Scenario& sc) {
  json jv = json::array();
  for (const VehicleTask& t : sc.vehicles) {
    jv.push_back({{"start", {t.start.x, t.start.y, t.start.theta, t.start.v}},
                  {"target", {t.target.x, t.target.y, t.target.theta}}});
  }
  json jo = json::array();
  for (const Obstacle& o : sc.obstacles) jo.push_back({o.x, o.y, o.r});
  return {{"bounds",
           {sc.bounds.x_min, sc.bounds.x_max, sc.bounds.y_min, sc.bounds.y_max}},
          {"vehicles", jv},
          {"obstacles", jo}};
}

inline Scenario scenario_from_json(const json& j) {
  try {
    Scenario sc;
    const auto& b = j.at("bounds");
    sc.bounds = {b.at(0), b.at(1), b.at(2), b.at(3)};
    for (const auto& v : j.at("vehicles")) {
      VehicleTask t;
      const auto& s = v.at("start");
      t.start = {s.at(0), s.at(1), s.at(2), s.at(3)};
      const auto& g = v.at("target");
      t.target = {g.at(0), g.at(1), g.at(2)};
      sc.vehicles.push_back(t);
    }
    for (const auto& o : j.at("obstacles")) {
      sc.obstacles.push_back({o.at(0), o.at(1), o.at(2)});
    }
    return sc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------- scenarios

inline void save_scenarios(const std::filesystem::path& path,
                           const std::vector<Scenario>& scenarios,
                           std::uint64_t seed = 0) {
  detail::json j;
  j["format"] = "navlab-scenarios";
  j["version"] = kFormatVersion;
  j["seed"] = seed;
  j["scenarios"] = detail::json::array();
  for (const Scenario& sc : scenarios) {
    j["scenarios"].push_back(detail::scenario_to_json(sc));
  }
  write_file_atomic(path, j.dump(1) + "\n");
}

inline std::vector<Scenario> load_scenarios(const std::filesystem::path& path) {
  const detail::json j = detail::parse_json(read_file(path), path.string());
  detail::check_header(j, "navlab-scenarios", path.string());
  std::vector<Scenario> out;
  try {
    for (const auto& s : j.at("scenarios")) {
      out.push_back(detail::scenario_from_json(s));
    }
  } catch (const detail::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return out;
}

// ----------------------------------------------------------- trajectory logs

namespace detail {

inline json log_to_json(const TrajectoryLog& log) {
  json js = json::array();
  for (const StateRow& row : log.states) {
    json jr = json::array();
    for (const VehicleState& s : row) jr.push_back({s.x, s.y, s.theta, s.v});
    js.push_back(std::move(jr));
  }
  json jc = json::array();
  for (const ControlRow& row : log.controls) {
    json jr = json::array();
    for (const Control& u : row) jr.push_back({u.pedal, u.steering});
    jc.push_back(std::move(jr));
  }
  json je = json::array();
  for (const CollisionEvent& ev : log.events) {
    je.push_back({{"t", ev.timestep},
                  {"kind", static_cast<int>(ev.kind)},
                  {"a", ev.a},
                  {"b", ev.b}});
  }
  json jr = json::array();
  for (std::uint8_t r : log.reached) jr.push_back(static_cast<int>(r));
  return {{"states", js},
          {"controls", jc},
          {"events", je},
          {"reached", jr},
          {"distance", log.distance_traveled}};
}

inline TrajectoryLog log_from_json(const json& j) {
  try {
    TrajectoryLog log;
    for (const auto& row : j.at("states")) {
      StateRow r;
      for (const auto& s : row) r.push_back({s.at(0), s.at(1), s.at(2), s.at(3)});
      log.states.push_back(std::move(r));
    }
    for (const auto& row : j.at("controls")) {
      ControlRow r;
      for (const auto& u : row) r.push_back({u.at(0), u.at(1)});
      log.controls.push_back(std::move(r));
    }
    for (const auto& e : j.at("events")) {
      log.events.push_back({e.at("t").get<int>(),
                            static_cast<CollisionEvent::Kind>(e.at("kind").get<int>()),
                            e.at("a").get<int>(), e.at("b").get<int>()});
    }
    for (const auto& r : j.at("reached")) {
      log.reached.push_back(static_cast<std::uint8_t>(r.get<int>()));
    }
    log.distance_traveled = j.at("distance");
    return log;
  } catch (const json::exception& e) {
    throw ParseError(std::string("trajectory log: ") + e.what());
  }
}

}  // namespace detail

inline void save_trajectory_logs(const std::filesystem::path& path,
                                 const std::vector<TrajectoryLog>& logs) {
  detail::json j;
  j["format"] = "navlab-trajectories";
  j["version"] = kFormatVersion;
  j["logs"] = detail::json::array();
  for (const TrajectoryLog& log : logs) j["logs"].push_back(detail::log_to_json(log));
  write_file_atomic(path, j.dump() + "\n");
}

inline std::vector<TrajectoryLog> load_trajectory_logs(
    const std::filesystem::path& path) {
  const detail::json j = detail::parse_json(read_file(path), path.string());
  detail::check_header(j, "navlab-trajectories", path.string());
  std::vector<TrajectoryLog> out;
  try {
    for (const auto& l : j.at("logs")) out.push_back(detail::log_from_json(l));
  } catch (const detail::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return out;
}

// ------------------------------------------------------------------ datasets

// Line-delimited: one JSON header line, then one JSON record per sample.
inline void save_dataset(const std::filesystem::path& path, const Dataset& ds,
                         const std::string& warm_source = "") {
  std::string text;
  {
    detail::json h;
    h["format"] = "navlab-dataset";
    h["version"] = kFormatVersion;
    h["config_hash"] = ds.config_hash;
    h["seed"] = ds.seed;
    h["samples"] = ds.samples.size();
    h["trajectories"] = ds.trajectories;
    h["tainted_trajectories"] = ds.tainted_trajectories;
    h["warm_source"] = warm_source;
    text += h.dump() + "\n";
  }
  for (const LabeledSample& s : ds.samples) {
    detail::json j;
    detail::json js = detail::json::array();
    for (const VehicleState& st : s.snapshot.states) {
      js.push_back({st.x, st.y, st.theta, st.v});
    }
    detail::json jt = detail::json::array();
    for (const TargetPose& t : s.snapshot.targets) {
      jt.push_back({t.x, t.y, t.theta});
    }
    detail::json jo = detail::json::array();
    for (const Obstacle& o : s.snapshot.obstacles) jo.push_back({o.x, o.y, o.r});
    detail::json jl = detail::json::array();
    for (const Control& u : s.labels) jl.push_back({u.pedal, u.steering});
    j["states"] = std::move(js);
    j["targets"] = std::move(jt);
    j["obstacles"] = std::move(jo);
    j["labels"] = std::move(jl);
    text += j.dump() + "\n";
  }
  write_file_atomic(path, text);
}

inline Dataset load_dataset(const std::filesystem::path& path,
                            std::string* warm_source = nullptr) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw TruncatedError(path.string() + ": empty file");
  const detail::json h = detail::parse_json(line, path.string() + " header");
  detail::check_header(h, "navlab-dataset", path.string());

  Dataset ds;
  try {
    ds.config_hash = h.value("config_hash", "");
    ds.seed = h.value("seed", 0ULL);
    ds.trajectories = h.value("trajectories", 0);
    ds.tainted_trajectories = h.value("tainted_trajectories", 0);
    if (warm_source) *warm_source = h.value("warm_source", "");
    const std::size_t expected = h.at("samples").get<std::size_t>();

    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const detail::json j = detail::parse_json(line, path.string() + " record");
      LabeledSample s;
      for (const auto& st : j.at("states")) {
        s.snapshot.states.push_back({st.at(0), st.at(1), st.at(2), st.at(3)});
      }
      for (const auto& t : j.at("targets")) {
        s.snapshot.targets.push_back({t.at(0), t.at(1), t.at(2)});
      }
      for (const auto& o : j.at("obstacles")) {
        s.snapshot.obstacles.push_back({o.at(0), o.at(1), o.at(2)});
      }
      for (const auto& u : j.at("labels")) {
        s.labels.push_back({u.at(0), u.at(1)});
      }
      ds.samples.push_back(std::move(s));
    }
    if (ds.samples.size() != expected) {
      throw TruncatedError(path.string() + ": header declares " +
                           std::to_string(expected) + " samples, found " +
                           std::to_string(ds.samples.size()));
    }
  } catch (const detail::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return ds;
}

// ------------------------------------------------------------ weight archive

namespace detail {

inline void put_u16(std::string& s, std::uint16_t v) {
  char b[2];
  std::memcpy(b, &v, 2);
  s.append(b, 2);
}
inline void put_u32(std::string& s, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  s.append(b, 4);
}
inline void put_u64(std::string& s, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  s.append(b, 8);
}
inline void put_f64(std::string& s, double v) {
  char b[8];
  std::memcpy(b, &v, 8);
  s.append(b, 8);
}

class ByteReader {
 public:
  ByteReader(const std::string& buf, std::string what)
      : buf_(buf), what_(std::move(what)) {}

  template <typename T>
  T get() {
    T v;
    if (pos_ + sizeof(T) > buf_.size()) {
      throw TruncatedError(what_ + ": unexpected end of file");
    }
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_bytes(std::size_t n) {
    if (pos_ + n > buf_.size()) {
      throw TruncatedError(what_ + ": unexpected end of file");
    }
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::string& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Binary layout, little-endian: magic "NLWA", u32 version, hyperparameters,
// u32 tensor count, then per tensor (u16 name length, name, u32 ndim,
// u64 dims..., f64 data...), and a trailing u64 FNV-1a checksum over every
// preceding byte.
inline void save_model(const std::filesystem::path& path, const GnnModel& model) {
  std::string buf;
  buf.append("NLWA", 4);
  detail::put_u32(buf, kFormatVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(model.config.layers));
  detail::put_u32(buf, static_cast<std::uint32_t>(model.config.hidden));
  detail::put_u32(buf, 0);  // activation id: tanh
  buf.push_back(model.config.recenter ? 1 : 0);
  detail::put_f64(buf, model.config.pos_scale);
  detail::put_f64(buf, model.config.steer_limit);
  detail::put_f64(buf, model.config.pedal_limit);
  const auto& layout = model.tensor_layout();
  detail::put_u32(buf, static_cast<std::uint32_t>(layout.size()));
  for (const auto& t : layout) {
    detail::put_u16(buf, static_cast<std::uint16_t>(t.name.size()));
    buf += t.name;
    if (t.cols == 0) {
      detail::put_u32(buf, 1);
      detail::put_u64(buf, t.rows);
    } else {
      detail::put_u32(buf, 2);
      detail::put_u64(buf, t.rows);
      detail::put_u64(buf, t.cols);
    }
    for (std::size_t k = 0; k < t.count(); ++k) {
      detail::put_f64(buf, model.params[t.offset + k]);
    }
  }
  detail::put_u64(buf, fnv1a64(buf.data(), buf.size()));
  write_file_atomic(path, buf);
}

inline GnnModel load_model(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  const std::string what = path.string();
  if (buf.size() < 12) throw TruncatedError(what + ": file too short");
  std::uint64_t stored;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  if (fnv1a64(buf.data(), buf.size() - 8) != stored) {
    throw ChecksumError(what + ": checksum mismatch");
  }

  detail::ByteReader r(buf, what);
  if (r.get_bytes(4) != "NLWA") throw ParseError(what + ": bad magic");
  const auto version = r.get<std::uint32_t>();
  if (version > kFormatVersion) {
    throw VersionError(what + ": version " + std::to_string(version) +
                       " exceeds supported " + std::to_string(kFormatVersion));
  }

  GnnModel model;
  model.config.layers = static_cast<int>(r.get<std::uint32_t>());
  model.config.hidden = static_cast<int>(r.get<std::uint32_t>());
  const auto activation = r.get<std::uint32_t>();
  if (activation != 0) {
    throw ParseError(what + ": unknown activation id " + std::to_string(activation));
  }
  model.config.recenter = r.get<char>() != 0;
  model.config.pos_scale = r.get<double>();
  model.config.steer_limit = r.get<double>();
  model.config.pedal_limit = r.get<double>();
  model.rebuild_layout();
  model.params.assign(model.parameter_count(), 0.0);

  const auto n_tensors = r.get<std::uint32_t>();
  const auto& layout = model.tensor_layout();
  if (n_tensors != layout.size()) {
    throw ParseError(what + ": tensor count " + std::to_string(n_tensors) +
                     " does not match architecture");
  }
  for (const auto& expect : layout) {
    const auto name_len = r.get<std::uint16_t>();
    const std::string name = r.get_bytes(name_len);
    if (name != expect.name) {
      throw ParseError(what + ": tensor '" + name + "', expected '" +
                       expect.name + "'");
    }
    const auto ndim = r.get<std::uint32_t>();
    std::size_t count = 1;
    for (std::uint32_t k = 0; k < ndim; ++k) {
      count *= static_cast<std::size_t>(r.get<std::uint64_t>());
    }
    if (count != expect.count()) {
      throw ParseError(what + ": tensor '" + name + "' has " +
                       std::to_string(count) + " elements, expected " +
                       std::to_string(expect.count()));
    }
    for (std::size_t k = 0; k < count; ++k) {
      model.params[expect.offset + k] = r.get<double>();
    }
  }
  if (r.pos() != buf.size() - 8) {
    throw ParseError(what + ": trailing bytes after tensor data");
  }
  return model;
}

// --------------------------------------------------------- ranking manifests

struct RankingManifest {
  struct Entry {
    int id = 0;
    std::size_t events = 0;
    double distance = 0.0;
  };
  std::vector<Entry> entries;  // ranking order, hardest first
  std::vector<Scenario> pool;  // original pool order, indexed by entry id
  std::uint64_t seed = 0;
};

inline void save_ranking(const std::filesystem::path& path,
                         const std::vector<ScoredScenario>& ranked,
                         const std::vector<Scenario>& pool,
                         std::uint64_t seed = 0) {
  detail::json j;
  j["format"] = "navlab-ranking";
  j["version"] = kFormatVersion;
  j["seed"] = seed;
  j["entries"] = detail::json::array();
  for (const ScoredScenario& s : ranked) {
    j["entries"].push_back({{"id", s.id},
                            {"events", s.log.events.size()},
                            {"distance", s.log.distance_traveled}});
  }
  j["pool"] = detail::json::array();
  for (const Scenario& sc : pool) j["pool"].push_back(detail::scenario_to_json(sc));
  write_file_atomic(path, j.dump(1) + "\n");
}

inline RankingManifest load_ranking(const std::filesystem::path& path) {
  const detail::json j = detail::parse_json(read_file(path), path.string());
  detail::check_header(j, "navlab-ranking", path.string());
  RankingManifest m;
  try {
    m.seed = j.value("seed", 0ULL);
    for (const auto& e : j.at("entries")) {
      m.entries.push_back({e.at("id").get<int>(),
                           e.at("events").get<std::size_t>(),
                           e.at("distance").get<double>()});
    }
    for (const auto& s : j.at("pool")) {
      m.pool.push_back(detail::scenario_from_json(s));
    }
  } catch (const detail::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  for (const auto& e : m.entries) {
    if (e.id < 0 || e.id >= static_cast<int>(m.pool.size())) {
      throw ParseError(path.string() + ": entry id out of range");
    }
  }
  return m;
}

inline double manifest_difficulty(const RankingManifest::Entry& e) {
  if (e.distance <= 0.0) {
    return e.events == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return static_cast<double>(e.events) / e.distance;
}

// --------------------------------------------------------------- misc hashes

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string hash_labeling_config(const LabelingConfig& cfg) {
  std::string s;
  auto add = [&s](double v) { s += format_double(v) + ","; };
  add(cfg.solver.kin.dt);
  add(cfg.solver.kin.beta_decay);
  add(cfg.solver.kin.gamma_steer);
  add(cfg.solver.kin.phi_max);
  add(cfg.solver.kin.pedal_max);
  add(cfg.solver.weights.w_pos);
  add(cfg.solver.weights.w_orient);
  add(cfg.solver.weights.w_col_veh);
  add(cfg.solver.weights.w_col_obs);
  add(cfg.solver.weights.w_vel);
  add(cfg.solver.margins.r_mar_veh);
  add(cfg.solver.margins.r_mar_obs);
  add(cfg.solver.margins.v_mar);
  add(cfg.solver.opt.g_tol);
  add(cfg.solver.opt.f_tol);
  add(cfg.solver.opt.max_iter);
  add(cfg.solver.horizon);
  add(cfg.sim.max_steps);
  add(cfg.taint_threshold);
  return hash_hex(fnv1a64(s.data(), s.size()));
}

}  // namespace navlab
