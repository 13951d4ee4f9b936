#include "wins/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wins {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_number_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    out.push_back(std::stod(trim(tok)));
  }
  return out;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text,
                                            const std::string& origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                 ": unterminated section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      cfg.data_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                               ": empty key");
    }
    cfg.data_[section].insert({key, {value, lineno}});
  }
  return cfg;
}

void KeyValueConfig::fail(const std::string& section, const std::string& key,
                          const std::string& what) const {
  throw std::runtime_error(origin_ + ": [" + section + "] " + key + ": " +
                           what);
}

bool KeyValueConfig::has(const std::string& section,
                         const std::string& key) const {
  const auto it = data_.find(section);
  return it != data_.end() && it->second.count(key) > 0;
}

std::string KeyValueConfig::get_string(
    const std::string& section, const std::string& key,
    std::optional<std::string> fallback) const {
  const auto it = data_.find(section);
  if (it != data_.end()) {
    const auto kit = it->second.find(key);
    if (kit != it->second.end()) return kit->second.value;
  }
  if (fallback) return *fallback;
  fail(section, key, "missing required key");
}

double KeyValueConfig::get_double(const std::string& section,
                                  const std::string& key,
                                  std::optional<double> fallback) const {
  if (!has(section, key)) {
    if (fallback) return *fallback;
    fail(section, key, "missing required key");
  }
  const auto it = data_.find(section)->second.find(key);
  try {
    return std::stod(it->second.value);
  } catch (const std::exception&) {
    throw std::runtime_error(origin_ + ":" + std::to_string(it->second.line) +
                             ": '" + it->second.value + "' is not a number");
  }
}

long KeyValueConfig::get_long(const std::string& section,
                              const std::string& key,
                              std::optional<long> fallback) const {
  if (!has(section, key)) {
    if (fallback) return *fallback;
    fail(section, key, "missing required key");
  }
  const auto it = data_.find(section)->second.find(key);
  try {
    return std::stol(it->second.value);
  } catch (const std::exception&) {
    throw std::runtime_error(origin_ + ":" + std::to_string(it->second.line) +
                             ": '" + it->second.value + "' is not an integer");
  }
}

bool KeyValueConfig::get_bool(const std::string& section,
                              const std::string& key,
                              std::optional<bool> fallback) const {
  if (!has(section, key)) {
    if (fallback) return *fallback;
    fail(section, key, "missing required key");
  }
  const auto it = data_.find(section)->second.find(key);
  std::string v = it->second.value;
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::runtime_error(origin_ + ":" + std::to_string(it->second.line) +
                           ": '" + it->second.value + "' is not a boolean");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& section,
                                                const std::string& key) const {
  if (!has(section, key)) fail(section, key, "missing required key");
  const auto it = data_.find(section)->second.find(key);
  try {
    return parse_number_list(it->second.value);
  } catch (const std::exception&) {
    throw std::runtime_error(origin_ + ":" + std::to_string(it->second.line) +
                             ": malformed number list");
  }
}

std::vector<std::string> KeyValueConfig::get_all(const std::string& section,
                                                 const std::string& key) const {
  std::vector<std::string> out;
  const auto it = data_.find(section);
  if (it == data_.end()) return out;
  const auto range = it->second.equal_range(key);
  for (auto kit = range.first; kit != range.second; ++kit) {
    out.push_back(kit->second.value);
  }
  return out;
}

std::vector<std::string> KeyValueConfig::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : data_) out.push_back(name);
  return out;
}

namespace {

TrajectoryShape parse_shape(const std::string& s) {
  if (s == "circle") return TrajectoryShape::kCircle;
  if (s == "line") return TrajectoryShape::kLine;
  if (s == "spline") return TrajectoryShape::kSpline;
  throw std::runtime_error("unsupported trajectory shape: " + s);
}

YawMode parse_yaw_mode(const std::string& s) {
  if (s == "fixed") return YawMode::kFixed;
  if (s == "tangent") return YawMode::kTangent;
  if (s == "spin") return YawMode::kSpin;
  if (s == "oscillate") return YawMode::kOscillate;
  throw std::runtime_error("unsupported yaw mode: " + s);
}

AttitudeMode parse_attitude_mode(const std::string& s) {
  if (s == "level") return AttitudeMode::kLevel;
  if (s == "banked") return AttitudeMode::kThrustAligned;
  throw std::runtime_error("unsupported attitude mode: " + s);
}

Vec3 vec3_of(const std::vector<double>& v, const std::string& what) {
  if (v.size() != 3) throw std::runtime_error(what + ": expected 3 numbers");
  return Vec3(v[0], v[1], v[2]);
}

}  // namespace

ExperimentConfig experiment_config_from(const KeyValueConfig& kv) {
  ExperimentConfig out;
  auto& sc = out.scenario;
  auto& tr = sc.trajectory;

  tr.shape = parse_shape(kv.get_string("trajectory", "shape", "circle"));
  tr.radius_m = kv.get_double("trajectory", "radius", 2.0);
  tr.angular_rate = kv.get_double("trajectory", "angular_rate", 0.3);
  tr.height_m = kv.get_double("trajectory", "height", 1.5);
  tr.duration_s = kv.get_double("trajectory", "duration", 60.0);
  tr.yaw_mode = parse_yaw_mode(kv.get_string("trajectory", "yaw_mode",
                                             "tangent"));
  tr.yaw0_rad = kv.get_double("trajectory", "yaw0", 0.0);
  tr.yaw_amplitude_rad = kv.get_double("trajectory", "yaw_amplitude", 0.7);
  tr.yaw_period_s = kv.get_double("trajectory", "yaw_period", 10.0);
  tr.attitude_mode = parse_attitude_mode(
      kv.get_string("trajectory", "attitude", "banked"));
  tr.line_speed = kv.get_double("trajectory", "line_speed", 0.0);
  tr.line_heading = kv.get_double("trajectory", "line_heading", 0.0);
  for (const auto& w : kv.get_all("trajectory", "waypoint")) {
    const auto v = parse_number_list(w);
    if (v.size() != 4) {
      throw std::runtime_error("waypoint: expected 't, x, y, z'");
    }
    tr.waypoints.push_back({v[0], Vec3(v[1], v[2], v[3])});
  }

  auto& nz = sc.noise;
  nz.accel_std = kv.get_double("noise", "accel_std", 0.01);
  nz.gyro_std = kv.get_double("noise", "gyro_std", 0.01);
  if (kv.has("noise", "gyro_bias")) {
    nz.gyro_bias = vec3_of(kv.get_doubles("noise", "gyro_bias"), "gyro_bias");
  }
  nz.gyro_bias_drift = kv.get_double("noise", "gyro_bias_drift", 0.0);
  nz.aoa_std_deg = kv.get_double("noise", "aoa_std_deg", 1.0);
  nz.csi_snr_db = kv.get_double("noise", "csi_snr_db", 25.0);
  nz.coherence_phase_std = kv.get_double("noise", "coherence_phase_std", 0.0);
  nz.seed = static_cast<uint64_t>(kv.get_long("noise", "seed", 1));

  auto& ar = sc.array;
  ar.antennas = static_cast<int>(kv.get_long("array", "antennas", 3));
  ar.subcarriers = static_cast<int>(kv.get_long("array", "subcarriers", 30));
  ar.carrier_hz = kv.get_double("array", "carrier_hz", 5.32e9);
  ar.subcarrier_spacing_hz =
      kv.get_double("array", "subcarrier_spacing_hz", 312.5e3);
  ar.spacing_m = kv.get_double("array", "spacing", 0.0);

  auto& mp = sc.multipath;
  for (const auto& r : kv.get_all("multipath", "reflector")) {
    const auto v = parse_number_list(r);
    if (v.size() != 3) {
      throw std::runtime_error(
          "reflector: expected 'amplitude, excess_delay_ns, aoa_offset_deg'");
    }
    mp.reflectors.push_back({v[0], v[1], v[2]});
  }
  mp.direct_attenuation_db =
      kv.get_double("multipath", "direct_attenuation_db", 0.0);

  if (kv.has("ap", "position")) {
    sc.ap_position = vec3_of(kv.get_doubles("ap", "position"), "ap position");
  }
  sc.imu_rate_hz = kv.get_double("rates", "imu_hz", 200.0);
  sc.csi_rate_hz = kv.get_double("rates", "csi_hz", 50.0);

  out.pipeline = kv.get_string("run", "pipeline", "fusion");
  out.window_frames = static_cast<int>(kv.get_long("run", "window", 30));
  out.frame_decimation =
      static_cast<int>(kv.get_long("run", "frame_decimation", 10));
  out.window_halfwidth_deg = kv.get_double("run", "theta_window_deg", 20.0);
  out.theta_step_deg = kv.get_double("run", "theta_step_deg", 1.0);
  out.tau_step_ns = kv.get_double("run", "tau_step_ns", 1.0);
  out.n_paths = static_cast<int>(kv.get_long("run", "n_paths", -1));
  out.lambda_init_m = kv.get_double("run", "lambda_init", 1.0);
  out.planar = kv.get_bool("run", "planar", true);
  out.paoa_sigma_deg = kv.get_double("run", "paoa_sigma_deg", 3.0);
  out.aoa_rate_hz = kv.get_double("run", "aoa_rate_hz", 20.0);
  out.duration_s = kv.get_double("run", "duration", 0.0);
  out.seeds = static_cast<int>(kv.get_long("run", "seeds", 1));

  for (const auto& name :
       {"rmse_max_m", "ap_error_max_m", "yaw_drift_max_deg",
        "paoa_error_max_deg", "speedup_min"}) {
    if (kv.has("thresholds", name)) {
      out.thresholds[name] = kv.get_double("thresholds", name);
    }
  }
  return out;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from(KeyValueConfig::parse_file(path));
}

uint64_t effective_seed(uint64_t configured) {
  if (const char* env = std::getenv("WINS_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return configured;
}

}  // namespace wins
