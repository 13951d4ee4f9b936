#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wins/simulator.hpp"

namespace wins {

/// Sectioned key-value text format: "[section]" headers, "key = value"
/// lines, '#' comments, repeatable keys. Errors carry the line number.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text,
                                     const std::string& origin = "<string>");

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         std::optional<std::string> fallback = {}) const;
  double get_double(const std::string& section, const std::string& key,
                    std::optional<double> fallback = {}) const;
  long get_long(const std::string& section, const std::string& key,
                std::optional<long> fallback = {}) const;
  bool get_bool(const std::string& section, const std::string& key,
                std::optional<bool> fallback = {}) const;
  std::vector<double> get_doubles(const std::string& section,
                                  const std::string& key) const;
  /// All values of a repeatable key, in file order.
  std::vector<std::string> get_all(const std::string& section,
                                   const std::string& key) const;
  std::vector<std::string> sections() const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  [[noreturn]] void fail(const std::string& section, const std::string& key,
                         const std::string& what) const;
  std::string origin_;
  std::map<std::string, std::multimap<std::string, Entry>> data_;
};

/// The full scenario description plus run parameters used by the pipelines.
struct ExperimentConfig {
  ScenarioConfig scenario;
  std::string pipeline = "fusion";
  int window_frames = 30;
  int frame_decimation = 10;  // fusion frames = every Nth PAoA
  double window_halfwidth_deg = 20.0;
  double theta_step_deg = 1.0;
  double tau_step_ns = 1.0;
  int n_paths = -1;  // -1: one per modeled propagation path
  double lambda_init_m = 1.0;
  bool planar = true;
  double paoa_sigma_deg = 3.0;  // geometric PAoA synthesis noise
  double aoa_rate_hz = 20.0;    // ekf pipeline update rate
  double duration_s = 0.0;      // 0: trajectory duration
  int seeds = 1;
  std::map<std::string, double> thresholds;
};

ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig experiment_config_from(const KeyValueConfig& kv);

/// WINS_SEED environment variable overrides the configured seed.
uint64_t effective_seed(uint64_t configured);

}  // namespace wins
