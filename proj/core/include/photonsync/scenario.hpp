#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "photonsync/clock_model.hpp"

namespace photonsync {

/// Full description of a simulated session. Rates in counts/s, times in
/// seconds. r_A, r_B and r_C are lossless (transmission 1) rates; Bob's arm
/// is attenuated by transmission_T, dark counts at Bob are not.
struct ScenarioConfig {
  double r_A = 271e3;
  double r_B = 283e3;
  double r_C = 10.3e3;
  double r_dark = 0.0;
  double transmission_T = 1.0;
  double sigma_det = 205e-12;  // RMS of the coincidence peak (both arms)
  double T_A = 0.1;
  double T_feed = 0.6;
  double duration = 300.0;
  ClockModel clock{};
  std::uint64_t seed = 1;

  /// Throws ConfigError / ClockModelError.
  void validate() const;

  /// Set one field from its key (see scenario_keys()). Throws ConfigError.
  void set(std::string_view key, std::string_view value);
};

struct ScenarioKey {
  std::string_view name;
  std::string_view unit;
  std::string_view help;
};

/// Every key accepted by the scenario file format, with units.
const std::vector<ScenarioKey>& scenario_keys();

/// Parses `key = value` lines; `#` starts a comment. Keys absent from the
/// text keep their default.
ScenarioConfig parse_scenario(std::istream& in, ScenarioConfig base = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);
void write_scenario(std::ostream& out, const ScenarioConfig& config);

/// Named presets: low-loss, high-loss, rubidium, leo-satellite, drone,
/// fig1c, fig3a, micro. Throws ConfigError for unknown names.
ScenarioConfig scenario_preset(std::string_view name);
std::vector<std::string> scenario_preset_names();

}  // namespace photonsync
