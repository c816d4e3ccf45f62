#include "photonsync/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "photonsync/errors.hpp"

namespace photonsync {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out)) {
    throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(v) + "'");
  }
  return out;
}

}  // namespace

const std::vector<ScenarioKey>& scenario_keys() {
  static const std::vector<ScenarioKey> keys = {
      {"r_A", "counts/s", "singles rate at Alice (lossless)"},
      {"r_B", "counts/s", "singles rate at Bob excluding dark counts (lossless)"},
      {"r_C", "counts/s", "true coincidence rate (lossless)"},
      {"r_dark", "counts/s", "dark/background counts at Bob, unaffected by loss"},
      {"transmission_T", "1", "transmission Alice->Bob, 0 < T <= 1"},
      {"sigma_det", "s", "RMS timing jitter of the coincidence peak"},
      {"T_A", "s", "package (acquisition) duration"},
      {"T_feed", "s", "feedback loop period, a multiple of T_A"},
      {"duration", "s", "session length"},
      {"seed", "1", "random seed"},
      {"clock.offset_t0", "s", "initial Bob-minus-Alice clock offset"},
      {"clock.skew_u", "s/s", "initial clock skew"},
      {"clock.drift_a", "s/s^2", "constant clock drift"},
      {"clock.rw_sigma", "s/s/sqrt(s)", "random-walk intensity of the skew"},
  };
  return keys;
}

void ScenarioConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "seed") {
    std::uint64_t s = 0;
    const auto* end = value.data() + value.size();
    auto [p, ec] = std::from_chars(value.data(), end, s);
    if (ec != std::errc() || p != end) throw ConfigError("bad seed '" + std::string(value) + "'");
    seed = s;
    return;
  }
  const double v = to_double(key, value);
  if (key == "r_A") r_A = v;
  else if (key == "r_B") r_B = v;
  else if (key == "r_C") r_C = v;
  else if (key == "r_dark") r_dark = v;
  else if (key == "transmission_T") transmission_T = v;
  else if (key == "sigma_det") sigma_det = v;
  else if (key == "T_A") T_A = v;
  else if (key == "T_feed") T_feed = v;
  else if (key == "duration") duration = v;
  else if (key == "clock.offset_t0") clock.offset_t0 = v;
  else if (key == "clock.skew_u") clock.skew_u = v;
  else if (key == "clock.drift_a") clock.drift_a = v;
  else if (key == "clock.rw_sigma") clock.rw_sigma = v;
  else throw ConfigError("unknown scenario key '" + std::string(key) + "'");
}

void ScenarioConfig::validate() const {
  for (double r : {r_A, r_B, r_C, r_dark}) {
    if (!(r >= 0)) throw ConfigError("rates must be non-negative");
  }
  if (r_C > std::min(r_A, r_B)) throw ConfigError("r_C must not exceed min(r_A, r_B)");
  if (!(transmission_T > 0 && transmission_T <= 1)) throw ConfigError("transmission_T must be in (0, 1]");
  if (!(sigma_det >= 0)) throw ConfigError("sigma_det must be >= 0");
  if (!(T_A > 0)) throw ConfigError("T_A must be positive");
  if (!(duration >= T_A)) throw ConfigError("duration must cover at least one package");
  const double ratio = T_feed / T_A;
  if (!(ratio >= 1) || std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw ConfigError("T_feed must be a positive multiple of T_A");
  }
  clock.validate(duration);
}

ScenarioConfig parse_scenario(std::istream& in, ScenarioConfig base) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    view = trim(view.substr(0, view.find('#')));
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    base.set(trim(view.substr(0, eq)), view.substr(eq + 1));
  }
  return base;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open scenario " + path.string());
  return parse_scenario(in);
}

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_scenario(std::ostream& out, const ScenarioConfig& c) {
  const std::vector<std::string> values = {
      shortest(c.r_A),         shortest(c.r_B),          shortest(c.r_C),
      shortest(c.r_dark),      shortest(c.transmission_T), shortest(c.sigma_det),
      shortest(c.T_A),         shortest(c.T_feed),       shortest(c.duration),
      std::to_string(c.seed),  shortest(c.clock.offset_t0), shortest(c.clock.skew_u),
      shortest(c.clock.drift_a), shortest(c.clock.rw_sigma)};
  const auto& keys = scenario_keys();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    std::string lhs = std::string(keys[i].name) + " = " + values[i];
    lhs.resize(std::max<std::size_t>(lhs.size() + 1, 32), ' ');
    out << lhs << "# " << keys[i].unit << '\n';
  }
}

std::vector<std::string> scenario_preset_names() {
  return {"low-loss", "high-loss", "rubidium", "leo-satellite", "drone", "fig1c", "fig3a", "micro"};
}

ScenarioConfig scenario_preset(std::string_view name) {
  ScenarioConfig c;
  // Crystal oscillators: strong initial skew, skew wander driven by a
  // random walk whose 1 s increments have RMS 320 ps/s^2.
  c.clock = ClockModel{3.2e-6, 18.5e-6, 0.0, 320e-12};
  if (name == "low-loss") return c;
  if (name == "high-loss") {
    c.r_A = 189e3;
    c.r_B = 10e3;
    c.r_C = 360;
    return c;
  }
  if (name == "rubidium") {
    c.clock = ClockModel{3.2e-6, 150e-12, 0.0, 1e-12};
    return c;
  }
  if (name == "leo-satellite") {
    c.r_A = 100e3;
    c.r_B = 20e3;
    c.r_C = 5;
    c.duration = 360;
    c.clock = ClockModel{3.2e-6, 0.0, 55e-9, 0.0};
    return c;
  }
  if (name == "drone") {
    c.duration = 10;
    c.clock = ClockModel{3.2e-6, 100e-9, 228e-9, 0.0};
    return c;
  }
  if (name == "fig1c") {
    c.r_A = 200e3;
    c.r_B = 800e3;
    c.r_C = 14e3;
    c.sigma_det = 300e-12;
    c.duration = 1.0;
    return c;
  }
  if (name == "fig3a") {
    c.r_A = 150e3;
    c.r_B = 30e3;
    c.r_C = 1200;
    c.sigma_det = 300e-12;
    c.duration = 60;
    c.clock = ClockModel{3.2e-6, 18.5e-6, 320e-12, 0.0};
    return c;
  }
  if (name == "micro") {
    c.r_A = 40e3;
    c.r_B = 40e3;
    c.r_C = 4e3;
    c.duration = 4.0;
    c.clock = ClockModel{3.2e-6, 2.5e-6, 0.0, 0.0};
    return c;
  }
  throw ConfigError("unknown scenario preset '" + std::string(name) + "'");
}

}  // namespace photonsync
