#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cli.hpp"

namespace photonsync::cli {

struct SimulateArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string out_dir;
  std::string prefix = "session";
  std::string format = "binary";
  bool pairs = false;
};

struct ScanArgs {
  double skew_lo = -20e-6;
  double skew_hi = 20e-6;
  double skew_step = 0.14e-6;
  long long coarse_bin = 0;
  long long half_span = 10'000'000;
  double threshold = 10.0;
  double sigma_ps = 300.0;
  std::string seed_skew_file;
};

struct AcquireArgs {
  std::string alice, bob;
  std::size_t packages = 1;
  ScanArgs scan;
  std::string write_skew, histogram, scan_csv;
};

struct TuneArgs {
  std::string alice, bob;
  double offset_ps = 0.0;
  double skew = 0.0;
  std::size_t packages = 10;
  double fine_step = 1e-9;
  double fine_range = 0.0;
  long long window = 100'000;
  long long bin = 20;
  double sigma_ps = 300.0;
  std::string curve, write_skew;
};

struct TrackArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string report, summary;
  bool no_tracking = false;
  std::string skew_seed, write_skew;
};

struct AnalyzeArgs {
  double sigma_det = 205e-12;
  double du = 0.0;
  double T_A = 0.1;
  double r_A = 271e3, r_B = 283e3, r_C = 10.3e3, r_dark = 0.0;
  double transmission = 1.0;
  double T_meas = 0.6, T_feed = 0.6;
  double drift = 320e-12;
  double threshold = 10.0;
  std::string curve, out;
};

struct SweepArgs {
  std::string scenario;
  std::string axis;
  std::vector<double> grid;
  std::size_t reps = 1;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string out;
};

struct ServeArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string listen = "127.0.0.1:7700";
  std::string pacing = "max";
};

struct SyncArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string connect = "127.0.0.1:7700";
  std::string report, summary;
};

int cmd_simulate(const SimulateArgs& args);
int cmd_acquire(const AcquireArgs& args);
int cmd_tune(const TuneArgs& args);
int cmd_track(const TrackArgs& args);
int cmd_analyze(const AnalyzeArgs& args);
int cmd_sweep(const SweepArgs& args);
int cmd_serve(const ServeArgs& args);
int cmd_sync(const SyncArgs& args);

}  // namespace photonsync::cli
