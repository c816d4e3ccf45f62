#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "photonsync/acquisition.hpp"
#include "photonsync/scenario.hpp"
#include "photonsync/session_generator.hpp"
#include "photonsync/tracker.hpp"

namespace photonsync {

struct SessionOptions {
  ScanConfig scan;
  TrackerConfig tracker;
  /// When false the mapping stays frozen after fine tuning; the tracker
  /// still runs so lock status is reported.
  bool tracking = true;
};

/// Options matched to a scenario: feedback period from T_feed and expected
/// widths from sigma_det.
SessionOptions default_options(const ScenarioConfig& config);

/// One row per package. Jitters in ps, NaN where undefined.
struct PackageReport {
  std::uint64_t index = 0;
  double t_s = 0.0;
  double total_jitter_ps = 0.0;
  double sync_jitter_ps = 0.0;
  double skew_est = 0.0;
  double offset_est_ps = 0.0;
  double significance = 0.0;
  SyncStatus status = SyncStatus::Acquiring;
  double total_jitter_frozen_ps = 0.0;
  double sync_jitter_frozen_ps = 0.0;
  double reference_jitter_ps = 0.0;
  double offset_error_ps = 0.0;
  std::size_t pairs = 0;
};

struct SessionSummary {
  bool acquired = false;
  bool fine_tuned = false;
  std::size_t packages = 0;
  double sync_rms_ps = 0.0;
  double total_rms_ps = 0.0;
  double reference_rms_ps = 0.0;
  double frozen_sync_rms_ps = 0.0;
  double frozen_total_rms_ps = 0.0;
  /// Frozen-mapping total jitter over the last tenth of the session.
  double frozen_total_final_ps = 0.0;
  std::size_t lost_transitions = 0;
  double lock_fraction = 0.0;
  SyncStatus final_status = SyncStatus::Acquiring;
  OffsetMapping final_mapping;
};

struct SessionReport {
  std::optional<AcquisitionResult> acquisition;
  std::optional<FineTuneResult> fine;
  std::vector<PackageReport> rows;
  SessionSummary summary;
};

/// Incremental session: feed generated packages in index order. Runs
/// acquisition as soon as enough packages are buffered, then fine tuning,
/// then tracks from the first package onward.
class SessionDriver {
 public:
  SessionDriver(const ScenarioConfig& config, const SessionOptions& options, GroundTruth truth);
  ~SessionDriver();
  SessionDriver(const SessionDriver&) = delete;
  SessionDriver& operator=(const SessionDriver&) = delete;

  void push(GeneratedPackage package);
  SessionReport finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Generates the scenario and runs it end to end.
SessionReport run_session(const ScenarioConfig& config, const SessionOptions& options);
SessionReport run_session(const ScenarioConfig& config);

/// `t_s,total_jitter_ps,sync_jitter_ps,skew_est,offset_est,significance,status`
/// followed by frozen-mapping and reference columns.
void write_report_csv(std::ostream& out, const SessionReport& report);
void write_summary(std::ostream& out, const SessionReport& report);

/// Skew seed file: a single `skew_s_per_s=<value>` line.
void write_skew_seed(const std::filesystem::path& path, double skew);
double read_skew_seed(const std::filesystem::path& path);

}  // namespace photonsync
