#include "photonsync/session.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "photonsync/errors.hpp"

namespace photonsync {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Moments {
  double sum_sq = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum_sq += v * v;
    ++n;
  }
  double rms() const { return n ? std::sqrt(sum_sq / static_cast<double>(n)) : kNaN; }
};

enum class Phase { Acquire, FineTune, Track, Failed };

}  // namespace

SessionOptions default_options(const ScenarioConfig& config) {
  SessionOptions o;
  const double sigma_ps = config.sigma_det * kTicksPerSecond;
  o.scan.expected_sigma_ps = sigma_ps;
  o.tracker.expected_sigma_ps = sigma_ps;
  o.tracker.T_feed = config.T_feed;
  o.tracker.T_meas = config.T_feed;
  o.tracker.lock_threshold = o.scan.lock_threshold;
  return o;
}

struct SessionDriver::Impl {
  ScenarioConfig config;
  SessionOptions options;
  GroundTruth truth;
  std::uint64_t expected_packages = 0;

  Phase phase = Phase::Acquire;
  std::size_t next_attempt = 1;
  std::deque<GeneratedPackage> buffer;  // before tracking starts
  std::deque<GeneratedPackage> window;  // packages of the open feedback window
  std::optional<SyncTracker> tracker;
  OffsetMapping frozen;

  SessionReport report;
  Moments total, frozen_total, reference, sync, frozen_sync;
  std::size_t locked_rows = 0;

  std::vector<MatchedPair> matched(std::size_t n) const {
    std::vector<MatchedPair> out;
    for (std::size_t i = 0; i < n && i < buffer.size(); ++i) out.push_back({&buffer[i].alice, &buffer[i].bob});
    return out;
  }

  void try_acquire(bool final_call) {
    const std::size_t limit = options.scan.max_acquisition_packages;
    while (phase == Phase::Acquire && (buffer.size() >= next_attempt || (final_call && !buffer.empty()))) {
      const std::size_t n = std::min(next_attempt, buffer.size());
      try {
        const auto pairs = matched(n);
        report.acquisition = acquire_offset(pairs, options.scan);
        phase = Phase::FineTune;
      } catch (const AcquisitionError&) {
        if (next_attempt >= limit || final_call) {
          phase = Phase::Failed;
          break;
        }
        next_attempt = std::min(limit, next_attempt * 2);
      }
    }
    if (phase == Phase::Failed) flush_untracked();
  }

  void try_fine_tune(bool final_call) {
    if (phase != Phase::FineTune) return;
    const std::size_t needed =
        static_cast<std::size_t>(std::min<std::uint64_t>(options.scan.fine_packages, std::max<std::uint64_t>(expected_packages, 1)));
    if (buffer.size() < needed && !final_call) return;
    const AcquisitionResult& acq = *report.acquisition;
    const Ticks anchor = buffer.front().bob.start();
    const double offset_at_anchor = acq.offset_ps + acq.skew * static_cast<double>(anchor - acq.anchor);
    OffsetMapping start{static_cast<double>(anchor), offset_at_anchor, acq.skew};
    try {
      const auto pairs = matched(std::min(needed, buffer.size()));
      report.fine = fine_tune_skew(pairs, acq.skew, offset_at_anchor, options.scan);
      start = OffsetMapping{static_cast<double>(report.fine->anchor), report.fine->offset_ps, report.fine->skew};
    } catch (const FineTuneError&) {
    }
    frozen = start;
    tracker.emplace(options.tracker, start, config.T_A);
    phase = Phase::Track;
    while (!buffer.empty()) {
      GeneratedPackage p = std::move(buffer.front());
      buffer.pop_front();
      track(std::move(p));
    }
  }

  void record(const GeneratedPackage& p, const OffsetMapping* live) {
    PackageReport row;
    row.index = p.index;
    row.t_s = to_seconds(p.bob.start());
    row.pairs = p.pairs.size();
    Moments ref;
    for (const auto& pr : p.pairs) {
      const double d = static_cast<double>(pr.bob_true - pr.alice);
      ref.add(d);
      reference.add(d);
    }
    row.reference_jitter_ps = ref.rms();
    if (live == nullptr) {
      row.total_jitter_ps = row.sync_jitter_ps = row.total_jitter_frozen_ps = row.sync_jitter_frozen_ps = kNaN;
      row.offset_est_ps = row.offset_error_ps = kNaN;
      report.rows.push_back(row);
      return;
    }
    auto error_at = [&](const OffsetMapping& m, Ticks b) {
      return truth.offset_at_local_ticks(static_cast<double>(b)) - m.at(static_cast<double>(b));
    };
    auto sync_of = [&](const OffsetMapping& m) {
      return 0.5 * std::abs(error_at(m, p.bob.end()) - error_at(m, p.bob.start()));
    };
    Moments pkg_total, pkg_frozen;
    for (const auto& pr : p.pairs) {
      const double d = static_cast<double>(live->correct(pr.bob) - pr.alice);
      const double f = static_cast<double>(frozen.correct(pr.bob) - pr.alice);
      pkg_total.add(d);
      pkg_frozen.add(f);
      total.add(d);
      frozen_total.add(f);
    }
    row.total_jitter_ps = pkg_total.rms();
    row.total_jitter_frozen_ps = pkg_frozen.rms();
    row.sync_jitter_ps = sync_of(*live);
    row.sync_jitter_frozen_ps = sync_of(frozen);
    sync.add(row.sync_jitter_ps);
    frozen_sync.add(row.sync_jitter_frozen_ps);
    row.skew_est = live->skew;
    row.offset_est_ps = live->at(static_cast<double>(p.bob.start()));
    const Ticks mid = p.bob.start() + p.bob.duration() / 2;
    row.offset_error_ps = error_at(*live, mid);
    report.rows.push_back(row);
  }

  void track(GeneratedPackage p) {
    const OffsetMapping live = options.tracking ? tracker->mapping() : frozen;
    window.push_back(std::move(p));
    const GeneratedPackage& cur = window.back();
    record(cur, &live);
    const bool closed = tracker->push(cur.alice, cur.bob);
    const SyncState& s = tracker->state();
    auto& row = report.rows.back();
    row.status = s.status;
    row.significance = s.last_significance;
    if (s.status == SyncStatus::Locked) ++locked_rows;
    if (closed) window.clear();
  }

  void flush_untracked() {
    while (!buffer.empty()) {
      record(buffer.front(), nullptr);
      buffer.pop_front();
    }
  }
};

SessionDriver::SessionDriver(const ScenarioConfig& config, const SessionOptions& options, GroundTruth truth)
    : impl_(std::make_unique<Impl>()) {
  config.validate();
  options.scan.validate();
  options.tracker.validate();
  impl_->config = config;
  impl_->options = options;
  impl_->truth = std::move(truth);
  impl_->expected_packages = static_cast<std::uint64_t>(std::floor(config.duration / config.T_A + 1e-9));
}

SessionDriver::~SessionDriver() = default;

void SessionDriver::push(GeneratedPackage package) {
  Impl& d = *impl_;
  switch (d.phase) {
    case Phase::Track:
      d.track(std::move(package));
      return;
    case Phase::Failed:
      d.record(package, nullptr);
      return;
    case Phase::Acquire:
    case Phase::FineTune:
      d.buffer.push_back(std::move(package));
      d.try_acquire(false);
      d.try_fine_tune(false);
      return;
  }
}

SessionReport SessionDriver::finish() {
  Impl& d = *impl_;
  d.try_acquire(true);
  d.try_fine_tune(true);
  d.flush_untracked();

  SessionSummary& s = d.report.summary;
  s.acquired = d.report.acquisition.has_value();
  s.fine_tuned = d.report.fine.has_value();
  s.packages = d.report.rows.size();
  s.sync_rms_ps = d.sync.rms();
  s.total_rms_ps = d.total.rms();
  s.reference_rms_ps = d.reference.rms();
  s.frozen_sync_rms_ps = d.frozen_sync.rms();
  s.frozen_total_rms_ps = d.frozen_total.rms();
  Moments tail;
  const std::size_t from = d.report.rows.size() - d.report.rows.size() / 10;
  for (std::size_t i = from; i < d.report.rows.size(); ++i) {
    const auto& r = d.report.rows[i];
    if (!std::isfinite(r.total_jitter_frozen_ps)) continue;
    // pair-weighted, so the tail RMS matches pooling the pairs themselves
    tail.sum_sq += r.total_jitter_frozen_ps * r.total_jitter_frozen_ps * static_cast<double>(r.pairs);
    tail.n += r.pairs;
  }
  s.frozen_total_final_ps = tail.rms();
  if (d.tracker) {
    s.lost_transitions = d.tracker->state().lost_transitions;
    s.final_status = d.tracker->state().status;
    s.final_mapping = d.tracker->mapping();
  }
  s.lock_fraction = s.packages ? static_cast<double>(d.locked_rows) / static_cast<double>(s.packages) : 0.0;
  return std::move(d.report);
}

SessionReport run_session(const ScenarioConfig& config, const SessionOptions& options) {
  SessionGenerator generator(config);
  SessionDriver driver(config, options, generator.truth());
  while (auto p = generator.next()) driver.push(std::move(*p));
  return driver.finish();
}

SessionReport run_session(const ScenarioConfig& config) { return run_session(config, default_options(config)); }

void write_report_csv(std::ostream& out, const SessionReport& report) {
  out << "t_s,total_jitter_ps,sync_jitter_ps,skew_est,offset_est,significance,status,"
         "total_jitter_frozen_ps,sync_jitter_frozen_ps,reference_jitter_ps,offset_error_ps,pairs\n";
  out << std::setprecision(10);
  for (const auto& r : report.rows) {
    out << r.t_s << ',' << r.total_jitter_ps << ',' << r.sync_jitter_ps << ',' << r.skew_est << ','
        << r.offset_est_ps << ',' << r.significance << ',' << to_string(r.status) << ','
        << r.total_jitter_frozen_ps << ',' << r.sync_jitter_frozen_ps << ',' << r.reference_jitter_ps
        << ',' << r.offset_error_ps << ',' << r.pairs << '\n';
  }
}

void write_summary(std::ostream& out, const SessionReport& report) {
  const SessionSummary& s = report.summary;
  out << std::setprecision(6);
  out << "# summary\n";
  if (report.acquisition) {
    const auto& a = *report.acquisition;
    out << "acquisition_offset_ps = " << a.offset_ps << '\n'
        << "acquisition_skew = " << a.skew << '\n'
        << "acquisition_significance = " << a.significance << '\n'
        << "acquisition_packages = " << a.packages << '\n';
  } else {
    out << "acquisition = failed\n";
  }
  if (report.fine) {
    out << "fine_skew = " << std::setprecision(12) << report.fine->skew << std::setprecision(6) << '\n'
        << "fine_sigma_ps = " << report.fine->fit.sigma << '\n'
        << "fine_car = " << report.fine->car << '\n';
  }
  out << "packages = " << s.packages << '\n'
      << "sync_jitter_rms_ps = " << s.sync_rms_ps << '\n'
      << "total_jitter_rms_ps = " << s.total_rms_ps << '\n'
      << "reference_jitter_rms_ps = " << s.reference_rms_ps << '\n'
      << "frozen_sync_jitter_rms_ps = " << s.frozen_sync_rms_ps << '\n'
      << "frozen_total_jitter_rms_ps = " << s.frozen_total_rms_ps << '\n'
      << "frozen_total_jitter_final_ps = " << s.frozen_total_final_ps << '\n'
      << "lost_transitions = " << s.lost_transitions << '\n'
      << "lock_fraction = " << s.lock_fraction << '\n'
      << "final_status = " << to_string(s.final_status) << '\n'
      << "final_skew = " << std::setprecision(12) << s.final_mapping.skew << '\n';
}

void write_skew_seed(const std::filesystem::path& path, double skew) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "skew_s_per_s=" << std::setprecision(17) << skew << '\n';
}

double read_skew_seed(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
    if (line.substr(0, eq) != "skew_s_per_s") continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(line.substr(eq + 1), &used);
      return v;
    } catch (const std::exception&) {
      break;
    }
  }
  throw FormatError(path.string() + ": no skew_s_per_s entry");
}

}  // namespace photonsync
