#include "commands.hpp"

#include <cstdlib>
#include <iomanip>
#include <iostream>

#include "photonsync/acquisition.hpp"
#include "photonsync/analytics.hpp"
#include "photonsync/errors.hpp"
#include "photonsync/net.hpp"
#include "photonsync/package_io.hpp"
#include "photonsync/session.hpp"
#include "photonsync/session_generator.hpp"

namespace photonsync::cli {
namespace fs = std::filesystem;

ScenarioConfig resolve_scenario(const std::string& arg, std::optional<std::uint64_t> seed) {
  ScenarioConfig config;
  if (fs::exists(arg)) {
    config = load_scenario(arg);
  } else {
    const auto names = scenario_preset_names();
    if (std::find(names.begin(), names.end(), arg) == names.end())
      throw IoError("scenario file not found: " + arg);
    config = scenario_preset(arg);
  }
  if (seed) config.seed = *seed;
  return config;
}

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("PHOTONSYNC_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return fs::current_path();
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

namespace {

ScenarioConfig with_overrides(ScenarioConfig c, std::optional<double> duration) {
  if (duration) c.duration = *duration;
  c.validate();
  return c;
}

ScanConfig make_scan(const ScanArgs& a) {
  ScanConfig s;
  s.skew_lo = a.skew_lo;
  s.skew_hi = a.skew_hi;
  s.skew_step = a.skew_step;
  s.coarse_bin = a.coarse_bin;
  s.coarse_half_span = a.half_span;
  s.lock_threshold = a.threshold;
  s.expected_sigma_ps = a.sigma_ps;
  if (!a.seed_skew_file.empty()) s.seed_skew = read_skew_seed(a.seed_skew_file);
  s.validate();
  return s;
}

PackageStream load(const std::string& path) {
  if (!fs::exists(path)) throw IoError("package file not found: " + path);
  return load_stream(path).stream;
}

std::vector<Ticks> merged_times(std::span<const MatchedPair> pairs, bool bob) {
  std::vector<Ticks> out;
  for (const auto& p : pairs)
    for (const auto& t : (bob ? p.bob : p.alice)->tags()) out.push_back(t.timestamp);
  return out;
}

}  // namespace

int cmd_simulate(const SimulateArgs& args) {
  const ScenarioConfig config = with_overrides(resolve_scenario(args.scenario, args.seed), args.duration);
  const PackageFormat format = args.format == "csv" ? PackageFormat::Csv : PackageFormat::Binary;
  const std::string ext = format == PackageFormat::Csv ? ".csv" : ".pspk";
  const fs::path dir = output_dir(args.out_dir);
  fs::create_directories(dir);
  const fs::path alice_path = dir / (args.prefix + "_alice" + ext);
  const fs::path bob_path = dir / (args.prefix + "_bob" + ext);
  std::ofstream alice_out(alice_path, std::ios::binary), bob_out(bob_path, std::ios::binary);
  if (!alice_out || !bob_out) throw IoError("cannot write into " + dir.string());
  std::ofstream pairs_out;
  if (args.pairs) {
    pairs_out = open_output(dir / (args.prefix + "_pairs.csv"));
    pairs_out << "alice_ps,bob_ps,bob_true_ps\n";
  }
  {
    std::ofstream cfg = open_output(dir / (args.prefix + ".conf"));
    write_scenario(cfg, config);
  }
  StreamWriter alice(alice_out, Party::Alice, format), bob(bob_out, Party::Bob, format);
  SessionGenerator generator(config);
  std::size_t n_alice = 0, n_bob = 0, n_pairs = 0, packages = 0;
  while (auto p = generator.next()) {
    alice.write(p->alice);
    bob.write(p->bob);
    n_alice += p->alice.size();
    n_bob += p->bob.size();
    n_pairs += p->pairs.size();
    ++packages;
    if (args.pairs)
      for (const auto& pr : p->pairs) pairs_out << pr.alice << ',' << pr.bob << ',' << pr.bob_true << '\n';
  }
  if (!alice_out || !bob_out) throw IoError("write failed in " + dir.string());
  std::cout << "packages " << packages << "\nalice_tags " << n_alice << "\nbob_tags " << n_bob
            << "\ntrue_pairs " << n_pairs << "\nalice " << alice_path.string() << "\nbob "
            << bob_path.string() << '\n';
  return kOk;
}

int cmd_acquire(const AcquireArgs& args) {
  const PackageStream alice = load(args.alice), bob = load(args.bob);
  const ScanConfig scan = make_scan(args.scan);
  const Alignment alignment = align_packages(alice, bob);
  const std::size_t n = std::min(args.packages, alignment.pairs.size());
  const std::span<const MatchedPair> pairs(alignment.pairs.data(), n);

  AcquisitionResult result;
  try {
    result = acquire_offset(pairs, scan);
  } catch (const AcquisitionError& e) {
    std::cerr << "acquisition failed: " << e.what() << '\n';
    return kAcquisition;
  }
  std::cout << std::setprecision(10) << "offset_ps " << result.offset_ps << "\nskew_s_per_s " << result.skew
            << "\nsignificance " << result.significance << "\nbin_ps " << result.bin_width
            << "\npackages " << result.packages << "\nanchor_ps " << result.anchor << '\n';
  if (!args.write_skew.empty()) write_skew_seed(args.write_skew, result.skew);
  if (!args.scan_csv.empty()) {
    auto out = open_output(args.scan_csv);
    out << "skew_s_per_s,significance,peak_delay_ps\n" << std::setprecision(10);
    for (const auto& p : result.scan) out << p.skew << ',' << p.significance << ',' << p.peak_delay << '\n';
  }
  if (!args.histogram.empty()) {
    const auto a = merged_times(pairs, false);
    const auto b = skew_correct(merged_times(pairs, true), result.skew, result.anchor);
    const Ticks half = (scan.coarse_half_span + result.bin_width - 1) / result.bin_width * result.bin_width;
    auto out = open_output(args.histogram);
    write_histogram_csv(out, binned_xcorr(a, b, result.bin_width, {-half, half}));
  }
  return kOk;
}

int cmd_tune(const TuneArgs& args) {
  const PackageStream alice = load(args.alice), bob = load(args.bob);
  ScanConfig scan;
  scan.fine_step = args.fine_step;
  scan.fine_half_range = args.fine_range;
  scan.fine_window = args.window;
  scan.fine_bin = args.bin;
  scan.expected_sigma_ps = args.sigma_ps;
  scan.fine_packages = args.packages;
  scan.validate();
  const Alignment alignment = align_packages(alice, bob);
  const std::size_t n = std::min(args.packages, alignment.pairs.size());
  const FineTuneResult r =
      fine_tune_skew(std::span<const MatchedPair>(alignment.pairs.data(), n), args.skew, args.offset_ps, scan);
  std::cout << std::setprecision(12) << "skew_s_per_s: " << r.skew << '\n'
            << std::setprecision(8) << "offset_ps: " << r.offset_ps << '\n'
            << "car: " << r.car << '\n'
            << "min_width_skew_s_per_s: " << std::setprecision(12) << r.curve[r.min_width_index].skew << '\n'
            << std::setprecision(8);
  write_fit_report(std::cout, r.fit, r.curve[r.best_index].significance);
  if (!args.curve.empty()) {
    auto out = open_output(args.curve);
    out << "skew_s_per_s,fitted,significance,center_ps,sigma_ps,car\n" << std::setprecision(12);
    for (const auto& p : r.curve)
      out << p.skew << ',' << p.fitted << ',' << p.significance << ',' << p.center << ',' << p.sigma << ','
          << p.car << '\n';
  }
  if (!args.write_skew.empty()) write_skew_seed(args.write_skew, r.skew);
  return kOk;
}

int cmd_track(const TrackArgs& args) {
  const ScenarioConfig config = with_overrides(resolve_scenario(args.scenario, args.seed), args.duration);
  SessionOptions options = default_options(config);
  options.tracking = !args.no_tracking;
  if (!args.skew_seed.empty()) {
    if (!fs::exists(args.skew_seed)) throw IoError("skew seed file not found: " + args.skew_seed);
    options.scan.seed_skew = read_skew_seed(args.skew_seed);
  }
  const SessionReport report = run_session(config, options);
  const fs::path report_path = args.report.empty() ? output_dir("") / "track_report.csv" : fs::path(args.report);
  {
    auto out = open_output(report_path);
    write_report_csv(out, report);
  }
  write_summary(std::cout, report);
  if (!args.summary.empty()) {
    auto out = open_output(args.summary);
    write_summary(out, report);
  }
  if (!args.write_skew.empty() && report.summary.acquired) write_skew_seed(args.write_skew, report.summary.final_mapping.skew);
  if (!report.summary.acquired) return kAcquisition;
  return report.summary.final_status == SyncStatus::Locked ? kOk : kNotLocked;
}

int cmd_analyze(const AnalyzeArgs& a) {
  const double sync = sync_jitter(a.du, a.T_A);
  const JitterBudget budget = make_budget(a.sigma_det, sync);
  std::cout << std::setprecision(6) << "# jitter budget (s)\n"
            << "sigma_det " << budget.sigma_det << "\nsigma_sync " << budget.sigma_sync << "\nsigma_total "
            << budget.sigma_total << "\npeak_height_ratio " << peak_height_ratio(a.sigma_det, sync) << '\n';
  std::cout << "# link\n"
            << "car " << car(a.transmission, a.r_A, a.r_B, a.r_C, a.r_dark, a.sigma_det) << '\n'
            << "max_skew_s_per_s " << max_skew(a.r_C * a.transmission, a.r_A, a.r_B * a.transmission, a.threshold) << '\n'
            << "expected_significance "
            << expected_significance(a.r_A, a.r_B * a.transmission, a.r_C * a.transmission, a.T_A, a.sigma_det, a.du, 1e-9)
            << '\n';
  try {
    const LiveLimits l = live_limits(a.sigma_det, a.r_C * a.transmission, a.T_A, a.T_meas, a.T_feed, a.drift);
    std::cout << "# live tracking limits\n"
              << "delta_tau_s " << l.delta_tau << "\ndu_meas_s_per_s " << l.du_meas << "\nsigma_meas_s "
              << l.sigma_meas << "\ndu_drift_s_per_s " << l.du_drift << "\nsigma_drift_s " << l.sigma_drift
              << "\nsigma_sync_s " << l.sigma_sync << '\n';
  } catch (const DomainError& e) {
    std::cout << "# live tracking limits unavailable: " << e.what() << '\n';
  }
  if (!a.curve.empty()) {
    ReproOptions opts;
    opts.out_dir = output_dir(a.out);
    opts.quick = true;
    run_repro(a.curve, opts);
  }
  return kOk;
}

int cmd_sweep(const SweepArgs& args) {
  if (args.grid.empty() || args.reps == 0) throw UsageError("sweep needs a non-empty grid and reps >= 1");
  const ScenarioConfig base = with_overrides(resolve_scenario(args.scenario, args.seed), args.duration);
  const fs::path path = args.out.empty() ? output_dir("") / ("sweep_" + args.axis + ".csv") : fs::path(args.out);
  auto out = open_output(path);
  out << args.axis
      << ",rep,seed,acquired,acquisition_significance,sync_rms_ps,total_rms_ps,reference_rms_ps,"
         "frozen_total_final_ps,lock_fraction,final_status,sync_theory_ps\n"
      << std::setprecision(8);
  for (double value : args.grid) {
    for (std::size_t rep = 0; rep < args.reps; ++rep) {
      ScenarioConfig c = base;
      c.seed = base.seed + rep;
      if (args.axis == "skew") c.clock.skew_u = value;
      else if (args.axis == "transmission") c.transmission_T = value;
      else if (args.axis == "T_feed") c.T_feed = value;
      else if (args.axis == "r_C") c.r_C = value;
      else throw UsageError("unknown sweep axis '" + args.axis + "' (skew, transmission, T_feed, r_C)");
      c.validate();
      const SessionReport r = run_session(c);
      double theory = std::nan("");
      try {
        const double drift = c.clock.drift_a != 0 ? c.clock.drift_a : c.clock.rw_sigma;
        theory = live_limits(c.sigma_det, c.r_C * c.transmission_T, c.T_A, c.T_feed, c.T_feed, drift).sigma_sync * 1e12;
      } catch (const DomainError&) {
      }
      const auto& s = r.summary;
      out << value << ',' << rep << ',' << c.seed << ',' << s.acquired << ','
          << (r.acquisition ? r.acquisition->significance : 0.0) << ',' << s.sync_rms_ps << ',' << s.total_rms_ps
          << ',' << s.reference_rms_ps << ',' << s.frozen_total_final_ps << ',' << s.lock_fraction << ','
          << to_string(s.final_status) << ',' << theory << '\n';
    }
  }
  std::cout << "wrote " << path.string() << '\n';
  return kOk;
}

int cmd_serve(const ServeArgs& args) {
  const ScenarioConfig config = with_overrides(resolve_scenario(args.scenario, args.seed), args.duration);
  ServeOptions options;
  if (args.pacing == "realtime") options.pacing = Pacing::RealTime;
  else if (args.pacing != "max") throw UsageError("pacing must be max or realtime");
  Listener listener(Endpoint::parse(args.listen));
  std::cerr << "listening on port " << listener.port() << '\n';
  SessionGenerator generator(config);
  const ServeSummary s = serve_stream(listener, [&]() -> std::optional<DataPackage> {
    auto p = generator.next();
    if (!p) return std::nullopt;
    return std::move(p->alice);
  }, options);
  std::cout << "frames " << s.frames << "\nbytes " << s.bytes << "\nlast_acked "
            << (s.last_acked ? std::to_string(*s.last_acked) : std::string("none")) << '\n';
  return kOk;
}

int cmd_sync(const SyncArgs& args) {
  const ScenarioConfig config = with_overrides(resolve_scenario(args.scenario, args.seed), args.duration);
  const ReceiveResult r = receive_and_sync(Endpoint::parse(args.connect), config, default_options(config));
  const fs::path report_path = args.report.empty() ? output_dir("") / "sync_report.csv" : fs::path(args.report);
  {
    auto out = open_output(report_path);
    write_report_csv(out, r.report);
  }
  write_summary(std::cout, r.report);
  std::cout << "frames_received " << r.stats.frames << "\ncorrupt_frames " << r.stats.corrupt
            << "\nmissing_packages " << r.stats.missing.size() << '\n';
  if (!args.summary.empty()) {
    auto out = open_output(args.summary);
    write_summary(out, r.report);
  }
  if (!r.report.summary.acquired) return kAcquisition;
  return r.report.summary.final_status == SyncStatus::Locked ? kOk : kNotLocked;
}

}  // namespace photonsync::cli
