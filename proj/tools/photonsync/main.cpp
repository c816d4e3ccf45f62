#include <iostream>

#include "CLI11.hpp"

#include "commands.hpp"
#include "photonsync/errors.hpp"

using namespace photonsync;
using namespace photonsync::cli;

namespace {

void add_scenario_options(CLI::App* app, std::string& scenario, std::optional<std::uint64_t>& seed,
                          std::optional<double>& duration) {
  app->add_option("scenario,--scenario", scenario, "Scenario file (key = value) or preset name")->required();
  app->add_option("--seed", seed, "Override the scenario RNG seed");
  app->add_option("--duration", duration, "Override the session length [s]");
}

std::string preset_list() {
  std::string s;
  for (const auto& n : scenario_preset_names()) s += (s.empty() ? "" : ", ") + n;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clock synchronisation from correlated photon time tags.\n"
               "Presets: " + preset_list()};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 ok/locked, 1 ran but not locked at the end, 2 usage, 3 bad config or parameter,\n"
             "4 file, format or transport failure, 5 acquisition failed.");
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate Alice and Bob package files for a scenario");
  add_scenario_options(simulate, sim.scenario, sim.seed, sim.duration);
  simulate->add_option("--out", sim.out_dir, "Output directory (default $PHOTONSYNC_OUT_DIR or .)");
  simulate->add_option("--prefix", sim.prefix, "File name prefix");
  simulate->add_option("--format", sim.format, "Package file format")->check(CLI::IsMember({"binary", "csv"}));
  simulate->add_flag("--pairs", sim.pairs, "Also write the true pair table <prefix>_pairs.csv [ps]");

  AcquireArgs acq;
  auto* acquire = app.add_subcommand("acquire", "Coarse skew scan and offset estimate from package files");
  acquire->add_option("alice", acq.alice, "Alice package file")->required();
  acquire->add_option("bob", acq.bob, "Bob package file")->required();
  acquire->add_option("--packages", acq.packages, "Matched packages merged for the scan");
  acquire->add_option("--skew-lo", acq.scan.skew_lo, "Lowest skew searched [s/s]");
  acquire->add_option("--skew-hi", acq.scan.skew_hi, "Highest skew searched [s/s]");
  acquire->add_option("--skew-step", acq.scan.skew_step, "Skew grid step [s/s]");
  acquire->add_option("--bin", acq.scan.coarse_bin, "Coarse histogram bin [ps], 0 = automatic");
  acquire->add_option("--half-span", acq.scan.half_span, "Half span of the delay window [ps]");
  acquire->add_option("--threshold", acq.scan.threshold, "Lock significance threshold");
  acquire->add_option("--sigma", acq.scan.sigma_ps, "Expected peak RMS [ps]");
  acquire->add_option("--seed-skew", acq.scan.seed_skew_file, "Skew seed file from an earlier run");
  acquire->add_option("--write-skew", acq.write_skew, "Write the found skew to this seed file");
  acquire->add_option("--histogram", acq.histogram, "Write the winning histogram (delay_ps,count)");
  acquire->add_option("--scan-csv", acq.scan_csv, "Write significance per skew grid point");

  TuneArgs tn;
  auto* tune = app.add_subcommand("tune", "Fine skew scan around a coarse estimate, with a peak fit");
  tune->add_option("alice", tn.alice, "Alice package file")->required();
  tune->add_option("bob", tn.bob, "Bob package file")->required();
  tune->add_option("--skew", tn.skew, "Coarse skew [s/s]")->required();
  tune->add_option("--offset", tn.offset_ps, "Offset at the first Bob package start [ps]")->required();
  tune->add_option("--packages", tn.packages, "Matched packages merged");
  tune->add_option("--step", tn.fine_step, "Fine grid step [s/s]");
  tune->add_option("--range", tn.fine_range, "Fine grid half range [s/s], 0 = automatic");
  tune->add_option("--window", tn.window, "Half width of the Start-Stop window [ps]");
  tune->add_option("--bin", tn.bin, "Start-Stop bin width [ps]");
  tune->add_option("--sigma", tn.sigma_ps, "Expected peak RMS [ps]");
  tune->add_option("--curve", tn.curve, "Write the fine scan curve CSV");
  tune->add_option("--write-skew", tn.write_skew, "Write the tuned skew to this seed file");

  TrackArgs trk;
  auto* track = app.add_subcommand("track", "Run acquisition, fine tuning and live tracking on a scenario");
  add_scenario_options(track, trk.scenario, trk.seed, trk.duration);
  track->add_option("--report", trk.report, "Per-package report CSV (default <out>/track_report.csv)");
  track->add_option("--summary", trk.summary, "Also write the summary to this file");
  track->add_flag("--no-tracking", trk.no_tracking, "Freeze the post-tuning mapping");
  track->add_option("--seed-skew", trk.skew_seed, "Skew seed file from an earlier run");
  track->add_option("--write-skew", trk.write_skew, "Write the final skew to this seed file");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Closed-form jitter budget and tracking limits");
  analyze->add_option("--sigma-det", an.sigma_det, "Detector coincidence RMS [s]");
  analyze->add_option("--du", an.du, "Residual skew [s/s]");
  analyze->add_option("--T-A", an.T_A, "Package length [s]");
  analyze->add_option("--r-A", an.r_A, "Alice singles rate [1/s]");
  analyze->add_option("--r-B", an.r_B, "Bob singles rate at transmission 1 [1/s]");
  analyze->add_option("--r-C", an.r_C, "Coincidence rate at transmission 1 [1/s]");
  analyze->add_option("--r-dark", an.r_dark, "Bob dark count rate [1/s]");
  analyze->add_option("--transmission", an.transmission, "Channel transmission (0, 1]");
  analyze->add_option("--T-meas", an.T_meas, "Skew measurement baseline [s]");
  analyze->add_option("--T-feed", an.T_feed, "Feedback period [s]");
  analyze->add_option("--drift", an.drift, "Skew drift rate [1/s]");
  analyze->add_option("--threshold", an.threshold, "Significance threshold");
  analyze->add_option("--curve", an.curve, "Also write a figure (see repro) in quick mode");
  analyze->add_option("--out", an.out, "Directory for --curve");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Repeat the tracking pipeline over a parameter grid");
  add_scenario_options(sweep, sw.scenario, sw.seed, sw.duration);
  sweep->add_option("--axis", sw.axis, "skew [s/s], transmission, T_feed [s] or r_C [1/s]")
      ->required()
      ->check(CLI::IsMember({"skew", "transmission", "T_feed", "r_C"}));
  sweep->add_option("--grid", sw.grid, "Values of the axis")->required()->delimiter(',');
  sweep->add_option("--reps", sw.reps, "Seeds per grid point");
  sweep->add_option("--out", sw.out, "Output CSV");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "Stream Alice's packages for a scenario over TCP");
  add_scenario_options(serve, sv.scenario, sv.seed, sv.duration);
  serve->add_option("--listen", sv.listen, "host:port to listen on (port 0 = ephemeral)");
  serve->add_option("--pacing", sv.pacing, "max or realtime")->check(CLI::IsMember({"max", "realtime"}));

  SyncArgs sy;
  auto* sync = app.add_subcommand("sync", "Receive Alice's packages over TCP and synchronise Bob's clock");
  add_scenario_options(sync, sy.scenario, sy.seed, sy.duration);
  sync->add_option("--connect", sy.connect, "host:port of the serving side");
  sync->add_option("--report", sy.report, "Per-package report CSV (default <out>/sync_report.csv)");
  sync->add_option("--summary", sy.summary, "Also write the summary to this file");

  std::string figure;
  ReproOptions ro;
  std::string repro_out;
  std::optional<std::uint64_t> repro_seed;
  auto* repro = app.add_subcommand("repro", "Regenerate a figure's data as <fig>.csv plus plot_<fig>.py");
  repro->add_option("figure", figure, "Figure id, or 'all'")->required();
  repro->add_option("--out", repro_out, "Output directory (default $PHOTONSYNC_OUT_DIR or .)");
  repro->add_option("--seed", repro_seed, "Base seed");
  repro->add_flag("--quick", ro.quick, "Shorter sessions and fewer repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*acquire) return cmd_acquire(acq);
    if (*tune) return cmd_tune(tn);
    if (*track) return cmd_track(trk);
    if (*analyze) return cmd_analyze(an);
    if (*sweep) return cmd_sweep(sw);
    if (*serve) return cmd_serve(sv);
    if (*sync) return cmd_sync(sy);
    if (*repro) {
      ro.out_dir = output_dir(repro_out);
      ro.seed = repro_seed;
      if (figure == "all") {
        for (const auto& f : repro_figures()) run_repro(f, ro);
      } else {
        run_repro(figure, ro);
      }
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ClockModelError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DomainError& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return kConfig;
  } catch (const AcquisitionError& e) {
    std::cerr << "acquisition failed: " << e.what() << '\n';
    return kAcquisition;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << " (last acked " << e.last_acked() << ")\n";
    return kIo;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const AlignmentError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kAcquisition;
  }
  return kUsage;
}
