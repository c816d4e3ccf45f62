#include <cmath>
#include <iomanip>
#include <iostream>
#include <map>

#include "cli.hpp"
#include "photonsync/acquisition.hpp"
#include "photonsync/analytics.hpp"
#include "photonsync/correlation.hpp"
#include "photonsync/errors.hpp"
#include "photonsync/session.hpp"
#include "photonsync/session_generator.hpp"

namespace photonsync::cli {
namespace {

std::vector<Ticks> times(const PackageStream& s) {
  std::vector<Ticks> out;
  for (const auto& p : s.packages)
    for (const auto& t : p.tags()) out.push_back(t.timestamp);
  return out;
}

Ticks round_up(Ticks v, Ticks w) { return (v + w - 1) / w * w; }

// One package of length T_A with an uncorrected residual skew du; the peak
// smears from 0 to du*T_A. Returns the histogram significance.
double simulated_significance(ScenarioConfig c, double du, Ticks bin) {
  c.duration = c.T_A;
  // Offset chosen so the smeared peak is centred on the zero-delay bin.
  c.clock = ClockModel{-0.5 * du * c.T_A, du, 0.0, 0.0};
  const Session s = generate_session(c);
  const double smear = std::abs(du) * c.T_A * 1e12;
  const Ticks half = round_up(static_cast<Ticks>(4 * smear + 40.0 * c.sigma_det * 1e12) + 64 * bin, bin);
  const auto h = binned_xcorr(times(s.alice), times(s.bob), bin, {-half, half});
  const auto excl = static_cast<std::size_t>(std::ceil((5 * c.sigma_det * 1e12 + smear) / bin)) + 1;
  try {
    return peak_stats(h, excl).significance;
  } catch (const NoSignalError&) {
    return 0.0;
  }
}

struct Writer {
  std::ofstream csv;
  std::filesystem::path dir;
  std::string name;
  Writer(const ReproOptions& o, std::string fig) : dir(o.out_dir), name(std::move(fig)) {
    csv = open_output(dir / (name + ".csv"));
    csv << std::setprecision(10);
  }
  void script(const std::string& body) {
    auto py = open_output(dir / ("plot_" + name + ".py"));
    py << "import csv\nimport sys\nimport matplotlib\nmatplotlib.use('Agg')\n"
          "import matplotlib.pyplot as plt\n\n"
          "rows = list(csv.DictReader(open(sys.argv[1] if len(sys.argv) > 1 else '"
       << name << ".csv')))\n"
       << "col = lambda k, rs=None: [float(r[k]) for r in (rs if rs is not None else rows)]\n"
       << "fig, ax = plt.subplots(figsize=(6, 4))\n"
       << body << "fig.tight_layout()\nfig.savefig('" << name << ".png', dpi=150)\n";
    std::cout << "wrote " << (dir / (name + ".csv")).string() << '\n';
  }
};

std::uint64_t base_seed(const ReproOptions& o, std::uint64_t fallback) { return o.seed.value_or(fallback); }

void fig1c(const ReproOptions& o) {
  ScenarioConfig c = scenario_preset("fig1c");
  const Ticks bin = 1000;
  const std::vector<double> dus = o.quick ? std::vector<double>{1e-8, 1e-7, 1e-6, 1e-5}
                                          : std::vector<double>{5e-9, 1e-8, 2e-8, 5e-8, 1e-7, 2e-7, 5e-7,
                                                                1e-6, 2e-6, 5e-6, 1e-5, 2e-5};
  const std::vector<double> losses = {1.0, 0.3, 0.1};
  const std::size_t reps = o.quick ? 2 : 8;
  Writer w(o, "fig1c");
  w.csv << "transmission,du_s_per_s,significance_sim,significance_sim_std,significance_theory,max_skew_s_per_s\n";
  for (double T : losses) {
    c.transmission_T = T;
    for (double du : dus) {
      double sum = 0, sq = 0;
      for (std::size_t r = 0; r < reps; ++r) {
        c.seed = base_seed(o, 11) + r;
        const double s = simulated_significance(c, du, bin);
        sum += s;
        sq += s * s;
      }
      const double mean = sum / reps;
      const double sd = std::sqrt(std::max(0.0, sq / reps - mean * mean));
      w.csv << T << ',' << du << ',' << mean << ',' << sd << ','
            << expected_significance(c.r_A, c.r_B * T, c.r_C * T, c.T_A, c.sigma_det, du, bin * 1e-12) << ','
            << max_skew(c.r_C * T, c.r_A, c.r_B * T, 10.0) << '\n';
    }
  }
  w.script(
      "for T in sorted({r['transmission'] for r in rows}, reverse=True):\n"
      "    rs = [r for r in rows if r['transmission'] == T]\n"
      "    l = ax.errorbar(col('du_s_per_s', rs), col('significance_sim', rs), col('significance_sim_std', rs), fmt='o', label=f'T={T}')\n"
      "    ax.plot(col('du_s_per_s', rs), col('significance_theory', rs), '-', color=l[0].get_color())\n"
      "ax.axhline(10, ls=':', color='k')\n"
      "ax.set_xscale('log'); ax.set_yscale('log')\n"
      "ax.set_xlabel('residual skew (s/s)'); ax.set_ylabel('peak significance'); ax.legend()\n");
}

void fig1d(const ReproOptions& o) {
  ScenarioConfig c = scenario_preset("low-loss");
  c.clock = ClockModel{0.0, 0.0, 0.0, 0.0};
  c.r_dark = 1000.0;
  const std::vector<double> Ts = o.quick ? std::vector<double>{1.0, 0.3, 0.1}
                                         : std::vector<double>{1.0, 0.5, 0.3, 0.2, 0.1, 0.05, 0.03, 0.02, 0.01};
  const Ticks bin = 20;
  const double sigma_ps = c.sigma_det * 1e12;
  Writer w(o, "fig1d");
  w.csv << "transmission,car_formula,car_formula_no_dark,car_accidental_model,car_measured,coincidences\n";
  for (double T : Ts) {
    c.transmission_T = T;
    c.duration = std::clamp(3000.0 / (c.r_C * T), 1.0, o.quick ? 3.0 : 20.0);
    c.seed = base_seed(o, 21);
    const Session s = generate_session(c);
    const auto h = binned_xcorr(times(s.alice), times(s.bob), bin, {-4000, 4000});
    const auto stats = peak_stats(h, default_exclusion(bin, sigma_ps));
    // Peak excess over +-5 sigma against accidentals in a 2 sigma window.
    const double half = 5 * sigma_ps;
    const double in_window = static_cast<double>(counts_within(h, 0.0, half));
    const double bins_in = std::floor(2 * half / bin) + 1;
    const double excess = in_window - stats.background_mean * bins_in;
    const double accidentals = stats.background_mean * (2 * sigma_ps / bin);
    const double model = c.r_C * T / (2 * c.r_A * (c.r_B * T + c.r_dark) * c.sigma_det);
    w.csv << T << ',' << car(T, c.r_A, c.r_B, c.r_C, c.r_dark, c.sigma_det) << ','
          << car(T, c.r_A, c.r_B, c.r_C, 0.0, c.sigma_det) << ',' << model << ','
          << (accidentals > 0 ? excess / accidentals : std::nan("")) << ',' << excess << '\n';
  }
  w.script(
      "ax.plot(col('transmission'), col('car_formula'), '-', label='formula')\n"
      "ax.plot(col('transmission'), col('car_formula_no_dark'), '--', label='formula, no dark counts')\n"
      "ax.plot(col('transmission'), col('car_accidental_model'), ':', label='accidental model')\n"
      "ax.plot(col('transmission'), col('car_measured'), 'o', label='simulated')\n"
      "ax.set_xscale('log'); ax.set_yscale('log')\n"
      "ax.set_xlabel('transmission'); ax.set_ylabel('CAR'); ax.legend()\n");
}

void fig1e(const ReproOptions& o) {
  ScenarioConfig c = scenario_preset("low-loss");
  c.clock.rw_sigma = 0.0;
  c.duration = c.T_A;
  c.seed = base_seed(o, 31);
  const Session s = generate_session(c);
  ScanConfig scan;
  if (o.quick) scan.skew_lo = c.clock.skew_u - 3e-6, scan.skew_hi = c.clock.skew_u + 3e-6;
  const Alignment al = align_packages(s.alice, s.bob);
  const AcquisitionResult r = acquire_offset(std::span<const MatchedPair>(al.pairs.data(), 1), scan);
  const double true_u = c.clock.skew_u / (1 + c.clock.skew_u);
  Writer w(o, "fig1e");
  w.csv << "trial_skew_s_per_s,residual_s_per_s,significance_sim,significance_theory,peak_height_ratio\n";
  for (const auto& p : r.scan) {
    const double du = true_u - p.skew;
    const double sync = sync_jitter(du, c.T_A);
    w.csv << p.skew << ',' << du << ',' << p.significance << ','
          << expected_significance(c.r_A, c.r_B, c.r_C, c.T_A, c.sigma_det, du, r.bin_width * 1e-12) << ','
          << peak_height_ratio(c.sigma_det, sync) << '\n';
  }
  w.script(
      "ax.plot(col('trial_skew_s_per_s'), col('significance_sim'), '.', label='simulated')\n"
      "ax.plot(col('trial_skew_s_per_s'), col('significance_theory'), '-', label='analytic')\n"
      "ax.set_xlabel('trial skew (s/s)'); ax.set_ylabel('peak significance'); ax.legend()\n");
}

void fig2(const ReproOptions& o) {
  ScenarioConfig c = scenario_preset("low-loss");
  c.clock = ClockModel{3.2e-6, 5e-6, 0.0, 0.0};
  const std::size_t packages = o.quick ? 10 : 50;
  c.duration = c.T_A * static_cast<double>(packages);
  c.seed = base_seed(o, 41);
  const Session s = generate_session(c);
  const Alignment al = align_packages(s.alice, s.bob);
  const std::span<const MatchedPair> pairs(al.pairs);
  ScanConfig scan;
  scan.fine_packages = packages;
  scan.expected_sigma_ps = c.sigma_det * 1e12;
  const AcquisitionResult coarse = acquire_offset(pairs.first(1), scan);
  const FineTuneResult fine = fine_tune_skew(pairs, coarse.skew, coarse.offset_ps, scan);
  const double true_u = c.clock.skew_u / (1 + c.clock.skew_u);
  Writer w(o, "fig2");
  w.csv << "skew_s_per_s,residual_s_per_s,fitted,significance,sigma_ps,car,selected\n";
  for (std::size_t i = 0; i < fine.curve.size(); ++i) {
    const auto& p = fine.curve[i];
    w.csv << p.skew << ',' << true_u - p.skew << ',' << p.fitted << ',' << p.significance << ',' << p.sigma
          << ',' << p.car << ',' << (i == fine.best_index) << '\n';
  }
  w.script(
      "rs = [r for r in rows if r['fitted'] == '1']\n"
      "ax.plot(col('residual_s_per_s', rs), col('car', rs), 'o-', label='CAR')\n"
      "ax2 = ax.twinx()\n"
      "ax2.plot(col('residual_s_per_s', rs), col('sigma_ps', rs), 's-', color='C1', label='fitted width (ps)')\n"
      "ax.set_xlabel('residual skew (s/s)'); ax.set_ylabel('CAR'); ax2.set_ylabel('width (ps)')\n");
}

void fig3a(const ReproOptions& o) {
  ScenarioConfig c = scenario_preset("fig3a");
  const std::vector<double> feeds = o.quick ? std::vector<double>{0.1, 0.5, 2.0}
                                            : std::vector<double>{0.1, 0.2, 0.3, 0.5, 0.8, 1.0, 2.0, 3.0, 5.0};
  if (o.quick) c.duration = 30;
  const std::size_t reps = o.quick ? 1 : 3;
  Writer w(o, "fig3a");
  w.csv << "T_feed_s,rep,sync_rms_ps,sigma_meas_ps,sigma_drift_ps,sigma_sync_theory_ps,final_status\n";
  for (double feed : feeds) {
    c.T_feed = feed;
    const LiveLimits l = live_limits(c.sigma_det, c.r_C * c.transmission_T, c.T_A, feed, feed, c.clock.drift_a);
    for (std::size_t r = 0; r < reps; ++r) {
      c.seed = base_seed(o, 51) + r;
      const SessionReport rep = run_session(c);
      w.csv << feed << ',' << r << ',' << rep.summary.sync_rms_ps << ',' << l.sigma_meas * 1e12 << ','
            << l.sigma_drift * 1e12 << ',' << l.sigma_sync * 1e12 << ',' << to_string(rep.summary.final_status)
            << '\n';
    }
  }
  w.script(
      "x = col('T_feed_s')\n"
      "ax.plot(x, col('sync_rms_ps'), 'o', label='simulated')\n"
      "ax.plot(x, col('sigma_sync_theory_ps'), 'k-', label='limit')\n"
      "ax.plot(x, col('sigma_meas_ps'), 'k--', label='measurement')\n"
      "ax.plot(x, col('sigma_drift_ps'), 'k:', label='drift')\n"
      "ax.set_xscale('log'); ax.set_yscale('log')\n"
      "ax.set_xlabel('feedback period (s)'); ax.set_ylabel('sync jitter RMS (ps)'); ax.legend()\n");
}

void fig3bc(const ReproOptions& o) {
  ScenarioConfig c = scenario_preset("low-loss");
  if (o.quick) c.duration = 30;
  c.seed = base_seed(o, 61);
  const SessionReport r = run_session(c);
  Writer w(o, "fig3bc");
  w.csv << "t_s,total_jitter_ps,sync_jitter_ps,total_jitter_frozen_ps,sync_jitter_frozen_ps,reference_jitter_ps,"
           "skew_est,status\n";
  for (const auto& row : r.rows)
    w.csv << row.t_s << ',' << row.total_jitter_ps << ',' << row.sync_jitter_ps << ','
          << row.total_jitter_frozen_ps << ',' << row.sync_jitter_frozen_ps << ',' << row.reference_jitter_ps
          << ',' << row.skew_est << ',' << to_string(row.status) << '\n';
  w.script(
      "fig.set_size_inches(6, 6)\n"
      "ax.plot(col('t_s'), col('total_jitter_ps'), label='tracking')\n"
      "ax.plot(col('t_s'), col('total_jitter_frozen_ps'), label='no tracking')\n"
      "ax.plot(col('t_s'), col('reference_jitter_ps'), label='detector only')\n"
      "ax.set_yscale('log'); ax.set_xlabel('time (s)'); ax.set_ylabel('total jitter (ps)'); ax.legend()\n");
}

const std::map<std::string, void (*)(const ReproOptions&)>& table() {
  static const std::map<std::string, void (*)(const ReproOptions&)> t = {
      {"fig1c", fig1c}, {"fig1d", fig1d}, {"fig1e", fig1e}, {"fig2", fig2}, {"fig3a", fig3a}, {"fig3bc", fig3bc}};
  return t;
}

}  // namespace

const std::vector<std::string>& repro_figures() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, v] : table()) n.push_back(k);
    return n;
  }();
  return names;
}

void run_repro(const std::string& figure, const ReproOptions& options) {
  const auto it = table().find(figure);
  if (it == table().end()) {
    std::string known;
    for (const auto& n : repro_figures()) known += ' ' + n;
    throw UsageError("unknown figure '" + figure + "'; known:" + known);
  }
  std::filesystem::create_directories(options.out_dir);
  it->second(options);
}

}  // namespace photonsync::cli
