// Acceptance gate: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <bisim/archive.hpp>
#include <bisim/channel.hpp>
#include <bisim/config.hpp>
#include <bisim/echo.hpp>
#include <bisim/fusion.hpp>
#include <bisim/geometry.hpp>
#include <bisim/illumination.hpp>
#include <bisim/parallel.hpp>
#include <bisim/runner.hpp>
#include <bisim/scattering.hpp>

#include "oracles.hpp"
#include "scenes.hpp"

namespace {

using bisim::Vec3;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double t = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool in_time = t < budget_s;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("CRITERION %2d %s  %s | %s | %.2f s (limit %.0f s)%s\n", id, pass ? "PASS" : "FAIL", title,
              o.detail.c_str(), t, budget_s, in_time ? "" : " over time");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Criteria 3 to 6 pipelines, rerun by criterion 10.
struct Pipeline {
  std::string name;
  std::string subcommand;
  bisim::RunConfig config;
  std::vector<std::uint8_t> bytes;  // one worker, first run
  double seconds = 0.0;
};
std::vector<Pipeline> pipelines;

bisim::RunResult run_pipeline(const std::string& name, const std::string& sub, const bisim::RunConfig& config) {
  bisim::set_worker_count(1);
  const auto t0 = Clock::now();
  auto result = bisim::run(sub, config);
  const double t = std::chrono::duration<double>(Clock::now() - t0).count();
  pipelines.push_back({name, sub, config, result.archive.encode(), t});
  return result;
}

// Position of the largest |value| of an [rows × cols] complex dataset, optionally skipping one column.
std::pair<long, long> argmax(const bisim::Dataset& d, long skip_col = -1) {
  const auto cols = static_cast<long>(d.shape[1]);
  double best = -1.0;
  std::pair<long, long> at{-1, -1};
  for (std::size_t i = 0; i < d.complex_values.size(); ++i) {
    const long r = static_cast<long>(i) / cols;
    const long c = static_cast<long>(i) % cols;
    if (c == skip_col) continue;
    const double v = std::norm(d.complex_values[i]);
    if (v > best) {
      best = v;
      at = {r, c};
    }
  }
  return at;
}

double mid_time(const bisim::RunConfig& c) { return c.scene.start_time + 0.5 * c.waveform.observation_time(); }

// --- criteria --------------------------------------------------------------

Outcome numerology() {
  const auto w = bisim::WaveformConfig::from_numerology(3.7e9, 160e6, 1280, 2500);
  w.validate();
  const double df = w.subcarrier_spacing();
  const double t_sym = w.symbol_duration;
  const double t_obs = w.observation_time();
  const bool ok = df == 125e3 && std::abs(t_sym - 8e-6) <= 1e-12 * 8e-6 && std::abs(t_obs - 20e-3) <= 1e-12 * 20e-3;
  const auto cfg = bisim::parse_config(R"(
scene:
  transmitters: [{id: gnb, position: [0, 0, 10]}]
  receivers: [{id: ue, position: [60, 0, 1.5]}]
waveform: {carrier_hz: 3.7e9, bandwidth_hz: 160e6, subcarriers: 1280, symbols: 2500}
)");
  const bool cfg_ok = cfg.waveform.subcarrier_spacing() == 125e3 &&
                      std::abs(cfg.waveform.observation_time() - 20e-3) <= 1e-12 * 20e-3;
  return {ok && cfg_ok, fmt("df = %.6f Hz, T_sym = %.9g s, 2500 symbols = %.9g s", df, t_sym, t_obs)};
}

Outcome doppler_oracle() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> pos(-200.0, 200.0);
  std::uniform_real_distribution<double> vel(-40.0, 40.0);
  std::uniform_real_distribution<double> freq(0.5e9, 30e9);
  const auto rand_vec = [&](auto& dist) { return Vec3(dist(rng), dist(rng), dist(rng)); };
  double worst = 0.0;
  std::size_t n = 0;
  while (n < 2000) {
    const oracle::Mover tx{rand_vec(pos), rand_vec(vel)};
    const oracle::Mover rx{rand_vec(pos), rand_vec(vel)};
    const oracle::Mover tgt{rand_vec(pos), rand_vec(vel)};
    if ((tgt.p0 - tx.p0).norm() < 1.0 || (tgt.p0 - rx.p0).norm() < 1.0) continue;
    const double lambda = oracle::c0 / freq(rng);
    const double f = bisim::bistatic_doppler({tx.p0, tx.v, "tx"}, {rx.p0, rx.v, "rx"}, tgt.p0, tgt.v, lambda);
    const double ref = oracle::fd_doppler(tx, rx, tgt, lambda);
    worst = std::max(worst, std::abs(f - ref) / std::max(std::abs(ref), 1.0));
    ++n;
  }
  return {worst <= 1e-6, fmt("%zu scenes, worst relative error %.3g (limit 1e-6)", n, worst)};
}

Outcome clutter_collapse() {
  const auto cfg = bisim::parse_config(scenes::kClutterCollapse);
  if (cfg.scene.clutter.size() < 5) return {false, "scene has fewer than 5 clutter paths"};
  // Clutter-only energy share of the 0 Hz column, noiseless.
  auto quiet = cfg;
  quiet.noise = {};
  const auto clutter_map = bisim::delay_doppler_map(bisim::synthesize_link(quiet, 0, false));
  const auto zero = static_cast<Eigen::Index>(clutter_map.zero_doppler_column());
  const double share = clutter_map.data.col(zero).squaredNorm() / clutter_map.data.squaredNorm();

  const auto result = run_pipeline("clutter-collapse", "ddmap", cfg);
  const auto& map = result.archive.get("ddmap/gnb-ue");
  const auto peak = argmax(map, static_cast<long>(map.shape[1] / 2));

  const Vec3 tx(0, 0, 10), rx(80, 0, 2);
  const Vec3 p = Vec3(40, -25, 1) + Vec3(3, 10, 0) * mid_time(cfg);
  const double lambda = cfg.waveform.wavelength();
  const double delay = oracle::bistatic_range(tx, rx, p) / oracle::c0;
  const double fd = oracle::doppler_static_nodes(tx, rx, p, Vec3(3, 10, 0), lambda);
  const auto want = oracle::predicted_bins(delay, fd, cfg.waveform.bandwidth_hz, cfg.waveform.n_subcarriers,
                                           cfg.waveform.n_symbols, cfg.waveform.symbol_duration);
  const bool ok = share >= 0.999 && peak.first == want.delay && peak.second == want.doppler;
  return {ok, fmt("0 Hz share %.6f%% of clutter energy; target peak (%ld, %ld), predicted (%ld, %ld)", 100.0 * share,
                  peak.first, peak.second, want.delay, want.doppler)};
}

Outcome clean_efficacy() {
  const auto cfg = bisim::parse_config(scenes::kCleanStreet);
  const Vec3 tx(0, 0, 10), rx(60, 0, 1.5), car(30, -20, 1);
  const double target_to_los = 20.0 * std::log10(0.7 * (tx - rx).norm() / ((car - tx).norm() * (car - rx).norm()));

  const auto full = bisim::synthesize_link(cfg, 0, true);
  const auto statics = bisim::synthesize_link(cfg, 0, false);
  const auto cleaned = bisim::subtract_dominant_paths(full, 2, cfg.processing.clean);
  // residual = static leftovers + target, by linearity
  const bisim::ComplexMatrix leftover = cleaned.residual.data - (full.data - statics.data);
  const double static_db = 10.0 * std::log10(leftover.squaredNorm() / statics.data.squaredNorm());

  const auto result = run_pipeline("clean-street", "ddmap", cfg);
  const auto& map = result.archive.get("ddmap/gnb-ue");
  const auto peak = argmax(map);
  const Vec3 p = car + Vec3(0, 12, 0) * mid_time(cfg);
  const double fd = oracle::doppler_static_nodes(tx, rx, p, Vec3(0, 12, 0), cfg.waveform.wavelength());
  const auto want = oracle::predicted_bins(oracle::bistatic_range(tx, rx, p) / oracle::c0, fd,
                                           cfg.waveform.bandwidth_hz, cfg.waveform.n_subcarriers,
                                           cfg.waveform.n_symbols, cfg.waveform.symbol_duration);
  const bool target_peak = peak.first == want.delay && peak.second == want.doppler &&
                           peak.second != static_cast<long>(map.shape[1] / 2);
  const bool ok = std::abs(target_to_los + 30.0) < 0.5 && target_peak && static_db <= -60.0;
  return {ok, fmt("target %.2f dB re LoS; residual static power %.1f dB (limit -60); global peak (%ld, %ld), "
                  "target (%ld, %ld)",
                  target_to_los, static_db, peak.first, peak.second, want.delay, want.doppler)};
}

Outcome micro_doppler() {
  const auto cfg = bisim::parse_config(scenes::kRotor);
  const auto result = run_pipeline("rotor", "spectrogram", cfg);
  const auto& d = result.archive.get("spectrogram/tx-rx");
  const auto frames = static_cast<std::size_t>(d.shape[0]);
  const auto bins = static_cast<std::size_t>(d.shape[1]);
  const auto& freq = d.axes[1].values;
  std::vector<double> mean(bins, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t b = 0; b < bins; ++b) mean[b] += std::pow(10.0, d.real_values[f * bins + b] / 10.0);
  }
  for (double& v : mean) v = 10.0 * std::log10(v / static_cast<double>(frames));
  const auto support = oracle::level_support(freq, mean, -20.0);

  const double bound = oracle::rotor_tip_bound(Vec3::Zero(), Vec3::UnitZ(), 0.12, 625.0, Vec3(20, 0, 0),
                                               Vec3(0, 17.320508075688775, 10), cfg.waveform.wavelength());
  const double err_hi = (support.upper - bound) / bound;
  const double err_lo = (-support.lower - bound) / bound;

  // Continuity: every bin from the lower to the upper crossing stays above −20 dB.
  const double peak = *std::max_element(mean.begin(), mean.end());
  std::size_t gaps = 0;
  double dip = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (freq[b] <= support.lower || freq[b] >= support.upper) continue;
    dip = std::min(dip, mean[b] - peak);
    if (mean[b] - peak < -20.0) ++gaps;
  }
  const bool reaches = support.lower < 0.0 && support.upper > 0.0 && -support.lower >= 0.9 * bound &&
                       support.upper >= 0.9 * bound;
  const bool ok = std::abs(err_hi) <= 0.05 && std::abs(err_lo) <= 0.05 && gaps == 0 && reaches;
  return {ok, fmt("tip bound %.1f Hz; -20 dB support [%.1f, %.1f] Hz (%+.2f%%, %+.2f%%, limit 5%%); "
                  "%zu gap bins, deepest in-band dip %.1f dB",
                  bound, support.lower, support.upper, 100.0 * err_lo, 100.0 * err_hi, gaps, dip)};
}

Outcome flyover_trend() {
  const auto cfg = bisim::parse_config(scenes::kFlyover);
  const auto result = run_pipeline("flyover", "flyover", cfg);
  const auto& spread = result.archive.get("delay_spread").real_values;
  const auto& angles = result.archive.get("delay_spread").axes[0].values;
  const auto& s = result.summary.at("flyover");
  const double system_ns = s.at("system_extent_ns").get<double>();
  const double cell_ns = 1e9 / (cfg.flyover.band.f_hi - cfg.flyover.band.f_lo);

  const auto at = [&](double deg) {
    const auto it = std::find_if(angles.begin(), angles.end(), [&](double a) { return std::abs(a - deg) < 1e-9; });
    return spread[static_cast<std::size_t>(it - angles.begin())];
  };
  const double s10 = at(10.0);
  const double s170 = at(170.0);
  bool monotone = true;
  double widest = 0.0;
  for (std::size_t i = 0; i < spread.size(); ++i) {
    if (i > 0 && spread[i] > spread[i - 1] + cell_ns) monotone = false;
    widest = std::max(widest, spread[i] + system_ns);
  }
  // Geometric delay difference of the two scatterers at 10°.
  const Vec3 a(0.11490666646784669, 0, 0.09641814145298090);
  const Vec3 tx(3, 0, 0);
  const Vec3 rx = 3.0 * Vec3(std::cos(10 * oracle::pi / 180), std::sin(10 * oracle::pi / 180), 0);
  const double geo_ns = std::abs(oracle::bistatic_range(tx, rx, a) - oracle::bistatic_range(tx, rx, -a)) / oracle::c0 * 1e9;

  const bool ok = s170 < 0.5 * s10 && monotone && std::abs(s10 - 1.5) <= 0.25 && std::abs(s10 - geo_ns) <= cell_ns &&
                  widest <= cfg.flyover.gate_width_ns;
  return {ok, fmt("spread(10) %.3f ns (geometric %.3f, reference 1.5 +- 0.25), spread(170) %.4f ns; monotone within %.4f ns: %s; "
                  "widest extent %.3f ns in a %.1f ns gate",
                  s10, geo_ns, s170, cell_ns, monotone ? "yes" : "no", widest, cfg.flyover.gate_width_ns)};
}

Outcome fusion_closed_loop() {
  std::mt19937_64 rng(777);
  std::uniform_real_distribution<double> node(-120.0, 120.0);
  std::uniform_real_distribution<double> tgt(-60.0, 60.0);
  std::uniform_real_distribution<double> vel(-25.0, 25.0);
  const double lambda = oracle::c0 / 3.7e9;
  std::size_t scenes_run = 0, pos_fail = 0, vel_fail = 0;
  double worst_p = 0.0, worst_v = 0.0;
  while (scenes_run < 100) {
    const Vec3 tx(node(rng), node(rng), 0.0);
    std::vector<Vec3> rxs;
    for (int i = 0; i < 3; ++i) rxs.emplace_back(node(rng), node(rng), 0.0);
    const Vec3 p(tgt(rng), tgt(rng), 0.0);
    const Vec3 v(vel(rng), vel(rng), 0.0);
    std::vector<std::pair<Vec3, Vec3>> links;
    bool usable = true;
    for (const auto& rx : rxs) {
      links.emplace_back(tx, rx);
      usable = usable && (p - rx).norm() > 5.0 && (p - tx).norm() > 5.0 && oracle::excess_range(tx, rx, p) > 1.0;
    }
    if (!usable || oracle::position_gdop_2d(links, p) > 3.0) continue;  // well-conditioned only

    bisim::NodeTable nodes{{"tx", {tx, Vec3::Zero(), "tx"}}};
    std::vector<bisim::BistaticObservation> obs;
    for (int i = 0; i < 3; ++i) {
      const std::string id = "rx" + std::to_string(i);
      nodes[id] = {rxs[static_cast<std::size_t>(i)], Vec3::Zero(), id};
      const Vec3& rx = rxs[static_cast<std::size_t>(i)];
      obs.push_back({"tx", id, oracle::excess_range(tx, rx, p) / oracle::c0,
                     oracle::doppler_static_nodes(tx, rx, p, v, lambda), lambda, 0.0, 1.0});
    }
    const auto est = bisim::fuse(obs, nodes);
    const double ep = (est.position - p).norm();
    const double ev = (est.velocity - v).norm();
    worst_p = std::max(worst_p, ep);
    worst_v = std::max(worst_v, ev);
    pos_fail += ep > 1e-6;
    vel_fail += ev > 1e-9;
    ++scenes_run;
  }

  // One link, velocity tangential to the iso-range ellipse at its vertex.
  const Vec3 tx(-50, 0, 0), rx(50, 0, 0), p(0, 40, 0), v(7, 0, 0);
  bisim::NodeTable nodes{{"tx", {tx, Vec3::Zero(), "tx"}}, {"rx", {rx, Vec3::Zero(), "rx"}}};
  const double fd = bisim::bistatic_doppler(nodes["tx"], nodes["rx"], p, v, lambda);
  const double excess = oracle::excess_range(tx, rx, p) / oracle::c0;
  const auto blind = bisim::estimate_velocity({{"tx", "rx", excess, fd, lambda, 0.0, 1.0}}, p, nodes);
  const bool blind_ok = std::abs(fd) < 1e-9 && blind.velocity_rank == 1;

  const bool ok = pos_fail == 0 && vel_fail == 0 && blind_ok;
  return {ok, fmt("%zu scenes: worst position error %.2e m, velocity error %.2e m/s (%zu/%zu over limit); "
                  "tangential link f_D = %.1e Hz, rank %zu",
                  scenes_run, worst_p, worst_v, pos_fail, vel_fail, fd, blind.velocity_rank)};
}

Outcome focusing() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * oracle::pi);
  const std::size_t k = 1280;
  std::vector<std::size_t> bins(k);
  for (std::size_t i = 0; i < k; ++i) bins[i] = i;
  std::shuffle(bins.begin(), bins.end(), rng);
  bisim::ComplexVector cfr(k, {0.0, 0.0});
  for (std::size_t i = 0; i < 8; ++i) {
    const bisim::Complex a = std::polar(1.0, phase(rng));
    for (std::size_t n = 0; n < k; ++n) {
      cfr[n] += a * std::polar(1.0, -2.0 * oracle::pi * static_cast<double>((n * bins[i]) % k) / static_cast<double>(k));
    }
  }
  const auto report = bisim::focusing_gain(cfr);
  const double gain_err = std::abs(report.gain - 8.0) / 8.0;

  std::uniform_real_distribution<double> dop(-800.0, 800.0);
  std::uniform_real_distribution<double> amp(0.1, 2.0);
  std::vector<bisim::PathParameterSet> paths(8);
  std::vector<double> power, freq;
  for (auto& p : paths) {
    p.doppler = dop(rng);
    p.gain = std::polar(amp(rng), phase(rng));
    power.push_back(std::norm(p.gain));
    freq.push_back(p.doppler);
  }
  const auto comp = bisim::doppler_precompensate(paths);
  const double before = oracle::weighted_spread(power, freq);
  const bool ok = gain_err <= 1e-6 && std::abs(comp.spread_before - before) <= 1e-9 * before &&
                  comp.spread_after <= 1e-9 * before;
  return {ok, fmt("focusing gain %.9f (target 8, rel err %.1e); Doppler spread %.2f Hz -> %.2e Hz", report.gain,
                  gain_err, comp.spread_before, comp.spread_after)};
}

Outcome link_budget() {
  const double rcs = 1.0, d_tx = 120.0, d_rx = 85.0, pt = 30.0;
  const double lambda = oracle::c0 / 3.7e9;
  const bisim::ScattererState s{Vec3::Zero(), Vec3::Zero(), {bisim::scattering_length_for_rcs(rcs), 0.0},
                                bisim::JonesMatrix::Identity()};
  const bisim::NodePose tx{Vec3(-d_tx, 0, 0), Vec3::Zero(), "tx"};
  const bisim::NodePose rx{Vec3(0, d_rx, 0), Vec3::Zero(), "rx"};
  auto w = bisim::WaveformConfig::from_numerology(3.7e9, 160e6, 1280, 1);
  const auto cube = bisim::synth_cfr(bisim::paths_from_states({s}, tx, rx, lambda), w, bisim::SynthMode::kFixed);
  const double synthesized = pt + 10.0 * std::log10(cube.mean_power());
  const double expected = oracle::radar_equation_dbm(pt, lambda, rcs, d_tx, d_rx);

  bisim::LinkBudget b;
  b.tx_power_dbm = pt;
  b.wavelength = lambda;
  b.d_tx = d_tx;
  b.d_rx = d_rx;
  b.rcs = rcs;
  const auto lb = bisim::link_budget(b);
  const double gain_ref = 10.0 * std::log10(1280.0 * 2048.0);
  const bool ok = std::abs(synthesized - expected) <= 0.01 && std::abs(lb.received_power_dbm - expected) <= 0.01 &&
                  std::abs(lb.processing_gain_db - gain_ref) <= 1e-9 && std::abs(lb.processing_gain_db - 64.2) < 0.05;
  return {ok, fmt("synthesized %.4f dBm, radar equation %.4f dBm (diff %.1e dB); processing gain %.3f dB",
                  synthesized, expected, synthesized - expected, lb.processing_gain_db)};
}

Outcome determinism() {
  std::ostringstream detail;
  bool ok = true;
  for (const auto& p : pipelines) {
    double worst_ratio = 0.0;
    bool same = true;
    for (const std::size_t workers : {1, 4, 16}) {
      bisim::set_worker_count(workers);
      const auto t0 = Clock::now();
      const auto bytes = bisim::run(p.subcommand, p.config).archive.encode();
      const double t = std::chrono::duration<double>(Clock::now() - t0).count();
      same = same && bytes == p.bytes;
      worst_ratio = std::max(worst_ratio, t / p.seconds);
    }
    ok = ok && same && worst_ratio < 3.0;
    detail << p.name << (same ? " identical" : " DIFFERS") << fmt(" (%.1fx)", worst_ratio) << "; ";
  }
  bisim::set_worker_count(1);
  if (pipelines.size() != 4) return {false, "criteria 3-6 pipelines missing"};
  return {ok, detail.str() + "1/4/16 workers vs first run, runtime ratio limit 3x"};
}

}  // namespace

int main() {
  bisim::set_worker_count(1);
  report(1, "numerology fidelity", 1, numerology);
  report(2, "Doppler oracle", 10, doppler_oracle);
  report(3, "clutter collapse", 30, clutter_collapse);
  report(4, "CLEAN efficacy", 30, clean_efficacy);
  report(5, "micro-Doppler band", 60, micro_doppler);
  report(6, "flyover delay-spread trend", 120, flyover_trend);
  report(7, "fusion closed loop", 30, fusion_closed_loop);
  report(8, "time-reversal focusing", 5, focusing);
  report(9, "link-budget consistency", 1, link_budget);
  double pipeline_cost = 0.0;
  for (const auto& p : pipelines) pipeline_cost += p.seconds;
  report(10, "determinism", 3.0 * 3.0 * pipeline_cost + 1.0, determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures;
}
