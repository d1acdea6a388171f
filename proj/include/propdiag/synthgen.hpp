#pragma once
// synthgen.hpp - phenomenological flight-log generator. Not a dynamics
// simulation: it reproduces the observable signatures damage leaves in IMU
// and control-command streams.
//
// Signal model per channel:
//   * maneuver content: band-limited noise below 20 Hz (random sinusoid
//     bank), scaled per flight phase (hover / soft / aggressive),
//   * one vibration tone per rotor at its instantaneous rotation frequency,
//     injected into acc/gyro x,y as a rotating vector (reduced in z) and
//     echoed faintly into the commanded torques,
//   * white measurement noise.
// Damage effects:
//   * tip cuts raise the damaged rotor's frequency with (cut1+cut2) and add
//     imbalance amplitude with |cut1-cut2|; longitudinal slits lower the
//     frequency and raise amplitude with depth,
//   * the controller holds attitude against the thrust deficit, leaving a
//     roll/pitch torque bias opposite the damaged motor's azimuth whose
//     magnitude tracks the flight's loading (plus motor-agnostic yaw/thrust
//     echoes). Loading swings make the bias wander along its own axis,
//     which is what makes the opposite rotor the natural confusion.
// Tones are sampled in continuous time at 222 Hz, so super-Nyquist rotor
// frequencies fold back into the observable band on their own.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "propdiag/flightlog.hpp"
#include "propdiag/geometry.hpp"
#include "propdiag/ioutil.hpp"
#include "propdiag/spectral.hpp"

namespace propdiag {

struct SynthCoeffs {
  double base_rotor_hz = 83.0;
  double freq_shift_per_mm = 0.006;      // tipcut: relative rise per mm of cut1+cut2
  double imbalance_amp_per_mm = 0.12;    // acc amplitude per mm of |cut1-cut2|
  double torque_bias_per_mm = 0.0035;    // roll/pitch bias per characteristic mm
  double long_freq_drop_per_mm = 0.002;  // longitudinal: relative drop per mm depth
  double long_amp_per_mm = 0.05;         // longitudinal: acc amplitude per mm depth
  // Tuned defaults for the texture around those laws:
  double vib_acc_amp = 0.35;             // healthy per-rotor acc amplitude, m/s^2
  double vib_z_scale = 0.35;
  double vib_gyro_scale = 0.12;          // rad/s of gyro per m/s^2 of acc vibration
  double vib_torque_scale = 0.02;        // commanded-torque echo per m/s^2
  double speed_jitter_rel = 0.0015;      // per-rotor steady speed offset
  double fm_depth_rel = 0.012;           // maneuver-driven frequency wander
  double bias_load_sigma_tipcut = 0.65;  // loading swing of the bias magnitude
  double bias_load_sigma_long = 2.0;     // longitudinal compensation is erratic
  double yaw_bias_scale = 0.5;
  double thrust_bias_scale = 0.3;
};

struct NoiseLevels {
  double acc = 0.05;
  double gyro = 0.012;
  double torque = 0.004;
  double thrust = 0.002;
};

struct PhasePlan {
  double hover_s = 40.0;
  double soft_s = 40.0;
  double aggressive_s = 40.0;
  double total() const { return hover_s + soft_s + aggressive_s; }
};

struct SynthScenario {
  std::string flight_id = "synth";
  DamageLabel damage;
  double duration_s = 120.0;
  double sample_rate_hz = 222.0;
  PhasePlan phases;
  SynthCoeffs coeffs;
  NoiseLevels noise;
  VehicleGeometry geometry = VehicleGeometry::x_quad();
  std::uint64_t seed = 0;
};

namespace detail {

// Sum of fixed random sinusoids, normalized to unit variance: band-limited
// noise that can be evaluated at any instant.
struct SineBank {
  std::vector<double> freq, phase, amp;

  static SineBank draw(std::mt19937_64& rng, int count, double f_lo, double f_hi) {
    SineBank b;
    b.freq.resize(count);
    b.phase.resize(count);
    b.amp.resize(count);
    std::uniform_real_distribution<double> uf(f_lo, f_hi);
    std::uniform_real_distribution<double> up(0.0, 2.0 * std::numbers::pi);
    double power = 0.0;
    for (int i = 0; i < count; ++i) {
      b.freq[i] = uf(rng);
      b.phase[i] = up(rng);
      b.amp[i] = 1.0 / (1.0 + b.freq[i] / 3.0);  // low frequencies dominate
      power += 0.5 * b.amp[i] * b.amp[i];
    }
    const double norm = 1.0 / std::sqrt(power);
    for (double& a : b.amp) a *= norm;
    return b;
  }

  double at(double t) const {
    double v = 0.0;
    for (std::size_t i = 0; i < freq.size(); ++i)
      v += amp[i] * std::sin(2.0 * std::numbers::pi * freq[i] * t + phase[i]);
    return v;
  }
};

inline double smoothstep01(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

// Piecewise phase envelope with 2 s blends at the phase boundaries.
struct PhaseEnvelope {
  double t1, t2;  // hover->soft, soft->aggressive
  double v_hover, v_soft, v_aggr;
  double at(double t) const {
    constexpr double tau = 2.0;
    double v = v_hover;
    v += (v_soft - v_hover) * smoothstep01((t - t1) / tau + 0.5);
    v += (v_aggr - v_soft) * smoothstep01((t - t2) / tau + 0.5);
    return v;
  }
};

}  // namespace detail

// Characteristic millimeters driving controller compensation: lost tip
// surface for cuts; slit depth for longitudinal damage (no surface lost, the
// effect per mm is weaker).
inline double bias_char_mm(const DamageLabel& label) {
  switch (label.kind) {
    case DamageKind::healthy: return 0.0;
    case DamageKind::tipcut: return label.sum_mm();
    case DamageKind::longitudinal: return label.depth_mm();
  }
  return 0.0;
}

inline double damaged_rotor_hz(const DamageLabel& label, const SynthCoeffs& c) {
  switch (label.kind) {
    case DamageKind::healthy: return c.base_rotor_hz;
    case DamageKind::tipcut: return c.base_rotor_hz * (1.0 + c.freq_shift_per_mm * label.sum_mm());
    case DamageKind::longitudinal:
      return c.base_rotor_hz * (1.0 - c.long_freq_drop_per_mm * label.depth_mm());
  }
  return c.base_rotor_hz;
}

inline FlightLog simulate_flight(const SynthScenario& sc) {
  if (sc.duration_s <= 0.0) throw std::invalid_argument("synth: duration must be positive");
  if (sc.sample_rate_hz <= 0.0) throw std::invalid_argument("synth: sample rate must be positive");
  if (sc.phases.hover_s < 0.0 || sc.phases.soft_s < 0.0 || sc.phases.aggressive_s < 0.0 ||
      sc.phases.total() <= 0.0)
    throw std::invalid_argument("synth: bad phase plan");
  sc.geometry.validate();
  sc.damage.validate(sc.geometry.n_rotors);

  const SynthCoeffs& c = sc.coeffs;
  const int n_rotors = sc.geometry.n_rotors;
  const double fs = sc.sample_rate_hz;
  const std::size_t n = static_cast<std::size_t>(std::llround(sc.duration_s * fs));

  // Phase boundaries scaled to the requested duration.
  const double scale = sc.duration_s / sc.phases.total();
  const double t1 = sc.phases.hover_s * scale;
  const double t2 = t1 + sc.phases.soft_s * scale;
  const detail::PhaseEnvelope man_env{t1, t2, 0.12, 0.45, 1.0};
  const detail::PhaseEnvelope fm_env{t1, t2, 0.0, 0.45, 1.0};
  const detail::PhaseEnvelope load_env{t1, t2, 0.3, 0.8, 1.0};

  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Maneuver banks, one per channel; amplitudes per channel group.
  constexpr int kManeuverSines = 16;
  const double man_amp[kNumChannels] = {0.8, 0.8, 1.0, 0.35, 0.35, 0.18, 0.035, 0.035, 0.015, 0.06};
  std::vector<detail::SineBank> maneuver;
  maneuver.reserve(kNumChannels);
  for (int ch = 0; ch < kNumChannels; ++ch)
    maneuver.push_back(detail::SineBank::draw(rng, kManeuverSines, 0.15, 18.0));

  // Loading process: very slow, shared by all bias terms.
  const detail::SineBank loading = detail::SineBank::draw(rng, 8, 0.05, 0.6);

  // Per-rotor frequency wander banks and steady offsets.
  std::vector<detail::SineBank> fm_banks;
  std::vector<double> speed_offset(n_rotors), amp_jitter(n_rotors);
  for (int r = 0; r < n_rotors; ++r) fm_banks.push_back(detail::SineBank::draw(rng, 4, 0.1, 1.2));
  for (int r = 0; r < n_rotors; ++r) speed_offset[r] = c.speed_jitter_rel * normal(rng);
  for (int r = 0; r < n_rotors; ++r) amp_jitter[r] = 1.0 + 0.08 * normal(rng);

  // Per-rotor phase offsets for each injected tone component.
  std::uniform_real_distribution<double> uphase(0.0, 2.0 * std::numbers::pi);
  std::vector<std::array<double, 6>> psi(n_rotors);
  for (int r = 0; r < n_rotors; ++r)
    for (int k = 0; k < 6; ++k) psi[r][k] = uphase(rng);

  const int damaged = sc.damage.motor - 1;  // -1 when healthy
  const double f_damaged = damaged_rotor_hz(sc.damage, c);
  const double bias_mag = c.torque_bias_per_mm * bias_char_mm(sc.damage);
  const double load_sigma = sc.damage.kind == DamageKind::longitudinal
                                ? c.bias_load_sigma_long
                                : c.bias_load_sigma_tipcut;
  double ux = 0.0, uy = 0.0;
  if (damaged >= 0) {
    ux = std::cos(sc.geometry.rotor_angles_rad[damaged]);
    uy = std::sin(sc.geometry.rotor_angles_rad[damaged]);
  }

  // Rotor amplitudes (acc units). Damaged rotor: spin-speed gain plus the
  // damage-specific amplitude term.
  std::vector<double> rotor_amp(n_rotors);
  std::vector<double> rotor_hz(n_rotors);
  for (int r = 0; r < n_rotors; ++r) {
    double base = (r == damaged) ? f_damaged : c.base_rotor_hz;
    rotor_hz[r] = base * (1.0 + speed_offset[r]);
    double amp = c.vib_acc_amp * amp_jitter[r];
    if (r == damaged) {
      double ratio = f_damaged / c.base_rotor_hz;
      amp = c.vib_acc_amp * amp_jitter[r] * ratio * ratio;
      if (sc.damage.kind == DamageKind::tipcut)
        amp += c.imbalance_amp_per_mm * sc.damage.diff_mm();
      else
        amp += c.long_amp_per_mm * sc.damage.depth_mm();
    }
    rotor_amp[r] = amp;
  }

  FlightLog log;
  log.flight_id = sc.flight_id;
  log.sample_rate_hz = fs;
  log.label = sc.damage;
  log.records.resize(n);

  std::vector<double> theta(n_rotors, 0.0);
  for (int r = 0; r < n_rotors; ++r) theta[r] = psi[r][0];

  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double man = man_env.at(t);
    const double lam = 1.0 + load_sigma * load_env.at(t) * loading.at(t);

    ImuRecord& rec = log.records[i];
    rec.t = t;
    rec.ax = man_amp[0] * man * maneuver[0].at(t);
    rec.ay = man_amp[1] * man * maneuver[1].at(t);
    rec.az = -9.81 + man_amp[2] * man * maneuver[2].at(t);
    rec.gx = man_amp[3] * man * maneuver[3].at(t);
    rec.gy = man_amp[4] * man * maneuver[4].at(t);
    rec.gz = man_amp[5] * man * maneuver[5].at(t);
    rec.qx = man_amp[6] * man * maneuver[6].at(t);
    rec.qy = man_amp[7] * man * maneuver[7].at(t);
    rec.qz = man_amp[8] * man * maneuver[8].at(t);
    rec.thrust = 0.5 + man_amp[9] * man * maneuver[9].at(t);

    for (int r = 0; r < n_rotors; ++r) {
      const double a = rotor_amp[r];
      const double th = theta[r];
      rec.ax += a * std::cos(th);
      rec.ay += a * std::sin(th);
      rec.az += c.vib_z_scale * a * std::sin(th + psi[r][1]);
      const double g = c.vib_gyro_scale * a;
      rec.gx += g * std::cos(th + psi[r][2]);
      rec.gy += g * std::sin(th + psi[r][2]);
      rec.gz += 0.35 * g * std::sin(th + psi[r][3]);
      const double q = c.vib_torque_scale * a;
      rec.qx += q * std::cos(th + psi[r][4]);
      rec.qy += q * std::sin(th + psi[r][4]);
      rec.qz += 0.4 * q * std::sin(th + psi[r][5]);
      rec.thrust += 0.15 * q * std::sin(th + psi[r][5]);

      // Advance the tone phase with the instantaneous frequency.
      double f_inst = rotor_hz[r] * (1.0 + c.fm_depth_rel * fm_env.at(t) * fm_banks[r].at(t));
      theta[r] += 2.0 * std::numbers::pi * f_inst / fs;
    }

    if (damaged >= 0) {
      const double bias = bias_mag * lam;
      rec.qx += -ux * bias;
      rec.qy += -uy * bias;
      rec.qz += c.yaw_bias_scale * bias;
      rec.thrust += c.thrust_bias_scale * bias;
    }

    rec.ax += sc.noise.acc * normal(rng);
    rec.ay += sc.noise.acc * normal(rng);
    rec.az += sc.noise.acc * normal(rng);
    rec.gx += sc.noise.gyro * normal(rng);
    rec.gy += sc.noise.gyro * normal(rng);
    rec.gz += sc.noise.gyro * normal(rng);
    rec.qx += sc.noise.torque * normal(rng);
    rec.qy += sc.noise.torque * normal(rng);
    rec.qz += sc.noise.torque * normal(rng);
    rec.thrust += sc.noise.thrust * normal(rng);
    rec.thrust = std::clamp(rec.thrust, 0.0, 1.0);
  }
  return log;
}

// ---- default corpus --------------------------------------------------------

struct CorpusEntry {
  std::string id;
  DamageLabel label;
  int target_windows;  // with the 222/32 window law
};

// One flight per studied damage level, all on motor 1; window targets match
// the reference recording campaign.
inline std::vector<CorpusEntry> default_corpus_plan() {
  std::vector<CorpusEntry> plan;
  plan.push_back({"healthy", DamageLabel::healthy(), 1005});
  const std::pair<std::pair<int, int>, int> tipcuts[] = {
      {{5, 5}, 1098},   {{10, 10}, 1043}, {{15, 15}, 1131}, {{20, 20}, 1051},
      {{25, 25}, 902},  {{30, 30}, 784},  {{35, 35}, 763},  {{40, 40}, 752},
      {{0, 5}, 847},    {{0, 10}, 879},   {{0, 15}, 465},   {{10, 15}, 885},
      {{10, 20}, 766}};
  char buf[40];
  for (const auto& [cuts, windows] : tipcuts) {
    std::snprintf(buf, sizeof(buf), "tipcut-%02d-%02d", cuts.first, cuts.second);
    plan.push_back({buf, DamageLabel::tipcut(cuts.first, cuts.second, 1), windows});
  }
  const std::pair<int, int> longs[] = {{10, 863}, {20, 954}, {30, 875}, {40, 968}};
  for (const auto& [depth, windows] : longs) {
    std::snprintf(buf, sizeof(buf), "long-%02d", depth);
    plan.push_back({buf, DamageLabel::longitudinal(depth, 1), windows});
  }
  return plan;
}

struct CorpusConfig {
  SynthCoeffs coeffs;
  NoiseLevels noise;
  VehicleGeometry geometry = VehicleGeometry::x_quad();
  PhasePlan phases;
  double sample_rate_hz = 222.0;
  std::uint64_t seed = 0;
  double window_scale = 1.0;  // shrink flights for quick fixtures
};

inline std::vector<FlightLog> build_corpus(const CorpusConfig& cfg) {
  if (cfg.window_scale <= 0.0) throw std::invalid_argument("corpus: window_scale must be positive");
  std::vector<FlightLog> logs;
  const auto plan = default_corpus_plan();
  logs.reserve(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    int windows = std::max(2, static_cast<int>(std::lround(plan[i].target_windows * cfg.window_scale)));
    std::size_t records = static_cast<std::size_t>(kWindowLen) + 32u * (windows - 1);
    SynthScenario sc;
    sc.flight_id = plan[i].id;
    sc.damage = plan[i].label;
    sc.duration_s = static_cast<double>(records) / cfg.sample_rate_hz;
    sc.sample_rate_hz = cfg.sample_rate_hz;
    sc.phases = cfg.phases;
    sc.coeffs = cfg.coeffs;
    sc.noise = cfg.noise;
    sc.geometry = cfg.geometry;
    sc.seed = mix_seed(cfg.seed, i);
    FlightLog log = simulate_flight(sc);
    // llround can land one short of the target; trim or keep, windows come
    // from the exact record count.
    if (log.records.size() > records) log.records.resize(records);
    logs.push_back(std::move(log));
  }
  return logs;
}

}  // namespace propdiag
