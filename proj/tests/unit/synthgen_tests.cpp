#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <set>

#include "propdiag/spectral.hpp"
#include "propdiag/synthgen.hpp"

using namespace propdiag;

namespace {

SynthScenario hover_scenario(const DamageLabel& label, std::uint64_t seed = 5) {
  SynthScenario sc;
  sc.flight_id = "probe";
  sc.damage = label;
  sc.duration_s = 8.0;
  sc.phases = {1.0, 0.0, 0.0};  // hover only
  sc.seed = seed;
  return sc;
}

// Mean per-bin ax power over all full windows of a log.
std::array<double, kSpectrumBins> mean_ax_spectrum(const FlightLog& log) {
  std::array<double, kSpectrumBins> acc{};
  std::array<double, kWindowLen> series;
  auto wins = extract_windows(log);
  for (const SampleWindow& w : wins) {
    for (int n = 0; n < kWindowLen; ++n) series[n] = w.records[n].ax;
    auto p = power_spectrum(series);
    for (int k = 0; k < kSpectrumBins; ++k) acc[k] += p[k];
  }
  for (double& v : acc) v /= static_cast<double>(wins.size());
  return acc;
}

double band_power(const std::array<double, kSpectrumBins>& p, int lo, int hi) {
  double s = 0.0;
  for (int k = lo; k <= hi; ++k) s += p[k];
  return s;
}

double alias_hz(double f, double rate = 222.0) {
  double r = std::fmod(f, rate);
  return r <= rate / 2.0 ? r : rate - r;
}

}  // namespace

TEST_CASE("simulation is deterministic per seed", "[synthgen]") {
  SynthScenario sc = hover_scenario(DamageLabel::tipcut(10, 20, 2), 77);
  FlightLog a = simulate_flight(sc);
  FlightLog b = simulate_flight(sc);
  REQUIRE(a.records.size() == b.records.size());
  REQUIRE(serialize_log_csv(a) == serialize_log_csv(b));

  sc.seed = 78;
  FlightLog c = simulate_flight(sc);
  REQUIRE(serialize_log_csv(a) != serialize_log_csv(c));
}

TEST_CASE("simulated logs have the right shape and pass validation", "[synthgen]") {
  FlightLog log = simulate_flight(hover_scenario(DamageLabel::healthy()));
  REQUIRE(log.records.size() == static_cast<std::size_t>(std::lround(8.0 * 222.0)));
  REQUIRE(log.sample_rate_hz == 222.0);
  REQUIRE(validate(log).all_ok());
  REQUIRE(log.records[1].t - log.records[0].t == Catch::Approx(1.0 / 222.0));
}

TEST_CASE("rotor frequency laws", "[synthgen]") {
  SynthCoeffs c;
  REQUIRE(damaged_rotor_hz(DamageLabel::healthy(), c) == c.base_rotor_hz);
  REQUIRE(damaged_rotor_hz(DamageLabel::tipcut(20, 20, 1), c) ==
          Catch::Approx(c.base_rotor_hz * (1.0 + 40.0 * c.freq_shift_per_mm)));
  REQUIRE(damaged_rotor_hz(DamageLabel::longitudinal(30, 1), c) ==
          Catch::Approx(c.base_rotor_hz * (1.0 - 30.0 * c.long_freq_drop_per_mm)));

  REQUIRE(bias_char_mm(DamageLabel::healthy()) == 0.0);
  REQUIRE(bias_char_mm(DamageLabel::tipcut(10, 30, 1)) == 40.0);
  REQUIRE(bias_char_mm(DamageLabel::longitudinal(25, 1)) == 25.0);
}

TEST_CASE("healthy hover concentrates accel energy at the rotor rate", "[synthgen]") {
  auto p = mean_ax_spectrum(simulate_flight(hover_scenario(DamageLabel::healthy())));
  int argmax = 0;
  for (int k = 1; k < kSpectrumBins; ++k)
    if (p[k] > p[argmax]) argmax = k;
  REQUIRE(argmax >= 80);
  REQUIRE(argmax <= 86);
}

TEST_CASE("damage moves the damaged rotor's spectral line as prescribed", "[synthgen]") {
  auto healthy = mean_ax_spectrum(simulate_flight(hover_scenario(DamageLabel::healthy())));
  SynthCoeffs c;

  auto expect_line = [&](const DamageLabel& label) {
    double f = alias_hz(damaged_rotor_hz(label, c));
    int bin = static_cast<int>(std::lround(f));
    auto p = mean_ax_spectrum(simulate_flight(hover_scenario(label)));
    INFO("expected line near bin " << bin);
    REQUIRE(band_power(p, bin - 2, bin + 2) > 5.0 * band_power(healthy, bin - 2, bin + 2));
  };

  expect_line(DamageLabel::tipcut(20, 20, 1));   // ~103 Hz
  expect_line(DamageLabel::tipcut(40, 40, 1));   // ~123 Hz, aliases to ~99
  expect_line(DamageLabel::longitudinal(40, 1)); // ~76 Hz
}

TEST_CASE("asymmetric cuts amplify the damaged rotor's line", "[synthgen]") {
  auto sym = mean_ax_spectrum(simulate_flight(hover_scenario(DamageLabel::tipcut(15, 15, 1))));
  auto asym = mean_ax_spectrum(simulate_flight(hover_scenario(DamageLabel::tipcut(0, 30, 1))));
  // same sum of cuts, so the line sits at the same frequency, but only the
  // asymmetric cut spins an unbalanced mass
  SynthCoeffs c;
  int bin = static_cast<int>(
      std::lround(alias_hz(c.base_rotor_hz * (1.0 + 30.0 * c.freq_shift_per_mm))));
  REQUIRE(band_power(asym, bin - 3, bin + 3) > 2.0 * band_power(sym, bin - 3, bin + 3));
}

TEST_CASE("the default corpus plan covers all damage classes once", "[synthgen]") {
  auto plan = default_corpus_plan();
  REQUIRE(plan.size() == 18);
  std::set<std::string> ids;
  int healthy = 0, tipcut = 0, longitudinal = 0;
  for (const CorpusEntry& e : plan) {
    ids.insert(e.id);
    REQUIRE(e.target_windows > 0);
    REQUIRE_NOTHROW(e.label.validate());
    switch (e.label.kind) {
      case DamageKind::healthy: ++healthy; break;
      case DamageKind::tipcut: ++tipcut; break;
      case DamageKind::longitudinal: ++longitudinal; break;
    }
    if (e.label.kind != DamageKind::healthy) REQUIRE(e.label.motor == 1);
  }
  REQUIRE(ids.size() == 18);  // unique ids
  REQUIRE(healthy == 1);
  REQUIRE(tipcut == 13);
  REQUIRE(longitudinal == 4);
}

TEST_CASE("corpus builder hits the scaled window targets exactly", "[synthgen]") {
  CorpusConfig cfg;
  cfg.window_scale = 0.02;
  cfg.seed = 9;
  std::vector<FlightLog> logs = build_corpus(cfg);
  auto plan = default_corpus_plan();
  REQUIRE(logs.size() == plan.size());
  for (std::size_t i = 0; i < logs.size(); ++i) {
    REQUIRE(logs[i].flight_id == plan[i].id);
    REQUIRE(logs[i].label == plan[i].label);
    std::size_t want =
        static_cast<std::size_t>(std::max<long>(2, std::lround(plan[i].target_windows * 0.02)));
    REQUIRE(extract_windows(logs[i]).size() == want);
  }
  REQUIRE_THROWS_AS(build_corpus([] {
                      CorpusConfig c;
                      c.window_scale = 0.0;
                      return c;
                    }()),
                    std::invalid_argument);
}

TEST_CASE("scenario validation rejects nonsense", "[synthgen]") {
  SynthScenario sc = hover_scenario(DamageLabel::healthy());
  sc.duration_s = -1.0;
  REQUIRE_THROWS_AS(simulate_flight(sc), std::invalid_argument);

  sc = hover_scenario(DamageLabel::tipcut(10, 10, 7));  // motor out of range
  REQUIRE_THROWS_AS(simulate_flight(sc), std::invalid_argument);

  sc = hover_scenario(DamageLabel::healthy());
  sc.phases = {0.0, 0.0, 0.0};
  REQUIRE_THROWS_AS(simulate_flight(sc), std::invalid_argument);
}
