#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "propdiag/spectral.hpp"

using namespace propdiag;

namespace {

std::array<double, kWindowLen> tone(double freq_hz, double amp = 1.0, double phase = 0.0,
                                    double rate_hz = 222.0) {
  std::array<double, kWindowLen> x;
  for (int n = 0; n < kWindowLen; ++n)
    x[n] = amp * std::cos(2.0 * std::numbers::pi * freq_hz * n / rate_hz + phase);
  return x;
}

FlightLog log_of_length(std::size_t n) {
  FlightLog log;
  log.flight_id = "wins";
  log.records.resize(n);
  for (std::size_t i = 0; i < n; ++i) log.records[i].t = static_cast<double>(i) / 222.0;
  return log;
}

}  // namespace

TEST_CASE("spectrum conserves signal energy", "[spectral]") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    std::array<double, kWindowLen> x;
    double time_energy = 0.0;
    for (double& v : x) {
      v = g(rng);
      time_energy += v * v;
    }
    time_energy /= kWindowLen;
    auto p = power_spectrum(x);
    double freq_energy = std::accumulate(p.begin(), p.end(), 0.0);
    REQUIRE(freq_energy == Catch::Approx(time_energy).epsilon(1e-12));
  }
}

TEST_CASE("pure tones land in single bins with known power", "[spectral]") {
  // interior bin: A*cos -> power A^2/2 at that bin, ~0 elsewhere
  auto p40 = power_spectrum(tone(40.0, 2.0, 0.7));
  REQUIRE(p40[40] == Catch::Approx(2.0).epsilon(1e-9));
  double rest = 0.0;
  for (int k = 0; k < kSpectrumBins; ++k)
    if (k != 40) rest += p40[k];
  REQUIRE(rest < 1e-18);

  // DC: constant A -> power A^2 at bin 0
  std::array<double, kWindowLen> dc;
  dc.fill(3.0);
  auto p0 = power_spectrum(dc);
  REQUIRE(p0[0] == Catch::Approx(9.0).epsilon(1e-12));

  // Nyquist bin: alternating +-A -> power A^2 at bin 111
  auto pn = power_spectrum(tone(111.0, 1.5));
  REQUIRE(pn[111] == Catch::Approx(2.25).epsilon(1e-9));
}

TEST_CASE("tones above half-rate alias back down", "[spectral]") {
  // 140 Hz sampled at 222 Hz is indistinguishable from 82 Hz.
  auto p = power_spectrum(tone(140.0));
  int argmax = 0;
  for (int k = 1; k < kSpectrumBins; ++k)
    if (p[k] > p[argmax]) argmax = k;
  REQUIRE(argmax == 82);
}

TEST_CASE("spectrum rejects bad input", "[spectral]") {
  std::vector<double> short_sig(100, 0.0);
  REQUIRE_THROWS_AS(power_spectrum(short_sig), std::invalid_argument);
  std::vector<double> bad(kWindowLen, 0.0);
  bad[5] = std::numeric_limits<double>::quiet_NaN();
  REQUIRE_THROWS_AS(power_spectrum(bad), std::invalid_argument);
}

TEST_CASE("window extraction follows the stride law", "[spectral]") {
  // count = floor((len - 222) / 32) + 1
  REQUIRE(extract_windows(log_of_length(26640)).size() == 826);
  REQUIRE(extract_windows(log_of_length(253)).size() == 1);
  REQUIRE(extract_windows(log_of_length(254)).size() == 2);
  REQUIRE(extract_windows(log_of_length(222)).size() == 1);
  REQUIRE(extract_windows(log_of_length(221)).empty());

  // windows are views; the log must outlive them
  FlightLog log = log_of_length(500);
  auto wins = extract_windows(log);
  REQUIRE(wins.size() == 9);
  for (std::size_t i = 0; i < wins.size(); ++i) {
    REQUIRE(wins[i].start_index == i * 32);
    REQUIRE(wins[i].records.size() == static_cast<std::size_t>(kWindowLen));
    REQUIRE(wins[i].records[0].t == Catch::Approx(static_cast<double>(i * 32) / 222.0));
  }
}

TEST_CASE("band counts follow half-down rounding of 111/width", "[spectral]") {
  REQUIRE(band_count(2) == 55);
  REQUIRE(band_count(3) == 37);
  REQUIRE(band_count(4) == 28);
  REQUIRE(band_count(5) == 22);
  REQUIRE(band_count(6) == 18);
  REQUIRE(band_count(7) == 16);
  REQUIRE(band_count(8) == 14);
  REQUIRE(band_count(10) == 11);
  REQUIRE_THROWS_AS(band_count(9), std::invalid_argument);
  REQUIRE_THROWS_AS(band_count(0), std::invalid_argument);
}

TEST_CASE("bands tile the spectrum and the last band absorbs the tail", "[spectral]") {
  for (int bw : supported_band_widths()) {
    auto ranges = band_ranges(bw);
    REQUIRE(static_cast<int>(ranges.size()) == band_count(bw));
    REQUIRE(ranges.front().first == 0);
    REQUIRE(ranges.back().second == kSpectrumBins);
    for (std::size_t b = 1; b < ranges.size(); ++b)
      REQUIRE(ranges[b].first == ranges[b - 1].second);
    for (std::size_t b = 0; b + 1 < ranges.size(); ++b)
      REQUIRE(ranges[b].second - ranges[b].first == bw);
  }
  // banding is a partition, so band energies sum to the total power
  auto p = power_spectrum(tone(37.3, 1.2, 0.3));
  double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (int bw : supported_band_widths()) {
    auto e = band_energies(p, bw);
    REQUIRE(std::accumulate(e.begin(), e.end(), 0.0) == Catch::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("a 140 Hz tone at 222 Hz lands in the band holding 82 Hz", "[spectral]") {
  for (int bw : supported_band_widths()) {
    auto e = band_energies(power_spectrum(tone(140.0)), bw);
    std::size_t argmax = 0;
    for (std::size_t b = 1; b < e.size(); ++b)
      if (e[b] > e[argmax]) argmax = b;
    auto ranges = band_ranges(bw);
    REQUIRE(ranges[argmax].first <= 82);
    REQUIRE(82 < ranges[argmax].second);
  }
}

TEST_CASE("moment oracles", "[spectral]") {
  const std::vector<double> v{0.0, 0.0, 0.0, 1.0};
  Moments m = moments(v);
  REQUIRE(m.mean == Catch::Approx(0.25).margin(1e-15));
  REQUIRE(m.var == Catch::Approx(0.1875).margin(1e-15));
  REQUIRE(m.skew == Catch::Approx(1.1547005383792515).epsilon(1e-12));
  REQUIRE(m.kurt == Catch::Approx(-2.0 / 3.0).epsilon(1e-12));

  std::vector<double> alt(10);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = (i % 2 == 0) ? 1.0 : -1.0;
  Moments a = moments(alt);
  REQUIRE(a.mean == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(a.var == Catch::Approx(1.0).epsilon(1e-15));
  REQUIRE(a.skew == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(a.kurt == Catch::Approx(-2.0).epsilon(1e-14));

  const std::vector<double> flat(50, 3.7);
  Moments c = moments(flat);
  REQUIRE(c.mean == Catch::Approx(3.7));
  REQUIRE(c.var < 1e-12);
  REQUIRE(c.skew == 0.0);
  REQUIRE(c.kurt == 0.0);

  REQUIRE_THROWS_AS(moments(std::span<const double>{}), std::invalid_argument);
}

TEST_CASE("feature schema obeys the 10*B+12 law", "[spectral]") {
  for (int bw : supported_band_widths()) {
    FeatureSchema s = FeatureSchema::for_band_width(bw);
    REQUIRE(s.n_bands == band_count(bw));
    REQUIRE(s.n_features == 10 * s.n_bands + 12);
    REQUIRE(s.schema_id == "bands-w222-bw" + std::to_string(bw) + "-v1");
  }
  REQUIRE(FeatureSchema::for_band_width(5).n_features == 232);
  REQUIRE(FeatureSchema::for_band_width(2).n_features == 562);
  REQUIRE(FeatureSchema::for_band_width(10).n_features == 122);
  REQUIRE(FeatureSchema::for_band_width(7).n_features == 172);
}

TEST_CASE("schema indexing is a bijection with readable names", "[spectral]") {
  FeatureSchema s = FeatureSchema::for_band_width(5);
  std::vector<int> seen(s.n_features, 0);
  for (int ch = 0; ch < kNumChannels; ++ch)
    for (int b = 0; b < s.n_bands; ++b) seen[s.band_feature(ch, b)]++;
  for (int tc = 0; tc < 3; ++tc)
    for (int m = 0; m < 4; ++m) seen[s.moment_feature(tc, m)]++;
  for (int i = 0; i < s.n_features; ++i) REQUIRE(seen[i] == 1);

  REQUIRE(s.channel_of(s.band_feature(3, 7)) == 3);
  REQUIRE(s.feature_name(s.band_feature(0, 0)).find("ax") != std::string::npos);
  REQUIRE(s.feature_name(s.moment_feature(0, 0)).find("qx") != std::string::npos);
}

TEST_CASE("assembled features equal per-channel band energies plus torque moments",
          "[spectral]") {
  FlightLog log = log_of_length(300);
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    double t = static_cast<double>(i);
    log.records[i].ax = std::sin(0.9 * t);
    log.records[i].gy = 0.4 * std::cos(1.7 * t);
    log.records[i].qx = 0.01 * std::sin(0.3 * t) + 0.002;
    log.records[i].qy = -0.004;
    log.records[i].qz = 0.001 * std::cos(2.3 * t);
    log.records[i].thrust = 0.5 + 0.05 * std::sin(0.11 * t);
  }
  FeatureSchema schema = FeatureSchema::for_band_width(5);
  auto wins = extract_windows(log);
  REQUIRE(wins.size() == 3);
  const SampleWindow& w = wins[1];
  FeatureVector f = assemble_features(w, schema);
  REQUIRE(f.values.size() == static_cast<std::size_t>(schema.n_features));
  REQUIRE(f.schema_id == schema.schema_id);

  // spot-check channel ax and the torque moment block against direct computation
  std::array<double, kWindowLen> series;
  for (int n = 0; n < kWindowLen; ++n) series[n] = w.records[n].ax;
  auto bands = band_energies(power_spectrum(series), 5);
  for (std::size_t b = 0; b < bands.size(); ++b)
    REQUIRE(f.values[static_cast<std::size_t>(schema.band_feature(0, static_cast<int>(b)))] ==
            bands[b]);

  for (int n = 0; n < kWindowLen; ++n) series[n] = w.records[n].qy;
  Moments qm = moments(series);
  REQUIRE(f.values[static_cast<std::size_t>(schema.moment_feature(1, 0))] == qm.mean);
  REQUIRE(f.values[static_cast<std::size_t>(schema.moment_feature(1, 1))] == qm.var);
  REQUIRE(f.values[static_cast<std::size_t>(schema.moment_feature(1, 2))] == qm.skew);
  REQUIRE(f.values[static_cast<std::size_t>(schema.moment_feature(1, 3))] == qm.kurt);
}

TEST_CASE("standardizer normalizes and round-trips through JSON", "[spectral]") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(2.0, 5.0);
  Eigen::MatrixXd x(200, 4);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = g(rng);
  x.col(3).setConstant(7.0);  // degenerate column

  Standardizer s;
  REQUIRE_THROWS_AS(s.apply(x), std::logic_error);
  s.fit(x, "unit-schema");
  Eigen::MatrixXd z = s.apply(x);
  for (Eigen::Index j = 0; j < 3; ++j) {
    REQUIRE(z.col(j).mean() == Catch::Approx(0.0).margin(1e-12));
    double var = (z.col(j).array() - z.col(j).mean()).square().mean();
    REQUIRE(var == Catch::Approx(1.0).epsilon(1e-9));
  }
  REQUIRE(z.col(3).cwiseAbs().maxCoeff() == 0.0);  // variance floor, not a blow-up

  Standardizer back = Standardizer::from_json(s.to_json());
  REQUIRE(back.schema_id == s.schema_id);
  REQUIRE((back.apply(x) - z).cwiseAbs().maxCoeff() == 0.0);
}
