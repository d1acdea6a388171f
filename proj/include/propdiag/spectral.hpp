#pragma once
// spectral.hpp - sliding windows over flight logs, one-sided power spectra,
// band-energy features and torque statistics.
//
// A window is exactly one second of data: 222 samples at 222 Hz. The DFT of
// 222 real samples yields one-sided bins 0..111; bin k sits at exactly k Hz,
// which keeps band bookkeeping in integer hertz. Normalization is chosen so
// the bins partition the mean squared signal (Parseval):
//   P_0 = |X_0|^2/N^2,  P_111 = |X_111|^2/N^2,  P_k = 2|X_k|^2/N^2 otherwise,
//   sum_k P_k == (1/N) * sum_n x_n^2.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "propdiag/flightlog.hpp"

namespace propdiag {

inline constexpr int kWindowLen = 222;
inline constexpr int kWindowStride = 32;
inline constexpr int kSpectrumBins = 112;  // one-sided, 0..111 Hz
inline constexpr int kNumChannels = 10;
inline constexpr int kMomentFeatures = 12;  // mean/var/skew/kurt of qx,qy,qz

// Channel order used everywhere features are laid out.
enum class Channel : int { ax = 0, ay, az, gx, gy, gz, qx, qy, qz, thrust };

inline const char* channel_name(int ch) {
  static constexpr const char* names[kNumChannels] = {"ax", "ay", "az", "gx", "gy",
                                                      "gz", "qx", "qy", "qz", "thrust"};
  return names[ch];
}

inline double channel_value(const ImuRecord& r, int ch) {
  switch (ch) {
    case 0: return r.ax;
    case 1: return r.ay;
    case 2: return r.az;
    case 3: return r.gx;
    case 4: return r.gy;
    case 5: return r.gz;
    case 6: return r.qx;
    case 7: return r.qy;
    case 8: return r.qz;
    case 9: return r.thrust;
  }
  throw std::out_of_range("channel index");
}

struct SampleWindow {
  std::span<const ImuRecord> records;
  std::size_t start_index = 0;
  const FlightLog* source = nullptr;
};

// Count: floor((len - width)/stride) + 1, e.g. 26640 records -> 826 windows.
inline std::vector<SampleWindow> extract_windows(const FlightLog& log, int width = kWindowLen,
                                                 int stride = kWindowStride) {
  if (width <= 0 || stride <= 0) throw std::invalid_argument("windows: width/stride must be positive");
  std::vector<SampleWindow> out;
  const std::size_t n = log.records.size();
  if (n < static_cast<std::size_t>(width)) return out;
  const std::size_t count = (n - width) / stride + 1;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    std::size_t start = w * stride;
    out.push_back({std::span<const ImuRecord>(log.records.data() + start, width), start, &log});
  }
  return out;
}

namespace detail {
// Twiddle tables for the fixed-length direct DFT; ~400 KB, built once.
struct DftTables {
  std::vector<double> cosv, sinv;  // [k * kWindowLen + n]
  DftTables() {
    cosv.resize(static_cast<std::size_t>(kSpectrumBins) * kWindowLen);
    sinv.resize(static_cast<std::size_t>(kSpectrumBins) * kWindowLen);
    for (int k = 0; k < kSpectrumBins; ++k) {
      for (int n = 0; n < kWindowLen; ++n) {
        double ang = 2.0 * 3.14159265358979323846 * k * n / kWindowLen;
        cosv[static_cast<std::size_t>(k) * kWindowLen + n] = std::cos(ang);
        sinv[static_cast<std::size_t>(k) * kWindowLen + n] = std::sin(ang);
      }
    }
  }
};
inline const DftTables& dft_tables() {
  static const DftTables t;
  return t;
}
}  // namespace detail

inline std::array<double, kSpectrumBins> power_spectrum(std::span<const double> x) {
  if (x.size() != kWindowLen)
    throw std::invalid_argument("power_spectrum: expected exactly 222 samples");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("power_spectrum: non-finite sample");

  const auto& tab = detail::dft_tables();
  std::array<double, kSpectrumBins> p{};
  const double inv_n2 = 1.0 / (static_cast<double>(kWindowLen) * kWindowLen);
  for (int k = 0; k < kSpectrumBins; ++k) {
    const double* c = &tab.cosv[static_cast<std::size_t>(k) * kWindowLen];
    const double* s = &tab.sinv[static_cast<std::size_t>(k) * kWindowLen];
    double re = 0.0, im = 0.0;
    for (int n = 0; n < kWindowLen; ++n) {
      re += x[n] * c[n];
      im += x[n] * s[n];
    }
    double mag2 = (re * re + im * im) * inv_n2;
    p[k] = (k == 0 || k == kSpectrumBins - 1) ? mag2 : 2.0 * mag2;
  }
  return p;
}

// Supported band widths; the feature count law is n = B*10 + 12 with
// B = round(111/bw), halves rounding down (so bw=2 -> 55 bands, bw=7 -> 16).
inline const std::array<int, 8>& supported_band_widths() {
  static const std::array<int, 8> w = {2, 3, 4, 5, 6, 7, 8, 10};
  return w;
}

inline int band_count(int band_width_hz) {
  bool ok = false;
  for (int w : supported_band_widths()) ok = ok || (w == band_width_hz);
  if (!ok) throw std::invalid_argument("unsupported band width: " + std::to_string(band_width_hz));
  return (2 * 111 + band_width_hz - 1) / (2 * band_width_hz);
}

// Half-open bin ranges [first, last) per band; the final band absorbs the
// leftover bins up to and including the Nyquist bin so the partition is exact.
inline std::vector<std::pair<int, int>> band_ranges(int band_width_hz) {
  const int b = band_count(band_width_hz);
  std::vector<std::pair<int, int>> r(b);
  for (int i = 0; i < b; ++i)
    r[i] = {i * band_width_hz,
            (i == b - 1) ? kSpectrumBins : (i + 1) * band_width_hz};
  return r;
}

inline std::vector<double> band_energies(const std::array<double, kSpectrumBins>& p,
                                         int band_width_hz) {
  std::vector<double> out;
  for (auto [lo, hi] : band_ranges(band_width_hz)) {
    double e = 0.0;
    for (int k = lo; k < hi; ++k) e += p[k];
    out.push_back(e);
  }
  return out;
}

struct Moments {
  double mean = 0.0, var = 0.0, skew = 0.0, kurt = 0.0;
};

// Population moments; kurtosis is excess (gaussian -> 0). Near-constant
// signals report zero skewness/kurtosis instead of 0/0.
inline Moments moments(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("moments: empty input");
  const double n = static_cast<double>(x.size());
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    double d = v - m.mean;
    double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.var = m2;
  if (m2 < 1e-12 * (m.mean * m.mean + 1.0)) {
    m.skew = 0.0;
    m.kurt = 0.0;
  } else {
    m.skew = m3 / std::pow(m2, 1.5);
    m.kurt = m4 / (m2 * m2) - 3.0;
  }
  return m;
}

// ---- feature assembly ------------------------------------------------------

struct FeatureSchema {
  int band_width_hz = 5;
  int n_bands = 22;
  int n_features = 232;
  std::string schema_id;

  static FeatureSchema for_band_width(int bw) {
    FeatureSchema s;
    s.band_width_hz = bw;
    s.n_bands = band_count(bw);
    s.n_features = s.n_bands * kNumChannels + kMomentFeatures;
    s.schema_id = "bands-w222-bw" + std::to_string(bw) + "-v1";
    return s;
  }

  int band_feature(int channel, int band) const { return channel * n_bands + band; }
  int moment_feature(int torque_channel, int moment) const {
    return kNumChannels * n_bands + torque_channel * 4 + moment;
  }

  // Channel owning feature index i (for grouped ablations); torque moments
  // belong to their torque channel.
  int channel_of(int i) const {
    if (i < kNumChannels * n_bands) return i / n_bands;
    int rest = i - kNumChannels * n_bands;
    return static_cast<int>(Channel::qx) + rest / 4;
  }

  std::string feature_name(int i) const {
    static constexpr const char* moment_names[4] = {"mean", "var", "skew", "kurt"};
    if (i < kNumChannels * n_bands) {
      int ch = i / n_bands;
      int band = i % n_bands;
      auto ranges = band_ranges(band_width_hz);
      return std::string(channel_name(ch)) + ".band" + std::to_string(band) + "[" +
             std::to_string(ranges[band].first) + "-" + std::to_string(ranges[band].second) +
             "Hz)";
    }
    int rest = i - kNumChannels * n_bands;
    int ch = static_cast<int>(Channel::qx) + rest / 4;
    return std::string(channel_name(ch)) + "." + moment_names[rest % 4];
  }
};

struct FeatureVector {
  std::vector<double> values;
  std::string schema_id;
};

inline FeatureVector assemble_features(const SampleWindow& w, const FeatureSchema& schema) {
  if (w.records.size() != kWindowLen)
    throw std::invalid_argument("features: window must hold exactly 222 records");
  FeatureVector f;
  f.schema_id = schema.schema_id;
  f.values.reserve(schema.n_features);

  std::array<double, kWindowLen> series;
  std::array<std::array<double, kWindowLen>, 3> torque_series;
  for (int ch = 0; ch < kNumChannels; ++ch) {
    for (int n = 0; n < kWindowLen; ++n) series[n] = channel_value(w.records[n], ch);
    if (ch >= static_cast<int>(Channel::qx) && ch <= static_cast<int>(Channel::qz))
      torque_series[ch - static_cast<int>(Channel::qx)] = series;
    auto p = power_spectrum(series);
    for (double e : band_energies(p, schema.band_width_hz)) f.values.push_back(e);
  }
  for (int tc = 0; tc < 3; ++tc) {
    Moments m = moments(torque_series[tc]);
    f.values.push_back(m.mean);
    f.values.push_back(m.var);
    f.values.push_back(m.skew);
    f.values.push_back(m.kurt);
  }
  return f;
}

// ---- standardizer ----------------------------------------------------------

// Per-feature zero-mean unit-variance transform. Fit on training rows only;
// degenerate features get their divisor floored so apply() stays finite.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std_dev;
  std::string schema_id;
  bool fitted = false;

  void fit(const Eigen::MatrixXd& x, const std::string& schema) {
    if (x.rows() < 1) throw std::invalid_argument("standardizer: no rows");
    schema_id = schema;
    mean = x.colwise().mean().transpose();
    Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
    std_dev = centered.array().square().colwise().mean().sqrt().transpose();
    for (Eigen::Index i = 0; i < std_dev.size(); ++i)
      if (std_dev[i] < 1e-12) std_dev[i] = 1e-12;
    fitted = true;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    if (!fitted) throw std::logic_error("standardizer: apply before fit");
    if (x.cols() != mean.size())
      throw std::invalid_argument("standardizer: feature count mismatch");
    return (x.rowwise() - mean.transpose()).array().rowwise() / std_dev.transpose().array();
  }

  nlohmann::json to_json() const {
    if (!fitted) throw std::logic_error("standardizer: serialize before fit");
    nlohmann::json j;
    j["schema_id"] = schema_id;
    j["mean"] = std::vector<double>(mean.data(), mean.data() + mean.size());
    j["std"] = std::vector<double>(std_dev.data(), std_dev.data() + std_dev.size());
    return j;
  }

  static Standardizer from_json(const nlohmann::json& j) {
    Standardizer s;
    s.schema_id = j.at("schema_id").get<std::string>();
    auto m = j.at("mean").get<std::vector<double>>();
    auto d = j.at("std").get<std::vector<double>>();
    if (m.size() != d.size()) throw std::invalid_argument("standardizer: mean/std size mismatch");
    s.mean = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    s.std_dev = Eigen::Map<const Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(d.size()));
    s.fitted = true;
    return s;
  }
};

}  // namespace propdiag
