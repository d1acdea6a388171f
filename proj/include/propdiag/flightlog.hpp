#pragma once
// flightlog.hpp - time-stamped IMU + control-command records, CSV storage,
// damage labels carried in a JSON sidecar next to each log.
//
// CSV layout (UTF-8, '.' decimal, one header line):
//   t,ax,ay,az,gx,gy,gz,qx,qy,qz,thrust
// Accelerations m/s^2, angular rates rad/s, commanded torques and thrust in
// the controller's normalized units.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "propdiag/ioutil.hpp"

namespace propdiag {

struct ImuRecord {
  double t = 0.0;
  double ax = 0.0, ay = 0.0, az = 0.0;
  double gx = 0.0, gy = 0.0, gz = 0.0;
  double qx = 0.0, qy = 0.0, qz = 0.0;
  double thrust = 0.0;

  bool finite() const {
    for (double v : {t, ax, ay, az, gx, gy, gz, qx, qy, qz, thrust})
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline constexpr int kLogColumns = 11;
inline constexpr const char* kLogHeader = "t,ax,ay,az,gx,gy,gz,qx,qy,qz,thrust";

enum class DamageKind { healthy, tipcut, longitudinal };

inline const char* to_string(DamageKind k) {
  switch (k) {
    case DamageKind::healthy: return "healthy";
    case DamageKind::tipcut: return "tipcut";
    case DamageKind::longitudinal: return "longitudinal";
  }
  return "healthy";
}

inline DamageKind damage_kind_from_string(const std::string& s) {
  if (s == "healthy") return DamageKind::healthy;
  if (s == "tipcut") return DamageKind::tipcut;
  if (s == "longitudinal") return DamageKind::longitudinal;
  throw std::invalid_argument("unknown damage kind: " + s);
}

// One damaged propeller at most. Tip cuts are per-blade-tip lengths in mm
// (cut1 <= cut2 by convention); a longitudinal slit is stored as the same
// depth in both fields since it affects both tips equally.
struct DamageLabel {
  DamageKind kind = DamageKind::healthy;
  double cut1_mm = 0.0;
  double cut2_mm = 0.0;
  int motor = 0;  // 1-based rotor index, 0 when healthy

  static DamageLabel healthy() { return {}; }
  static DamageLabel tipcut(double c1, double c2, int motor) {
    DamageLabel l;
    l.kind = DamageKind::tipcut;
    l.cut1_mm = std::min(c1, c2);
    l.cut2_mm = std::max(c1, c2);
    l.motor = motor;
    return l;
  }
  static DamageLabel longitudinal(double depth, int motor) {
    DamageLabel l;
    l.kind = DamageKind::longitudinal;
    l.cut1_mm = depth;
    l.cut2_mm = depth;
    l.motor = motor;
    return l;
  }

  double sum_mm() const { return kind == DamageKind::healthy ? 0.0 : cut1_mm + cut2_mm; }
  double diff_mm() const { return kind == DamageKind::healthy ? 0.0 : std::abs(cut2_mm - cut1_mm); }
  double depth_mm() const { return kind == DamageKind::longitudinal ? cut1_mm : 0.0; }

  void validate(int n_rotors = 4) const {
    switch (kind) {
      case DamageKind::healthy:
        if (motor != 0) throw std::invalid_argument("label: healthy must not name a motor");
        if (cut1_mm != 0.0 || cut2_mm != 0.0)
          throw std::invalid_argument("label: healthy must have zero cuts");
        break;
      case DamageKind::tipcut:
        if (cut1_mm < 0.0 || cut2_mm < 0.0)
          throw std::invalid_argument("label: negative cut length");
        if (cut1_mm + cut2_mm <= 0.0)
          throw std::invalid_argument("label: tipcut needs a positive cut");
        if (motor < 1 || motor > n_rotors)
          throw std::invalid_argument("label: motor index out of range");
        break;
      case DamageKind::longitudinal:
        if (cut1_mm <= 0.0 || cut1_mm != cut2_mm)
          throw std::invalid_argument("label: longitudinal needs one positive depth");
        if (motor < 1 || motor > n_rotors)
          throw std::invalid_argument("label: motor index out of range");
        break;
    }
  }

  bool operator==(const DamageLabel&) const = default;
};

struct FlightLog {
  std::string flight_id;
  double sample_rate_hz = 222.0;
  DamageLabel label;
  std::vector<ImuRecord> records;
};

struct LogParseError : std::runtime_error {
  std::size_t row;  // 1-based data row (header excluded)
  LogParseError(std::size_t r, const std::string& what)
      : std::runtime_error("row " + std::to_string(r) + ": " + what), row(r) {}
};

struct LogValidationError : std::runtime_error {
  std::size_t row;
  LogValidationError(std::size_t r, const std::string& what)
      : std::runtime_error("row " + std::to_string(r) + ": " + what), row(r) {}
};

namespace detail {
inline void split_csv_line(const std::string& line, std::vector<std::string>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}
}  // namespace detail

// Parses records and enforces structural invariants: header shape, numeric
// cells, finite values, strictly increasing timestamps, at least one full
// feature window (222 records).
inline std::vector<ImuRecord> parse_log_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw LogParseError(0, "empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kLogHeader)
    throw LogParseError(0, "bad header, expected '" + std::string(kLogHeader) + "'");

  std::vector<ImuRecord> records;
  std::vector<std::string> cells;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    detail::split_csv_line(line, cells);
    if (static_cast<int>(cells.size()) != kLogColumns)
      throw LogParseError(row, "expected " + std::to_string(kLogColumns) + " columns, got " +
                                   std::to_string(cells.size()));
    std::array<double, kLogColumns> v{};
    for (int c = 0; c < kLogColumns; ++c) {
      bool ok = false;
      v[c] = parse_double(cells[c], ok);
      if (!ok) throw LogParseError(row, "non-numeric cell in column " + std::to_string(c));
    }
    ImuRecord r{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10]};
    if (!r.finite()) throw LogValidationError(row, "non-finite value");
    if (!records.empty() && !(r.t > records.back().t))
      throw LogParseError(row, "timestamps not strictly increasing");
    records.push_back(r);
  }
  if (records.size() < 222)
    throw LogParseError(records.size(), "too short: need at least 222 records");
  return records;
}

inline void serialize_log_csv(const FlightLog& log, std::ostream& out) {
  out << kLogHeader << '\n';
  for (const ImuRecord& r : log.records) {
    out << format_full(r.t) << ',' << format_full(r.ax) << ',' << format_full(r.ay) << ','
        << format_full(r.az) << ',' << format_full(r.gx) << ',' << format_full(r.gy) << ','
        << format_full(r.gz) << ',' << format_full(r.qx) << ',' << format_full(r.qy) << ','
        << format_full(r.qz) << ',' << format_full(r.thrust) << '\n';
  }
}

inline std::string serialize_log_csv(const FlightLog& log) {
  std::ostringstream out;
  serialize_log_csv(log, out);
  return out.str();
}

struct ValidationReport {
  bool rate_ok = true;     // median inter-sample period within 5% of nominal
  bool finite_ok = true;
  bool length_ok = true;   // >= 222 records
  bool monotone_ok = true;
  std::size_t gap_count = 0;  // inter-sample periods above 1.5x nominal

  bool all_ok() const { return rate_ok && finite_ok && length_ok && monotone_ok; }
};

inline ValidationReport validate(const FlightLog& log) {
  ValidationReport rep;
  rep.length_ok = log.records.size() >= 222;
  for (const ImuRecord& r : log.records)
    if (!r.finite()) rep.finite_ok = false;

  const double nominal = 1.0 / log.sample_rate_hz;
  std::vector<double> periods;
  periods.reserve(log.records.size());
  for (std::size_t i = 1; i < log.records.size(); ++i) {
    double dt = log.records[i].t - log.records[i - 1].t;
    if (dt <= 0.0) rep.monotone_ok = false;
    periods.push_back(dt);
    if (dt > 1.5 * nominal) ++rep.gap_count;
  }
  if (!periods.empty()) {
    std::vector<double> sorted = periods;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    double median = sorted[sorted.size() / 2];
    rep.rate_ok = std::abs(median - nominal) <= 0.05 * nominal;
  } else {
    rep.rate_ok = false;
  }
  return rep;
}

// ---- sidecar label files -------------------------------------------------

inline nlohmann::json label_to_json(const FlightLog& log) {
  nlohmann::json j;
  j["flight_id"] = log.flight_id;
  j["kind"] = to_string(log.label.kind);
  j["cut1_mm"] = log.label.cut1_mm;
  j["cut2_mm"] = log.label.cut2_mm;
  j["motor"] = log.label.motor;
  j["sample_rate_hz"] = log.sample_rate_hz;
  return j;
}

inline void label_from_json(const nlohmann::json& j, FlightLog& log) {
  log.flight_id = j.at("flight_id").get<std::string>();
  log.label.kind = damage_kind_from_string(j.at("kind").get<std::string>());
  log.label.cut1_mm = j.at("cut1_mm").get<double>();
  log.label.cut2_mm = j.at("cut2_mm").get<double>();
  log.label.motor = j.at("motor").get<int>();
  log.sample_rate_hz = j.at("sample_rate_hz").get<double>();
  log.label.validate(std::max(4, log.label.motor));
}

inline std::filesystem::path meta_path_for(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension();       // strip .csv
  p += ".meta.json";
  return p;
}

inline void save_flight(const FlightLog& log, const std::filesystem::path& dir) {
  std::filesystem::path csv = dir / (log.flight_id + ".csv");
  std::ostringstream body;
  serialize_log_csv(log, body);
  atomic_write_file(csv, body.str());
  atomic_write_file(meta_path_for(csv), label_to_json(log).dump(2) + "\n");
}

inline FlightLog load_flight(const std::filesystem::path& csv_path, bool require_meta = true) {
  FlightLog log;
  {
    std::istringstream in(read_file(csv_path));
    log.records = parse_log_csv(in);
  }
  std::filesystem::path meta = meta_path_for(csv_path);
  if (std::filesystem::exists(meta)) {
    label_from_json(nlohmann::json::parse(read_file(meta)), log);
  } else if (require_meta) {
    throw std::runtime_error("missing sidecar: " + meta.string());
  } else {
    log.flight_id = csv_path.stem().string();
  }
  return log;
}

// All *.csv flights in a directory, sorted by flight id for determinism.
inline std::vector<FlightLog> load_corpus(const std::filesystem::path& dir,
                                          bool require_meta = true) {
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv")
      paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  std::vector<FlightLog> logs;
  logs.reserve(paths.size());
  for (const auto& p : paths) logs.push_back(load_flight(p, require_meta));
  return logs;
}

}  // namespace propdiag
