#pragma once
// dataset.hpp - labeled feature matrices: one row per sliding window, built
// from flight logs, stored as CSV with full-precision decimals.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "propdiag/flightlog.hpp"
#include "propdiag/ioutil.hpp"
#include "propdiag/spectral.hpp"

namespace propdiag {

// Damage type classes: 0 healthy, 1 tip cut, 2 longitudinal.
inline int type_class_of(DamageKind k) { return static_cast<int>(k); }

struct RowMeta {
  std::string flight_id;
  std::size_t start_index = 0;
  DamageLabel label;
};

struct LabeledDataset {
  FeatureSchema schema;
  Eigen::MatrixXd x;  // rows align with meta
  std::vector<RowMeta> meta;

  Eigen::Index rows() const { return x.rows(); }

  LabeledDataset subset(const std::vector<Eigen::Index>& idx) const {
    LabeledDataset out;
    out.schema = schema;
    out.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
    out.meta.reserve(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.x.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
      out.meta.push_back(meta[idx[i]]);
    }
    return out;
  }
};

inline LabeledDataset build_dataset(const std::vector<FlightLog>& logs,
                                    const FeatureSchema& schema) {
  std::size_t total = 0;
  for (const FlightLog& log : logs) total += extract_windows(log).size();

  LabeledDataset ds;
  ds.schema = schema;
  ds.x.resize(static_cast<Eigen::Index>(total), schema.n_features);
  ds.meta.reserve(total);

  Eigen::Index row = 0;
  for (const FlightLog& log : logs) {
    for (const SampleWindow& w : extract_windows(log)) {
      FeatureVector f = assemble_features(w, schema);
      ds.x.row(row) = Eigen::Map<const Eigen::VectorXd>(
          f.values.data(), static_cast<Eigen::Index>(f.values.size()));
      ds.meta.push_back({log.flight_id, w.start_index, log.label});
      ++row;
    }
  }
  return ds;
}

// ---- CSV ---------------------------------------------------------------

inline void write_features_csv(const LabeledDataset& ds, const std::filesystem::path& path,
                               const std::string& provenance = "") {
  std::ostringstream out;
  out << "# schema: " << ds.schema.schema_id << "\n";
  if (!provenance.empty()) out << "# provenance: " << provenance << "\n";
  out << "flight_id,start_index,kind,cut1_mm,cut2_mm,motor";
  for (int i = 0; i < ds.schema.n_features; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), ",f%03d", i);
    out << buf;
  }
  out << "\n";
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    const RowMeta& m = ds.meta[r];
    out << m.flight_id << ',' << m.start_index << ',' << to_string(m.label.kind) << ','
        << format_full(m.label.cut1_mm) << ',' << format_full(m.label.cut2_mm) << ','
        << m.label.motor;
    for (Eigen::Index c = 0; c < ds.x.cols(); ++c) out << ',' << format_full(ds.x(r, c));
    out << "\n";
  }
  atomic_write_file(path, out.str());
}

inline LabeledDataset read_features_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::string schema_id;
  // Leading comment block; the schema line is required.
  std::streampos data_start = in.tellg();
  while (std::getline(in, line)) {
    if (line.rfind("# schema: ", 0) == 0) {
      schema_id = line.substr(10);
    } else if (!line.empty() && line[0] == '#') {
      // other provenance lines
    } else {
      break;  // header line reached
    }
    data_start = in.tellg();
  }
  if (schema_id.empty()) throw std::runtime_error("features csv: missing schema line");

  // schema id encodes the band width: bands-w222-bw<N>-v1
  auto bw_pos = schema_id.find("bw");
  if (bw_pos == std::string::npos) throw std::runtime_error("features csv: bad schema id");
  int bw = std::stoi(schema_id.substr(bw_pos + 2));
  FeatureSchema schema = FeatureSchema::for_band_width(bw);
  if (schema.schema_id != schema_id)
    throw std::runtime_error("features csv: unsupported schema " + schema_id);

  std::vector<std::string> cells;
  std::vector<RowMeta> meta;
  std::vector<double> values;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row_no;
    detail::split_csv_line(line, cells);
    if (static_cast<int>(cells.size()) != 6 + schema.n_features)
      throw std::runtime_error("features csv row " + std::to_string(row_no) +
                               ": wrong column count");
    RowMeta m;
    m.flight_id = cells[0];
    m.start_index = std::stoull(cells[1]);
    m.label.kind = damage_kind_from_string(cells[2]);
    bool ok1 = false, ok2 = false;
    m.label.cut1_mm = parse_double(cells[3], ok1);
    m.label.cut2_mm = parse_double(cells[4], ok2);
    m.label.motor = std::stoi(cells[5]);
    if (!ok1 || !ok2)
      throw std::runtime_error("features csv row " + std::to_string(row_no) + ": bad label");
    meta.push_back(std::move(m));
    for (int c = 0; c < schema.n_features; ++c) {
      bool ok = false;
      values.push_back(parse_double(cells[6 + c], ok));
      if (!ok)
        throw std::runtime_error("features csv row " + std::to_string(row_no) +
                                 ": non-numeric feature");
    }
  }

  LabeledDataset ds;
  ds.schema = schema;
  ds.meta = std::move(meta);
  ds.x.resize(static_cast<Eigen::Index>(ds.meta.size()), schema.n_features);
  for (Eigen::Index r = 0; r < ds.x.rows(); ++r)
    for (int c = 0; c < schema.n_features; ++c)
      ds.x(r, c) = values[static_cast<std::size_t>(r) * schema.n_features + c];
  return ds;
}

// ---- splits --------------------------------------------------------------

enum class SplitTag : int { train = 0, val = 1, test = 2 };

inline const char* to_string(SplitTag t) {
  switch (t) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
  }
  return "train";
}

inline SplitTag split_tag_from_string(const std::string& s) {
  if (s == "train") return SplitTag::train;
  if (s == "val") return SplitTag::val;
  if (s == "test") return SplitTag::test;
  throw std::invalid_argument("unknown split tag: " + s);
}

// Uniform random row-level 40/30/30 split.
inline std::vector<SplitTag> split_rows(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw std::invalid_argument("split: need at least 10 rows");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const std::size_t cut1 = static_cast<std::size_t>(std::llround(0.4 * n));
  const std::size_t cut2 = static_cast<std::size_t>(std::llround(0.7 * n));
  std::vector<SplitTag> tags(n);
  for (std::size_t i = 0; i < n; ++i) {
    SplitTag t = i < cut1 ? SplitTag::train : (i < cut2 ? SplitTag::val : SplitTag::test);
    tags[perm[i]] = t;
  }
  return tags;
}

// Alternative grouping: whole flights assigned to one split each.
inline std::vector<SplitTag> split_by_flight(const LabeledDataset& ds, std::uint64_t seed) {
  std::vector<std::string> flights;
  for (const RowMeta& m : ds.meta)
    if (flights.empty() || flights.back() != m.flight_id)
      if (std::find(flights.begin(), flights.end(), m.flight_id) == flights.end())
        flights.push_back(m.flight_id);
  if (flights.size() < 3) throw std::invalid_argument("split: need at least 3 flights");
  std::mt19937_64 rng(seed);
  std::shuffle(flights.begin(), flights.end(), rng);
  const std::size_t cut1 = static_cast<std::size_t>(std::llround(0.4 * flights.size()));
  const std::size_t cut2 = static_cast<std::size_t>(std::llround(0.7 * flights.size()));
  std::vector<SplitTag> by_flight(flights.size());
  for (std::size_t i = 0; i < flights.size(); ++i)
    by_flight[i] = i < cut1 ? SplitTag::train : (i < cut2 ? SplitTag::val : SplitTag::test);

  std::vector<SplitTag> tags(ds.meta.size());
  for (std::size_t r = 0; r < ds.meta.size(); ++r) {
    auto it = std::find(flights.begin(), flights.end(), ds.meta[r].flight_id);
    tags[r] = by_flight[static_cast<std::size_t>(it - flights.begin())];
  }
  return tags;
}

inline void write_splits_csv(const LabeledDataset& ds, const std::vector<SplitTag>& tags,
                             const std::filesystem::path& path) {
  if (tags.size() != ds.meta.size()) throw std::invalid_argument("splits: size mismatch");
  std::ostringstream out;
  out << "flight_id,start_index,split\n";
  for (std::size_t i = 0; i < tags.size(); ++i)
    out << ds.meta[i].flight_id << ',' << ds.meta[i].start_index << ',' << to_string(tags[i])
        << "\n";
  atomic_write_file(path, out.str());
}

inline std::vector<SplitTag> read_splits_csv(const LabeledDataset& ds,
                                             const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("splits csv: empty");
  std::map<std::pair<std::string, std::size_t>, SplitTag> lookup;
  std::vector<std::string> cells;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    detail::split_csv_line(line, cells);
    if (cells.size() != 3) throw std::runtime_error("splits csv: wrong column count");
    lookup[{cells[0], std::stoull(cells[1])}] = split_tag_from_string(cells[2]);
  }
  std::vector<SplitTag> tags(ds.meta.size());
  for (std::size_t i = 0; i < ds.meta.size(); ++i) {
    auto it = lookup.find({ds.meta[i].flight_id, ds.meta[i].start_index});
    if (it == lookup.end())
      throw std::runtime_error("splits csv: no entry for " + ds.meta[i].flight_id + ":" +
                               std::to_string(ds.meta[i].start_index));
    tags[i] = it->second;
  }
  return tags;
}

}  // namespace propdiag
