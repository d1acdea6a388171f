#pragma once
// cascade.hpp - the staged diagnosis pipeline:
//   type classifier (healthy / tip cut / longitudinal)
//     -> tip-cut branch:  magnitude net (sum, diff) + location classifier
//     -> longitudinal branch: magnitude net (sum)   + location classifier
// One standardizer, fitted on the training split, is shared by every stage.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "propdiag/cluster.hpp"
#include "propdiag/dataset.hpp"
#include "propdiag/flightlog.hpp"
#include "propdiag/ioutil.hpp"
#include "propdiag/mlp.hpp"
#include "propdiag/spectral.hpp"
#include "propdiag/svm.hpp"

namespace propdiag {

struct CascadeConfig {
  std::uint64_t seed = 0;
  SvmHyperParams svm;          // C=1, tol=1e-4
  MlpTrainConfig mlp;          // 200 epochs, Adadelta lr=0.1
  std::vector<int> hidden = {32, 8, 4};
  int loc_class_cap = 4000;    // per-motor row cap for location training
};

struct CascadeModel {
  std::string schema_id;
  int n_rotors = 4;
  Standardizer scaler;
  SvmClassifier type_svm;   // classes {0,1,2}
  Mlp tipcut_nn;            // outputs (sum_mm, diff_mm)
  SvmClassifier tipcut_loc; // classes {1..n_rotors}
  Mlp long_nn;              // output (sum_mm)
  SvmClassifier long_loc;
  CascadeConfig cfg;
};

struct TrainReport {
  std::map<std::string, std::size_t> stage_rows;  // rows per training stage
  std::vector<double> tipcut_loss, long_loss;
  double val_type_accuracy = 0.0;
};

namespace detail {

inline std::vector<Eigen::Index> rows_where(const LabeledDataset& ds,
                                            const std::vector<SplitTag>& tags, SplitTag want) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < ds.rows(); ++i)
    if (tags[i] == want) idx.push_back(i);
  return idx;
}

inline Eigen::MatrixXd stack_rows(const Eigen::MatrixXd& xs, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), xs.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = xs.row(idx[i]);
  return out;
}

}  // namespace detail

inline std::pair<CascadeModel, TrainReport> train_cascade(const LabeledDataset& ds,
                                                          const std::vector<SplitTag>& tags,
                                                          const CascadeConfig& cfg) {
  if (tags.size() != static_cast<std::size_t>(ds.rows()))
    throw std::invalid_argument("cascade: split tag count mismatch");

  CascadeModel model;
  model.schema_id = ds.schema.schema_id;
  model.cfg = cfg;
  TrainReport report;

  const std::vector<Eigen::Index> train_idx = detail::rows_where(ds, tags, SplitTag::train);
  const std::vector<Eigen::Index> val_idx = detail::rows_where(ds, tags, SplitTag::val);
  if (train_idx.empty()) throw std::invalid_argument("cascade: empty training split");

  // Presence checks with descriptive messages.
  std::map<int, std::size_t> type_counts;
  std::map<int, std::map<int, std::size_t>> motor_counts;  // type -> motor -> rows
  int max_motor = 0;
  for (Eigen::Index i : train_idx) {
    const DamageLabel& l = ds.meta[i].label;
    ++type_counts[type_class_of(l.kind)];
    if (l.kind != DamageKind::healthy) {
      ++motor_counts[type_class_of(l.kind)][l.motor];
      max_motor = std::max(max_motor, l.motor);
    }
  }
  for (int t : {0, 1, 2})
    if (type_counts[t] == 0)
      throw std::invalid_argument(std::string("cascade: training split has no ") +
                                  to_string(static_cast<DamageKind>(t)) + " rows");
  model.n_rotors = std::max(4, max_motor);
  for (int t : {1, 2})
    for (int m = 1; m <= model.n_rotors; ++m)
      if (motor_counts[t][m] == 0)
        throw std::invalid_argument(std::string("cascade: no ") +
                                    to_string(static_cast<DamageKind>(t)) + " rows for motor " +
                                    std::to_string(m) + " (augment the corpus first)");

  // Standardizer sees only training rows.
  model.scaler.fit(detail::stack_rows(ds.x, train_idx), ds.schema.schema_id);
  const Eigen::MatrixXd xs = model.scaler.apply(ds.x);

  // ---- type classifier on balanced classes -------------------------------
  {
    std::map<int, std::vector<Eigen::Index>> by_type;
    for (Eigen::Index i : train_idx) by_type[type_class_of(ds.meta[i].label.kind)].push_back(i);
    std::size_t smallest = SIZE_MAX;
    for (const auto& [t, idx] : by_type) smallest = std::min(smallest, idx.size());

    std::map<int, Eigen::MatrixXd> classes;
    for (const auto& [t, idx] : by_type) classes[t] = detail::stack_rows(xs, idx);
    classes = balance_classes(classes, static_cast<int>(smallest), mix_seed(cfg.seed, 1));

    Eigen::Index total = 0;
    for (const auto& [t, m] : classes) total += m.rows();
    Eigen::MatrixXd bx(total, xs.cols());
    std::vector<int> by;
    by.reserve(total);
    Eigen::Index row = 0;
    for (const auto& [t, m] : classes) {
      bx.middleRows(row, m.rows()) = m;
      row += m.rows();
      for (Eigen::Index i = 0; i < m.rows(); ++i) by.push_back(t);
    }
    report.stage_rows["type_svm"] = static_cast<std::size_t>(total);
    SvmHyperParams hp = cfg.svm;
    hp.seed = mix_seed(cfg.seed, 2);
    model.type_svm = svm_train(bx, by, hp, ds.schema.schema_id);
  }

  // ---- branch builders -----------------------------------------------------
  auto branch_rows = [&](DamageKind kind) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i : train_idx)
      if (ds.meta[i].label.kind == kind) idx.push_back(i);
    return idx;
  };

  auto train_branch_nn = [&](DamageKind kind, int out_dim, std::uint64_t stream,
                             std::vector<double>& loss_out) {
    std::vector<Eigen::Index> idx = branch_rows(kind);
    Eigen::MatrixXd bx = detail::stack_rows(xs, idx);
    Eigen::MatrixXd by(static_cast<Eigen::Index>(idx.size()), out_dim);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const DamageLabel& l = ds.meta[idx[i]].label;
      by(static_cast<Eigen::Index>(i), 0) = l.sum_mm();
      if (out_dim == 2) by(static_cast<Eigen::Index>(i), 1) = l.diff_mm();
    }
    std::vector<int> sizes;
    sizes.push_back(static_cast<int>(xs.cols()));
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(out_dim);
    Mlp nn = mlp_init(sizes, mix_seed(cfg.seed, stream), ds.schema.schema_id);
    MlpTrainConfig mc = cfg.mlp;
    MlpTrainResult tr = mlp_train(nn, bx, by, mc);
    loss_out = std::move(tr.loss_history);
    report.stage_rows[kind == DamageKind::tipcut ? "tipcut_nn" : "long_nn"] = idx.size();
    return nn;
  };

  auto train_branch_loc = [&](DamageKind kind, std::uint64_t stream) {
    std::vector<Eigen::Index> idx = branch_rows(kind);
    std::map<int, std::vector<Eigen::Index>> by_motor;
    for (Eigen::Index i : idx) by_motor[ds.meta[i].label.motor].push_back(i);
    std::size_t smallest = SIZE_MAX;
    for (const auto& [m, v] : by_motor) smallest = std::min(smallest, v.size());
    int target = static_cast<int>(std::min<std::size_t>(smallest, cfg.loc_class_cap));

    std::map<int, Eigen::MatrixXd> classes;
    for (const auto& [m, v] : by_motor) classes[m] = detail::stack_rows(xs, v);
    classes = balance_classes(classes, target, mix_seed(cfg.seed, stream));

    Eigen::Index total = 0;
    for (const auto& [m, mat] : classes) total += mat.rows();
    Eigen::MatrixXd bx(total, xs.cols());
    std::vector<int> by;
    by.reserve(total);
    Eigen::Index row = 0;
    for (const auto& [m, mat] : classes) {
      bx.middleRows(row, mat.rows()) = mat;
      row += mat.rows();
      for (Eigen::Index i = 0; i < mat.rows(); ++i) by.push_back(m);
    }
    report.stage_rows[kind == DamageKind::tipcut ? "tipcut_loc" : "long_loc"] =
        static_cast<std::size_t>(total);
    SvmHyperParams hp = cfg.svm;
    hp.seed = mix_seed(cfg.seed, stream + 1);
    return svm_train(bx, by, hp, ds.schema.schema_id);
  };

  model.tipcut_nn = train_branch_nn(DamageKind::tipcut, 2, 10, report.tipcut_loss);
  model.tipcut_loc = train_branch_loc(DamageKind::tipcut, 20);
  model.long_nn = train_branch_nn(DamageKind::longitudinal, 1, 30, report.long_loss);
  model.long_loc = train_branch_loc(DamageKind::longitudinal, 40);

  // Validation-type accuracy, reported not gating.
  if (!val_idx.empty()) {
    std::size_t hits = 0;
    for (Eigen::Index i : val_idx)
      if (model.type_svm.predict(xs.row(i).transpose()) == type_class_of(ds.meta[i].label.kind))
        ++hits;
    report.val_type_accuracy = static_cast<double>(hits) / val_idx.size();
  }
  return {std::move(model), std::move(report)};
}

// ---- inference -------------------------------------------------------------

struct Diagnosis {
  std::string flight_id;
  std::size_t start_index = 0;
  std::array<double, 3> p_type{};  // healthy, tipcut, longitudinal
  DamageKind type = DamageKind::healthy;
  double sum_mm = 0.0;             // reported (clamped)
  double diff_mm = 0.0;
  double raw_sum_mm = 0.0;         // untouched network outputs
  double raw_diff_mm = 0.0;
  int motor = 0;
  std::array<double, 4> p_motor{};
};

inline Diagnosis infer_window(const CascadeModel& model,
                              const Eigen::Ref<const Eigen::VectorXd>& raw_features,
                              const std::string& flight_id = "", std::size_t start_index = 0) {
  if (raw_features.size() != model.scaler.mean.size())
    throw std::invalid_argument("infer: feature count mismatch (schema " + model.schema_id + ")");
  Eigen::MatrixXd row(1, raw_features.size());
  row.row(0) = raw_features.transpose();
  Eigen::VectorXd x = model.scaler.apply(row).row(0).transpose();

  Diagnosis d;
  d.flight_id = flight_id;
  d.start_index = start_index;

  Eigen::VectorXd pt = model.type_svm.predict_proba(x);
  for (int c = 0; c < 3; ++c) d.p_type[c] = pt[c];
  int type = model.type_svm.predict(x);
  d.type = static_cast<DamageKind>(type);
  if (d.type == DamageKind::healthy) return d;

  const Mlp& nn = d.type == DamageKind::tipcut ? model.tipcut_nn : model.long_nn;
  const SvmClassifier& loc = d.type == DamageKind::tipcut ? model.tipcut_loc : model.long_loc;

  Eigen::MatrixXd pred = mlp_forward(nn, x.transpose());
  d.raw_sum_mm = pred(0, 0);
  d.raw_diff_mm = pred.cols() > 1 ? pred(0, 1) : 0.0;
  // Physical reporting: non-negative sum, difference within [0, sum].
  d.sum_mm = std::max(0.0, d.raw_sum_mm);
  d.diff_mm = std::clamp(d.raw_diff_mm, 0.0, d.sum_mm);

  Eigen::VectorXd pm = loc.predict_proba(x);
  for (int c = 0; c < loc.n_classes() && c < 4; ++c) d.p_motor[c] = pm[c];
  d.motor = loc.predict(x);
  return d;
}

struct BatchResult {
  std::vector<Diagnosis> diagnoses;
  double windows_per_sec = 0.0;
};

inline FeatureSchema schema_for_id(const std::string& schema_id) {
  for (int bw : supported_band_widths()) {
    FeatureSchema s = FeatureSchema::for_band_width(bw);
    if (s.schema_id == schema_id) return s;
  }
  throw std::invalid_argument("infer: unknown schema " + schema_id);
}

// Full per-window path: feature extraction, standardization, cascade.
inline BatchResult infer_batch(const CascadeModel& model, const FlightLog& log) {
  FeatureSchema schema = schema_for_id(model.schema_id);
  BatchResult res;
  auto t0 = std::chrono::steady_clock::now();
  for (const SampleWindow& w : extract_windows(log)) {
    FeatureVector f = assemble_features(w, schema);
    Eigen::Map<const Eigen::VectorXd> v(f.values.data(),
                                        static_cast<Eigen::Index>(f.values.size()));
    res.diagnoses.push_back(infer_window(model, v, log.flight_id, w.start_index));
  }
  auto t1 = std::chrono::steady_clock::now();
  double secs = std::chrono::duration<double>(t1 - t0).count();
  if (secs > 0.0) res.windows_per_sec = static_cast<double>(res.diagnoses.size()) / secs;
  return res;
}

inline void write_diagnosis_csv(const std::vector<Diagnosis>& rows,
                                const std::filesystem::path& path,
                                const std::string& provenance = "") {
  std::ostringstream out;
  if (!provenance.empty()) out << "# provenance: " << provenance << "\n";
  out << "flight_id,start_index,p_C0,p_C1,p_C2,type,sum_mm,diff_mm,motor,p_m1,p_m2,p_m3,p_m4\n";
  for (const Diagnosis& d : rows) {
    out << d.flight_id << ',' << d.start_index << ',' << format_full(d.p_type[0]) << ','
        << format_full(d.p_type[1]) << ',' << format_full(d.p_type[2]) << ','
        << to_string(d.type) << ',' << format_full(d.sum_mm) << ',' << format_full(d.diff_mm)
        << ',' << d.motor;
    for (double p : d.p_motor) out << ',' << format_full(p);
    out << "\n";
  }
  atomic_write_file(path, out.str());
}

// ---- bundle serialization ----------------------------------------------------

inline void save_cascade(const CascadeModel& model, const std::filesystem::path& dir,
                         const std::string& provenance = "") {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  atomic_write_file(dir / "standardizer.json", model.scaler.to_json().dump(2) + "\n");
  atomic_write_file(dir / "type_svm.json", model.type_svm.to_json().dump(2) + "\n");
  atomic_write_file(dir / "tipcut_nn.json", model.tipcut_nn.to_json().dump(2) + "\n");
  atomic_write_file(dir / "tipcut_loc_svm.json", model.tipcut_loc.to_json().dump(2) + "\n");
  atomic_write_file(dir / "long_nn.json", model.long_nn.to_json().dump(2) + "\n");
  atomic_write_file(dir / "long_loc_svm.json", model.long_loc.to_json().dump(2) + "\n");

  nlohmann::json j;
  j["schema_id"] = model.schema_id;
  j["model"] = "damage-cascade";
  j["n_rotors"] = model.n_rotors;
  j["components"] = {{"standardizer", "standardizer.json"},
                     {"type_svm", "type_svm.json"},
                     {"tipcut_nn", "tipcut_nn.json"},
                     {"tipcut_loc_svm", "tipcut_loc_svm.json"},
                     {"long_nn", "long_nn.json"},
                     {"long_loc_svm", "long_loc_svm.json"}};
  j["config"] = {{"seed", model.cfg.seed},
                 {"svm_c", model.cfg.svm.c},
                 {"svm_tol", model.cfg.svm.tol},
                 {"mlp_epochs", model.cfg.mlp.epochs},
                 {"mlp_learning_rate", model.cfg.mlp.learning_rate},
                 {"loc_class_cap", model.cfg.loc_class_cap}};
  if (!provenance.empty()) j["provenance"] = provenance;
  atomic_write_file(dir / "cascade.json", j.dump(2) + "\n");
}

inline CascadeModel load_cascade(const std::filesystem::path& bundle_path) {
  namespace fs = std::filesystem;
  nlohmann::json j = nlohmann::json::parse(read_file(bundle_path));
  fs::path dir = bundle_path.parent_path();
  auto component = [&](const char* name) {
    return nlohmann::json::parse(
        read_file(dir / j.at("components").at(name).get<std::string>()));
  };
  CascadeModel m;
  m.schema_id = j.at("schema_id").get<std::string>();
  m.n_rotors = j.at("n_rotors").get<int>();
  m.scaler = Standardizer::from_json(component("standardizer"));
  m.type_svm = SvmClassifier::from_json(component("type_svm"));
  m.tipcut_nn = Mlp::from_json(component("tipcut_nn"));
  m.tipcut_loc = SvmClassifier::from_json(component("tipcut_loc_svm"));
  m.long_nn = Mlp::from_json(component("long_nn"));
  m.long_loc = SvmClassifier::from_json(component("long_loc_svm"));
  m.cfg.seed = j.at("config").at("seed").get<std::uint64_t>();
  m.cfg.svm.c = j.at("config").at("svm_c").get<double>();
  m.cfg.svm.tol = j.at("config").at("svm_tol").get<double>();
  m.cfg.mlp.epochs = j.at("config").at("mlp_epochs").get<int>();
  m.cfg.mlp.learning_rate = j.at("config").at("mlp_learning_rate").get<double>();
  m.cfg.loc_class_cap = j.at("config").at("loc_class_cap").get<int>();
  return m;
}

}  // namespace propdiag
