#pragma once
// evalkit.hpp - evaluation harness for the diagnosis cascade:
// confusion tables (aggregate + per flight), magnitude regression summaries,
// permutation feature importance, band-width sweep, feature-group ablation,
// and a leave-one-damage-class-out comparison against a quadratic-feature SVM.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "propdiag/cascade.hpp"
#include "propdiag/cluster.hpp"
#include "propdiag/dataset.hpp"
#include "propdiag/ioutil.hpp"
#include "propdiag/mlp.hpp"
#include "propdiag/spectral.hpp"
#include "propdiag/svm.hpp"

namespace propdiag {

// ---------------------------------------------------------------------------
// Confusion matrices
// ---------------------------------------------------------------------------

struct ConfusionMatrix {
  std::vector<std::string> labels;  // class names, row = true, col = predicted
  Eigen::MatrixXd counts;

  // Row-normalized to percentages; all-zero rows stay zero.
  Eigen::MatrixXd percentages() const {
    Eigen::MatrixXd pct = counts;
    for (Eigen::Index r = 0; r < pct.rows(); ++r) {
      double total = pct.row(r).sum();
      if (total > 0.0) pct.row(r) *= 100.0 / total;
    }
    return pct;
  }

  double accuracy() const {
    double total = counts.sum();
    return total > 0.0 ? counts.trace() / total : 0.0;
  }
};

enum class EvalPopulation { test_only, whole_flight };

inline const char* to_string(EvalPopulation p) {
  return p == EvalPopulation::test_only ? "test_only" : "whole_flight";
}

struct FlightRow {
  std::string flight_id;
  DamageLabel label;
  std::size_t windows = 0;
  std::vector<double> pct;  // percentage per predicted class, sums to 100
};

struct RegressionRow {
  std::string flight_id;
  DamageLabel label;
  std::size_t windows = 0;
  double mean_sum = 0.0, err_sum = 0.0, std_sum = 0.0;
  double mean_diff = 0.0, err_diff = 0.0, std_diff = 0.0;
};

struct EvalReport {
  EvalPopulation population = EvalPopulation::test_only;
  std::size_t rows_evaluated = 0;

  ConfusionMatrix type_confusion;              // C0/C1/C2 over windows
  std::vector<FlightRow> type_by_flight;

  ConfusionMatrix tipcut_loc_confusion;        // motor 1..4, tip-cut windows
  ConfusionMatrix long_loc_confusion;
  std::vector<FlightRow> loc_by_flight;

  std::vector<RegressionRow> tipcut_regression;
  std::vector<RegressionRow> long_regression;

  // Gate-style scalars.
  double healthy_acc = 0.0;        // healthy windows predicted C0
  double tipcut_acc_sum30 = 0.0;   // tip-cut windows with sum >= 30 predicted C1
  double tipcut_acc = 0.0;         // all tip-cut windows
  double long_acc = 0.0;
  double tipcut_loc_acc = 0.0;     // correct motor given true kind rows
  double long_loc_acc = 0.0;
  double loc_miss_opposite = 0.0;  // misclassified-motor mass by relative offset
  double loc_miss_adjacent_cw = 0.0;
  double loc_miss_adjacent_ccw = 0.0;
  double spearman_sum = 0.0;       // predicted vs true sum, tip-cut windows
  double mean_err_sum30_rel = 0.0; // max over flights (sum>=30) of |mean err|/sum
};

// Spearman rank correlation with average ranks for ties.
inline double spearman_rho(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman: need two equal-length series");
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  std::vector<double> ra = ranks(a), rb = ranks(b);
  double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
  double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  if (da <= 0.0 || db <= 0.0) return 0.0;
  return num / std::sqrt(da * db);
}

inline EvalReport evaluate(const CascadeModel& model, const LabeledDataset& ds,
                           const std::vector<SplitTag>& tags,
                           EvalPopulation pop = EvalPopulation::test_only) {
  if (tags.size() != static_cast<std::size_t>(ds.rows()))
    throw std::invalid_argument("evaluate: split tag count mismatch");

  EvalReport rep;
  rep.population = pop;
  rep.type_confusion.labels = {"healthy", "tipcut", "longitudinal"};
  rep.type_confusion.counts = Eigen::MatrixXd::Zero(3, 3);
  rep.tipcut_loc_confusion.labels = {"m1", "m2", "m3", "m4"};
  rep.tipcut_loc_confusion.counts = Eigen::MatrixXd::Zero(4, 4);
  rep.long_loc_confusion = rep.tipcut_loc_confusion;

  struct FlightAgg {
    DamageLabel label;
    std::array<std::size_t, 3> type_hits{};
    std::array<std::size_t, 4> motor_hits{};
    std::size_t windows = 0;
    std::vector<double> pred_sum, pred_diff;
  };
  std::map<std::string, FlightAgg> flights;
  std::vector<std::string> flight_order;

  std::vector<double> tc_pred_sum, tc_true_sum;

  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    if (pop == EvalPopulation::test_only && tags[i] != SplitTag::test) continue;
    const RowMeta& meta = ds.meta[i];
    Diagnosis d = infer_window(model, ds.x.row(i).transpose(), meta.flight_id, meta.start_index);
    ++rep.rows_evaluated;

    const int true_type = type_class_of(meta.label.kind);
    const int pred_type = type_class_of(d.type);
    rep.type_confusion.counts(true_type, pred_type) += 1.0;

    auto it = flights.find(meta.flight_id);
    if (it == flights.end()) {
      it = flights.emplace(meta.flight_id, FlightAgg{}).first;
      it->second.label = meta.label;
      flight_order.push_back(meta.flight_id);
    }
    FlightAgg& agg = it->second;
    ++agg.windows;
    ++agg.type_hits[static_cast<std::size_t>(pred_type)];

    if (meta.label.kind != DamageKind::healthy) {
      // Localization and magnitude are judged on the branch matching the true
      // kind, independent of the type decision, so the stages decouple.
      const SvmClassifier& loc =
          meta.label.kind == DamageKind::tipcut ? model.tipcut_loc : model.long_loc;
      const Mlp& nn = meta.label.kind == DamageKind::tipcut ? model.tipcut_nn : model.long_nn;
      Eigen::MatrixXd row(1, ds.x.cols());
      row.row(0) = ds.x.row(i);
      Eigen::VectorXd xs = model.scaler.apply(row).row(0).transpose();
      int pred_motor = loc.predict(xs);
      ConfusionMatrix& cm = meta.label.kind == DamageKind::tipcut ? rep.tipcut_loc_confusion
                                                                  : rep.long_loc_confusion;
      cm.counts(meta.label.motor - 1, pred_motor - 1) += 1.0;
      if (pred_motor >= 1 && pred_motor <= 4) ++agg.motor_hits[pred_motor - 1];

      Eigen::MatrixXd out = mlp_forward(nn, xs.transpose());
      agg.pred_sum.push_back(out(0, 0));
      agg.pred_diff.push_back(out.cols() > 1 ? out(0, 1) : 0.0);
      if (meta.label.kind == DamageKind::tipcut) {
        tc_pred_sum.push_back(out(0, 0));
        tc_true_sum.push_back(meta.label.sum_mm());
      }
    }
  }

  // Aggregate scalars.
  auto class_acc = [&](int c) {
    double row_total = rep.type_confusion.counts.row(c).sum();
    return row_total > 0.0 ? rep.type_confusion.counts(c, c) / row_total : 0.0;
  };
  rep.healthy_acc = class_acc(0);
  rep.tipcut_acc = class_acc(1);
  rep.long_acc = class_acc(2);
  rep.tipcut_loc_acc = rep.tipcut_loc_confusion.accuracy();
  rep.long_loc_acc = rep.long_loc_confusion.accuracy();

  {  // tip-cut accuracy restricted to sums >= 30 mm, from flight groups
    double hit = 0.0, tot = 0.0;
    for (const auto& [id, agg] : flights)
      if (agg.label.kind == DamageKind::tipcut && agg.label.sum_mm() >= 30.0) {
        hit += static_cast<double>(agg.type_hits[1]);
        tot += static_cast<double>(agg.windows);
      }
    rep.tipcut_acc_sum30 = tot > 0.0 ? hit / tot : 0.0;
  }

  {  // misclassified-motor mass by relative offset (1=next, 2=opposite, 3=previous)
    std::array<double, 4> mass{};
    for (const ConfusionMatrix* cm : {&rep.tipcut_loc_confusion, &rep.long_loc_confusion})
      for (int t = 0; t < 4; ++t)
        for (int p = 0; p < 4; ++p) mass[static_cast<std::size_t>((p - t + 4) % 4)] += cm->counts(t, p);
    double miss = mass[1] + mass[2] + mass[3];
    if (miss > 0.0) {
      rep.loc_miss_adjacent_cw = mass[1] / miss;
      rep.loc_miss_opposite = mass[2] / miss;
      rep.loc_miss_adjacent_ccw = mass[3] / miss;
    }
  }

  if (tc_pred_sum.size() >= 2) rep.spearman_sum = spearman_rho(tc_pred_sum, tc_true_sum);

  // Per-flight rows.
  for (const std::string& id : flight_order) {
    const FlightAgg& agg = flights.at(id);
    FlightRow tr;
    tr.flight_id = id;
    tr.label = agg.label;
    tr.windows = agg.windows;
    for (std::size_t c = 0; c < 3; ++c)
      tr.pct.push_back(100.0 * static_cast<double>(agg.type_hits[c]) /
                       static_cast<double>(agg.windows));
    rep.type_by_flight.push_back(std::move(tr));

    if (agg.label.kind == DamageKind::healthy) continue;

    FlightRow lr;
    lr.flight_id = id;
    lr.label = agg.label;
    lr.windows = agg.windows;
    for (std::size_t m = 0; m < 4; ++m)
      lr.pct.push_back(100.0 * static_cast<double>(agg.motor_hits[m]) /
                       static_cast<double>(agg.windows));
    rep.loc_by_flight.push_back(std::move(lr));

    RegressionRow rr;
    rr.flight_id = id;
    rr.label = agg.label;
    rr.windows = agg.pred_sum.size();
    auto mean_std = [](const std::vector<double>& v) {
      double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
      double var = 0.0;
      for (double x : v) var += (x - m) * (x - m);
      return std::pair<double, double>(m, std::sqrt(var / v.size()));
    };
    std::tie(rr.mean_sum, rr.std_sum) = mean_std(agg.pred_sum);
    std::tie(rr.mean_diff, rr.std_diff) = mean_std(agg.pred_diff);
    rr.err_sum = rr.mean_sum - agg.label.sum_mm();
    rr.err_diff = rr.mean_diff - agg.label.diff_mm();
    (agg.label.kind == DamageKind::tipcut ? rep.tipcut_regression : rep.long_regression)
        .push_back(std::move(rr));
  }

  for (const RegressionRow& rr : rep.tipcut_regression)
    if (rr.label.sum_mm() >= 30.0)
      rep.mean_err_sum30_rel =
          std::max(rep.mean_err_sum30_rel, std::abs(rr.err_sum) / rr.label.sum_mm());
  return rep;
}

// ---------------------------------------------------------------------------
// Permutation feature importance
// ---------------------------------------------------------------------------

struct ImportanceEntry {
  int feature = 0;
  std::string name;
  double mean_drop = 0.0;  // metric degradation averaged over repeats
};

struct ImportanceResult {
  double baseline = 0.0;
  std::vector<ImportanceEntry> ranked;  // descending by mean_drop
};

// `metric` evaluates the fitted model on a (possibly column-shuffled) copy of
// the feature matrix. higher_is_better=true for accuracy, false for MSE.
inline ImportanceResult permutation_importance(
    const Eigen::MatrixXd& x, const FeatureSchema& schema,
    const std::function<double(const Eigen::MatrixXd&)>& metric, bool higher_is_better,
    int repeats, std::uint64_t seed) {
  if (x.rows() < 2) throw std::invalid_argument("importance: need at least 2 rows");
  if (x.cols() != static_cast<Eigen::Index>(schema.n_features))
    throw std::invalid_argument("importance: schema/feature mismatch");
  if (repeats < 1) throw std::invalid_argument("importance: repeats must be positive");

  ImportanceResult res;
  res.baseline = metric(x);
  Eigen::MatrixXd work = x;
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    double drop = 0.0;
    for (int r = 0; r < repeats; ++r) {
      std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(f) * 1000 + r));
      std::iota(perm.begin(), perm.end(), Eigen::Index{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      for (Eigen::Index i = 0; i < x.rows(); ++i) work(i, f) = x(perm[static_cast<std::size_t>(i)], f);
      double m = metric(work);
      drop += higher_is_better ? res.baseline - m : m - res.baseline;
    }
    work.col(f) = x.col(f);
    ImportanceEntry e;
    e.feature = static_cast<int>(f);
    e.name = schema.feature_name(static_cast<int>(f));
    e.mean_drop = drop / repeats;
    res.ranked.push_back(std::move(e));
  }
  std::stable_sort(res.ranked.begin(), res.ranked.end(),
                   [](const ImportanceEntry& a, const ImportanceEntry& b) {
                     return a.mean_drop > b.mean_drop;
                   });
  return res;
}

// ---------------------------------------------------------------------------
// Band-width sweep
// ---------------------------------------------------------------------------

struct BandWidthRow {
  int band_width = 0;
  int n_features = 0;
  double acc_overall = 0.0;
  std::array<double, 3> acc_per_class{};  // healthy, tipcut, longitudinal
};

// Rebuilds features per width from shared per-window spectra, rebalances, and
// retrains the type classifier. Spectra are computed once across all widths.
inline std::vector<BandWidthRow> band_width_study(const std::vector<FlightLog>& corpus,
                                                  const std::vector<int>& widths,
                                                  std::uint64_t seed,
                                                  SvmHyperParams hp = {}) {
  for (int w : widths) {
    auto sup = supported_band_widths();
    if (std::find(sup.begin(), sup.end(), w) == sup.end())
      throw std::invalid_argument("band width study: unsupported width " + std::to_string(w));
  }

  // Shared per-window work: spectra for all channels + torque moments.
  struct WindowCache {
    std::array<std::array<double, kSpectrumBins>, kNumChannels> spectra;
    std::array<Moments, 3> torque_moments;
    RowMeta meta;
  };
  std::vector<WindowCache> cache;
  for (const FlightLog& log : corpus) {
    for (const SampleWindow& w : extract_windows(log)) {
      WindowCache wc;
      std::array<double, kWindowLen> series;
      for (int c = 0; c < kNumChannels; ++c) {
        for (int i = 0; i < kWindowLen; ++i) series[static_cast<std::size_t>(i)] = channel_value(w.records[static_cast<std::size_t>(i)], c);
        wc.spectra[static_cast<std::size_t>(c)] = power_spectrum(series);
        if (c >= static_cast<int>(Channel::qx) && c <= static_cast<int>(Channel::qz))
          wc.torque_moments[static_cast<std::size_t>(c - static_cast<int>(Channel::qx))] =
              moments(series);
      }
      wc.meta = {log.flight_id, w.start_index, log.label};
      cache.push_back(std::move(wc));
    }
  }
  if (cache.empty()) throw std::invalid_argument("band width study: corpus yields no windows");

  std::vector<BandWidthRow> table;
  for (int w : widths) {
    FeatureSchema schema = FeatureSchema::for_band_width(w);

    LabeledDataset ds;
    ds.schema = schema;
    ds.x.resize(static_cast<Eigen::Index>(cache.size()), schema.n_features);
    for (std::size_t r = 0; r < cache.size(); ++r) {
      Eigen::Index col = 0;
      for (int c = 0; c < kNumChannels; ++c) {
        std::vector<double> be = band_energies(cache[r].spectra[static_cast<std::size_t>(c)], w);
        for (double v : be) ds.x(static_cast<Eigen::Index>(r), col++) = v;
      }
      for (const Moments& m : cache[r].torque_moments) {
        ds.x(static_cast<Eigen::Index>(r), col++) = m.mean;
        ds.x(static_cast<Eigen::Index>(r), col++) = m.var;
        ds.x(static_cast<Eigen::Index>(r), col++) = m.skew;
        ds.x(static_cast<Eigen::Index>(r), col++) = m.kurt;
      }
      ds.meta.push_back(cache[r].meta);
    }

    std::vector<SplitTag> tags = split_rows(static_cast<std::size_t>(ds.rows()), mix_seed(seed, 7));

    // Standardize, balance, train the type classifier only.
    std::vector<Eigen::Index> train_idx, test_idx;
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
      if (tags[i] == SplitTag::train) train_idx.push_back(i);
      if (tags[i] == SplitTag::test) test_idx.push_back(i);
    }
    Standardizer scaler;
    scaler.fit(detail::stack_rows(ds.x, train_idx), schema.schema_id);
    Eigen::MatrixXd xs = scaler.apply(ds.x);

    std::map<int, std::vector<Eigen::Index>> by_type;
    for (Eigen::Index i : train_idx) by_type[type_class_of(ds.meta[i].label.kind)].push_back(i);
    std::size_t smallest = SIZE_MAX;
    for (const auto& [t, idx] : by_type) smallest = std::min(smallest, idx.size());
    std::map<int, Eigen::MatrixXd> classes;
    for (const auto& [t, idx] : by_type) classes[t] = detail::stack_rows(xs, idx);
    classes = balance_classes(classes, static_cast<int>(smallest), mix_seed(seed, 8));

    Eigen::Index total = 0;
    for (const auto& [t, m] : classes) total += m.rows();
    Eigen::MatrixXd bx(total, xs.cols());
    std::vector<int> by;
    Eigen::Index row = 0;
    for (const auto& [t, m] : classes) {
      bx.middleRows(row, m.rows()) = m;
      row += m.rows();
      for (Eigen::Index i = 0; i < m.rows(); ++i) by.push_back(t);
    }
    SvmHyperParams hw = hp;
    hw.seed = mix_seed(seed, 9);
    SvmClassifier svm = svm_train(bx, by, hw, schema.schema_id);

    BandWidthRow rowr;
    rowr.band_width = w;
    rowr.n_features = schema.n_features;
    std::array<double, 3> hit{}, tot{};
    for (Eigen::Index i : test_idx) {
      int t = type_class_of(ds.meta[i].label.kind);
      tot[static_cast<std::size_t>(t)] += 1.0;
      if (svm.predict(xs.row(i).transpose()) == t) hit[static_cast<std::size_t>(t)] += 1.0;
    }
    double all_hit = hit[0] + hit[1] + hit[2], all_tot = tot[0] + tot[1] + tot[2];
    rowr.acc_overall = all_tot > 0.0 ? all_hit / all_tot : 0.0;
    for (std::size_t c = 0; c < 3; ++c)
      rowr.acc_per_class[c] = tot[c] > 0.0 ? hit[c] / tot[c] : 0.0;
    table.push_back(rowr);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Feature-group ablation
// ---------------------------------------------------------------------------

struct FeatureMask {
  std::string name;
  bool acc = false, gyro = false, torque = false, thrust = false;
};

inline std::vector<FeatureMask> default_ablation_masks() {
  return {{"acc+gyro+torque+thrust", true, true, true, true},
          {"acc+torque", true, false, true, false},
          {"gyro+torque", false, true, true, false},
          {"acc+gyro", true, true, false, false},
          {"acc", true, false, false, false}};
}

struct AblationRow {
  FeatureMask mask;
  int n_features = 0;
  double mse_sym = 0.0, mse_asym = 0.0;
  double delta_sym_pct = 0.0, delta_asym_pct = 0.0;  // vs first (full) row
};

// Retrains the tip-cut magnitude network on masked feature subsets and scores
// MSE separately on symmetric (diff = 0) and asymmetric test windows.
inline std::vector<AblationRow> ablation_study(const LabeledDataset& ds,
                                               const std::vector<SplitTag>& tags,
                                               const CascadeConfig& cfg,
                                               std::vector<FeatureMask> masks = {}) {
  if (masks.empty()) masks = default_ablation_masks();
  if (tags.size() != static_cast<std::size_t>(ds.rows()))
    throw std::invalid_argument("ablation: split tag count mismatch");

  auto group_of = [&](int f) {
    int c = ds.schema.channel_of(f);  // 0-2 acc, 3-5 gyro, 6-8 torque, 9 thrust
    if (c <= 2) return 0;
    if (c <= 5) return 1;
    if (c <= 8) return 2;
    return 3;
  };

  std::vector<Eigen::Index> train_idx, test_idx;
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    if (ds.meta[i].label.kind != DamageKind::tipcut) continue;
    if (tags[i] == SplitTag::train) train_idx.push_back(i);
    if (tags[i] == SplitTag::test) test_idx.push_back(i);
  }
  if (train_idx.empty() || test_idx.empty())
    throw std::invalid_argument("ablation: need tip-cut rows in both train and test splits");

  std::vector<AblationRow> table;
  for (const FeatureMask& mask : masks) {
    if (!mask.acc && !mask.gyro && !mask.torque && !mask.thrust)
      throw std::invalid_argument("ablation: empty feature mask");
    std::vector<Eigen::Index> cols;
    for (int f = 0; f < ds.schema.n_features; ++f) {
      int g = group_of(f);
      bool keep = (g == 0 && mask.acc) || (g == 1 && mask.gyro) || (g == 2 && mask.torque) ||
                  (g == 3 && mask.thrust);
      if (keep) cols.push_back(static_cast<Eigen::Index>(f));
    }

    auto slice = [&](const std::vector<Eigen::Index>& rows) {
      Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(cols.size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = ds.x(rows[r], cols[c]);
      return m;
    };
    Eigen::MatrixXd xtr_raw = slice(train_idx), xte_raw = slice(test_idx);

    Standardizer scaler;
    scaler.fit(xtr_raw, ds.schema.schema_id + ":masked");
    Eigen::MatrixXd xtr = scaler.apply(xtr_raw), xte = scaler.apply(xte_raw);

    auto targets = [&](const std::vector<Eigen::Index>& rows) {
      Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), 2);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        y(static_cast<Eigen::Index>(r), 0) = ds.meta[rows[r]].label.sum_mm();
        y(static_cast<Eigen::Index>(r), 1) = ds.meta[rows[r]].label.diff_mm();
      }
      return y;
    };
    Eigen::MatrixXd ytr = targets(train_idx), yte = targets(test_idx);

    std::vector<int> sizes;
    sizes.push_back(static_cast<int>(cols.size()));
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(2);
    Mlp nn = mlp_init(sizes, mix_seed(cfg.seed, 50), ds.schema.schema_id + ":masked");
    mlp_train(nn, xtr, ytr, cfg.mlp);

    Eigen::MatrixXd pred = mlp_forward(nn, xte);
    double se_sym = 0.0, se_asym = 0.0;
    std::size_t n_sym = 0, n_asym = 0;
    for (std::size_t r = 0; r < test_idx.size(); ++r) {
      const DamageLabel& l = ds.meta[test_idx[r]].label;
      double se = (pred.row(static_cast<Eigen::Index>(r)) - yte.row(static_cast<Eigen::Index>(r)))
                      .squaredNorm() /
                  2.0;
      if (l.diff_mm() == 0.0) {
        se_sym += se;
        ++n_sym;
      } else {
        se_asym += se;
        ++n_asym;
      }
    }

    AblationRow row;
    row.mask = mask;
    row.n_features = static_cast<int>(cols.size());
    row.mse_sym = n_sym ? se_sym / n_sym : 0.0;
    row.mse_asym = n_asym ? se_asym / n_asym : 0.0;
    if (!table.empty()) {
      if (table.front().mse_sym > 0.0)
        row.delta_sym_pct = 100.0 * (row.mse_sym - table.front().mse_sym) / table.front().mse_sym;
      if (table.front().mse_asym > 0.0)
        row.delta_asym_pct =
            100.0 * (row.mse_asym - table.front().mse_asym) / table.front().mse_asym;
    }
    table.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Leave-one-damage-class-out baseline
// ---------------------------------------------------------------------------

struct LooConfig {
  std::uint64_t seed = 0;
  double svm_c = 1.0;
  double svm_tol = 1e-5;
  int svm_max_epochs = 200;
  int max_rows_per_class = 0;  // 0 = use everything
  MlpTrainConfig mlp;
  std::vector<int> hidden = {32, 8, 4};
};

struct LooResult {
  std::string held_out;
  double true_d1 = 0.0, true_d2 = 0.0;  // d1 = deeper cut
  double svm_holdin_accuracy = 0.0;     // 30% test split of the 12 kept classes
  std::map<std::string, std::size_t> predicted_counts;
  double svm_d1 = 0.0, svm_d2 = 0.0;
  double nn_mean_sum = 0.0, nn_mean_diff = 0.0;
  double nn_d1 = 0.0, nn_d2 = 0.0;
};

inline std::string tipcut_class_key(const DamageLabel& l) {
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return std::string(buf);
  };
  return fmt(l.cut1_mm) + "-" + fmt(l.cut2_mm);
}

// Class-frequency-weighted damage estimate: sum_j N_j * (d1_j, d2_j) / N.
inline std::pair<double, double> frequency_weighted_damage(
    const std::map<std::string, std::size_t>& counts,
    const std::map<std::string, std::pair<double, double>>& prototypes) {
  double n = 0.0, d1 = 0.0, d2 = 0.0;
  for (const auto& [key, c] : counts) {
    auto it = prototypes.find(key);
    if (it == prototypes.end()) throw std::invalid_argument("loo: unknown class " + key);
    n += static_cast<double>(c);
    d1 += static_cast<double>(c) * it->second.first;
    d2 += static_cast<double>(c) * it->second.second;
  }
  if (n == 0.0) throw std::invalid_argument("loo: no predictions to weight");
  return {d1 / n, d2 / n};
}

namespace detail {

// Degree-2 polynomial expansion: x followed by all products x_i*x_j, i <= j.
inline void expand_quadratic_into(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  Eigen::VectorXd& out) {
  const Eigen::Index d = x.size();
  out.resize(d * (d + 3) / 2);
  out.head(d) = x;
  Eigen::Index k = d;
  for (Eigen::Index i = 0; i < d; ++i) {
    out.segment(k, d - i) = x[i] * x.tail(d - i);
    k += d - i;
  }
}

// Binary dual coordinate descent over the implicit quadratic expansion.
// Identical update rule to the linear trainer, but each row is expanded into a
// scratch buffer on access so the (rows x d^2/2) matrix never materializes.
struct QuadraticBinarySvm {
  Eigen::VectorXd w;
  double b = 0.0;
  double decision(const Eigen::VectorXd& expanded) const { return w.dot(expanded) + b; }
};

inline QuadraticBinarySvm train_binary_quadratic(const Eigen::MatrixXd& x,
                                                 const std::vector<int>& y,
                                                 const SvmHyperParams& hp) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index dq = d * (d + 3) / 2;
  QuadraticBinarySvm model;
  model.w = Eigen::VectorXd::Zero(dq);

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd qii(n);
  Eigen::VectorXd scratch;
  for (Eigen::Index i = 0; i < n; ++i) {
    expand_quadratic_into(x.row(i).transpose(), scratch);
    qii[i] = scratch.squaredNorm() + 1.0;  // +1 for the augmented bias term
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(hp.seed);

  for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double max_pg = 0.0;
    for (Eigen::Index i : order) {
      const double yi = y[static_cast<std::size_t>(i)];
      expand_quadratic_into(x.row(i).transpose(), scratch);
      const double g = yi * (model.w.dot(scratch) + model.b) - 1.0;
      double pg = g;
      if (alpha[i] <= 0.0)
        pg = std::min(g, 0.0);
      else if (alpha[i] >= hp.c)
        pg = std::max(g, 0.0);
      max_pg = std::max(max_pg, std::abs(pg));
      if (pg == 0.0) continue;
      const double old = alpha[i];
      alpha[i] = std::clamp(old - g / qii[i], 0.0, hp.c);
      const double delta = (alpha[i] - old) * yi;
      if (delta != 0.0) {
        model.w += delta * scratch;
        model.b += delta;
      }
    }
    if (max_pg < hp.tol) break;
  }
  return model;
}

}  // namespace detail

inline LooResult loo_baseline(const LabeledDataset& ds, double held_cut1, double held_cut2,
                              const LooConfig& cfg) {
  DamageLabel held = DamageLabel::tipcut(held_cut1, held_cut2, 1);
  const std::string held_key = tipcut_class_key(held);

  // Collect tip-cut rows per class.
  std::map<std::string, std::vector<Eigen::Index>> by_class;
  std::map<std::string, std::pair<double, double>> prototypes;  // key -> (d1, d2)
  for (Eigen::Index i = 0; i < ds.rows(); ++i) {
    const DamageLabel& l = ds.meta[i].label;
    if (l.kind != DamageKind::tipcut) continue;
    std::string key = tipcut_class_key(l);
    by_class[key].push_back(i);
    prototypes[key] = {std::max(l.cut1_mm, l.cut2_mm), std::min(l.cut1_mm, l.cut2_mm)};
  }
  if (by_class.find(held_key) == by_class.end())
    throw std::invalid_argument("loo: held-out class " + held_key + " not in corpus");
  if (by_class.size() < 3)
    throw std::invalid_argument("loo: need at least 3 tip-cut classes");

  LooResult res;
  res.held_out = held_key;
  res.true_d1 = prototypes[held_key].first;
  res.true_d2 = prototypes[held_key].second;

  // Kept classes, optional per-class subsample, then a 70/30 row split.
  std::vector<Eigen::Index> kept;
  std::vector<std::string> kept_keys;
  {
    std::mt19937_64 rng(mix_seed(cfg.seed, 61));
    for (auto& [key, idx] : by_class) {
      if (key == held_key) continue;
      std::vector<Eigen::Index> rows = idx;
      if (cfg.max_rows_per_class > 0 &&
          rows.size() > static_cast<std::size_t>(cfg.max_rows_per_class)) {
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(static_cast<std::size_t>(cfg.max_rows_per_class));
      }
      for (Eigen::Index r : rows) {
        kept.push_back(r);
        kept_keys.push_back(key);
      }
    }
  }
  std::vector<std::size_t> perm(kept.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  {
    std::mt19937_64 rng(mix_seed(cfg.seed, 62));
    std::shuffle(perm.begin(), perm.end(), rng);
  }
  const std::size_t n_train = static_cast<std::size_t>(std::llround(0.7 * perm.size()));
  std::vector<Eigen::Index> tr_rows, te_rows;
  std::vector<std::string> tr_keys, te_keys;
  for (std::size_t p = 0; p < perm.size(); ++p) {
    if (p < n_train) {
      tr_rows.push_back(kept[perm[p]]);
      tr_keys.push_back(kept_keys[perm[p]]);
    } else {
      te_rows.push_back(kept[perm[p]]);
      te_keys.push_back(kept_keys[perm[p]]);
    }
  }

  Standardizer scaler;
  scaler.fit(detail::stack_rows(ds.x, tr_rows), ds.schema.schema_id);
  Eigen::MatrixXd xtr = scaler.apply(detail::stack_rows(ds.x, tr_rows));
  Eigen::MatrixXd xte = scaler.apply(detail::stack_rows(ds.x, te_rows));
  Eigen::MatrixXd xheld = scaler.apply(detail::stack_rows(ds.x, by_class[held_key]));

  // (a) one-vs-rest quadratic-feature SVM over the kept classes.
  std::vector<std::string> class_order;
  for (const auto& [key, idx] : by_class)
    if (key != held_key) class_order.push_back(key);

  SvmHyperParams hp;
  hp.c = cfg.svm_c;
  hp.tol = cfg.svm_tol;
  hp.max_epochs = cfg.svm_max_epochs;
  std::vector<detail::QuadraticBinarySvm> ovr;
  for (std::size_t c = 0; c < class_order.size(); ++c) {
    std::vector<int> y(tr_keys.size());
    for (std::size_t i = 0; i < tr_keys.size(); ++i)
      y[i] = tr_keys[i] == class_order[c] ? 1 : -1;
    hp.seed = mix_seed(cfg.seed, 70 + c);
    ovr.push_back(detail::train_binary_quadratic(xtr, y, hp));
  }
  auto classify = [&](const Eigen::VectorXd& row) {
    Eigen::VectorXd expanded;
    detail::expand_quadratic_into(row, expanded);
    std::size_t best = 0;
    double best_dec = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < ovr.size(); ++c) {
      double dec = ovr[c].decision(expanded);
      if (dec > best_dec) {
        best_dec = dec;
        best = c;
      }
    }
    return class_order[best];
  };

  std::size_t hits = 0;
  for (std::size_t i = 0; i < te_rows.size(); ++i)
    if (classify(xte.row(static_cast<Eigen::Index>(i)).transpose()) == te_keys[i]) ++hits;
  res.svm_holdin_accuracy = te_rows.empty() ? 0.0 : static_cast<double>(hits) / te_rows.size();

  for (Eigen::Index i = 0; i < xheld.rows(); ++i)
    ++res.predicted_counts[classify(xheld.row(i).transpose())];
  std::tie(res.svm_d1, res.svm_d2) = frequency_weighted_damage(res.predicted_counts, prototypes);

  // (b) magnitude network retrained without the held-out class.
  {
    Eigen::MatrixXd ytr(static_cast<Eigen::Index>(tr_rows.size()), 2);
    for (std::size_t i = 0; i < tr_rows.size(); ++i) {
      const DamageLabel& l = ds.meta[tr_rows[i]].label;
      ytr(static_cast<Eigen::Index>(i), 0) = l.sum_mm();
      ytr(static_cast<Eigen::Index>(i), 1) = l.diff_mm();
    }
    std::vector<int> sizes;
    sizes.push_back(static_cast<int>(ds.x.cols()));
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(2);
    Mlp nn = mlp_init(sizes, mix_seed(cfg.seed, 90), ds.schema.schema_id);
    mlp_train(nn, xtr, ytr, cfg.mlp);
    Eigen::MatrixXd pred = mlp_forward(nn, xheld);
    res.nn_mean_sum = pred.col(0).mean();
    res.nn_mean_diff = pred.col(1).mean();
    res.nn_d1 = 0.5 * (res.nn_mean_sum + res.nn_mean_diff);
    res.nn_d2 = 0.5 * (res.nn_mean_sum - res.nn_mean_diff);
  }
  return res;
}

}  // namespace propdiag
