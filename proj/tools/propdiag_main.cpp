// propdiag - propeller damage diagnosis from IMU + control logs.
//
// Subcommands cover the full pipeline: synthetic corpus generation, log
// validation, feature extraction, rotation augmentation, splitting, cascade
// training, evaluation, per-flight inference, and the analysis studies
// (permutation importance, band-width sweep, ablation, leave-one-class-out).
//
// Exit codes: 0 ok, 2 unknown subcommand, 3 config error, 4 data error,
// 5 numeric failure. Errors print a single line on stderr.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "propdiag/propdiag.hpp"

namespace fs = std::filesystem;
using namespace propdiag;

namespace {

// Data-shaped failures (unreadable/malformed inputs) map to exit 4.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
auto as_data(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(what + ": " + e.what());
  }
}

struct CommonOpts {
  std::string config_path;
  long long seed = -1;  // >= 0 overrides the config seed
  bool json = false;
};

void add_common(CLI::App* sub, CommonOpts& c) {
  sub->add_option("--config", c.config_path, "TOML config file (defaults apply if omitted)");
  sub->add_option("--seed", c.seed, "Seed override (non-negative integer)");
  sub->add_flag("--json", c.json, "Emit a JSON report on stdout instead of text");
}

RunConfig resolve_config(const CommonOpts& c) {
  RunConfig cfg;
  if (!c.config_path.empty()) {
    std::string text;
    try {
      text = read_file(c.config_path);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    cfg = run_config_from_toml(parse_toml(text));
  }
  if (c.seed >= 0) cfg.seed = static_cast<std::uint64_t>(c.seed);
  return cfg;
}

std::string config_fingerprint(const RunConfig& c) {
  std::ostringstream s;
  s << c.band_width << '|' << c.seed << '|' << format_full(c.svm_c) << '|'
    << format_full(c.svm_tol) << '|' << c.svm_max_epochs << '|' << c.mlp_epochs << '|'
    << format_full(c.mlp_learning_rate) << '|';
  for (int h : c.hidden) s << h << ',';
  s << '|' << c.loc_class_cap << '|' << c.split_mode << '|' << format_full(c.window_scale) << '|'
    << c.synth_rotations << '|' << format_full(c.synth.base_rotor_hz) << '|'
    << format_full(c.synth.freq_shift_per_mm) << '|' << format_full(c.synth.imbalance_amp_per_mm)
    << '|' << format_full(c.synth.torque_bias_per_mm) << '|'
    << format_full(c.synth.long_freq_drop_per_mm) << '|' << format_full(c.synth.long_amp_per_mm)
    << '|' << format_full(c.noise.acc) << '|' << format_full(c.noise.gyro) << '|'
    << format_full(c.noise.torque) << '|' << format_full(c.noise.thrust);
  return s.str();
}

std::string provenance_line(const std::string& cmd, const RunConfig& cfg) {
  return "propdiag " + std::string(kVersion) + " cmd=" + cmd + " seed=" +
         std::to_string(cfg.seed) + " cfg=" + hex64(fnv1a64(config_fingerprint(cfg)));
}

// ---- small text-report helpers ---------------------------------------------

std::string fmt_num(double v, int prec = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

std::string render_table(const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return "";
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out << rows[r][c];
      if (c + 1 < rows[r].size())
        out << std::string(widths[c] - rows[r][c].size() + 2, ' ');
    }
    out << "\n";
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < widths.size(); ++c) total += widths[c] + (c + 1 < widths.size() ? 2 : 0);
      out << std::string(total, '-') << "\n";
    }
  }
  return out.str();
}

std::string confusion_csv(const ConfusionMatrix& cm, const std::string& provenance) {
  std::ostringstream out;
  if (!provenance.empty()) out << "# provenance: " << provenance << "\n";
  out << "true\\pred";
  for (const std::string& l : cm.labels) out << ',' << l << "_count";
  for (const std::string& l : cm.labels) out << ',' << l << "_pct";
  out << "\n";
  Eigen::MatrixXd pct = cm.percentages();
  for (Eigen::Index r = 0; r < cm.counts.rows(); ++r) {
    out << cm.labels[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < cm.counts.cols(); ++c)
      out << ',' << format_full(cm.counts(r, c));
    for (Eigen::Index c = 0; c < cm.counts.cols(); ++c) out << ',' << format_full(pct(r, c));
    out << "\n";
  }
  return out.str();
}

std::string confusion_text(const ConfusionMatrix& cm, const std::string& title) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"true\\pred [%]"};
  for (const std::string& l : cm.labels) header.push_back(l);
  header.push_back("windows");
  rows.push_back(header);
  Eigen::MatrixXd pct = cm.percentages();
  for (Eigen::Index r = 0; r < cm.counts.rows(); ++r) {
    std::vector<std::string> row{cm.labels[static_cast<std::size_t>(r)]};
    for (Eigen::Index c = 0; c < pct.cols(); ++c) row.push_back(fmt_num(pct(r, c)));
    row.push_back(std::to_string(static_cast<long long>(cm.counts.row(r).sum())));
    rows.push_back(row);
  }
  return title + "\n" + render_table(rows);
}

nlohmann::json confusion_json(const ConfusionMatrix& cm) {
  nlohmann::json j;
  j["labels"] = cm.labels;
  Eigen::MatrixXd pct = cm.percentages();
  for (Eigen::Index r = 0; r < cm.counts.rows(); ++r) {
    std::vector<double> cr, pr;
    for (Eigen::Index c = 0; c < cm.counts.cols(); ++c) {
      cr.push_back(cm.counts(r, c));
      pr.push_back(pct(r, c));
    }
    j["counts"].push_back(cr);
    j["percent"].push_back(pr);
  }
  j["accuracy"] = cm.accuracy();
  return j;
}

fs::path model_bundle_path(const std::string& given) {
  fs::path p(given);
  if (fs::is_directory(p)) return p / "cascade.json";
  return p;
}

std::string label_text(const DamageLabel& l) {
  switch (l.kind) {
    case DamageKind::healthy:
      return "healthy";
    case DamageKind::tipcut: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "tipcut %g-%g m%d", l.cut1_mm, l.cut2_mm, l.motor);
      return buf;
    }
    case DamageKind::longitudinal: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "long %g m%d", l.depth_mm(), l.motor);
      return buf;
    }
  }
  return "?";
}

CascadeConfig cascade_config_of(const RunConfig& cfg) {
  CascadeConfig cc;
  cc.seed = cfg.seed;
  cc.svm.c = cfg.svm_c;
  cc.svm.tol = cfg.svm_tol;
  cc.svm.max_epochs = cfg.svm_max_epochs;
  cc.mlp.epochs = cfg.mlp_epochs;
  cc.mlp.learning_rate = cfg.mlp_learning_rate;
  cc.hidden = cfg.hidden;
  cc.loc_class_cap = cfg.loc_class_cap;
  return cc;
}

// ---- subcommand: synth ------------------------------------------------------

struct SynthOpts {
  CommonOpts common;
  std::string out;
  double window_scale = 0.0;
  bool no_rotations = false;
};

void run_synth(const SynthOpts& o) {
  RunConfig cfg = resolve_config(o.common);
  if (!o.out.empty()) cfg.corpus_dir = o.out;
  if (o.window_scale > 0.0) cfg.window_scale = o.window_scale;
  if (o.no_rotations) cfg.synth_rotations = false;

  CorpusConfig cc;
  cc.coeffs = cfg.synth;
  cc.noise = cfg.noise;
  cc.seed = cfg.seed;
  cc.window_scale = cfg.window_scale;
  std::vector<FlightLog> logs = build_corpus(cc);
  if (cfg.synth_rotations) logs = augment_corpus(logs);

  fs::create_directories(cfg.corpus_dir);
  std::size_t windows = 0;
  for (const FlightLog& log : logs) {
    save_flight(log, cfg.corpus_dir);
    windows += extract_windows(log).size();
  }

  if (o.common.json) {
    nlohmann::json j;
    j["flights"] = logs.size();
    j["files"] = logs.size() * 2;
    j["windows"] = windows;
    j["dir"] = cfg.corpus_dir;
    j["provenance"] = provenance_line("synth", cfg);
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "wrote " << logs.size() << " flights (" << logs.size() * 2 << " files, "
              << windows << " windows) to " << cfg.corpus_dir << "\n";
  }
}

// ---- subcommand: ingest -----------------------------------------------------

struct IngestOpts {
  CommonOpts common;
  std::vector<std::string> logs;
  std::string corpus;
  std::string out;
  bool require_meta = false;
};

void run_ingest(const IngestOpts& o) {
  std::vector<fs::path> paths;
  for (const std::string& l : o.logs) paths.emplace_back(l);
  if (!o.corpus.empty()) {
    if (!fs::is_directory(o.corpus)) throw DataError("ingest: not a directory: " + o.corpus);
    for (const auto& entry : fs::directory_iterator(o.corpus))
      if (entry.path().extension() == ".csv") paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
  }
  if (paths.empty()) throw ConfigError("ingest: pass --log and/or --corpus");

  std::vector<std::vector<std::string>> table;
  table.push_back({"flight", "records", "rate", "finite", "length", "monotone", "gaps", "label"});
  nlohmann::json jflights = nlohmann::json::array();
  std::size_t bad = 0;
  for (const fs::path& p : paths) {
    FlightLog log = as_data("ingest " + p.string(),
                            [&] { return load_flight(p, o.require_meta); });
    ValidationReport r = validate(log);
    if (!r.all_ok()) ++bad;
    auto okstr = [](bool b) { return b ? std::string("ok") : std::string("FAIL"); };
    table.push_back({log.flight_id, std::to_string(log.records.size()), okstr(r.rate_ok),
                     okstr(r.finite_ok), okstr(r.length_ok), okstr(r.monotone_ok),
                     std::to_string(r.gap_count), label_text(log.label)});
    nlohmann::json jf;
    jf["flight_id"] = log.flight_id;
    jf["records"] = log.records.size();
    jf["rate_ok"] = r.rate_ok;
    jf["finite_ok"] = r.finite_ok;
    jf["length_ok"] = r.length_ok;
    jf["monotone_ok"] = r.monotone_ok;
    jf["gap_count"] = r.gap_count;
    jf["ok"] = r.all_ok();
    jflights.push_back(jf);
  }

  if (!o.out.empty()) {
    std::ostringstream csv;
    csv << "flight_id,records,rate_ok,finite_ok,length_ok,monotone_ok,gap_count\n";
    for (const auto& jf : jflights)
      csv << jf["flight_id"].get<std::string>() << ',' << jf["records"].get<std::size_t>() << ','
          << jf["rate_ok"].get<bool>() << ',' << jf["finite_ok"].get<bool>() << ','
          << jf["length_ok"].get<bool>() << ',' << jf["monotone_ok"].get<bool>() << ','
          << jf["gap_count"].get<std::size_t>() << "\n";
    atomic_write_file(o.out, csv.str());
  }
  if (o.common.json)
    std::cout << nlohmann::json{{"flights", jflights}, {"failed", bad}}.dump(2) << "\n";
  else
    std::cout << render_table(table);
  if (bad > 0) throw DataError("ingest: " + std::to_string(bad) + " flight(s) failed validation");
}

// ---- subcommand: features ---------------------------------------------------

struct FeaturesOpts {
  CommonOpts common;
  std::string corpus;
  std::string out;
  int bw = 0;
};

void run_features(const FeaturesOpts& o) {
  RunConfig cfg = resolve_config(o.common);
  if (!o.corpus.empty()) cfg.corpus_dir = o.corpus;
  if (o.bw > 0) cfg.band_width = o.bw;
  fs::path out = o.out.empty() ? fs::path(cfg.out_dir) / "features.csv" : fs::path(o.out);

  std::vector<FlightLog> corpus =
      as_data("features", [&] { return load_corpus(cfg.corpus_dir); });
  FeatureSchema schema = FeatureSchema::for_band_width(cfg.band_width);
  LabeledDataset ds = build_dataset(corpus, schema);
  write_features_csv(ds, out, provenance_line("features", cfg));

  if (o.common.json) {
    nlohmann::json j;
    j["rows"] = ds.rows();
    j["features"] = schema.n_features;
    j["schema"] = schema.schema_id;
    j["path"] = out.string();
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "wrote " << ds.rows() << " windows x " << schema.n_features << " features ("
              << schema.schema_id << ") to " << out.string() << "\n";
  }
}

// ---- subcommand: augment ----------------------------------------------------

struct AugmentOpts {
  CommonOpts common;
  std::string corpus;
  std::string out;
  int rotors = 4;
};

void run_augment(const AugmentOpts& o) {
  std::vector<FlightLog> corpus = as_data("augment", [&] { return load_corpus(o.corpus); });
  std::vector<FlightLog> augmented = augment_corpus(corpus, o.rotors);
  fs::create_directories(o.out);
  for (const FlightLog& log : augmented) save_flight(log, o.out);
  if (o.common.json)
    std::cout << nlohmann::json{{"flights_in", corpus.size()}, {"flights_out", augmented.size()}}
                     .dump(2)
              << "\n";
  else
    std::cout << "wrote " << augmented.size() << " flights (" << corpus.size() << " x " << o.rotors
              << " mountings) to " << o.out << "\n";
}

// ---- subcommand: split ------------------------------------------------------

struct SplitOpts {
  CommonOpts common;
  std::string features;
  std::string out;
  std::string mode;
};

void run_split(const SplitOpts& o) {
  RunConfig cfg = resolve_config(o.common);
  if (!o.mode.empty()) cfg.split_mode = o.mode;
  if (cfg.split_mode != "rows" && cfg.split_mode != "flights")
    throw ConfigError("split: --mode must be rows or flights");
  fs::path out = o.out.empty() ? fs::path(cfg.out_dir) / "splits.csv" : fs::path(o.out);

  LabeledDataset ds = as_data("split", [&] { return read_features_csv(o.features); });
  std::vector<SplitTag> tags = cfg.split_mode == "rows"
                                   ? split_rows(static_cast<std::size_t>(ds.rows()), cfg.seed)
                                   : split_by_flight(ds, cfg.seed);
  write_splits_csv(ds, tags, out);

  std::size_t ntr = 0, nva = 0, nte = 0;
  for (SplitTag t : tags)
    (t == SplitTag::train ? ntr : t == SplitTag::val ? nva : nte) += 1;
  if (o.common.json) {
    nlohmann::json j{{"train", ntr}, {"val", nva}, {"test", nte}, {"mode", cfg.split_mode},
                     {"path", out.string()}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "split " << ds.rows() << " windows -> train " << ntr << ", val " << nva
              << ", test " << nte << " (" << cfg.split_mode << ") -> " << out.string() << "\n";
  }
}

// ---- subcommand: train ------------------------------------------------------

struct TrainOpts {
  CommonOpts common;
  std::string features;
  std::string splits;
  std::string out;
};

void run_train(const TrainOpts& o) {
  RunConfig cfg = resolve_config(o.common);
  fs::path out = o.out.empty() ? fs::path(cfg.out_dir) / "model" : fs::path(o.out);

  LabeledDataset ds = as_data("train", [&] { return read_features_csv(o.features); });
  std::vector<SplitTag> tags = as_data("train", [&] { return read_splits_csv(ds, o.splits); });

  auto [model, report] = train_cascade(ds, tags, cascade_config_of(cfg));
  save_cascade(model, out, provenance_line("train", cfg));

  nlohmann::json jr;
  jr["stage_rows"] = report.stage_rows;
  jr["val_type_accuracy"] = report.val_type_accuracy;
  jr["tipcut_final_loss"] = report.tipcut_loss.empty() ? 0.0 : report.tipcut_loss.back();
  jr["long_final_loss"] = report.long_loss.empty() ? 0.0 : report.long_loss.back();
  jr["provenance"] = provenance_line("train", cfg);
  atomic_write_file(out / "train_report.json", jr.dump(2) + "\n");

  auto loss_svg = [&](const std::vector<double>& hist, const std::string& title) {
    SvgSeries s;
    s.label = "training loss";
    for (std::size_t i = 0; i < hist.size(); ++i)
      s.points.emplace_back(static_cast<double>(i + 1), hist[i]);
    return svg_line_chart(title, "epoch", "mean squared error", {s});
  };
  atomic_write_file(out / "loss_tipcut.svg",
                    loss_svg(report.tipcut_loss, "tip-cut magnitude net: training loss"));
  atomic_write_file(out / "loss_long.svg",
                    loss_svg(report.long_loss, "longitudinal magnitude net: training loss"));

  if (o.common.json) {
    jr["model_dir"] = out.string();
    std::cout << jr.dump(2) << "\n";
  } else {
    std::vector<std::vector<std::string>> table{{"stage", "training rows"}};
    for (const auto& [k, v] : report.stage_rows) table.push_back({k, std::to_string(v)});
    std::cout << render_table(table);
    std::cout << "validation type accuracy: " << fmt_num(100.0 * report.val_type_accuracy)
              << "%\nmodel bundle: " << (out / "cascade.json").string() << "\n";
  }
}

// ---- subcommand: eval -------------------------------------------------------

struct EvalOpts {
  CommonOpts common;
  std::string model;
  std::string features;
  std::string splits;
  std::string out;
  std::string population = "both";
};

void write_eval_artifacts(const EvalReport& rep, const fs::path& dir, const std::string& prov) {
  const std::string s = rep.population == EvalPopulation::test_only ? "test" : "flight";
  atomic_write_file(dir / ("confusion_type_" + s + ".csv"),
                    confusion_csv(rep.type_confusion, prov));
  atomic_write_file(dir / ("confusion_type_" + s + ".txt"),
                    confusion_text(rep.type_confusion, "damage type (" + s + " windows)"));
  atomic_write_file(dir / ("confusion_loc_tipcut_" + s + ".csv"),
                    confusion_csv(rep.tipcut_loc_confusion, prov));
  atomic_write_file(dir / ("confusion_loc_long_" + s + ".csv"),
                    confusion_csv(rep.long_loc_confusion, prov));

  std::ostringstream fb;
  fb << "# provenance: " << prov << "\n";
  fb << "flight_id,label,windows,pct_C0,pct_C1,pct_C2\n";
  for (const FlightRow& r : rep.type_by_flight) {
    fb << r.flight_id << ',' << label_text(r.label) << ',' << r.windows;
    for (double p : r.pct) fb << ',' << format_full(p);
    fb << "\n";
  }
  atomic_write_file(dir / ("flights_type_" + s + ".csv"), fb.str());

  std::ostringstream lb;
  lb << "# provenance: " << prov << "\n";
  lb << "flight_id,label,windows,pct_m1,pct_m2,pct_m3,pct_m4\n";
  for (const FlightRow& r : rep.loc_by_flight) {
    lb << r.flight_id << ',' << label_text(r.label) << ',' << r.windows;
    for (double p : r.pct) lb << ',' << format_full(p);
    lb << "\n";
  }
  atomic_write_file(dir / ("flights_loc_" + s + ".csv"), lb.str());

  auto reg_csv = [&](const std::vector<RegressionRow>& rows) {
    std::ostringstream rb;
    rb << "# provenance: " << prov << "\n";
    rb << "flight_id,label,windows,mean_sum,err_sum,std_sum,mean_diff,err_diff,std_diff\n";
    for (const RegressionRow& r : rows) {
      rb << r.flight_id << ',' << label_text(r.label) << ',' << r.windows << ','
         << format_full(r.mean_sum) << ',' << format_full(r.err_sum) << ','
         << format_full(r.std_sum) << ',' << format_full(r.mean_diff) << ','
         << format_full(r.err_diff) << ',' << format_full(r.std_diff) << "\n";
    }
    return rb.str();
  };
  atomic_write_file(dir / ("regression_tipcut_" + s + ".csv"), reg_csv(rep.tipcut_regression));
  atomic_write_file(dir / ("regression_long_" + s + ".csv"), reg_csv(rep.long_regression));
}

nlohmann::json eval_report_json(const EvalReport& rep) {
  nlohmann::json j;
  j["population"] = to_string(rep.population);
  j["rows_evaluated"] = rep.rows_evaluated;
  j["type_confusion"] = confusion_json(rep.type_confusion);
  j["tipcut_loc_confusion"] = confusion_json(rep.tipcut_loc_confusion);
  j["long_loc_confusion"] = confusion_json(rep.long_loc_confusion);
  j["healthy_acc"] = rep.healthy_acc;
  j["tipcut_acc"] = rep.tipcut_acc;
  j["tipcut_acc_sum30"] = rep.tipcut_acc_sum30;
  j["long_acc"] = rep.long_acc;
  j["tipcut_loc_acc"] = rep.tipcut_loc_acc;
  j["long_loc_acc"] = rep.long_loc_acc;
  j["loc_miss_opposite"] = rep.loc_miss_opposite;
  j["loc_miss_adjacent_cw"] = rep.loc_miss_adjacent_cw;
  j["loc_miss_adjacent_ccw"] = rep.loc_miss_adjacent_ccw;
  j["spearman_sum"] = rep.spearman_sum;
  j["mean_err_sum30_rel"] = rep.mean_err_sum30_rel;
  return j;
}

void run_eval(const EvalOpts& o) {
  RunConfig cfg = resolve_config(o.common);
  fs::path out = o.out.empty() ? fs::path(cfg.out_dir) / "eval" : fs::path(o.out);
  fs::create_directories(out);

  CascadeModel model =
      as_data("eval", [&] { return load_cascade(model_bundle_path(o.model)); });
  LabeledDataset ds = as_data("eval", [&] { return read_features_csv(o.features); });
  std::vector<SplitTag> tags = as_data("eval", [&] { return read_splits_csv(ds, o.splits); });

  std::vector<EvalPopulation> pops;
  if (o.population == "both" || o.population == "test") pops.push_back(EvalPopulation::test_only);
  if (o.population == "both" || o.population == "flight")
    pops.push_back(EvalPopulation::whole_flight);
  if (pops.empty()) throw ConfigError("eval: --population must be test, flight, or both");

  const std::string prov = provenance_line("eval", cfg);
  nlohmann::json jall;
  jall["provenance"] = prov;
  for (EvalPopulation pop : pops) {
    EvalReport rep = evaluate(model, ds, tags, pop);
    write_eval_artifacts(rep, out, prov);
    jall[to_string(pop)] = eval_report_json(rep);
    if (!o.common.json) {
      std::cout << confusion_text(rep.type_confusion,
                                  std::string("damage type (") + to_string(pop) + ")");
      std::cout << "healthy " << fmt_num(100 * rep.healthy_acc) << "%, tipcut "
                << fmt_num(100 * rep.tipcut_acc) << "% (sum>=30: "
                << fmt_num(100 * rep.tipcut_acc_sum30) << "%), long "
                << fmt_num(100 * rep.long_acc) << "%\n"
                << "loc tipcut " << fmt_num(100 * rep.tipcut_loc_acc) << "%, loc long "
                << fmt_num(100 * rep.long_loc_acc) << "% (miss mass: opp "
                << fmt_num(100 * rep.loc_miss_opposite) << "%, adj "
                << fmt_num(100 * rep.loc_miss_adjacent_cw) << "%/"
                << fmt_num(100 * rep.loc_miss_adjacent_ccw) << "%)\n"
                << "spearman(sum) " << fmt_num(rep.spearman_sum, 4) << ", worst |mean err|/sum "
                << fmt_num(100 * rep.mean_err_sum30_rel) << "% (sums>=30)\n\n";
    }
  }
  atomic_write_file(out / "eval_report.json", jall.dump(2) + "\n");
  if (o.common.json) std::cout << jall.dump(2) << "\n";
}

// ---- subcommand: infer ------------------------------------------------------

struct InferOpts {
  CommonOpts common;
  std::string model;
  std::string log;
  std::string out;
};

void run_infer(const InferOpts& o) {
  RunConfig cfg = resolve_config(o.common);
  fs::path out = o.out.empty() ? fs::path(cfg.out_dir) / "diagnosis.csv" : fs::path(o.out);

  CascadeModel model =
      as_data("infer", [&] { return load_cascade(model_bundle_path(o.model)); });
  FlightLog log = as_data("infer", [&] { return load_flight(o.log, false); });
  BatchResult res = infer_batch(model, log);
  write_diagnosis_csv(res.diagnoses, out, provenance_line("infer", cfg));

  if (o.common.json) {
    nlohmann::json j{{"windows", res.diagnoses.size()},
                     {"windows_per_sec", res.windows_per_sec},
                     {"path", out.string()}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "diagnosed " << res.diagnoses.size() << " windows at "
              << fmt_num(res.windows_per_sec, 1) << " windows/s -> " << out.string() << "\n";
  }
}

// ---- subcommand: importance -------------------------------------------------

struct ImportanceOpts {
  CommonOpts common;
  std::string model;
  std::string features;
  std::string splits;
  std::string metric = "accuracy";
  std::string out;
  int repeats = 0;
  int top = 0;
};

void run_importance(const ImportanceOpts& o) {
  RunConfig cfg = resolve_config(o.common);
  fs::path out = o.out.empty() ? fs::path(cfg.out_dir) / "importance" : fs::path(o.out);
  fs::create_directories(out);
  const int repeats = o.repeats > 0 ? o.repeats : cfg.importance_repeats;
  const int top = o.top > 0 ? o.top : cfg.importance_top;

  CascadeModel model =
      as_data("importance", [&] { return load_cascade(model_bundle_path(o.model)); });
  LabeledDataset ds = as_data("importance", [&] { return read_features_csv(o.features); });

  std::vector<Eigen::Index> rows;
  if (!o.splits.empty()) {
    std::vector<SplitTag> tags =
        as_data("importance", [&] { return read_splits_csv(ds, o.splits); });
    for (Eigen::Index i = 0; i < ds.rows(); ++i)
      if (tags[i] == SplitTag::test) rows.push_back(i);
  } else {
    for (Eigen::Index i = 0; i < ds.rows(); ++i) rows.push_back(i);
  }

  ImportanceResult res;
  if (o.metric == "accuracy") {
    LabeledDataset sub = ds.subset(rows);
    std::vector<int> truth;
    for (const RowMeta& m : sub.meta) truth.push_back(type_class_of(m.label.kind));
    auto metric = [&](const Eigen::MatrixXd& xp) {
      Eigen::MatrixXd xs = model.scaler.apply(xp);
      std::size_t hits = 0;
      for (Eigen::Index i = 0; i < xs.rows(); ++i)
        if (model.type_svm.predict(xs.row(i).transpose()) == truth[static_cast<std::size_t>(i)])
          ++hits;
      return static_cast<double>(hits) / static_cast<double>(xs.rows());
    };
    res = permutation_importance(sub.x, ds.schema, metric, true, repeats, cfg.seed);
  } else if (o.metric == "mse") {
    std::vector<Eigen::Index> tc;
    for (Eigen::Index i : rows)
      if (ds.meta[i].label.kind == DamageKind::tipcut) tc.push_back(i);
    LabeledDataset sub = ds.subset(tc);
    Eigen::MatrixXd y(sub.rows(), 2);
    for (Eigen::Index i = 0; i < sub.rows(); ++i) {
      y(i, 0) = sub.meta[static_cast<std::size_t>(i)].label.sum_mm();
      y(i, 1) = sub.meta[static_cast<std::size_t>(i)].label.diff_mm();
    }
    auto metric = [&](const Eigen::MatrixXd& xp) {
      Eigen::MatrixXd pred = mlp_forward(model.tipcut_nn, model.scaler.apply(xp));
      return (pred - y).squaredNorm() / static_cast<double>(y.rows() * y.cols());
    };
    res = permutation_importance(sub.x, ds.schema, metric, false, repeats, cfg.seed);
  } else {
    throw ConfigError("importance: --metric must be accuracy or mse");
  }

  std::ostringstream csv;
  csv << "# provenance: " << provenance_line("importance", cfg) << "\n";
  csv << "rank,feature,name,mean_drop\n";
  for (std::size_t i = 0; i < res.ranked.size(); ++i)
    csv << i + 1 << ',' << res.ranked[i].feature << ',' << res.ranked[i].name << ','
        << format_full(res.ranked[i].mean_drop) << "\n";
  atomic_write_file(out / "importance.csv", csv.str());

  std::vector<std::string> labels;
  std::vector<double> values;
  for (std::size_t i = 0; i < res.ranked.size() && i < static_cast<std::size_t>(top); ++i) {
    labels.push_back(res.ranked[i].name);
    values.push_back(res.ranked[i].mean_drop);
  }
  atomic_write_file(out / "importance.svg",
                    svg_bar_chart("permutation importance (" + o.metric + ")",
                                  o.metric == "accuracy" ? "accuracy drop" : "MSE increase",
                                  labels, values));

  if (o.common.json) {
    nlohmann::json j;
    j["baseline"] = res.baseline;
    for (std::size_t i = 0; i < labels.size(); ++i)
      j["top"].push_back({{"name", labels[i]}, {"mean_drop", values[i]}});
    std::cout << j.dump(2) << "\n";
  } else {
    std::vector<std::vector<std::string>> table{{"rank", "feature", "mean drop"}};
    for (std::size_t i = 0; i < labels.size(); ++i)
      table.push_back({std::to_string(i + 1), labels[i], fmt_num(values[i], 6)});
    std::cout << "baseline " << o.metric << ": " << fmt_num(res.baseline, 6) << "\n"
              << render_table(table);
  }
}

// ---- subcommand: bandstudy --------------------------------------------------

struct BandStudyOpts {
  CommonOpts common;
  std::string corpus;
  std::string out;
  std::vector<int> widths;
};

void run_bandstudy(const BandStudyOpts& o) {
  RunConfig cfg = resolve_config(o.common);
  if (!o.corpus.empty()) cfg.corpus_dir = o.corpus;
  if (!o.widths.empty()) cfg.study_widths = o.widths;
  fs::path out = o.out.empty() ? fs::path(cfg.out_dir) / "bandstudy" : fs::path(o.out);
  fs::create_directories(out);

  std::vector<FlightLog> corpus =
      as_data("bandstudy", [&] { return load_corpus(cfg.corpus_dir); });
  SvmHyperParams hp;
  hp.c = cfg.svm_c;
  hp.tol = cfg.svm_tol;
  hp.max_epochs = cfg.svm_max_epochs;
  std::vector<BandWidthRow> table = band_width_study(corpus, cfg.study_widths, cfg.seed, hp);

  for (const BandWidthRow& r : table) {
    int expected = band_count(r.band_width) * kNumChannels + kMomentFeatures;
    if (r.n_features != expected)
      throw std::runtime_error("bandstudy: feature count law violated at width " +
                               std::to_string(r.band_width));
  }

  std::ostringstream csv;
  csv << "# provenance: " << provenance_line("bandstudy", cfg) << "\n";
  csv << "band_width,n_features,acc_overall,acc_healthy,acc_tipcut,acc_long\n";
  for (const BandWidthRow& r : table)
    csv << r.band_width << ',' << r.n_features << ',' << format_full(r.acc_overall) << ','
        << format_full(r.acc_per_class[0]) << ',' << format_full(r.acc_per_class[1]) << ','
        << format_full(r.acc_per_class[2]) << "\n";
  atomic_write_file(out / "bandstudy.csv", csv.str());

  std::vector<SvgSeries> series(4);
  series[0].label = "overall";
  series[1].label = "healthy";
  series[2].label = "tipcut";
  series[3].label = "longitudinal";
  for (const BandWidthRow& r : table) {
    series[0].points.emplace_back(r.band_width, 100 * r.acc_overall);
    series[1].points.emplace_back(r.band_width, 100 * r.acc_per_class[0]);
    series[2].points.emplace_back(r.band_width, 100 * r.acc_per_class[1]);
    series[3].points.emplace_back(r.band_width, 100 * r.acc_per_class[2]);
  }
  atomic_write_file(out / "bandstudy.svg",
                    svg_line_chart("type accuracy vs band width", "band width [Hz]",
                                   "test accuracy [%]", series));

  std::vector<std::vector<std::string>> txt{
      {"width", "features", "overall", "healthy", "tipcut", "long"}};
  nlohmann::json jrows = nlohmann::json::array();
  for (const BandWidthRow& r : table) {
    txt.push_back({std::to_string(r.band_width), std::to_string(r.n_features),
                   fmt_num(100 * r.acc_overall), fmt_num(100 * r.acc_per_class[0]),
                   fmt_num(100 * r.acc_per_class[1]), fmt_num(100 * r.acc_per_class[2])});
    jrows.push_back({{"band_width", r.band_width},
                     {"n_features", r.n_features},
                     {"acc_overall", r.acc_overall},
                     {"acc_healthy", r.acc_per_class[0]},
                     {"acc_tipcut", r.acc_per_class[1]},
                     {"acc_long", r.acc_per_class[2]}});
  }
  atomic_write_file(out / "bandstudy.txt", render_table(txt));
  if (o.common.json)
    std::cout << nlohmann::json{{"rows", jrows}}.dump(2) << "\n";
  else
    std::cout << render_table(txt);
}

// ---- subcommand: ablate -----------------------------------------------------

struct AblateOpts {
  CommonOpts common;
  std::string features;
  std::string splits;
  std::string out;
};

void run_ablate(const AblateOpts& o) {
  RunConfig cfg = resolve_config(o.common);
  fs::path out = o.out.empty() ? fs::path(cfg.out_dir) / "ablation" : fs::path(o.out);
  fs::create_directories(out);

  LabeledDataset ds = as_data("ablate", [&] { return read_features_csv(o.features); });
  std::vector<SplitTag> tags = as_data("ablate", [&] { return read_splits_csv(ds, o.splits); });
  std::vector<AblationRow> table = ablation_study(ds, tags, cascade_config_of(cfg));

  std::ostringstream csv;
  csv << "# provenance: " << provenance_line("ablate", cfg) << "\n";
  csv << "mask,acc,gyro,torque,thrust,n_features,mse_sym,delta_sym_pct,mse_asym,delta_asym_pct\n";
  for (const AblationRow& r : table)
    csv << r.mask.name << ',' << r.mask.acc << ',' << r.mask.gyro << ',' << r.mask.torque << ','
        << r.mask.thrust << ',' << r.n_features << ',' << format_full(r.mse_sym) << ','
        << format_full(r.delta_sym_pct) << ',' << format_full(r.mse_asym) << ','
        << format_full(r.delta_asym_pct) << "\n";
  atomic_write_file(out / "ablation.csv", csv.str());

  std::vector<std::vector<std::string>> txt{
      {"features", "n", "MSE sym", "delta", "MSE asym", "delta"}};
  nlohmann::json jrows = nlohmann::json::array();
  for (const AblationRow& r : table) {
    txt.push_back({r.mask.name, std::to_string(r.n_features), fmt_num(r.mse_sym),
                   fmt_num(r.delta_sym_pct, 1) + "%", fmt_num(r.mse_asym),
                   fmt_num(r.delta_asym_pct, 1) + "%"});
    jrows.push_back({{"mask", r.mask.name},
                     {"n_features", r.n_features},
                     {"mse_sym", r.mse_sym},
                     {"delta_sym_pct", r.delta_sym_pct},
                     {"mse_asym", r.mse_asym},
                     {"delta_asym_pct", r.delta_asym_pct}});
  }
  atomic_write_file(out / "ablation.txt", render_table(txt));
  if (o.common.json)
    std::cout << nlohmann::json{{"rows", jrows}}.dump(2) << "\n";
  else
    std::cout << render_table(txt);
}

// ---- subcommand: loo --------------------------------------------------------

struct LooOpts {
  CommonOpts common;
  std::string features;
  std::string holdout;
  std::string out;
  int max_rows = -1;
};

void run_loo(const LooOpts& o) {
  RunConfig cfg = resolve_config(o.common);
  fs::path out = o.out.empty() ? fs::path(cfg.out_dir) / "loo" : fs::path(o.out);
  fs::create_directories(out);

  double c1 = cfg.loo_cut1, c2 = cfg.loo_cut2;
  if (!o.holdout.empty()) {
    std::size_t dash = o.holdout.find('-');
    bool ok1 = false, ok2 = false;
    if (dash != std::string::npos) {
      c1 = parse_double(o.holdout.substr(0, dash), ok1);
      c2 = parse_double(o.holdout.substr(dash + 1), ok2);
    }
    if (!ok1 || !ok2)
      throw ConfigError("loo: --holdout must look like '20-20'");
  }

  LabeledDataset ds = as_data("loo", [&] { return read_features_csv(o.features); });
  LooConfig lc;
  lc.seed = cfg.seed;
  lc.svm_c = cfg.svm_c;
  lc.svm_tol = cfg.loo_svm_tol;
  lc.svm_max_epochs = cfg.loo_svm_max_epochs;
  lc.max_rows_per_class = o.max_rows >= 0 ? o.max_rows : cfg.loo_max_rows_per_class;
  lc.mlp.epochs = cfg.mlp_epochs;
  lc.mlp.learning_rate = cfg.mlp_learning_rate;
  lc.hidden = cfg.hidden;
  LooResult res = loo_baseline(ds, c1, c2, lc);

  nlohmann::json j;
  j["held_out"] = res.held_out;
  j["true_d1"] = res.true_d1;
  j["true_d2"] = res.true_d2;
  j["svm_holdin_accuracy"] = res.svm_holdin_accuracy;
  j["predicted_counts"] = res.predicted_counts;
  j["svm_d1"] = res.svm_d1;
  j["svm_d2"] = res.svm_d2;
  j["nn_mean_sum"] = res.nn_mean_sum;
  j["nn_mean_diff"] = res.nn_mean_diff;
  j["nn_d1"] = res.nn_d1;
  j["nn_d2"] = res.nn_d2;
  j["provenance"] = provenance_line("loo", cfg);
  atomic_write_file(out / "loo.json", j.dump(2) + "\n");

  std::vector<std::vector<std::string>> txt{
      {"method", "d1 pred", "d1 err", "d2 pred", "d2 err"}};
  txt.push_back({"quadratic SVM classifier", fmt_num(res.svm_d1, 4),
                 fmt_num(std::abs(res.svm_d1 - res.true_d1), 4), fmt_num(res.svm_d2, 4),
                 fmt_num(std::abs(res.svm_d2 - res.true_d2), 4)});
  txt.push_back({"magnitude network", fmt_num(res.nn_d1, 4),
                 fmt_num(std::abs(res.nn_d1 - res.true_d1), 4), fmt_num(res.nn_d2, 4),
                 fmt_num(std::abs(res.nn_d2 - res.true_d2), 4)});
  std::ostringstream head;
  head << "held out " << res.held_out << " (true d1 " << fmt_num(res.true_d1, 1) << ", d2 "
       << fmt_num(res.true_d2, 1) << "); kept-class SVM accuracy "
       << fmt_num(100 * res.svm_holdin_accuracy) << "%\n";
  atomic_write_file(out / "loo.txt", head.str() + render_table(txt));
  if (o.common.json)
    std::cout << j.dump(2) << "\n";
  else
    std::cout << head.str() << render_table(txt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"propeller damage diagnosis from IMU and control-command logs"};
  app.require_subcommand(1);

  auto synth = std::make_shared<SynthOpts>();
  {
    CLI::App* sub = app.add_subcommand("synth", "Generate the synthetic flight corpus");
    add_common(sub, synth->common);
    sub->add_option("--out", synth->out, "Corpus output directory");
    sub->add_option("--window-scale", synth->window_scale,
                    "Shrink flight lengths by this factor (fixtures)");
    sub->add_flag("--no-rotations", synth->no_rotations, "Skip the three rotated copies");
    sub->callback([synth] { run_synth(*synth); });
  }

  auto ingest = std::make_shared<IngestOpts>();
  {
    CLI::App* sub = app.add_subcommand("ingest", "Validate flight logs");
    add_common(sub, ingest->common);
    sub->add_option("--log", ingest->logs, "Flight CSV to validate (repeatable)");
    sub->add_option("--corpus", ingest->corpus, "Validate every CSV in a directory");
    sub->add_option("--out", ingest->out, "Write the validation report CSV here");
    sub->add_flag("--require-meta", ingest->require_meta, "Fail if a label sidecar is missing");
    sub->callback([ingest] { run_ingest(*ingest); });
  }

  auto features = std::make_shared<FeaturesOpts>();
  {
    CLI::App* sub = app.add_subcommand("features", "Extract window features from a corpus");
    add_common(sub, features->common);
    sub->add_option("--corpus", features->corpus, "Corpus directory");
    sub->add_option("--out", features->out, "Feature CSV path");
    sub->add_option("--bw", features->bw, "Band width in Hz (2,3,4,5,6,7,8,10; default 5)");
    sub->callback([features] { run_features(*features); });
  }

  auto augment = std::make_shared<AugmentOpts>();
  {
    CLI::App* sub = app.add_subcommand("augment", "Expand a corpus to all rotor mountings");
    add_common(sub, augment->common);
    sub->add_option("--corpus", augment->corpus, "Input corpus directory")->required();
    sub->add_option("--out", augment->out, "Output corpus directory")->required();
    sub->add_option("--rotors", augment->rotors, "Rotor count (default 4)");
    sub->callback([augment] { run_augment(*augment); });
  }

  auto split = std::make_shared<SplitOpts>();
  {
    CLI::App* sub = app.add_subcommand("split", "Assign 40/30/30 train/val/test tags");
    add_common(sub, split->common);
    sub->add_option("--features", split->features, "Feature CSV")->required();
    sub->add_option("--out", split->out, "Splits CSV path");
    sub->add_option("--mode", split->mode, "rows (default) or flights");
    sub->callback([split] { run_split(*split); });
  }

  auto train = std::make_shared<TrainOpts>();
  {
    CLI::App* sub = app.add_subcommand("train", "Train the diagnosis cascade");
    add_common(sub, train->common);
    sub->add_option("--features", train->features, "Feature CSV")->required();
    sub->add_option("--splits", train->splits, "Splits CSV")->required();
    sub->add_option("--out", train->out, "Model bundle directory");
    sub->callback([train] { run_train(*train); });
  }

  auto evalo = std::make_shared<EvalOpts>();
  {
    CLI::App* sub = app.add_subcommand("eval", "Evaluate a trained cascade");
    add_common(sub, evalo->common);
    sub->add_option("--model", evalo->model, "Model bundle (cascade.json or its directory)")
        ->required();
    sub->add_option("--features", evalo->features, "Feature CSV")->required();
    sub->add_option("--splits", evalo->splits, "Splits CSV")->required();
    sub->add_option("--out", evalo->out, "Report directory");
    sub->add_option("--population", evalo->population, "test, flight, or both (default both)");
    sub->callback([evalo] { run_eval(*evalo); });
  }

  auto infer = std::make_shared<InferOpts>();
  {
    CLI::App* sub = app.add_subcommand("infer", "Diagnose every window of one flight log");
    add_common(sub, infer->common);
    sub->add_option("--model", infer->model, "Model bundle (cascade.json or its directory)")
        ->required();
    sub->add_option("--log", infer->log, "Flight CSV")->required();
    sub->add_option("--out", infer->out, "Diagnosis CSV path");
    sub->callback([infer] { run_infer(*infer); });
  }

  auto importance = std::make_shared<ImportanceOpts>();
  {
    CLI::App* sub = app.add_subcommand("importance", "Permutation feature importance");
    add_common(sub, importance->common);
    sub->add_option("--model", importance->model, "Model bundle")->required();
    sub->add_option("--features", importance->features, "Feature CSV")->required();
    sub->add_option("--splits", importance->splits, "Splits CSV (uses test rows if given)");
    sub->add_option("--metric", importance->metric, "accuracy (type) or mse (tip-cut net)");
    sub->add_option("--repeats", importance->repeats, "Shuffles per feature (default 5)");
    sub->add_option("--top", importance->top, "Rows in the report (default 15)");
    sub->add_option("--out", importance->out, "Output directory");
    sub->callback([importance] { run_importance(*importance); });
  }

  auto bandstudy = std::make_shared<BandStudyOpts>();
  {
    CLI::App* sub = app.add_subcommand("bandstudy", "Type accuracy across band widths");
    add_common(sub, bandstudy->common);
    sub->add_option("--corpus", bandstudy->corpus, "Corpus directory");
    sub->add_option("--widths", bandstudy->widths, "Band widths to sweep");
    sub->add_option("--out", bandstudy->out, "Output directory");
    sub->callback([bandstudy] { run_bandstudy(*bandstudy); });
  }

  auto ablate = std::make_shared<AblateOpts>();
  {
    CLI::App* sub = app.add_subcommand("ablate", "Feature-group ablation of the tip-cut net");
    add_common(sub, ablate->common);
    sub->add_option("--features", ablate->features, "Feature CSV")->required();
    sub->add_option("--splits", ablate->splits, "Splits CSV")->required();
    sub->add_option("--out", ablate->out, "Output directory");
    sub->callback([ablate] { run_ablate(*ablate); });
  }

  auto loo = std::make_shared<LooOpts>();
  {
    CLI::App* sub = app.add_subcommand("loo", "Leave-one-damage-class-out baseline comparison");
    add_common(sub, loo->common);
    sub->add_option("--features", loo->features, "Feature CSV")->required();
    sub->add_option("--holdout", loo->holdout, "Held-out tip-cut class, e.g. 20-20");
    sub->add_option("--max-rows", loo->max_rows, "Per-class row cap for the SVM baseline");
    sub->add_option("--out", loo->out, "Output directory");
    sub->callback([loo] { run_loo(*loo); });
  }

  auto error_line = [](const char* category, const std::string& what) {
    std::string msg = what;
    for (char& c : msg)
      if (c == '\n' || c == '\r') c = ' ';
    std::cerr << "error: " << category << ": " << msg << "\n";
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    // An unrecognized first token is an unknown subcommand; other parse
    // problems are configuration mistakes.
    bool unknown_sub = app.get_subcommands().empty();
    error_line(unknown_sub ? "usage" : "config", e.what());
    return unknown_sub ? 2 : 3;
  } catch (const ConfigError& e) {
    error_line("config", e.what());
    return 3;
  } catch (const DataError& e) {
    error_line("data", e.what());
    return 4;
  } catch (const LogParseError& e) {
    error_line("data", e.what());
    return 4;
  } catch (const LogValidationError& e) {
    error_line("data", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    error_line("data", e.what());
    return 4;
  } catch (const std::exception& e) {
    error_line("numeric", e.what());
    return 5;
  }
  return 0;
}
