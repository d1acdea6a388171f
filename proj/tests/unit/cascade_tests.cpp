#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <unistd.h>

#include "propdiag/augment.hpp"
#include "propdiag/cascade.hpp"
#include "propdiag/dataset.hpp"
#include "propdiag/synthgen.hpp"

using namespace propdiag;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("propdiag_cas_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

CascadeConfig test_config() {
  CascadeConfig cfg;
  cfg.seed = 77;
  cfg.svm.tol = 1e-3;
  cfg.svm.max_epochs = 300;
  cfg.mlp.epochs = 120;
  cfg.hidden = {16, 8};
  return cfg;
}

const LabeledDataset& mini_dataset() {
  static const LabeledDataset ds = [] {
    CorpusConfig cfg;
    cfg.window_scale = 0.015;
    cfg.seed = 4;
    std::vector<FlightLog> logs = augment_corpus(build_corpus(cfg));
    return build_dataset(logs, FeatureSchema::for_band_width(10));
  }();
  return ds;
}

std::vector<SplitTag> mini_tags() {
  return split_rows(static_cast<std::size_t>(mini_dataset().rows()), 10);
}

const CascadeModel& mini_model() {
  static const CascadeModel model = [] {
    auto [m, rep] = train_cascade(mini_dataset(), mini_tags(), test_config());
    (void)rep;
    return m;
  }();
  return model;
}

}  // namespace

TEST_CASE("cascade training touches every stage", "[cascade]") {
  auto [model, report] = train_cascade(mini_dataset(), mini_tags(), test_config());
  REQUIRE(report.stage_rows.at("type_svm") > 0);
  REQUIRE(report.stage_rows.at("tipcut_nn") > 0);
  REQUIRE(report.stage_rows.at("tipcut_loc") > 0);
  REQUIRE(report.stage_rows.at("long_nn") > 0);
  REQUIRE(report.stage_rows.at("long_loc") > 0);
  REQUIRE_FALSE(report.tipcut_loss.empty());
  REQUIRE_FALSE(report.long_loss.empty());
  REQUIRE(report.val_type_accuracy > 0.5);  // smoke margin; the real gate is end-to-end
  REQUIRE(model.schema_id == mini_dataset().schema.schema_id);
  REQUIRE(model.scaler.fitted);
  REQUIRE(model.type_svm.classes == std::vector<int>{0, 1, 2});
}

TEST_CASE("diagnoses are well-formed probability-wise", "[cascade]") {
  const CascadeModel& model = mini_model();
  const LabeledDataset& ds = mini_dataset();
  for (Eigen::Index r = 0; r < std::min<Eigen::Index>(ds.rows(), 200); ++r) {
    Eigen::VectorXd raw = ds.x.row(r).transpose();
    Diagnosis d = infer_window(model, raw, ds.meta[r].flight_id, ds.meta[r].start_index);
    REQUIRE(d.p_type[0] + d.p_type[1] + d.p_type[2] == Catch::Approx(1.0).margin(1e-9));
    if (d.type == DamageKind::healthy) {
      REQUIRE(d.sum_mm == 0.0);
      REQUIRE(d.motor == 0);
    } else {
      REQUIRE(d.sum_mm >= 0.0);
      REQUIRE(d.diff_mm >= 0.0);
      REQUIRE(d.diff_mm <= d.sum_mm);
      REQUIRE(d.motor >= 1);
      REQUIRE(d.motor <= 4);
      REQUIRE(d.p_motor[0] + d.p_motor[1] + d.p_motor[2] + d.p_motor[3] ==
              Catch::Approx(1.0).margin(1e-9));
    }
  }
}

TEST_CASE("reported magnitudes clamp the raw network outputs", "[cascade]") {
  const CascadeModel& model = mini_model();
  const LabeledDataset& ds = mini_dataset();
  bool saw_divergence = false;
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    Eigen::VectorXd raw = ds.x.row(r).transpose();
    Diagnosis d = infer_window(model, raw, "x", 0);
    if (d.type == DamageKind::healthy) continue;
    REQUIRE(d.sum_mm == std::max(0.0, d.raw_sum_mm));
    REQUIRE(d.diff_mm == std::clamp(d.raw_diff_mm, 0.0, d.sum_mm));
    if (d.raw_diff_mm != d.diff_mm || d.raw_sum_mm != d.sum_mm) saw_divergence = true;
  }
  INFO("clamping " << (saw_divergence ? "did" : "did not") << " fire on this corpus");
}

TEST_CASE("training is deterministic and artifacts rewrite identically", "[cascade]") {
  TempDir a, b;
  auto [m1, r1] = train_cascade(mini_dataset(), mini_tags(), test_config());
  auto [m2, r2] = train_cascade(mini_dataset(), mini_tags(), test_config());
  (void)r1;
  (void)r2;
  save_cascade(m1, a.path, "same-run");
  save_cascade(m2, b.path, "same-run");
  for (const char* f : {"cascade.json", "standardizer.json", "type_svm.json", "tipcut_nn.json",
                        "tipcut_loc_svm.json", "long_nn.json", "long_loc_svm.json"}) {
    INFO(f);
    REQUIRE(read_file(a.path / f) == read_file(b.path / f));
  }
}

TEST_CASE("a saved cascade reloads and reproduces decisions", "[cascade]") {
  TempDir tmp;
  const CascadeModel& model = mini_model();
  save_cascade(model, tmp.path, "reload-test");
  CascadeModel back = load_cascade(tmp.path / "cascade.json");
  REQUIRE(back.schema_id == model.schema_id);

  const LabeledDataset& ds = mini_dataset();
  for (Eigen::Index r = 0; r < std::min<Eigen::Index>(ds.rows(), 64); ++r) {
    Eigen::VectorXd raw = ds.x.row(r).transpose();
    Diagnosis d0 = infer_window(model, raw, "x", 0);
    Diagnosis d1 = infer_window(back, raw, "x", 0);
    REQUIRE(d0.type == d1.type);
    REQUIRE(d0.p_type[0] == d1.p_type[0]);
    REQUIRE(d0.sum_mm == d1.sum_mm);
    REQUIRE(d0.motor == d1.motor);
  }
}

TEST_CASE("batch inference covers every window of a flight", "[cascade]") {
  CorpusConfig cfg;
  cfg.window_scale = 0.015;
  cfg.seed = 4;
  FlightLog log = build_corpus(cfg)[3];  // some tip-cut flight
  BatchResult res = infer_batch(mini_model(), log);
  REQUIRE(res.diagnoses.size() == extract_windows(log).size());
  REQUIRE(res.windows_per_sec > 0.0);
  for (std::size_t i = 0; i < res.diagnoses.size(); ++i) {
    REQUIRE(res.diagnoses[i].flight_id == log.flight_id);
    REQUIRE(res.diagnoses[i].start_index == i * 32);
  }
}

TEST_CASE("diagnosis CSV uses the pinned column layout", "[cascade]") {
  TempDir tmp;
  CorpusConfig cfg;
  cfg.window_scale = 0.015;
  cfg.seed = 4;
  BatchResult res = infer_batch(mini_model(), build_corpus(cfg)[0]);
  fs::path p = tmp.path / "diag.csv";
  write_diagnosis_csv(res.diagnoses, p, "unit");
  std::istringstream in(read_file(p));
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "# provenance: unit");
  std::getline(in, line);
  REQUIRE(line ==
          "flight_id,start_index,p_C0,p_C1,p_C2,type,sum_mm,diff_mm,motor,p_m1,p_m2,p_m3,p_m4");
  std::size_t rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  REQUIRE(rows == res.diagnoses.size());
}

TEST_CASE("training requires all motors per damage kind", "[cascade]") {
  CorpusConfig cfg;
  cfg.window_scale = 0.015;
  cfg.seed = 4;
  // un-augmented corpus: every damaged flight sits on motor 1
  LabeledDataset ds = build_dataset(build_corpus(cfg), FeatureSchema::for_band_width(10));
  std::vector<SplitTag> tags = split_rows(static_cast<std::size_t>(ds.rows()), 1);
  REQUIRE_THROWS_WITH(train_cascade(ds, tags, test_config()),
                      Catch::Matchers::ContainsSubstring("augment"));
}

TEST_CASE("inference validates the feature count", "[cascade]") {
  Eigen::VectorXd wrong = Eigen::VectorXd::Zero(10);
  REQUIRE_THROWS_AS(infer_window(mini_model(), wrong, "x", 0), std::invalid_argument);
}
