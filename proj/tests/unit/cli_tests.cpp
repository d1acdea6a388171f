#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

// End-to-end checks of the installed binary. The ctest harness points
// PROPDIAG_CLI at the built executable; without it these tests skip.

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("PROPDIAG_CLI");
  return p ? std::string(p) : std::string();
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::ostringstream name;
    name << "propdiag-cli-" << ::getpid() << "-" << reinterpret_cast<std::uintptr_t>(this);
    path = fs::temp_directory_path() / name.str();
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  fs::path operator/(const std::string& leaf) const { return path / leaf; }
};

int run(const std::string& cmd) {
  int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ext) ++n;
  return n;
}

}  // namespace

TEST_CASE("cli pipeline runs synth through eval deterministically", "[cli]") {
  std::string cli = cli_path();
  if (cli.empty()) SKIP("PROPDIAG_CLI not set");
  TempDir tmp;
  const std::string quiet = " > " + (tmp / "stdout.txt").string() + " 2>&1";

  // Corpus generation: 18 damage settings, four mountings, CSV + sidecar each.
  fs::path corpus = tmp / "corpus";
  REQUIRE(run(cli + " synth --out " + corpus.string() +
              " --seed 3 --window-scale 0.003" + quiet) == 0);
  REQUIRE(count_files(corpus, ".csv") == 72);
  REQUIRE(count_files(corpus, ".json") == 72);

  fs::path corpus_plain = tmp / "corpus-plain";
  REQUIRE(run(cli + " synth --out " + corpus_plain.string() +
              " --seed 3 --window-scale 0.003 --no-rotations" + quiet) == 0);
  REQUIRE(count_files(corpus_plain, ".csv") == 18);

  // Same seed, same bytes.
  fs::path corpus2 = tmp / "corpus2";
  REQUIRE(run(cli + " synth --out " + corpus2.string() +
              " --seed 3 --window-scale 0.003" + quiet) == 0);
  REQUIRE(run("diff -r " + corpus.string() + " " + corpus2.string() + quiet) == 0);

  // Feature extraction; the header carries one column per feature.
  fs::path feats7 = tmp / "feats7.csv";
  REQUIRE(run(cli + " features --corpus " + corpus.string() + " --out " + feats7.string() +
              " --bw 7 --seed 3" + quiet) == 0);
  {
    std::string text = slurp(feats7);
    REQUIRE(text.find("# schema: bands-w222-bw7-v1") == 0);
    std::string header;
    for (const std::string& line : lines_of(text))
      if (!line.empty() && line[0] != '#') {
        header = line;
        break;
      }
    std::size_t commas = 0;
    for (char c : header)
      if (c == ',') ++commas;
    REQUIRE(commas == 5 + 172);  // meta columns + one per feature at 7 Hz bands
  }

  fs::path feats = tmp / "feats.csv";
  REQUIRE(run(cli + " features --corpus " + corpus.string() + " --out " + feats.string() +
              " --bw 10 --seed 3" + quiet) == 0);
  fs::path feats_b = tmp / "feats_b.csv";
  REQUIRE(run(cli + " features --corpus " + corpus.string() + " --out " + feats_b.string() +
              " --bw 10 --seed 3" + quiet) == 0);
  REQUIRE(slurp(feats) == slurp(feats_b));

  // Split tags.
  fs::path splits = tmp / "splits.csv";
  REQUIRE(run(cli + " split --features " + feats.string() + " --out " + splits.string() +
              " --seed 3" + quiet) == 0);
  {
    std::string text = slurp(splits);
    REQUIRE(text.find("train") != std::string::npos);
    REQUIRE(text.find("val") != std::string::npos);
    REQUIRE(text.find("test") != std::string::npos);
  }

  // Training produces the full bundle plus a report.
  fs::path model = tmp / "model";
  REQUIRE(run(cli + " train --features " + feats.string() + " --splits " + splits.string() +
              " --out " + model.string() + " --seed 9" + quiet) == 0);
  for (const char* leaf : {"cascade.json", "standardizer.json", "type_svm.json",
                           "tipcut_nn.json", "tipcut_loc_svm.json", "long_nn.json",
                           "long_loc_svm.json", "train_report.json", "loss_tipcut.svg",
                           "loss_long.svg"})
    REQUIRE(fs::exists(model / leaf));

  // Window diagnosis of one flight.
  fs::path one_log;
  for (const auto& e : fs::directory_iterator(corpus))
    if (e.path().extension() == ".csv") {
      one_log = e.path();
      break;
    }
  fs::path diag = tmp / "diag.csv";
  REQUIRE(run(cli + " infer --model " + model.string() + " --log " + one_log.string() +
              " --out " + diag.string() + " --seed 9" + quiet) == 0);
  {
    auto ls = lines_of(slurp(diag));
    REQUIRE(ls.size() >= 3);
    REQUIRE(ls[0].rfind("# provenance:", 0) == 0);
    REQUIRE(ls[1] ==
            "flight_id,start_index,p_C0,p_C1,p_C2,type,sum_mm,diff_mm,motor,"
            "p_m1,p_m2,p_m3,p_m4");
  }

  // Evaluation report for both populations.
  fs::path evaldir = tmp / "eval";
  REQUIRE(run(cli + " eval --model " + model.string() + " --features " + feats.string() +
              " --splits " + splits.string() + " --out " + evaldir.string() + " --seed 9" +
              quiet) == 0);
  REQUIRE(fs::exists(evaldir / "eval_report.json"));
  REQUIRE(fs::exists(evaldir / "confusion_type_test.csv"));
  REQUIRE(fs::exists(evaldir / "confusion_type_flight.csv"));
  REQUIRE(fs::exists(evaldir / "regression_tipcut_test.csv"));
  auto parsed = nlohmann::json::parse(slurp(evaldir / "eval_report.json"));
  REQUIRE(parsed.contains("test_only"));
  REQUIRE(parsed.contains("whole_flight"));
}

TEST_CASE("cli emits machine-readable json on request", "[cli]") {
  std::string cli = cli_path();
  if (cli.empty()) SKIP("PROPDIAG_CLI not set");
  TempDir tmp;

  fs::path out = tmp / "stdout.json";
  REQUIRE(run(cli + " synth --out " + (tmp / "c").string() +
              " --seed 1 --window-scale 0.003 --no-rotations --json > " + out.string() +
              " 2> /dev/null") == 0);
  auto j = nlohmann::json::parse(slurp(out));
  REQUIRE(j.contains("flights"));
  REQUIRE(j.contains("windows"));
  REQUIRE(j["flights"].get<int>() == 18);
}

TEST_CASE("cli exit codes distinguish usage, config, and data failures", "[cli]") {
  std::string cli = cli_path();
  if (cli.empty()) SKIP("PROPDIAG_CLI not set");
  TempDir tmp;
  const std::string quiet = " > /dev/null 2>&1";

  REQUIRE(run(cli + " no-such-command" + quiet) == 2);
  REQUIRE(run(cli + quiet) == 2);  // a subcommand is required
  REQUIRE(run(cli + " synth --config " + (tmp / "missing.toml").string() + quiet) == 3);
  {
    std::ofstream bad(tmp / "bad.toml");
    bad << "[train]\nsplit_mode = \"half\"\n";
  }
  REQUIRE(run(cli + " synth --config " + (tmp / "bad.toml").string() + quiet) == 3);
  REQUIRE(run(cli + " features --corpus " + (tmp / "nowhere").string() + " --out " +
              (tmp / "x.csv").string() + quiet) == 4);
  REQUIRE(run(cli + " infer --model " + (tmp / "nomodel").string() + " --log " +
              (tmp / "nolog.csv").string() + quiet) == 4);
}
