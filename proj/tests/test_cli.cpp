// Drives the icr executable end to end through the shell.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <doctest.h>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run icr(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / ("icr_cli_" + std::to_string(std::random_device{}()) + ".log");
  const std::string cmd = std::string("ICR_THREADS=2 \"") + ICR_CLI_PATH + "\" " + args + " > \"" + log.string() +
                          "\" 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  fs::remove(log);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

// Shared workspace: a small synthetic train/test split and a trained model.
struct Workspace {
  fs::path root = fs::temp_directory_path() / ("icr_cli_ws_" + std::to_string(std::random_device{}()));
  std::string train = (root / "train").string();
  std::string test = (root / "test").string();
  std::string model = (root / "model.bin").string();
  const std::string small = " --stages 2 --hidden-nodes 40";

  Workspace() {
    fs::create_directories(root);
    REQUIRE(icr("synth --out-dir " + train + " --samples 60 --landmarks 6 --seed 1").code == 0);
    REQUIRE(icr("synth --out-dir " + test + " --samples 20 --landmarks 6 --seed 2").code == 0);
    REQUIRE(icr("train --data " + train + " --out " + model + small + " --seed 3").code == 0);
  }
  ~Workspace() { fs::remove_all(root); }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("usage errors exit with status 2") {
  CHECK(icr("train --data /nonexistent --out x.bin --stages 0").code == 2);
  CHECK(icr("no-such-command").code == 2);
  CHECK(icr("train --data " + ws().train + " --out x.bin --mode diagonal").code == 2);
  CHECK(icr("--help").code == 0);
}

TEST_CASE("training twice with the same seed writes identical models") {
  auto& w = ws();
  const auto again = (w.root / "again.bin").string();
  const Run r = icr("train --data " + w.train + " --out " + again + w.small + " --seed 3");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("stage 0: mean NME") != std::string::npos);
  CHECK(slurp(again) == slurp(w.model));

  const auto par = (w.root / "par.bin").string();
  REQUIRE(icr("train --data " + w.train + " --out " + par + w.small + " --seed 3 --mode parallel").code == 0);
  const auto par2 = (w.root / "par2.bin").string();
  REQUIRE(icr("train --data " + w.train + " --out " + par2 + w.small + " --seed 3 --mode parallel --stats-in " +
              w.model).code == 0);
  CHECK(slurp(par) == slurp(par2));
  CHECK(slurp(par) != slurp(w.model));
}

TEST_CASE("update with an empty batch keeps the model and reports zero rows") {
  auto& w = ws();
  const fs::path empty = w.root / "empty";
  fs::create_directories(empty / "images");
  fs::create_directories(empty / "annotations");
  const auto out = (w.root / "same.bin").string();
  const auto report = w.root / "empty_report.csv";
  const Run r = icr("update --model " + w.model + " --data " + empty.string() + " --out " + out + " --report " +
                    report.string());
  REQUIRE(r.code == 0);
  CHECK(slurp(out) == slurp(w.model));
  const auto rows = read_csv(report);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 1; i < rows.size(); ++i) CHECK(rows[i][1] == "0");
}

TEST_CASE("update with new data reports one row per stage") {
  auto& w = ws();
  const auto out = (w.root / "updated.bin").string();
  const auto report = w.root / "report.csv";
  REQUIRE(icr("update --model " + w.model + " --data " + w.test + " --out " + out + " --report " + report.string() +
              " --seed 8").code == 0);
  const auto rows = read_csv(report);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"stage", "rows", "millis", "feature_millis", "regressor_millis"});
  CHECK(rows[1][0] == "0");
  CHECK(rows[2][0] == "1");
  CHECK(rows[1][1] == "20");
  CHECK(slurp(out) != slurp(w.model));
}

TEST_CASE("update rejects data with a different landmark count") {
  auto& w = ws();
  const auto other = (w.root / "other").string();
  REQUIRE(icr("synth --out-dir " + other + " --samples 4 --landmarks 7").code == 0);
  const Run r = icr("update --model " + w.model + " --data " + other + " --out " + (w.root / "x.bin").string());
  CHECK(r.code == 1);
  CHECK(r.out.find("landmarks") != std::string::npos);
}

TEST_CASE("eval reports the mean of the per-sample errors") {
  auto& w = ws();
  const auto ced = w.root / "ced.csv";
  const auto errs = w.root / "errors.csv";
  const Run r = icr("eval --model " + w.model + " --data " + w.test + " --ced-out " + ced.string() +
                    " --errors-out " + errs.string());
  REQUIRE(r.code == 0);
  const auto pos = r.out.find("mean NME: ");
  REQUIRE(pos != std::string::npos);
  const double printed = std::stod(r.out.substr(pos + 10));

  const auto e = read_csv(errs);
  REQUIRE(e.size() == 21);
  CHECK(e[0] == std::vector<std::string>{"id", "nme"});
  double sum = 0.0;
  for (std::size_t i = 1; i < e.size(); ++i) sum += std::stod(e[i][1]);
  CHECK(std::abs(printed - 100.0 * sum / 20.0) <= 1e-9);

  const auto c = read_csv(ced);
  REQUIRE(c.size() == 32);
  double prev = -1.0;
  for (std::size_t i = 1; i < c.size(); ++i) {
    const double f = std::stod(c[i][1]);
    CHECK(f >= prev);
    CHECK(f <= 1.0);
    prev = f;
  }
}

TEST_CASE("predict writes one pts file per image") {
  auto& w = ws();
  const auto out = w.root / "pred";
  const Run r = icr("predict --model " + w.model + " --images " + w.test + "/images --bboxes " + w.test +
                    "/bboxes.csv --out-dir " + out.string());
  REQUIRE(r.code == 0);
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(out)) n += entry.path().extension() == ".pts" ? 1 : 0;
  CHECK(n == 20);
  CHECK(slurp(out / "synth_00.pts").find("n_points: 6") != std::string::npos);
}

TEST_CASE("incremental experiment writes one CED file per batch and a summary") {
  auto& w = ws();
  const auto out = w.root / "exp";
  const Run r = icr("experiment-incremental --data " + w.train + " --test-data " + w.test + " --batches 6 --out-dir " +
                    out.string() + w.small);
  REQUIRE(r.code == 0);
  const std::vector<std::string> pct{"16", "33", "50", "66", "83", "100"};
  for (const auto& p : pct) CHECK(fs::exists(out / ("ced_" + p + ".csv")));
  const auto s = read_csv(out / "summary.csv");
  REQUIRE(s.size() == 7);
  CHECK(s[0] == std::vector<std::string>{"batch_pct", "mean_nme", "update_millis"});
  for (std::size_t i = 0; i < pct.size(); ++i) CHECK(s[i + 1][0] == pct[i]);
}
