#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <nlohmann/json.hpp>

#include "vo2/cli.hpp"
#include "vo2/ingest.hpp"

using namespace vo2;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("vo2_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

// strips the provenance block so runs with different thread flags compare equal
std::string body_only(const std::string& report_json) {
  auto j = nlohmann::ordered_json::parse(report_json);
  j.erase("provenance");
  return j.dump(2);
}

int run(std::initializer_list<std::string> args) { return run_cli(std::vector<std::string>(args)); }

}  // namespace

TEST_CASE("usage errors exit with 2, help with 0") {
  CHECK(run({"--definitely-not-a-flag"}) == 2);
  CHECK(run({"eval"}) == 2);  // missing required --manifest
  CHECK(run({"--help"}) == 0);
  CHECK(run({"simulate", "--help"}) == 0);
  CHECK(run({"eval", "--help"}) == 0);
  CHECK(run({"pipeline", "--help"}) == 0);
}

TEST_CASE("full command chain over a small synthetic cohort") {
  TempDir dir("chain");
  CHECK(run({"simulate", "--spec", "default", "--seed", "7", "--out", dir / "cohort",
             "--cells", "6", "4", "3", "2"}) == 0);
  CHECK(fs::exists(dir.path / "cohort" / "manifest.json"));
  CHECK(fs::exists(dir.path / "cohort" / "truth.json"));

  CHECK(run({"ingest", "--manifest", dir / "cohort/manifest.json", "--out",
             dir / "summary.json"}) == 0);
  CHECK(fs::exists(dir.path / "summary.json"));

  CHECK(run({"features", "--manifest", dir / "cohort/manifest.json", "--out",
             dir / "features.csv"}) == 0);
  const auto rows = read_feature_table(dir.path / "features.csv");
  CHECK(rows.size() == 15);

  CHECK(run({"stats", "--features", dir / "features.csv", "--out", dir / "stats.json"}) == 0);
  const auto stats = nlohmann::ordered_json::parse(read_text(dir.path / "stats.json"));
  CHECK(stats.at("correlations").size() == 5);

  CHECK(run({"train", "--features", dir / "features.csv", "--model", "ridge", "--out",
             dir / "fit.json"}) == 0);
  const auto fit = nlohmann::ordered_json::parse(read_text(dir.path / "fit.json"));
  CHECK(fit.at("model") == "ridge");
  CHECK(fit.at("coefficients").contains("bmi"));
  CHECK(fit.at("coefficients_std").contains("bmi"));

  CHECK(run({"predict", "--fit", dir / "fit.json", "--features", dir / "features.csv", "--out",
             dir / "pred.csv"}) == 0);
  const auto pred_text = read_text(dir.path / "pred.csv");
  CHECK(pred_text.rfind("id,predicted,actual,error", 0) == 0);

  CHECK(run({"eval", "--manifest", dir / "cohort/manifest.json", "--model", "linear,rf",
             "--cv", "stratified:3", "--seed", "5", "--out", dir / "report.json",
             "--rf-trees", "30"}) == 0);
  const auto report = nlohmann::ordered_json::parse(read_text(dir.path / "report.json"));
  CHECK(report.at("models").size() == 2);
  CHECK(report.at("models")[0].at("kfold").at("folds").size() == 3);
}

TEST_CASE("every model kind survives a train/predict round trip") {
  TempDir dir("roundtrip");
  REQUIRE(run({"simulate", "--seed", "2", "--out", dir / "c", "--cells", "6", "4", "3", "2"}) ==
          0);
  REQUIRE(run({"features", "--manifest", dir / "c/manifest.json", "--out", dir / "f.csv"}) == 0);
  for (const std::string model : {"linear", "ridge", "lasso", "elasticnet", "rf", "svr"}) {
    CAPTURE(model);
    const auto fit_path = dir / ("fit_" + model + ".json");
    const auto pred_path = dir / ("pred_" + model + ".csv");
    CHECK(run({"train", "--features", dir / "f.csv", "--model", model, "--out", fit_path,
               "--rf-trees", "25"}) == 0);
    CHECK(run({"predict", "--fit", fit_path, "--features", dir / "f.csv", "--out", pred_path}) ==
          0);
    const auto text = read_text(pred_path);
    CHECK(std::count(text.begin(), text.end(), '\n') == 16);  // header + 15 rows
    // a reloaded fit predicts identically
    const auto again = dir / ("pred2_" + model + ".csv");
    CHECK(run({"predict", "--fit", fit_path, "--features", dir / "f.csv", "--out", again}) == 0);
    CHECK(read_text(again) == text);
  }
}

TEST_CASE("grid tuning runs behind its flag and is recorded in provenance") {
  TempDir dir("grid");
  REQUIRE(run({"simulate", "--seed", "8", "--out", dir / "c", "--cells", "8", "4", "4", "2"}) ==
          0);
  REQUIRE(run({"eval", "--manifest", dir / "c/manifest.json", "--model", "ridge,lasso", "--cv",
               "stratified:3", "--seed", "4", "--grid", "--out", dir / "r.json"}) == 0);
  const auto report = nlohmann::ordered_json::parse(read_text(dir.path / "r.json"));
  const auto& grid = report.at("provenance").at("config").at("grid");
  CHECK(grid.contains("ridge"));
  CHECK(grid.contains("lasso"));
  // tuning without folds to score on is a usage problem
  CHECK(run({"eval", "--manifest", dir / "c/manifest.json", "--model", "ridge", "--cv", "loocv",
             "--grid"}) == 1);
}

TEST_CASE("a manifest referencing a missing file exits 1 and names it") {
  TempDir dir("missing");
  write_text_atomic(dir.path / "manifest.json", R"({"participants":[
    {"id":"P01","gender":"male","age":25,"height_m":1.8,"weight_kg":75,
     "cpet_max_hr":190,"cpet_file":"gone.csv","cpsjt_file":"gone.csv"}]})");
  CHECK(run({"eval", "--manifest", dir / "manifest.json"}) == 1);
  CHECK(run({"ingest", "--manifest", dir / "manifest.json"}) == 1);
}

TEST_CASE("evaluation reports are identical across thread counts") {
  TempDir dir("threads");
  REQUIRE(run({"simulate", "--seed", "3", "--out", dir / "c", "--cells", "8", "4", "4", "2"}) ==
          0);
  REQUIRE(run({"eval", "--manifest", dir / "c/manifest.json", "--model", "linear,rf", "--cv",
               "both", "--seed", "9", "--threads", "1", "--out", dir / "r1.json",
               "--rf-trees", "40"}) == 0);
  REQUIRE(run({"eval", "--manifest", dir / "c/manifest.json", "--model", "linear,rf", "--cv",
               "both", "--seed", "9", "--threads", "8", "--out", dir / "r8.json",
               "--rf-trees", "40"}) == 0);
  const auto a = read_text(dir.path / "r1.json");
  const auto b = read_text(dir.path / "r8.json");
  CHECK(body_only(a) == body_only(b));

  // identical argv twice gives byte-identical files
  REQUIRE(run({"eval", "--manifest", dir / "c/manifest.json", "--model", "linear,rf", "--cv",
               "both", "--seed", "9", "--threads", "1", "--out", dir / "r1b.json",
               "--rf-trees", "40"}) == 0);
  CHECK(read_text(dir.path / "r1.json") == read_text(dir.path / "r1b.json"));
}

TEST_CASE("pipeline writes every stage artifact") {
  TempDir dir("pipe");
  CHECK(run({"pipeline", "--seed", "4", "--out", dir / "run", "--cells", "6", "3", "3", "2",
             "--model", "linear,lasso", "--cv", "stratified:3"}) == 0);
  for (const char* name : {"manifest.json", "truth.json", "features.csv", "stats.json",
                           "fit_linear.json", "fit_lasso.json", "report.json"})
    CHECK(fs::exists(dir.path / "run" / name));
}

TEST_CASE("legacy termination mode flows through the flags") {
  TempDir dir("legacy");
  REQUIRE(run({"simulate", "--seed", "6", "--out", dir / "c", "--cells", "4", "2", "2", "2"}) ==
          0);
  CHECK(run({"features", "--manifest", dir / "c/manifest.json", "--out", dir / "f.csv",
             "--termination-mode", "legacy_theoretical", "--legacy-fraction", "0.9"}) == 0);
  const auto rows = read_feature_table(dir.path / "f.csv");
  CHECK(rows.size() == 10);
}
