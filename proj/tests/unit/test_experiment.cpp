#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "bu/experiment.hpp"
#include "bu/model_io.hpp"

using namespace bu;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::set<std::string> listing(const fs::path& dir) {
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) names.insert(e.path().filename().string());
  return names;
}

ExperimentConfig small_verify(std::size_t updates) {
  auto cfg = experiment_config_from_json(json::parse(R"({"experiment": "verify", "objective": "BU", "seed": 3,
    "verify": {"samples": 400, "batch_normal": 50, "batch_anomaly": 50, "grid_resolution": 41}})"));
  cfg.verify.updates = updates;
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("verify config defaults") {
  const auto cfg = experiment_config_from_json(json::parse(R"({"experiment": "verify"})"));
  CHECK(cfg.kind == ExperimentKind::verify);
  CHECK(cfg.verify.samples == 10000);
  CHECK(cfg.verify.batch_normal == 500);
  CHECK(cfg.verify.updates == 5000);
  const auto obj = resolved_objective(cfg);
  CHECK(obj.clip == 4.0);
  CHECK(obj.kde.band_width == 4.0);
  CHECK_FALSE(obj.kde.normalize_batch);
  CHECK(cfg.optimizer.beta1 == 0.9);
  CHECK(cfg.optimizer.beta2 == 0.999);
}

TEST_CASE("audio config defaults follow the input dimension") {
  auto cfg = experiment_config_from_json(json::parse(R"({"experiment": "audio", "audio": {"architecture": "fcn64-large"}})"));
  CHECK(cfg.audio.features.dim() == 1344);
  const auto obj = resolved_objective(cfg);
  CHECK(obj.kde.band_width == doctest::Approx(1.0 / 2688.0));
  CHECK(obj.clip == 128.0);
  CHECK(obj.kde.normalize_batch);
  CHECK(cfg.audio.schedule.base_rate == 1e-4);
  CHECK(cfg.audio.schedule.hold_epochs == 100);
  CHECK(cfg.audio.schedule.end_epoch == 200);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(experiment_config_from_json(json::parse(R"({"experiment": "verify", "verfy": {}})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(json::parse(R"({"experiment": "verify", "verify": {"sample": 3}})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(json::parse(R"({"experiment": "other"})")), std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(json::parse(R"({"experiment": "verify", "objective": "XX"})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(
                      json::parse(R"({"experiment": "audio", "audio": {"architecture": "fcn40-small", "input_dim": 441}})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(load_experiment_config("/nonexistent/config.json"), std::runtime_error);
}

TEST_CASE("config echo round-trips") {
  const auto cfg = small_verify(7);
  const auto back = experiment_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
}

TEST_CASE("derived seeds differ across streams and seeds") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 10; ++s) {
    for (std::uint64_t k = 0; k < 10; ++k) seen.insert(derive_seed(s, k));
  }
  CHECK(seen.size() == 100);
}

TEST_CASE("zero-update verify run writes the full artifact set") {
  const auto dir = fresh_dir("bu_test_verify0");
  const auto report = run_verify(small_verify(0));
  CHECK(report.loss_curve.empty());
  REQUIRE(report.verify.has_value());
  CHECK(report.verify->kld_p > 0.0);
  CHECK(std::abs(report.verify->pdf.density.mass() - 1.0) <= 1e-9);
  export_artifacts(report, dir);
  CHECK(listing(dir) == std::set<std::string>{"loss.csv", "kld.csv", "pdf.pgm", "score.pgm", "pdf.csv", "model.bin",
                                              "config.echo"});
  CHECK(load_model(dir / "model.bin") == *report.model);
  CHECK(slurp(dir / "kld.csv").rfind("objective,kld_p_q,kld_u_q\nBU,", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("verify runs are reproducible byte for byte") {
  const auto a = fresh_dir("bu_test_verify_a");
  const auto b = fresh_dir("bu_test_verify_b");
  export_artifacts(run_verify(small_verify(25)), a);
  export_artifacts(run_verify(small_verify(25)), b);
  CHECK(slurp(a / "loss.csv") == slurp(b / "loss.csv"));
  CHECK(slurp(a / "kld.csv") == slurp(b / "kld.csv"));
  CHECK(slurp(a / "model.bin") == slurp(b / "model.bin"));
  auto other = small_verify(25);
  other.seed = 4;
  const auto c = fresh_dir("bu_test_verify_c");
  export_artifacts(run_verify(other), c);
  CHECK(slurp(a / "loss.csv") != slurp(c / "loss.csv"));
  for (const auto& d : {a, b, c}) fs::remove_all(d);
}

TEST_CASE("objectives sharing a seed share their initial model") {
  auto re = small_verify(0);
  re.objective = ObjectiveKind::re;
  auto bu_cfg = small_verify(0);
  CHECK(*run_verify(re).model == *run_verify(bu_cfg).model);
}

TEST_CASE("training lowers the BU loss on the annulus") {
  const auto report = run_verify(small_verify(300));
  REQUIRE(report.loss_curve.size() == 300);
  double first = 0.0;
  double last = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    first += report.loss_curve[i].total;
    last += report.loss_curve[report.loss_curve.size() - 1 - i].total;
  }
  CHECK(last < first);
}

TEST_CASE("export into an unusable directory fails cleanly") {
  const auto dir = fresh_dir("bu_test_blocked");
  fs::create_directories(dir);
  std::ofstream(dir / "file") << "x";
  const auto report = run_verify(small_verify(0));
  CHECK_THROWS(export_artifacts(report, dir / "file" / "out"));
  CHECK(listing(dir) == std::set<std::string>{"file"});
  fs::remove_all(dir);
}

TEST_CASE("tiny audio run") {
  const auto dir = fresh_dir("bu_test_audio");
  ToyCorpusConfig cc;
  cc.train_files = 4;
  cc.else_clips = 3;
  cc.test_normal = 3;
  cc.test_anomaly = 3;
  const auto manifest = generate_toy_corpus(dir / "corpus", cc, 2);

  auto cfg = experiment_config_from_json(json::parse(R"({"experiment": "audio", "objective": "BU",
    "audio": {"epochs": 1, "batches_per_epoch": 2, "files_per_batch": 4, "learning_rate": 1e-3,
              "hold_epochs": 1, "end_epoch": 2, "test_anrs": [-10]}})"));
  cfg.audio.manifest = manifest;
  const auto report = run_audio(cfg);
  CHECK(report.input_dim == 440);
  CHECK(report.loss_curve.size() == 2);
  REQUIRE(report.audio.size() == 1);
  CHECK(report.audio[0].clip_auc >= 0.0);
  CHECK(report.audio[0].clip_auc <= 1.0);

  export_artifacts(report, dir / "out");
  CHECK(listing(dir / "out") == std::set<std::string>{"loss.csv", "auc.csv", "model.bin", "config.echo"});
  const auto echo = json::parse(slurp(dir / "out" / "config.echo"));
  CHECK(echo.at("audio").at("input_dim") == 440);
  CHECK(slurp(dir / "out" / "auc.csv").rfind("objective,input_dim,anr_db,frame_auc,clip_auc\nBU,440,", 0) == 0);

  fs::remove_all(dir);
}

TEST_CASE("audio run rejects a missing manifest") {
  auto cfg = experiment_config_from_json(json::parse(R"({"experiment": "audio"})"));
  cfg.audio.manifest = "/nonexistent/manifest.txt";
  CHECK_THROWS_AS(run_audio(cfg), std::invalid_argument);
}
