#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "pmvol/http_source.hpp"
#include "pmvol/pipeline.hpp"

using namespace pmvol;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = fs::path(PMVOL_SOURCE_DIR) / "tests" / "fixtures";

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("pmvol_test_" + name);
  fs::remove_all(p);
  return p;
}

RunConfig fast_config(const fs::path& out) {
  auto cfg = load_run_config(kFixtures / "run.ini");
  cfg.output = out;
  cfg.resamples = 100;
  cfg.horizons = {1, 5};
  return cfg;
}

std::string slurp(const fs::path& p) { return read_bytes(p); }

int cli(const std::string& args) {
  const std::string cmd = std::string(PMVOL_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(RunConfig, ParsesTheFixtureAndRejectsUnknownKeys) {
  const auto cfg = load_run_config(kFixtures / "run.ini");
  EXPECT_EQ(cfg.source, "synthetic");
  EXPECT_EQ(cfg.assets.size(), 3u);
  EXPECT_EQ(cfg.pairs.size(), 2u);
  EXPECT_EQ(cfg.orthogonalize_sets.size(), 2u);
  EXPECT_EQ(cfg.resolve(cfg.synthetic_path), kFixtures / "synthetic.ini");

  const auto dir = scratch("badcfg");
  fs::create_directories(dir);
  std::ofstream(dir / "a.ini") << "[model]\nasets = BTC\n";
  EXPECT_THROW((void)load_run_config(dir / "a.ini"), ValidationError);
  std::ofstream(dir / "b.ini") << "[robustness]\nq = 1.5\n";
  EXPECT_THROW((void)load_run_config(dir / "b.ini"), ValidationError);
  std::ofstream(dir / "c.ini") << "[extra]\nx = 1\n";
  EXPECT_THROW((void)load_run_config(dir / "c.ini"), ValidationError);
  EXPECT_THROW((void)load_run_config(dir / "missing.ini"), IoError);
  fs::remove_all(dir);
}

TEST(Manifest, DigestsAndRoundTrip) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const auto dir = scratch("manifest");
  fs::create_directories(dir / "sub");
  std::ofstream(dir / "b.txt") << "b";
  std::ofstream(dir / "sub" / "a.txt") << "a";
  write_manifest(dir);
  const auto m = read_manifest(dir);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at("b.txt"), sha256_hex("b"));
  EXPECT_TRUE(m.contains("sub/a.txt"));
  fs::remove_all(dir);
}

TEST(Pipeline, FullRunIsDeterministicAndComplete) {
  const auto a = scratch("run_a"), b = scratch("run_b");
  run_all(fast_config(a));
  run_all(fast_config(b));
  EXPECT_EQ(slurp(a / kManifestName), slurp(b / kManifestName));
  for (const auto* f : {"panel.csv", "ingest/summary.csv", "signals/coverage.csv", "estimate/effects.csv",
                        "estimate/models_BTC_KXFED.dir.csv", "grid/matrix.csv", "grid/long.csv", "oos/summary.csv",
                        "oos/cssed_BTC_KXFED.dir.csv", "oos/weights_BTC_KXFED.dir.csv", "robustness/report.csv",
                        "report.md"})
    EXPECT_TRUE(fs::exists(a / f)) << f;
  const auto report_text = slurp(a / "report.md");
  EXPECT_NE(report_text.find("BTC"), std::string::npos);
  EXPECT_NE(report_text.find("Best signal"), std::string::npos);
  // the sparse series is reported inactive
  EXPECT_NE(slurp(a / "grid/long.csv").find("KXRATECUT.dir,BTC,0,"), std::string::npos);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Pipeline, RobustnessTogglesLeaveUpstreamArtifactsUntouched) {
  const auto a = scratch("iso_a"), b = scratch("iso_b");
  auto ca = fast_config(a);
  auto cb = fast_config(b);
  cb.bootstrap = false;
  cb.lead_lag = false;
  Pipeline(ca).run(Stage::kRobustness, {Stage::kIngest, Stage::kSignals, Stage::kEstimate, Stage::kGrid,
                                        Stage::kOos, Stage::kRobustness});
  Pipeline(cb).run(Stage::kRobustness, {Stage::kIngest, Stage::kSignals, Stage::kEstimate, Stage::kGrid,
                                        Stage::kOos, Stage::kRobustness});
  const auto ma = read_manifest(a), mb = read_manifest(b);
  for (const auto& [file, digest] : ma) {
    if (file.rfind("robustness/", 0) == 0) continue;
    ASSERT_TRUE(mb.contains(file)) << file;
    EXPECT_EQ(mb.at(file), digest) << file;
  }
  EXPECT_NE(ma.at("robustness/report.csv"), mb.at("robustness/report.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Pipeline, MissingAssetFailsBeforeComputation) {
  const auto out = scratch("missing_asset");
  auto cfg = fast_config(out);
  cfg.assets.push_back("LTC");
  try {
    run_all(cfg);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("[ingest]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("LTC"), std::string::npos);
  }
  EXPECT_FALSE(fs::exists(out / "panel.csv"));
  fs::remove_all(out);
}

TEST(Pipeline, SingleStageEmitsOnlyItsOwnArtifacts) {
  const auto out = scratch("stage");
  Pipeline(fast_config(out)).run(Stage::kGrid, {Stage::kGrid});
  EXPECT_TRUE(fs::exists(out / "grid/long.csv"));
  EXPECT_FALSE(fs::exists(out / "estimate"));
  EXPECT_FALSE(fs::exists(out / "panel.csv"));
  EXPECT_TRUE(fs::exists(out / kManifestName));
  fs::remove_all(out);
}

TEST(Report, ErrorsAndNoTestableCells) {
  const auto empty = scratch("empty");
  fs::create_directories(empty);
  EXPECT_THROW((void)report(empty), Error);

  const auto out = scratch("inactive");
  auto cfg = fast_config(out);
  cfg.min_coverage = 100000;
  cfg.oos = false;
  cfg.robustness = false;
  Pipeline(cfg).run(Stage::kGrid, {Stage::kGrid});
  const auto text = report(out);
  EXPECT_NE(text.find("no testable cells"), std::string::npos);

  std::ofstream(out / "grid/long.csv", std::ios::app) << "tampered\n";
  EXPECT_THROW((void)report(out), Error);
  fs::remove_all(empty);
  fs::remove_all(out);
}

TEST(Cli, ExitCodes) {
  const auto out = scratch("cli");
  const auto cfg = (kFixtures / "run.ini").string();
  EXPECT_EQ(cli("ingest --config " + cfg + " --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "ingest/summary.csv"));
  EXPECT_EQ(cli("ingest --config /nonexistent.ini"), 3);
  EXPECT_EQ(cli("frobnicate"), 1);
  EXPECT_EQ(cli("report --out " + (out / "nothing").string()), 3);

  fs::create_directories(out);
  std::ofstream(out / "bad.ini") << "[robustness]\nq = 0\n";
  EXPECT_EQ(cli("run --config " + (out / "bad.ini").string()), 1);
  EXPECT_EQ(cli("simulate --config " + (kFixtures / "synthetic.ini").string() + " --out " + (out / "sim").string()),
            0);
  EXPECT_TRUE(fs::exists(out / "sim/quotes.csv"));
  EXPECT_TRUE(fs::exists(out / "sim/truth.csv"));
  fs::remove_all(out);
}

TEST(Http, UrlParsing) {
  const auto e = http::parse_url("http://localhost:8080/v1/quotes?x=1");
  EXPECT_EQ(e.base, "http://localhost:8080");
  EXPECT_EQ(e.path, "/v1/quotes?x=1");
  EXPECT_EQ(http::parse_url("http://host").path, "/");
  EXPECT_THROW((void)http::parse_url("ftp://host/x"), ValidationError);
  EXPECT_THROW((void)http::parse_url("host/x"), ValidationError);
}

TEST(Http, JsonRecordsAreNormalisedToCsv) {
  const std::vector<std::string> cols = {"asset_id", "date", "close"};
  const auto csv1 = http::normalize_to_csv(R"({"data":[{"asset_id":"BTC","date":"2024-01-02","close":42000.5}]})", cols);
  EXPECT_EQ(csv1, "asset_id,date,close\nBTC,2024-01-02,42000.5\n");
  const std::string passthrough = "asset_id,date,close\nBTC,2024-01-02,1\n";
  EXPECT_EQ(http::normalize_to_csv(passthrough, cols), passthrough);
  EXPECT_THROW((void)http::normalize_to_csv("<html>", cols), SchemaError);
  EXPECT_THROW((void)http::normalize_to_csv(R"({"x":1})", cols), SchemaError);
}

TEST(Http, FetchesFromALocalServer) {
  httplib::Server server;
  server.Get("/prices", [](const httplib::Request& req, httplib::Response& res) {
    if (req.get_header_value("Authorization") != "Bearer t0k") {
      res.status = 401;
      return;
    }
    res.set_content(R"([{"asset_id":"BTC","date":"2024-01-02","close":100},)"
                    R"({"asset_id":"BTC","date":"2024-01-03","close":-5}])",
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  const auto url = "http://127.0.0.1:" + std::to_string(port) + "/prices";
  const auto got = http::fetch_prices(url, "t0k");
  EXPECT_EQ(got.records.size(), 1u);
  EXPECT_EQ(got.rejections.size(), 1u);  // negative close goes through the usual rules
  EXPECT_THROW((void)http::fetch_prices(url, "wrong"), IoError);
  EXPECT_THROW((void)http::fetch_prices("http://127.0.0.1:" + std::to_string(port) + "/nope", "t0k"), IoError);
  server.stop();
  t.join();
}

TEST(Pipeline, FileSourceReadsSimulatedRawData) {
  const auto dir = scratch("files_source");
  const auto sim = simulate_panel(load_synthetic_config((kFixtures / "synthetic.ini").string()));
  (void)write_raw_data(sim.raw, dir);
  std::ofstream(dir / "run.ini") << "[data]\nsource = files\nquotes = quotes.csv\nprices = prices.csv\n"
                                    "controls = controls.csv\nevents = events.txt\n"
                                    "[model]\nassets = BTC,ETH\nseries = KXFED:dovish,KXCPI\n";
  auto cfg = load_run_config(dir / "run.ini");
  cfg.output = dir / "out";
  cfg.oos = false;
  cfg.robustness = false;
  Pipeline p(cfg);
  p.run(Stage::kSignals, {Stage::kIngest, Stage::kSignals});
  EXPECT_EQ(p.panel().rows(), sim.panel.rows());
  // returns rebuilt from prices match the generator's
  const auto& a = p.panel()["BTC.ret"];
  const auto& b = sim.panel["BTC.ret"];
  for (std::size_t t = 1; t < a.size(); ++t) EXPECT_NEAR(a[t], b[t], 1e-9);
  EXPECT_NE(slurp(dir / "out/ingest/summary.csv").find("quotes,"), std::string::npos);
  fs::remove_all(dir);
}
