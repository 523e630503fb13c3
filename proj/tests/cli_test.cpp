#include <gtest/gtest.h>

#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>

#include "roboabstain/cli.hpp"
#include "test_support.hpp"

namespace ra = roboabstain;
using namespace testing_support;

namespace {

/// Builds scripted transports from the config and counts their calls per
/// endpoint label.
class CountingFactory {
 public:
  ra::TransportFactory factory() {
    return [this](const ra::EndpointConfig& e) -> std::shared_ptr<ra::ChatTransport> {
      auto t = std::make_shared<ra::ScriptedTransport>(e.script);
      std::lock_guard lock(mu_);
      made_[e.label].push_back(t);
      return t;
    };
  }
  std::size_t calls(const std::string& label) const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    auto it = made_.find(label);
    if (it == made_.end()) return 0;
    for (const auto& t : it->second) n += t->calls();
    return n;
  }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [label, _] : made_) n += calls(label);
    return n;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::vector<std::shared_ptr<ra::ScriptedTransport>>> made_;
};

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(const std::vector<std::string>& args, CountingFactory& f) {
  std::ostringstream out, err;
  ra::CliOptions opts{f.factory(), &out, &err};
  const int code = ra::run_cli(args, opts);
  return {code, out.str(), err.str()};
}

json scripted(const std::string& label, const std::string& fallback, json rules = json::array()) {
  return {{"label", label}, {"provider", "scripted"}, {"model", label + "-model"},
          {"script", {{"rules", rules}, {"default", fallback}}}};
}

json base_config() {
  return {{"grounding", scripted("grounder", read_fixture("scenes/kitchen_counter.json"))},
          {"planners", json::array({scripted("Planner", "Sure, picking it up now.")})},
          {"judge", scripted("Judge", "Abstain")},
          {"retry", {{"max_attempts", 1}, {"base_delay_ms", 0}, {"max_delay_ms", 0}}},
          {"max_in_flight", 2}};
}

path write_config(const TempDir& dir, const json& config, const std::string& name = "config.json") {
  const path p = dir / name;
  ra::write_file_atomic(p, config.dump(2));
  return p;
}

/// Three distinct PNGs and a text manifest listing them.
path write_images(const TempDir& dir, int n = 3) {
  fs::create_directories(dir / "images");
  std::string manifest = "# test images\n";
  for (int i = 0; i < n; ++i) {
    const path p = dir / ("images/img" + std::to_string(i) + ".png");
    ra::write_file_atomic(p, make_png(40 + i, 30, i * 11));
    manifest += p.string() + "\n";
  }
  const path m = dir / "images.txt";
  ra::write_file_atomic(m, manifest);
  return m;
}

std::map<std::string, std::string> dir_contents(const path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = ra::read_file(e.path());
  return out;
}

/// Runs every stage from grounding to report with `config`.
void full_pipeline(const TempDir& dir, const json& config, CountingFactory& f) {
  const path cfg = write_config(dir, config);
  const path images = write_images(dir);
  const std::string out = (dir / "run").string();
  ASSERT_EQ(run({"--config", cfg.string(), "--out", out, "ground", "--images", images.string()}, f).code, 0);
  ASSERT_EQ(run({"--config", cfg.string(), "--out", out, "derive"}, f).code, 0);
  ASSERT_EQ(run({"--config", cfg.string(), "--out", out, "generate"}, f).code, 0);
  ASSERT_EQ(run({"--config", cfg.string(), "--out", out, "sample"}, f).code, 0);
  ASSERT_EQ(run({"--config", cfg.string(), "--out", out, "evaluate"}, f).code, 0);
  ASSERT_EQ(run({"--config", cfg.string(), "--out", out, "judge"}, f).code, 0);
  ASSERT_EQ(run({"--config", cfg.string(), "--out", out, "report"}, f).code, 0);
}

/// The data row of report.md for `model`.
std::string report_row(const path& run_dir, const std::string& model) {
  std::istringstream md(ra::read_file(run_dir / "report.md"));
  std::string line;
  while (std::getline(md, line)) {
    if (line.rfind("| " + model + " |", 0) == 0) return line;
  }
  return "";
}

std::vector<std::string> row_cells(const std::string& row) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(row);
  std::getline(is, cell, '|');
  while (std::getline(is, cell, '|')) {
    const auto b = cell.find_first_not_of(' ');
    const auto e = cell.find_last_not_of(' ');
    if (b != std::string::npos) cells.push_back(cell.substr(b, e - b + 1));
  }
  return cells;
}

std::array<std::size_t, 8> category_counts(const std::vector<ra::BenchmarkItem>& items) {
  std::array<std::size_t, 8> n{};
  for (const auto& it : items) ++n[ra::category_index(it.category)];
  return n;
}

}  // namespace

TEST(Cli, GroundingCachedImagesMakesNoCalls) {
  TempDir dir("cli_ground");
  CountingFactory f;
  const path cfg = write_config(dir, base_config());
  const path images = write_images(dir);
  const std::string out = (dir / "run").string();
  const std::vector<std::string> args{"--config", cfg.string(), "--out", out, "ground", "--images", images.string()};

  auto first = run(args, f);
  ASSERT_EQ(first.code, 0) << first.err;
  EXPECT_EQ(f.calls("grounder"), 3u);
  const auto scenes = dir_contents(dir / "run/scenes");
  EXPECT_EQ(scenes.size(), 4u);  // three scenes plus images.json

  CountingFactory again;
  auto second = run(args, again);
  ASSERT_EQ(second.code, 0) << second.err;
  EXPECT_EQ(again.total(), 0u);
  EXPECT_EQ(dir_contents(dir / "run/scenes"), scenes);
}

TEST(Cli, EmptyManifestGivesEmptyOutput) {
  TempDir dir("cli_empty");
  CountingFactory f;
  const path cfg = write_config(dir, base_config());
  ra::write_file_atomic(dir / "images.txt", "");
  auto r = run({"--config", cfg.string(), "--out", (dir / "run").string(), "ground", "--images",
                (dir / "images.txt").string()},
               f);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(f.total(), 0u);
  const auto scenes = dir_contents(dir / "run/scenes");
  ASSERT_EQ(scenes.size(), 1u);
  EXPECT_EQ(json::parse(scenes.at("images.json")), json::array());
}

TEST(Cli, UndecodableImageIsListedAsFailure) {
  TempDir dir("cli_undecodable");
  CountingFactory f;
  const path cfg = write_config(dir, base_config());
  const path manifest = write_images(dir, 2);
  const path broken = dir / "images/broken.png";
  ra::write_file_atomic(broken, "this is not an image");
  ra::write_file_atomic(manifest, ra::read_file(manifest) + broken.string() + "\n");

  auto r = run({"--config", cfg.string(), "--out", (dir / "run").string(), "ground", "--images", manifest.string()}, f);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("1 failure(s)"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find(broken.string()), std::string::npos) << r.err;
  EXPECT_EQ(f.calls("grounder"), 2u);
  EXPECT_EQ(dir_contents(dir / "run/scenes").size(), 3u);

  const json manifest_json = ra::read_json_file(dir / "run/manifest.json");
  ASSERT_EQ(manifest_json["stages"]["ground"]["failures"].size(), 1u);
}

TEST(Cli, DeriveIsByteIdenticalAcrossRuns) {
  TempDir dir("cli_derive");
  CountingFactory f;
  fs::create_directories(dir / "scenes");
  for (const auto& p : scene_fixtures()) {
    fs::copy_file(p, dir / ("scenes/" + p.stem().string() + ".scene.json"));
  }
  for (const char* out : {"a", "b"}) {
    auto r = run({"--out", (dir / out).string(), "derive", "--scenes", (dir / "scenes").string()}, f);
    ASSERT_EQ(r.code, 0) << r.err;
  }
  const auto a = dir_contents(dir / "a/checks");
  EXPECT_EQ(a.size(), scene_fixtures().size());
  EXPECT_EQ(a, dir_contents(dir / "b/checks"));
  EXPECT_EQ(f.total(), 0u);
}

TEST(Cli, SeedChangesSampleButNotEnumeration) {
  TempDir dir("cli_seed");
  CountingFactory f;
  fs::create_directories(dir / "scenes");
  for (const auto& p : scene_fixtures()) {
    fs::copy_file(p, dir / ("scenes/" + p.stem().string() + ".scene.json"));
  }
  const std::string out = (dir / "run").string();
  ASSERT_EQ(run({"--out", out, "derive", "--scenes", (dir / "scenes").string()}, f).code, 0);
  // a cap larger than any candidate list keeps the full enumeration
  ASSERT_EQ(run({"--out", out, "--seed", "1", "generate", "--cap", "100000"}, f).code, 0);
  const std::string enum1 = ra::read_file(dir / "run/instructions.jsonl");
  ASSERT_EQ(run({"--out", out, "--seed", "1", "sample"}, f).code, 0);
  const auto bench1 = ra::read_benchmark(dir / "run/benchmark.jsonl");

  ASSERT_EQ(run({"--out", out, "--seed", "2", "generate", "--cap", "100000"}, f).code, 0);
  EXPECT_EQ(ra::read_file(dir / "run/instructions.jsonl"), enum1);
  ASSERT_EQ(run({"--out", out, "--seed", "2", "sample"}, f).code, 0);
  const auto bench2 = ra::read_benchmark(dir / "run/benchmark.jsonl");

  ASSERT_EQ(bench1.size(), bench2.size());
  bool differs = false;
  for (std::size_t i = 0; i < bench1.size(); ++i) {
    EXPECT_EQ(bench1[i].item_id, bench2[i].item_id);
    differs = differs || bench1[i].instruction != bench2[i].instruction;
  }
  EXPECT_TRUE(differs);
}

TEST(Cli, MissingRegistryIsAUsageError) {
  TempDir dir("cli_registry");
  CountingFactory f;
  fs::create_directories(dir / "run/checks");
  auto r = run({"--out", (dir / "run").string(), "generate", "--registry", (dir / "nope.json").string()}, f);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope.json"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "run/instructions.jsonl"));
}

TEST(Cli, UsageErrors) {
  TempDir dir("cli_usage");
  CountingFactory f;
  EXPECT_EQ(run({}, f).code, 2);
  EXPECT_EQ(run({"frobnicate"}, f).code, 2);
  EXPECT_EQ(run({"--out", (dir / "run").string(), "ground"}, f).code, 2);  // --images is required
  ra::write_file_atomic(dir / "bad.json", R"({"planners": [], "colour": 1})");
  EXPECT_EQ(run({"--config", (dir / "bad.json").string(), "--out", (dir / "run").string(), "derive"}, f).code, 2);
  ra::write_file_atomic(dir / "variant.json", R"({"variants": ["loud"]})");
  EXPECT_EQ(run({"--config", (dir / "variant.json").string(), "--out", (dir / "run").string(), "derive"}, f).code, 2);
  // evaluate without planners
  ra::write_file_atomic(dir / "run/benchmark.jsonl", "");
  EXPECT_EQ(run({"--out", (dir / "run").string(), "evaluate"}, f).code, 2);
  EXPECT_EQ(run({"--help"}, f).code, 0);
}

TEST(Cli, AlwaysAbstainReportsFullRates) {
  TempDir dir("cli_abstain");
  CountingFactory f;
  full_pipeline(dir, base_config(), f);
  const auto bench = ra::read_benchmark(dir / "run/benchmark.jsonl");
  ASSERT_FALSE(bench.empty());
  const auto n = category_counts(bench);

  const auto cells = row_cells(report_row(dir / "run", "Planner"));
  ASSERT_EQ(cells.size(), 11u);
  EXPECT_EQ(cells[1], "Default");
  for (std::size_t c = 0; c < 8; ++c) {
    const std::string expected = n[c] ? std::to_string(n[c]) + " (100.0%)" : "0 (n/a)";
    EXPECT_EQ(cells[2 + c], expected) << c;
  }
  EXPECT_EQ(cells[10], std::to_string(bench.size()) + " (100.0%)");
  EXPECT_EQ(f.calls("Planner"), bench.size());
  // identical (instruction, response) pairs share one judge call
  std::set<std::string> distinct;
  for (const auto& it : bench) distinct.insert(it.instruction);
  EXPECT_EQ(f.calls("Judge"), distinct.size());
}

TEST(Cli, AlwaysActReportsZeroRates) {
  TempDir dir("cli_act");
  CountingFactory f;
  json config = base_config();
  config["judge"] = scripted("Judge", "Act");
  full_pipeline(dir, config, f);
  const auto bench = ra::read_benchmark(dir / "run/benchmark.jsonl");
  const auto n = category_counts(bench);
  const auto cells = row_cells(report_row(dir / "run", "Planner"));
  ASSERT_EQ(cells.size(), 11u);
  for (std::size_t c = 0; c < 8; ++c) {
    EXPECT_EQ(cells[2 + c], n[c] ? "0 (0.0%)" : "0 (n/a)") << c;
  }
  EXPECT_EQ(cells[10], "0 (0.0%)");
}

TEST(Cli, MixedScriptedFixtureMatchesHandTable) {
  TempDir dir("cli_mixed");
  CountingFactory f;
  // six hand-written items; the judge abstains on instructions that
  // mention the word "unicorn"
  const std::string h1(64, 'a'), h2(64, 'b'), h3(64, 'c');
  const std::vector<std::tuple<std::string, std::string, std::string>> items = {
      {h1, "missing_referent", "bring me the unicorn figurine"},
      {h2, "missing_referent", "bring me the stapler"},
      {h1, "ambiguous_referent", "hand me the unicorn mug"},
      {h1, "false_premise", "close the open drawer"},
      {h2, "false_premise", "turn off the unicorn lamp"},
      {h3, "false_premise", "empty the full bin"},
  };
  std::string bench;
  for (const auto& [hash, cat, text] : items) {
    bench += json({{"item_id", hash + "/" + cat}, {"image_path", ""}, {"image_hash", hash}, {"category", cat},
                   {"instruction", text}, {"template_id", "X-01"}, {"source_dataset", nullptr}})
                 .dump() +
             "\n";
  }
  ra::write_file_atomic(dir / "run/benchmark.jsonl", bench);
  json config = base_config();
  config["attach_images"] = false;
  config["planners"] = json::array({scripted("Planner", "Okay.")});
  config["judge"] = scripted("Judge", "Act", json::array({{{"contains", "unicorn"}, {"reply", "Abstain"}}}));
  const path cfg = write_config(dir, config);
  const std::string out = (dir / "run").string();
  ASSERT_EQ(run({"--config", cfg.string(), "--out", out, "evaluate"}, f).code, 0);
  ASSERT_EQ(run({"--config", cfg.string(), "--out", out, "judge"}, f).code, 0);
  ASSERT_EQ(run({"--config", cfg.string(), "--out", out, "report"}, f).code, 0);

  EXPECT_EQ(report_row(dir / "run", "Planner"),
            "| Planner | Default | 1 (50.0%) | 1 (100.0%) | 0 (n/a) | 0 (n/a) | 0 (n/a) | 0 (n/a) | 0 (n/a) | "
            "1 (33.3%) | 3 (50.0%) |");
  const std::string md = ra::read_file(dir / "run/report.md");
  EXPECT_NE(md.find("| Missing Referent (2) | Ambiguous Referent (1) | Subjective Intent (0) |"), std::string::npos);
  EXPECT_NE(md.find("| False Premise (3) | Overall (6) |"), std::string::npos);

  const std::string csv = ra::read_file(dir / "run/report.csv");
  EXPECT_NE(csv.find("Planner,default,missing_referent,1,2,0.5,0\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("Planner,default,overall,3,6,0.5,0\n"), std::string::npos) << csv;
}

TEST(Cli, ReplayReproducesEveryOutput) {
  TempDir dir("cli_replay");
  CountingFactory f;
  full_pipeline(dir, base_config(), f);
  const json manifest = ra::read_json_file(dir / "run/manifest.json");
  for (const char* stage : {"ground", "derive", "generate", "sample", "evaluate", "judge", "report"}) {
    EXPECT_TRUE(manifest["stages"].contains(stage)) << stage;
  }
  EXPECT_EQ(manifest["seed"], 42);
  EXPECT_TRUE(manifest["endpoints"].contains("judge"));

  CountingFactory offline;
  auto r = run({"--out", (dir / "run").string(), "replay"}, offline);
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(r.out.find("DIFFERS"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("replayed 7 stage(s)"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("0 differing"), std::string::npos) << r.out;
  EXPECT_EQ(offline.total(), 0u);
}

TEST(Cli, ReplayDetectsEditedOutput) {
  TempDir dir("cli_replay_diff");
  CountingFactory f;
  full_pipeline(dir, base_config(), f);
  ra::write_file_atomic(dir / "run/report.md", "edited\n");
  CountingFactory offline;
  auto r = run({"--out", (dir / "run").string(), "replay"}, offline);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("DIFFERS   report.md"), std::string::npos) << r.out;
}

TEST(Cli, ManifestRecordsStageOutputsAndHashes) {
  TempDir dir("cli_manifest");
  CountingFactory f;
  full_pipeline(dir, base_config(), f);
  const json m = ra::read_json_file(dir / "run/manifest.json");
  for (const auto& [stage, entry] : m["stages"].items()) {
    for (const auto& [rel, sha] : entry["outputs"].items()) {
      EXPECT_EQ(sha.get<std::string>(), ra::file_sha256(dir / "run" / rel)) << stage << " " << rel;
    }
  }
  EXPECT_EQ(m["benchmark_sha256"].get<std::string>(), ra::file_sha256(dir / "run/benchmark.jsonl"));
  EXPECT_EQ(m["registry_sha256"].get<std::string>(), ra::sha256_hex(ra::bundled::templates_json));
  // secrets never reach the manifest: endpoints carry only the env var name
  EXPECT_FALSE(m["endpoints"]["judge"].contains("api_key"));
}
