#pragma once

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "roboabstain/pipeline.hpp"

namespace roboabstain {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitPartial = 1, kExitUsage = 2 };

struct CliOptions {
  TransportFactory transports = make_transport;  // replaced in tests
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
};

namespace detail {

inline bool is_usage_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::config_error:
    case ErrorKind::io_error:
    case ErrorKind::malformed_registry:
    case ErrorKind::unknown_variant:
    case ErrorKind::auth_error:
    case ErrorKind::malformed_json:
      return true;
    default:
      return false;
  }
}

}  // namespace detail

/// Runs the tool with `args` (without the program name) and returns the exit
/// code: 0 success, 1 when some items failed, 2 for configuration or usage
/// errors.
inline int run_cli(const std::vector<std::string>& args, const CliOptions& opts = {}) {
  CLI::App app{"Abstention benchmark pipeline: ground, derive, generate, sample, evaluate, judge, report, replay"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 42;
  std::string cache_dir;
  std::string out_dir = "run";
  app.add_option("--config", config_path, "Run config JSON (endpoints, variants, repeats, concurrency)");
  app.add_option("--seed", seed, "Seed for instruction and benchmark sampling")->capture_default_str();
  app.add_option("--cache-dir", cache_dir, "Cache directory (default: <out>/cache)");
  app.add_option("--out", out_dir, "Run directory")->capture_default_str();

  std::string images, scenes, checks, registry, instructions, benchmark, responses, labels, labels_model,
      labels_variant, judged, metrics;
  std::optional<std::size_t> cap;

  auto* ground = app.add_subcommand("ground", "Ground images into validated scene files");
  ground->add_option("--images", images, "Image manifest: one path per line, or a JSON list")->required();
  auto* derive = app.add_subcommand("derive", "Derive per-category candidates from scene files");
  derive->add_option("--scenes", scenes, "Scene directory (default: <out>/scenes)");
  auto* generate = app.add_subcommand("generate", "Instantiate templates into instructions");
  generate->add_option("--checks", checks, "Checks directory (default: <out>/checks)");
  generate->add_option("--registry", registry, "Template registry JSON (default: bundled registry)");
  generate->add_option("--cap", cap, "Instructions kept per category per image (default: config, else 10)");
  auto* sample = app.add_subcommand("sample", "Keep one instruction per category per image");
  sample->add_option("--instructions", instructions, "Instruction JSONL (default: <out>/instructions.jsonl)");
  auto* evaluate = app.add_subcommand("evaluate", "Query planner models on the benchmark");
  evaluate->add_option("--benchmark", benchmark, "Benchmark JSONL (default: <out>/benchmark.jsonl)");
  auto* judge = app.add_subcommand("judge", "Classify responses as Abstain/Act");
  judge->add_option("--responses", responses, "Response JSONL (default: <out>/responses.jsonl)");
  judge->add_option("--labels", labels, "Human labels CSV (item_id, annotator, label[, adjudicated])");
  judge->add_option("--labels-model", labels_model, "Planner label the human labels refer to");
  judge->add_option("--labels-variant", labels_variant, "Prompt variant the human labels refer to");
  auto* report = app.add_subcommand("report", "Render abstention tables");
  report->add_option("--judged", judged, "Judged JSONL (default: <out>/judged.jsonl)");
  report->add_option("--benchmark", benchmark, "Benchmark JSONL (default: <out>/benchmark.jsonl)");
  report->add_option("--metrics", metrics, "Judge metrics JSON (default: <out>/metrics.json)");
  auto* replay = app.add_subcommand("replay", "Re-run recorded stages from caches and compare outputs");

  std::vector<std::string> argv_storage{"roboabstain"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    *opts.out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    *opts.err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  const fs::path run_dir(out_dir);
  try {
    if (replay->parsed()) {
      TransportFactory offline = [](const EndpointConfig&) { return std::make_shared<OfflineTransport>(); };
      const ReplayResult r = replay_run(run_dir, offline, opts.err);
      for (const auto& f : r.identical) *opts.out << "identical " << f << "\n";
      for (const auto& f : r.differing) *opts.out << "DIFFERS   " << f << "\n";
      *opts.out << "replayed " << r.stages.size() << " stage(s): " << r.identical.size() << " identical, "
                << r.differing.size() << " differing\n";
      return r.differing.empty() ? kExitOk : kExitPartial;
    }

    StageContext ctx;
    ctx.out_dir = run_dir;
    ctx.cache_dir = cache_dir.empty() ? run_dir / "cache" : fs::path(cache_dir);
    ctx.config = config_path.empty() ? run_config_from_json(json::object()) : load_run_config(config_path);
    ctx.transports = opts.transports;
    ctx.log = opts.err;
    fs::create_directories(run_dir);

    auto in_run = [&](const std::string& given, const char* fallback) {
      return encode_path(run_dir, given.empty() ? run_dir / fallback : fs::path(given));
    };
    auto require_file = [](const fs::path& p) {
      if (!fs::exists(p)) throw Error(ErrorKind::io_error, "no such file: " + p.string());
    };

    std::string stage;
    json stage_args = json::object();
    if (ground->parsed()) {
      stage = "ground";
      require_file(images);
      stage_args["images"] = encode_path(run_dir, images);
    } else if (derive->parsed()) {
      stage = "derive";
      stage_args["scenes"] = in_run(scenes, "scenes");
    } else if (generate->parsed()) {
      stage = "generate";
      stage_args["checks"] = in_run(checks, "checks");
      if (!registry.empty()) {
        require_file(registry);
        stage_args["registry"] = encode_path(run_dir, registry);
      }
      stage_args["seed"] = seed;
      const std::size_t c = cap.value_or(ctx.config.per_category_cap);
      if (c < 1) throw Error(ErrorKind::config_error, "--cap must be at least 1");
      stage_args["cap"] = c;
    } else if (sample->parsed()) {
      stage = "sample";
      stage_args["instructions"] = in_run(instructions, "instructions.jsonl");
      stage_args["seed"] = seed;
    } else if (evaluate->parsed()) {
      stage = "evaluate";
      stage_args["benchmark"] = in_run(benchmark, "benchmark.jsonl");
    } else if (judge->parsed()) {
      stage = "judge";
      stage_args["responses"] = in_run(responses, "responses.jsonl");
      if (!labels.empty()) {
        require_file(labels);
        stage_args["labels"] = encode_path(run_dir, labels);
      }
      if (!labels_model.empty()) stage_args["labels_model"] = labels_model;
      if (!labels_variant.empty()) stage_args["labels_variant"] = labels_variant;
    } else if (report->parsed()) {
      stage = "report";
      stage_args["judged"] = in_run(judged, "judged.jsonl");
      stage_args["benchmark"] = in_run(benchmark, "benchmark.jsonl");
      stage_args["metrics"] = in_run(metrics, "metrics.json");
    }

    const StageResult res = run_and_record(stage, ctx, stage_args, seed);
    for (const auto& f : res.outputs) *opts.out << (run_dir / f).generic_string() << "\n";
    if (!res.failures.empty()) {
      *opts.err << stage << ": " << res.failures.size() << " failure(s):\n";
      for (const auto& f : res.failures) *opts.err << "  " << f << "\n";
      return kExitPartial;
    }
    return kExitOk;
  } catch (const Error& e) {
    *opts.err << "error: " << e.what() << "\n";
    return detail::is_usage_error(e.kind()) ? kExitUsage : kExitPartial;
  } catch (const std::exception& e) {
    *opts.err << "error: " << e.what() << "\n";
    return kExitPartial;
  }
}

}  // namespace roboabstain
