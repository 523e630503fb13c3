#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "roboabstain/cache.hpp"
#include "roboabstain/config.hpp"
#include "roboabstain/constraints.hpp"
#include "roboabstain/dataset.hpp"
#include "roboabstain/evaluation.hpp"
#include "roboabstain/grounding.hpp"
#include "roboabstain/image.hpp"
#include "roboabstain/judge.hpp"
#include "roboabstain/manifest.hpp"
#include "roboabstain/metrics.hpp"
#include "roboabstain/report.hpp"
#include "roboabstain/templates.hpp"

namespace roboabstain {

// Stage functions. Each reads its inputs from files, writes its outputs under
// ctx.out_dir, and returns the arguments it ran with plus the relative paths
// it wrote, which is what the run manifest records. Fatal problems throw;
// per-item problems are collected in `failures`.

struct StageContext {
  fs::path out_dir;
  fs::path cache_dir;
  RunConfig config;
  TransportFactory transports = make_transport;
  std::ostream* log = nullptr;
  // Replay only: run-relative inputs that no replayed stage re-created (a
  // hand-written benchmark, say) are read from the original run.
  fs::path input_fallback;
};

struct StageResult {
  std::string stage;
  json args = json::object();
  std::vector<std::string> outputs;
  std::vector<std::string> failures;
};

/// Builds the underlying transport on first use, so fully cached stages
/// never need credentials.
class LazyTransport final : public ChatTransport {
 public:
  LazyTransport(TransportFactory factory, EndpointConfig endpoint)
      : factory_(std::move(factory)), endpoint_(std::move(endpoint)) {}

  std::string complete(const ChatRequest& request) override {
    std::shared_ptr<ChatTransport> t;
    {
      std::lock_guard lock(mutex_);
      if (!inner_) inner_ = factory_(endpoint_);
      t = inner_;
    }
    return t->complete(request);
  }

 private:
  TransportFactory factory_;
  EndpointConfig endpoint_;
  std::mutex mutex_;
  std::shared_ptr<ChatTransport> inner_;
};

/// Input paths inside the run directory are recorded relative to it, so a
/// replay into another directory reads its own re-derived files.
inline json encode_path(const fs::path& run_dir, const fs::path& p) {
  const fs::path abs = fs::absolute(p).lexically_normal();
  const fs::path rel = abs.lexically_relative(fs::absolute(run_dir).lexically_normal());
  if (!rel.empty() && *rel.begin() != "..") return {{"run", rel.generic_string()}};
  return {{"abs", abs.generic_string()}};
}

inline fs::path decode_path(const StageContext& ctx, const json& j) {
  if (j.contains("run")) {
    const fs::path p = ctx.out_dir / j["run"].get<std::string>();
    if (!ctx.input_fallback.empty() && !fs::exists(p)) return ctx.input_fallback / j["run"].get<std::string>();
    return p;
  }
  return j.at("abs").get<std::string>();
}

namespace detail {

inline void log_line(const StageContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << "\n";
}

/// Removes files in `dir` ending in `suffix` (a stage rewriting its output
/// directory must not leave stale entries behind).
inline void clear_outputs(const fs::path& dir, std::string_view suffix) {
  if (!fs::exists(dir)) return;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      fs::remove(entry.path());
    }
  }
}

inline std::vector<fs::path> files_with_suffix(const fs::path& dir, std::string_view suffix) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::io_error, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string strip_suffix(const fs::path& p, std::string_view suffix) {
  std::string name = p.filename().string();
  return name.substr(0, name.size() - suffix.size());
}

inline std::string error_text(const std::exception& e) { return e.what(); }

template <typename T, typename ToJson>
std::string jsonl(const std::vector<T>& rows, ToJson&& to_json) {
  std::string out;
  for (const auto& r : rows) out += to_json(r).dump() + "\n";
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Image manifests

struct ImageEntry {
  fs::path path;
  std::optional<std::string> source_dataset;
};

/// Either one image path per line (blank lines and '#' comments skipped) or
/// a JSON array whose entries are paths or {"path": ..., "source_dataset":
/// ...}. Relative paths are taken relative to the manifest's directory.
inline std::vector<ImageEntry> read_image_manifest(const fs::path& manifest) {
  const std::string text = read_file(manifest);
  const fs::path base = manifest.parent_path();
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return (path.is_absolute() ? path : base / path).lexically_normal();
  };
  std::vector<ImageEntry> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    const json doc = parse_json(text, manifest.string());
    for (const auto& e : doc) {
      if (e.is_string()) {
        out.push_back({resolve(e.get<std::string>()), std::nullopt});
      } else if (e.is_object() && e.contains("path")) {
        ImageEntry entry{resolve(e["path"].get<std::string>()), std::nullopt};
        if (e.contains("source_dataset") && !e["source_dataset"].is_null()) {
          entry.source_dataset = e["source_dataset"].get<std::string>();
        }
        out.push_back(std::move(entry));
      } else {
        throw Error(ErrorKind::config_error, manifest.string() + ": entries must be paths or objects with \"path\"");
      }
    }
    return out;
  }
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t");
    out.push_back({resolve(line.substr(b, e - b + 1)), std::nullopt});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages

/// scenes/<hash>.scene.json per grounded image plus scenes/images.json, an
/// index of {content_hash, image_path, source_dataset, width, height}.
inline StageResult stage_ground(const StageContext& ctx, const json& args) {
  StageResult res{"ground", args};
  const auto images = read_image_manifest(decode_path(ctx, args.at("images")));
  const VocabRegistry& vocab = default_vocab();
  GroundingConfig gcfg = ctx.config.grounding;
  gcfg.cache_dir = ctx.cache_dir / "grounding";
  const std::string prompt = build_grounding_prompt(vocab);
  LazyTransport transport(ctx.transports, gcfg.endpoint);

  struct Outcome {
    std::optional<GroundingResult> result;
    std::string failure;
  };
  std::vector<Outcome> outcomes(images.size());
  parallel_for(images.size(), ctx.config.max_in_flight, [&](std::size_t i) {
    const ImageEntry& entry = images[i];
    try {
      const std::string bytes = read_file(entry.path);
      ImageRef ref{entry.path, sha256_hex(bytes), 0, 0};
      if (auto hit = lookup_grounding_cache(gcfg.cache_dir, ref, gcfg.endpoint.model, prompt, vocab)) {
        outcomes[i].result = std::move(*hit);
        return;
      }
      cv::Mat decoded = decode_image(bytes);
      PreparedImage prepared{{entry.path, ref.content_hash, decoded.cols, decoded.rows},
                             encode_png(preprocess_image(decoded))};
      outcomes[i].result = ground_scene(prepared, gcfg, vocab, transport);
    } catch (const std::exception& e) {
      outcomes[i].failure = entry.path.string() + ": " + detail::error_text(e);
    }
  });

  const fs::path scenes = ctx.out_dir / "scenes";
  fs::create_directories(scenes);
  detail::clear_outputs(scenes, ".scene.json");
  std::map<std::string, json> index;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto& o = outcomes[i];
    if (!o.result) {
      res.failures.push_back(o.failure);
      detail::log_line(ctx, "ground: FAILED " + o.failure);
      continue;
    }
    const std::string& hash = o.result->image.content_hash;
    if (index.count(hash)) continue;  // identical bytes under another path
    const std::string file = hash + ".scene.json";
    write_file_atomic(scenes / file, serialize_scene(o.result->scene));
    index[hash] = {{"content_hash", hash},
                   {"image_path", images[i].path.generic_string()},
                   {"source_dataset", images[i].source_dataset ? json(*images[i].source_dataset) : json(nullptr)},
                   {"width", o.result->image.width},
                   {"height", o.result->image.height},
                   {"scene_file", file}};
    res.outputs.push_back("scenes/" + file);
  }
  json list = json::array();
  for (auto& [_, e] : index) list.push_back(std::move(e));
  write_file_atomic(scenes / "images.json", dump_pretty(list));
  res.outputs.push_back("scenes/images.json");
  std::sort(res.outputs.begin(), res.outputs.end());
  detail::log_line(ctx, "ground: " + std::to_string(index.size()) + " scenes, " +
                            std::to_string(res.failures.size()) + " failures");
  return res;
}

/// checks/<hash>.checks.json per scene: the candidate sets plus an "image"
/// block carrying hash, path and source dataset forward.
inline StageResult stage_derive(const StageContext& ctx, const json& args) {
  StageResult res{"derive", args};
  const fs::path scenes = decode_path(ctx, args.at("scenes"));
  const VocabRegistry& vocab = default_vocab();
  std::map<std::string, json> image_info;
  if (fs::exists(scenes / "images.json")) {
    for (const auto& e : read_json_file(scenes / "images.json")) image_info[e.at("content_hash").get<std::string>()] = e;
  }
  const fs::path checks = ctx.out_dir / "checks";
  fs::create_directories(checks);
  detail::clear_outputs(checks, ".checks.json");
  for (const auto& file : detail::files_with_suffix(scenes, ".scene.json")) {
    const std::string hash = detail::strip_suffix(file, ".scene.json");
    try {
      const SceneRepresentation scene = scene_from_json(read_json_file(file), vocab);
      json doc = json::object();
      json image = {{"image_hash", hash}, {"image_path", nullptr}, {"source_dataset", nullptr}};
      if (auto it = image_info.find(hash); it != image_info.end()) {
        image["image_path"] = it->second.at("image_path");
        image["source_dataset"] = it->second.at("source_dataset");
      }
      doc["image"] = image;
      const json candidates = candidates_to_json(derive_all(scene, vocab));
      for (const auto& [k, v] : candidates.items()) doc[k] = v;
      write_file_atomic(checks / (hash + ".checks.json"), dump_pretty(doc));
      res.outputs.push_back("checks/" + hash + ".checks.json");
    } catch (const std::exception& e) {
      res.failures.push_back(file.string() + ": " + detail::error_text(e));
      detail::log_line(ctx, "derive: FAILED " + res.failures.back());
    }
  }
  detail::log_line(ctx, "derive: " + std::to_string(res.outputs.size()) + " checks files");
  return res;
}

/// instructions.jsonl: every sampled instruction of every image, ordered by
/// image hash, then category, template and text.
inline StageResult stage_generate(const StageContext& ctx, const json& args) {
  StageResult res{"generate", args};
  const fs::path checks = decode_path(ctx, args.at("checks"));
  const TemplateSet tset =
      args.contains("registry") ? load_templates(decode_path(ctx, args["registry"])) : default_templates();
  const auto seed = args.at("seed").get<std::uint64_t>();
  const auto cap = args.at("cap").get<std::size_t>();
  std::string out;
  std::size_t count = 0;
  for (const auto& file : detail::files_with_suffix(checks, ".checks.json")) {
    try {
      const json doc = read_json_file(file);
      const json& image = doc.at("image");
      const std::string hash = image.at("image_hash").get<std::string>();
      for (auto& r : generate_instructions(candidates_from_json(doc), tset, seed, cap, hash)) {
        if (!image.at("image_path").is_null()) r.image_path = image["image_path"].get<std::string>();
        if (!image.at("source_dataset").is_null()) r.source_dataset = image["source_dataset"].get<std::string>();
        out += instruction_to_json(r).dump() + "\n";
        ++count;
      }
    } catch (const std::exception& e) {
      res.failures.push_back(file.string() + ": " + detail::error_text(e));
      detail::log_line(ctx, "generate: FAILED " + res.failures.back());
    }
  }
  write_file_atomic(ctx.out_dir / "instructions.jsonl", out);
  res.outputs.push_back("instructions.jsonl");
  detail::log_line(ctx, "generate: " + std::to_string(count) + " instructions");
  return res;
}

/// benchmark.jsonl plus stats.csv / stats.md.
inline StageResult stage_sample(const StageContext& ctx, const json& args) {
  StageResult res{"sample", args};
  std::vector<InstructionRecord> records;
  const fs::path input = decode_path(ctx, args.at("instructions"));
  for_each_jsonl(input, [&](std::size_t line_no, json j) {
    try {
      records.push_back(instruction_from_json(j));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::malformed_line, input.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  const auto items = sample_benchmark(records, args.at("seed").get<std::uint64_t>());
  write_benchmark(items, ctx.out_dir / "benchmark.jsonl");
  const StatsTable stats = compute_statistics(items);
  write_file_atomic(ctx.out_dir / "stats.csv", statistics_csv(stats));
  write_file_atomic(ctx.out_dir / "stats.md", statistics_markdown(stats));
  res.outputs = {"benchmark.jsonl", "stats.csv", "stats.md"};
  detail::log_line(ctx, "sample: " + std::to_string(items.size()) + " benchmark items");
  return res;
}

/// responses.jsonl over every configured planner and prompt variant.
inline StageResult stage_evaluate(const StageContext& ctx, const json& args) {
  StageResult res{"evaluate", args};
  if (ctx.config.planners.empty()) throw Error(ErrorKind::config_error, "config has no planners");
  const auto benchmark = read_benchmark(decode_path(ctx, args.at("benchmark")));
  const ResultCache cache(ctx.cache_dir / "responses");
  EvaluationOptions opts;
  opts.repeats = ctx.config.repeats;
  opts.max_in_flight = ctx.config.max_in_flight;
  opts.retry = ctx.config.retry;
  opts.attach_images = ctx.config.attach_images;
  std::vector<ResponseRecord> all;
  for (const auto& planner : ctx.config.planners) {
    LazyTransport transport(ctx.transports, planner);
    for (const auto& v : ctx.config.variants) {
      auto recs = run_evaluation(benchmark, planner, parse_variant(v), opts, transport, cache);
      all.insert(all.end(), recs.begin(), recs.end());
    }
  }
  std::sort(all.begin(), all.end(), response_order);
  for (const auto& r : all) {
    if (r.error) res.failures.push_back(r.model + "/" + r.variant + "/" + r.item_id + "#" + std::to_string(r.repeat) +
                                        ": " + *r.error);
  }
  write_file_atomic(ctx.out_dir / "responses.jsonl", detail::jsonl(all, response_to_json));
  res.outputs.push_back("responses.jsonl");
  detail::log_line(ctx, "evaluate: " + std::to_string(all.size()) + " responses, " +
                            std::to_string(res.failures.size()) + " errors");
  return res;
}

/// judged.jsonl and metrics.json (repeat-run variance per model and prompt;
/// judge-vs-human agreement when a labels file is given).
inline StageResult stage_judge(const StageContext& ctx, const json& args) {
  StageResult res{"judge", args};
  if (ctx.config.judge.model.empty()) throw Error(ErrorKind::config_error, "config has no judge endpoint");
  std::vector<ResponseRecord> responses;
  const fs::path input = decode_path(ctx, args.at("responses"));
  for_each_jsonl(input, [&](std::size_t line_no, json j) {
    try {
      responses.push_back(response_from_json(j));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::malformed_line, input.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  std::optional<HumanLabels> labels;
  if (args.contains("labels")) labels = load_human_labels(decode_path(ctx, args["labels"]));

  LazyTransport transport(ctx.transports, ctx.config.judge);
  const ResultCache cache(ctx.cache_dir / "judge");
  const auto judged = judge_all(responses, ctx.config.judge, transport, cache, ctx.config.max_in_flight,
                                ctx.config.retry);
  for (const auto& j : judged) {
    if (j.error) res.failures.push_back(j.model + "/" + j.variant + "/" + j.item_id + "#" + std::to_string(j.repeat) +
                                        ": " + *j.error);
  }
  write_file_atomic(ctx.out_dir / "judged.jsonl", detail::jsonl(judged, judged_to_json));

  json metrics = json::object();
  metrics["judge"] = endpoint_to_json(ctx.config.judge);
  std::size_t errored = 0;
  for (const auto& j : judged) errored += !j.verdict;
  metrics["judged"] = judged.size();
  metrics["errored"] = errored;

  std::set<std::pair<std::string, std::string>> runs;
  std::map<std::pair<std::string, std::string>, int> max_repeat;
  for (const auto& j : judged) {
    runs.insert({j.model, j.variant});
    auto& m = max_repeat[{j.model, j.variant}];
    m = std::max(m, j.repeat);
  }
  json variance = json::array();
  for (const auto& [model, variant] : runs) {
    if (max_repeat[{model, variant}] == 0) continue;
    auto obs = observations_for(judged, model, variant);
    std::erase_if(obs, [](const VerdictObservation& o) { return !o.verdict; });
    const auto s = summarize_variance(obs);
    json items = json::array();
    for (const auto& it : s.items) {
      items.push_back({{"item_id", it.item_id}, {"runs", it.runs}, {"abstain", it.abstain},
                       {"fraction", it.fraction}, {"variance", it.variance}});
    }
    variance.push_back({{"model", model},
                        {"variant", variant},
                        {"mean_fraction", s.mean_fraction},
                        {"fraction_variance", s.fraction_variance},
                        {"mean_item_variance", s.mean_item_variance},
                        {"run_rates", s.run_rates},
                        {"run_rate_variance", s.run_rate_variance},
                        {"items", items}});
  }
  metrics["variance"] = variance;

  if (labels) {
    std::string model = args.value("labels_model", std::string());
    std::string variant = args.value("labels_variant", std::string());
    if (model.empty() || variant.empty()) {
      std::set<std::string> models, variants;
      for (const auto& [m, v] : runs) {
        models.insert(m);
        variants.insert(v);
      }
      if (model.empty()) {
        if (models.size() != 1) throw Error(ErrorKind::config_error, "several models judged; pass --labels-model");
        model = *models.begin();
      }
      if (variant.empty()) {
        if (variants.size() != 1) throw Error(ErrorKind::config_error, "several variants judged; pass --labels-variant");
        variant = *variants.begin();
      }
    }
    std::map<std::string, Verdict> predicted;
    for (const auto& j : judged) {
      if (j.model != model || j.variant != variant || j.repeat != 0) continue;
      if (!labels->by_item.count(j.item_id)) continue;
      if (!j.verdict) throw Error(ErrorKind::missing_verdicts, "labelled item " + j.item_id + " has no verdict");
      predicted[j.item_id] = *j.verdict;
    }
    const BinaryMetrics bm = compute_binary_metrics(predicted, labels->reference());
    json agreement = {{"model", model}, {"variant", variant}, {"items", predicted.size()},
                      {"annotators", labels->annotators}, {"metrics", binary_metrics_to_json(bm)}};
    try {
      const auto kappa = fleiss_kappa(labels->ratings());
      agreement["human_fleiss_kappa"] = kappa ? json(*kappa) : json(nullptr);
    } catch (const Error& e) {
      agreement["human_fleiss_kappa"] = nullptr;
      agreement["human_fleiss_kappa_note"] = e.what();
    }
    metrics["agreement"] = agreement;
  }
  write_file_atomic(ctx.out_dir / "metrics.json", dump_pretty(metrics));
  res.outputs = {"judged.jsonl", "metrics.json"};
  detail::log_line(ctx, "judge: " + std::to_string(judged.size()) + " verdicts, " + std::to_string(errored) +
                            " errored");
  return res;
}

/// report.md / report.csv / report.json: one row per (model, prompt), one
/// column per category plus Overall.
inline StageResult stage_report(const StageContext& ctx, const json& args) {
  StageResult res{"report", args};
  std::vector<JudgedRecord> judged;
  const fs::path input = decode_path(ctx, args.at("judged"));
  for_each_jsonl(input, [&](std::size_t line_no, json j) {
    try {
      judged.push_back(judged_from_json(j));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::malformed_line, input.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  });
  const auto benchmark = read_benchmark(decode_path(ctx, args.at("benchmark")));
  const AbstentionReport rep = abstention_report(judged, benchmark, 0);

  std::string md = "# Abstention report\n\n" + report_markdown(rep);
  json out = report_json(rep);
  if (args.contains("metrics")) {
    const fs::path metrics_path = decode_path(ctx, args["metrics"]);
    if (fs::exists(metrics_path)) {
      const json metrics = read_json_file(metrics_path);
      if (metrics.contains("agreement")) {
        const json& a = metrics["agreement"];
        const json& m = a.at("metrics");
        BinaryMetrics bm = binary_metrics_from_counts(m.at("tp").get<std::size_t>(), m.at("fp").get<std::size_t>(),
                                                   m.at("fn").get<std::size_t>(), m.at("tn").get<std::size_t>());
        std::optional<double> kappa;
        if (!a.at("human_fleiss_kappa").is_null()) kappa = a["human_fleiss_kappa"].get<double>();
        md += "\n## Judge agreement with human labels\n\n" +
              agreement_markdown(metrics.at("judge").at("label").get<std::string>(), bm, kappa);
        out["agreement"] = a;
      }
      if (metrics.contains("variance") && !metrics["variance"].empty()) {
        md += "\n## Variance across repeated runs\n\n| Model | Prompt | Mean abstain fraction | Variance of "
              "fractions | Run-rate variance |\n|---|---|---:|---:|---:|\n";
        for (const auto& v : metrics["variance"]) {
          md += "| " + v.at("model").get<std::string>() + " | " +
                detail::variant_label(v.at("variant").get<std::string>()) + " | " +
                detail::number(v.at("mean_fraction").get<double>()) + " | " + detail::number(v.at("fraction_variance").get<double>()) + " | " +
                detail::number(v.at("run_rate_variance").get<double>()) + " |\n";
        }
        out["variance"] = metrics["variance"];
      }
    }
  }
  write_file_atomic(ctx.out_dir / "report.md", md);
  write_file_atomic(ctx.out_dir / "report.csv", report_csv(rep));
  write_file_atomic(ctx.out_dir / "report.json", dump_pretty(out));
  res.outputs = {"report.md", "report.csv", "report.json"};
  detail::log_line(ctx, "report: " + std::to_string(rep.rows.size()) + " model/prompt rows");
  return res;
}

inline StageResult run_stage(const std::string& stage, const StageContext& ctx, const json& args) {
  if (stage == "ground") return stage_ground(ctx, args);
  if (stage == "derive") return stage_derive(ctx, args);
  if (stage == "generate") return stage_generate(ctx, args);
  if (stage == "sample") return stage_sample(ctx, args);
  if (stage == "evaluate") return stage_evaluate(ctx, args);
  if (stage == "judge") return stage_judge(ctx, args);
  if (stage == "report") return stage_report(ctx, args);
  throw Error(ErrorKind::config_error, "unknown stage " + stage);
}

inline json stage_entry(const StageContext& ctx, const StageResult& res, const std::string& started) {
  json outputs = json::object();
  for (const auto& rel : res.outputs) outputs[rel] = file_sha256(ctx.out_dir / rel);
  return {{"args", res.args},
          {"outputs", outputs},
          {"failures", res.failures},
          {"started_at", started},
          {"finished_at", utc_timestamp()}};
}

/// Runs a stage and records it in the run manifest.
inline StageResult run_and_record(const std::string& stage, const StageContext& ctx, const json& args,
                                  std::uint64_t seed) {
  const std::string started = utc_timestamp();
  StageResult res = run_stage(stage, ctx, args);
  RunManifest m = RunManifest::load_or_create(ctx.out_dir);
  m.set("seed", seed);
  m.set("config", ctx.config.source);
  m.set("cache_dir", fs::absolute(ctx.cache_dir).lexically_normal().generic_string());
  json endpoints = json::object();
  if (!ctx.config.grounding.endpoint.model.empty()) endpoints["grounding"] = endpoint_to_json(ctx.config.grounding.endpoint);
  json planners = json::array();
  for (const auto& p : ctx.config.planners) planners.push_back(endpoint_to_json(p));
  endpoints["planners"] = planners;
  if (!ctx.config.judge.model.empty()) endpoints["judge"] = endpoint_to_json(ctx.config.judge);
  m.set("endpoints", endpoints);
  if (stage == "generate") {
    m.set("registry_sha256", args.contains("registry") ? file_sha256(decode_path(ctx, args["registry"]))
                                                       : sha256_hex(bundled::templates_json));
  }
  if (stage == "sample") m.set("benchmark_sha256", file_sha256(ctx.out_dir / "benchmark.jsonl"));
  if (stage == "evaluate") m.set("benchmark_sha256", file_sha256(decode_path(ctx, args.at("benchmark"))));
  m.record_stage(stage, stage_entry(ctx, res, started));
  m.save(ctx.out_dir);
  return res;
}

struct ReplayResult {
  std::vector<std::string> stages;
  std::vector<std::string> identical;
  std::vector<std::string> differing;
};

/// Re-executes every recorded stage into <run>/replay with a transport that
/// refuses all calls, then byte-compares each output with the original.
inline ReplayResult replay_run(const fs::path& run_dir, const TransportFactory& offline, std::ostream* log) {
  const fs::path mpath = RunManifest::path_in(run_dir);
  if (!fs::exists(mpath)) throw Error(ErrorKind::config_error, "no manifest.json in " + run_dir.string());
  const json manifest = read_json_file(mpath);
  StageContext ctx;
  ctx.out_dir = run_dir / "replay";
  ctx.cache_dir = manifest.at("cache_dir").get<std::string>();
  ctx.config = run_config_from_json(manifest.value("config", json::object()));
  ctx.transports = offline;
  ctx.log = log;
  ctx.input_fallback = run_dir;
  fs::remove_all(ctx.out_dir);
  fs::create_directories(ctx.out_dir);
  ReplayResult out;
  for (auto name : kStages) {
    const std::string stage(name);
    if (!manifest.at("stages").contains(stage)) continue;
    const json& entry = manifest["stages"][stage];
    run_stage(stage, ctx, entry.at("args"));
    out.stages.push_back(stage);
    for (const auto& [rel, _] : entry.at("outputs").items()) {
      const fs::path a = run_dir / rel, b = ctx.out_dir / rel;
      const bool same = fs::exists(a) && fs::exists(b) && read_file(a) == read_file(b);
      (same ? out.identical : out.differing).push_back(rel);
    }
  }
  return out;
}

}  // namespace roboabstain
