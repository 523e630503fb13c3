#include <gtest/gtest.h>

#include <cmath>
#include <mutex>

#include "roboabstain/grounding.hpp"
#include "test_support.hpp"

using namespace roboabstain;
using namespace testing_support;

namespace {

/// Replies from a fixed list (last one repeats) and records every request.
class RecordingTransport final : public ChatTransport {
 public:
  explicit RecordingTransport(std::vector<std::string> replies) : replies_(std::move(replies)) {}

  std::string complete(const ChatRequest& request) override {
    std::lock_guard<std::mutex> lock(mu_);
    requests_.push_back(request);
    const auto i = std::min(requests_.size() - 1, replies_.size() - 1);
    return replies_[i];
  }

  std::vector<ChatRequest> requests() const {
    std::lock_guard<std::mutex> lock(mu_);
    return requests_;
  }

 private:
  std::vector<std::string> replies_;
  mutable std::mutex mu_;
  std::vector<ChatRequest> requests_;
};

/// Throws the given errors first, then answers.
class FlakyTransport final : public ChatTransport {
 public:
  FlakyTransport(int transient_failures, std::string reply) : failures_(transient_failures), reply_(std::move(reply)) {}
  std::string complete(const ChatRequest&) override {
    ++calls;
    if (failures_-- > 0) throw TransportError("HTTP 503", true, 503);
    return reply_;
  }
  int calls = 0;

 private:
  int failures_;
  std::string reply_;
};

GroundingConfig config(const fs::path& cache_dir = {}) {
  GroundingConfig cfg;
  cfg.endpoint.label = "grounder";
  cfg.endpoint.model = "gpt-4o";
  cfg.cache_dir = cache_dir;
  cfg.transport_retry = {4, 0, 0};
  return cfg;
}

PreparedImage image_in(const TempDir& dir, const std::string& name, int w = 64, int h = 48, int shade = 0) {
  write_file_atomic(dir / name, make_png(w, h, shade));
  return prepare_image(dir / name);
}

std::string valid_scene_text() { return read_fixture("scenes/kitchen_counter.json"); }

// round(short * max / long), halves away from zero, in floating point
int oracle_short(int short_edge, int long_edge) {
  return std::max(1, static_cast<int>(std::round(static_cast<double>(short_edge) * 640.0 / long_edge)));
}

}  // namespace

TEST(Resize, ReferenceExamples) {
  EXPECT_EQ(fit_within({1280, 960}), (Dimensions{640, 480}));
  EXPECT_EQ(fit_within({320, 240}), (Dimensions{320, 240}));
  EXPECT_EQ(fit_within({2000, 1000}), (Dimensions{640, 320}));
  EXPECT_EQ(fit_within({960, 1280}), (Dimensions{480, 640}));
}

TEST(Resize, MatchesRoundingOracle) {
  for (int w = 1; w <= 3000; w += 7) {
    for (int h = 1; h <= 3000; h += 13) {
      const Dimensions d = fit_within({w, h});
      const int lw = std::max(w, h);
      ASSERT_LE(std::max(d.width, d.height), 640);
      if (lw <= 640) {
        ASSERT_EQ(d, (Dimensions{w, h}));
      } else if (w >= h) {
        ASSERT_EQ(d, (Dimensions{640, oracle_short(h, w)})) << w << "x" << h;
      } else {
        ASSERT_EQ(d, (Dimensions{oracle_short(w, h), 640})) << w << "x" << h;
      }
    }
  }
  EXPECT_EQ(fit_within({1281, 1}), (Dimensions{640, 1}));
  EXPECT_THROW(fit_within({0, 10}), Error);
}

TEST(Resize, RastersFollowTheRule) {
  for (auto [w, h, ew, eh] : std::vector<std::array<int, 4>>{{1280, 960, 640, 480}, {320, 240, 320, 240},
                                                             {2000, 1000, 640, 320}, {700, 1400, 320, 640}}) {
    cv::Mat m = decode_image(make_png(w, h));
    cv::Mat out = preprocess_image(m);
    EXPECT_EQ(out.cols, ew);
    EXPECT_EQ(out.rows, eh);
  }
}

TEST(Resize, WithinBoundIsUnchangedAndIdempotent) {
  cv::Mat small = decode_image(make_png(320, 240, 5));
  cv::Mat same = preprocess_image(small);
  EXPECT_EQ(cv::norm(small, same, cv::NORM_INF), 0.0);
  for (auto [w, h] : std::vector<std::pair<int, int>>{{1280, 960}, {1999, 1001}, {641, 3}, {500, 900}}) {
    cv::Mat once = preprocess_image(decode_image(make_png(w, h)));
    cv::Mat twice = preprocess_image(once);
    EXPECT_EQ(once.size(), twice.size());
    EXPECT_EQ(cv::norm(once, twice, cv::NORM_INF), 0.0);
  }
}

TEST(Resize, UndecodableBytes) {
  for (const std::string bytes : {std::string(), std::string("definitely not an image")}) {
    try {
      decode_image(bytes);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::undecodable_image);
    }
  }
}

TEST(PreparedImages, HashIsOfFileBytes) {
  TempDir dir("ground");
  auto img = image_in(dir, "a.png", 1280, 960);
  EXPECT_EQ(img.ref.content_hash, sha256_hex(read_file(dir / "a.png")));
  EXPECT_EQ(img.ref.width, 1280);
  cv::Mat sent = decode_image(img.png);
  EXPECT_EQ(sent.cols, 640);
  EXPECT_EQ(sent.rows, 480);
}

TEST(Prompt, ContainsRequiredLinesAndIsStable) {
  const auto p = build_grounding_prompt(default_vocab());
  EXPECT_NE(p.find("Return exactly one JSON object and nothing else."), std::string::npos);
  EXPECT_NE(p.find("Limit to 5 entries."), std::string::npos);
  EXPECT_NE(p.find("You are performing visual grounding"), std::string::npos);
  EXPECT_EQ(p.find("{Vocabularies here}"), std::string::npos);
  EXPECT_EQ(p.find("{JSON Schema here}"), std::string::npos);
  EXPECT_NE(p.find(render_vocab_block(default_vocab())), std::string::npos);
  EXPECT_NE(p.find(std::string(bundled::grounding_schema)), std::string::npos);
  EXPECT_EQ(p, build_grounding_prompt(default_vocab()));
}

TEST(Repair, Examples) {
  EXPECT_EQ(repair_response("```json\n{\"a\":1}\n```"), "{\"a\":1}");
  EXPECT_EQ(repair_response("{\"a\":1}"), "{\"a\":1}");
  EXPECT_EQ(repair_response("Sure! {\"a\":1} Hope this helps."), "{\"a\":1}");
  for (const char* bad : {"not json", "", "} backwards {"}) {
    try {
      repair_response(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::no_json_object_found);
    }
  }
}

TEST(Repair, FirstAndLastBraceOracle) {
  std::mt19937_64 gen(3);
  const std::string alphabet = "ab{}\" \n`";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    for (int k = static_cast<int>(gen() % 16); k > 0; --k) s += alphabet[gen() % alphabet.size()];
    std::size_t a = std::string::npos, b = std::string::npos;
    for (std::size_t k = 0; k < s.size(); ++k) {
      if (s[k] == '{' && a == std::string::npos) a = k;
      if (s[k] == '}') b = k;
    }
    if (a == std::string::npos || b == std::string::npos || b < a) {
      EXPECT_THROW(repair_response(s), Error);
    } else {
      EXPECT_EQ(repair_response(s), s.substr(a, b - a + 1));
    }
  }
}

TEST(Ground, ValidReplyParses) {
  TempDir dir("ground");
  auto img = image_in(dir, "a.png");
  RecordingTransport t({valid_scene_text()});
  auto r = ground_scene(img, config(), default_vocab(), t);
  EXPECT_EQ(r.scene, parse_scene(valid_scene_text(), default_vocab()));
  EXPECT_EQ(r.attempts, 1);
  EXPECT_FALSE(r.from_cache);
  auto reqs = t.requests();
  ASSERT_EQ(reqs.size(), 1u);
  EXPECT_EQ(reqs[0].model, "gpt-4o");
  EXPECT_EQ(reqs[0].user_text, build_grounding_prompt(default_vocab()));
  ASSERT_TRUE(reqs[0].image_png.has_value());
  EXPECT_EQ(*reqs[0].image_png, img.png);
}

TEST(Ground, FencedReplyIsRepaired) {
  TempDir dir("ground");
  RecordingTransport t({"Here you go:\n```json\n" + valid_scene_text() + "```\n"});
  auto r = ground_scene(image_in(dir, "a.png"), config(), default_vocab(), t);
  EXPECT_EQ(r.scene, parse_scene(valid_scene_text(), default_vocab()));
}

TEST(Ground, GivesUpAfterRetriesWithIdenticalPrompts) {
  TempDir dir("ground");
  auto cfg = config(dir / "cache");
  cfg.max_retries = 2;
  RecordingTransport t({"not json"});
  try {
    ground_scene(image_in(dir, "a.png"), cfg, default_vocab(), t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::grounding_failed);
  }
  auto reqs = t.requests();
  ASSERT_EQ(reqs.size(), 3u);
  for (const auto& r : reqs) EXPECT_EQ(r.user_text, reqs[0].user_text);
  EXPECT_FALSE(fs::exists(dir / "cache") && !fs::is_empty(dir / "cache"));
}

TEST(Ground, InvalidSceneThenValid) {
  TempDir dir("ground");
  auto bad = json::parse(valid_scene_text());
  bad["scene_objects"][0]["size"] = "huge";
  RecordingTransport t({bad.dump(), "{broken", valid_scene_text()});
  auto r = ground_scene(image_in(dir, "a.png"), config(), default_vocab(), t);
  EXPECT_EQ(r.attempts, 3);
}

TEST(Ground, CacheHitMakesNoCalls) {
  TempDir dir("ground");
  auto img = image_in(dir, "a.png");
  auto cfg = config(dir / "cache");
  ScriptedTransport first({}, valid_scene_text());
  auto r1 = ground_scene(img, cfg, default_vocab(), first);
  EXPECT_EQ(first.calls(), 1u);

  // fresh transport and a re-read image, as after a restart
  ScriptedTransport second({}, "not json");
  auto r2 = ground_scene(prepare_image(dir / "a.png"), cfg, default_vocab(), second);
  EXPECT_EQ(second.calls(), 0u);
  EXPECT_TRUE(r2.from_cache);
  EXPECT_EQ(r2.scene, r1.scene);

  // another model is a different cache entry
  auto other = cfg;
  other.endpoint.model = "another-model";
  ScriptedTransport third({}, valid_scene_text());
  ground_scene(img, other, default_vocab(), third);
  EXPECT_EQ(third.calls(), 1u);

  // cache entries are plain JSON naming what they were made from
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "cache")) {
    ++files;
    auto entry = read_json_file(e.path());
    EXPECT_EQ(entry["content_hash"], img.ref.content_hash);
    EXPECT_EQ(entry["prompt_sha256"], sha256_hex(build_grounding_prompt(default_vocab())));
  }
  EXPECT_EQ(files, 2u);
}

TEST(Ground, TransientErrorsRetriedSeparately) {
  TempDir dir("ground");
  auto cfg = config();
  cfg.max_retries = 0;
  FlakyTransport t(2, valid_scene_text());
  auto r = ground_scene(image_in(dir, "a.png"), cfg, default_vocab(), t);
  EXPECT_EQ(t.calls, 3);
  EXPECT_EQ(r.attempts, 1);

  FlakyTransport always(100, "");
  try {
    ground_scene(image_in(dir, "b.png", 64, 48, 1), cfg, default_vocab(), always);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::transport_error);
  }
  EXPECT_EQ(always.calls, 4);
}

TEST(Ground, ConcurrentCallsShareTheCache) {
  TempDir dir("ground");
  std::vector<PreparedImage> imgs;
  for (int i = 0; i < 8; ++i) imgs.push_back(image_in(dir, "img" + std::to_string(i) + ".png", 40, 30, i));
  auto cfg = config(dir / "cache");
  ScriptedTransport t({}, valid_scene_text());
  parallel_for(imgs.size(), 4, [&](std::size_t i) { ground_scene(imgs[i], cfg, default_vocab(), t); });
  EXPECT_EQ(t.calls(), 8u);
  parallel_for(imgs.size(), 4, [&](std::size_t i) { EXPECT_TRUE(ground_scene(imgs[i], cfg, default_vocab(), t).from_cache); });
  EXPECT_EQ(t.calls(), 8u);
}
