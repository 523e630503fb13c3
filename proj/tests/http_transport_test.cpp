#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include "roboabstain/http_transport.hpp"
#include "test_support.hpp"

using namespace roboabstain;
using namespace testing_support;

namespace {

std::string reply_body(const json& content) {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

/// Local chat-completions stand-in on an ephemeral port.
class FakeServer {
 public:
  FakeServer() {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(mu_);
      last_body_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      res.set_content(reply_body("Abstain"), "application/json");
    });
    server_.Post("/parts/chat/completions", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(reply_body(json::array({{{"type", "text"}, {"text", "Act"}}, {{"type", "text"}, {"text", "!"}}})),
                      "application/json");
    });
    server_.Post("/auth/chat/completions", [](const httplib::Request&, httplib::Response& res) {
      res.status = 401;
      res.set_content("{\"error\":\"bad key\"}", "application/json");
    });
    server_.Post("/flaky/chat/completions", [this](const httplib::Request&, httplib::Response& res) {
      if (flaky_calls_++ < 2) {
        res.status = 503;
        res.set_content("busy", "text/plain");
        return;
      }
      res.set_content(reply_body("ok"), "application/json");
    });
    server_.Post("/bad/chat/completions", [this](const httplib::Request&, httplib::Response& res) {
      ++bad_calls_;
      res.status = 400;
      res.set_content("bad request", "text/plain");
    });
    server_.Post("/garbage/chat/completions", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("<html>", "text/html");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string url(const std::string& prefix) const { return "http://127.0.0.1:" + std::to_string(port_) + prefix; }
  std::string last_body() {
    std::lock_guard<std::mutex> lock(mu_);
    return last_body_;
  }
  std::string last_auth() {
    std::lock_guard<std::mutex> lock(mu_);
    return last_auth_;
  }
  int flaky_calls() const { return flaky_calls_; }
  int bad_calls() const { return bad_calls_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  std::string last_body_, last_auth_;
  std::atomic<int> flaky_calls_{0}, bad_calls_{0};
};

ChatRequest request() {
  ChatRequest r;
  r.model = "gpt-4o";
  r.system_prompt = "system text";
  r.user_text = "Instruction: pick up the red bowl";
  r.image_png = make_png(8, 6);
  r.sampling = {{"temperature", 0}};
  r.timeout_s = 5;
  return r;
}

}  // namespace

TEST(ChatBody, OpenAiShape) {
  auto body = build_chat_body(request());
  EXPECT_EQ(body["model"], "gpt-4o");
  EXPECT_EQ(body["temperature"], 0);
  ASSERT_EQ(body["messages"].size(), 2u);
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][0]["content"], "system text");
  const auto& parts = body["messages"][1]["content"];
  EXPECT_EQ(parts[0]["text"], "Instruction: pick up the red bowl");
  const std::string url = parts[1]["image_url"]["url"];
  EXPECT_EQ(url, png_data_url(*request().image_png));
  EXPECT_EQ(url.rfind("data:image/png;base64,", 0), 0u);

  auto bare = request();
  bare.system_prompt.clear();
  bare.image_png.reset();
  auto b2 = build_chat_body(bare);
  ASSERT_EQ(b2["messages"].size(), 1u);
  EXPECT_EQ(b2["messages"][0]["content"].size(), 1u);
}

TEST(ChatBody, ReplyParsing) {
  EXPECT_EQ(parse_chat_reply(reply_body("hello")), "hello");
  EXPECT_EQ(parse_chat_reply(reply_body(json::array({{{"type", "text"}, {"text", "a"}}, {{"type", "text"}, {"text", "b"}}}))),
            "ab");
  EXPECT_THROW(parse_chat_reply("{}"), TransportError);
  EXPECT_THROW(parse_chat_reply("nope"), TransportError);
}

TEST(Http, PostsToChatCompletions) {
  FakeServer server;
  HttpChatTransport t(server.url("/v1/"), "sk-test");
  EXPECT_EQ(t.complete(request()), "Abstain");
  EXPECT_EQ(server.last_auth(), "Bearer sk-test");
  EXPECT_EQ(json::parse(server.last_body()), json::parse(build_chat_body(request()).dump()));

  HttpChatTransport parts(server.url("/parts"), "");
  EXPECT_EQ(parts.complete(request()), "Act!");
}

TEST(Http, AuthFailureIsNotRetried) {
  FakeServer server;
  HttpChatTransport t(server.url("/auth"), "wrong");
  try {
    with_retry({4, 0, 0}, [&] { return t.complete(request()); });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::auth_error);
  }
}

TEST(Http, ServerErrorsAreRetried) {
  FakeServer server;
  HttpChatTransport t(server.url("/flaky"), "");
  EXPECT_EQ(with_retry({4, 1, 2}, [&] { return t.complete(request()); }), "ok");
  EXPECT_EQ(server.flaky_calls(), 3);
}

TEST(Http, ClientErrorsAreNotRetried) {
  FakeServer server;
  HttpChatTransport t(server.url("/bad"), "");
  try {
    with_retry({4, 0, 0}, [&] { return t.complete(request()); });
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_FALSE(e.transient());
    EXPECT_EQ(e.status(), 400);
  }
  EXPECT_EQ(server.bad_calls(), 1);
  HttpChatTransport garbage(server.url("/garbage"), "");
  EXPECT_THROW(garbage.complete(request()), TransportError);
}

TEST(Http, ConnectionFailureIsTransient) {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpChatTransport t("http://127.0.0.1:" + std::to_string(port) + "/v1", "");
  auto r = request();
  r.timeout_s = 1;
  try {
    t.complete(r);
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_TRUE(e.transient());
  }
}

TEST(Http, BaseUrlNeedsScheme) { EXPECT_THROW(HttpChatTransport("api.example.com/v1", ""), Error); }

TEST(ApiKeys, ComeFromEnvironment) {
  ::setenv("ROBOABSTAIN_TEST_KEY", "secret", 1);
  EXPECT_EQ(api_key_from_env("ROBOABSTAIN_TEST_KEY"), "secret");
  EXPECT_EQ(api_key_from_env(""), "");
  ::unsetenv("ROBOABSTAIN_TEST_KEY_UNSET");
  try {
    api_key_from_env("ROBOABSTAIN_TEST_KEY_UNSET");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::auth_error);
  }
}

TEST(Retry, BackoffStopsAtMaxAttempts) {
  int calls = 0;
  EXPECT_THROW(with_retry({3, 0, 0},
                          [&]() -> std::string {
                            ++calls;
                            throw TransportError("x", true);
                          }),
               TransportError);
  EXPECT_EQ(calls, 3);
}

TEST(ParallelFor, RunsEveryIndexAndRethrows) {
  std::vector<std::atomic<int>> hits(50);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}
