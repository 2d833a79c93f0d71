#include <gtest/gtest.h>

#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "gift/net.hpp"
#include "gift/parallel.hpp"
#include "gift/pipeline.hpp"
#include "gift/world.hpp"

using namespace gift;

namespace {

// Local HTTP server on an ephemeral port, stopped on destruction.
class MockServer {
 public:
  MockServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string url(const std::string& prefix = "") const {
    return "http://127.0.0.1:" + std::to_string(port_) + prefix;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion(const std::string& text) {
  return json{{"choices", json::array({json{{"message", json{{"role", "assistant"}, {"content", text}}}}})}}.dump();
}

ChatRequest hello() {
  ChatRequest r;
  r.messages.push_back(ChatMessage{"user", {ChatPart::of_text("hello")}});
  return r;
}

RetryPolicy fast(int attempts = 3) { return RetryPolicy{attempts, std::chrono::milliseconds(1), std::chrono::seconds(5)}; }

std::vector<json> read_jsonl(const std::filesystem::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

std::filesystem::path temp_file(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("gift-net-" + std::to_string(::getpid()) + "-" + name);
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST(Chat, RetriesServerErrorsThenSucceeds) {
  MockServer mock;
  std::atomic<int> calls{0};
  std::vector<std::string> keys, auth;
  std::mutex mu;
  mock.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard lock(mu);
      keys.push_back(req.get_header_value("Idempotency-Key"));
      auth.push_back(req.get_header_value("Authorization"));
    }
    const int n = ++calls;
    if (n == 1) {
      res.status = 500;
    } else if (n == 2) {
      res.status = 429;
    } else {
      const json body = json::parse(req.body);
      res.set_content(completion("model=" + body.at("model").get<std::string>()), "application/json");
    }
  });
  const auto transcript = temp_file("retry.jsonl");
  HttpChatClient client({mock.url("/v1/"), "secret", "m1"}, transcript, fast());
  EXPECT_EQ(client.complete(hello()), "model=m1");
  EXPECT_EQ(calls.load(), 3);
  ASSERT_EQ(keys.size(), 3u);
  EXPECT_EQ(keys[0], keys[2]);
  EXPECT_FALSE(keys[0].empty());
  EXPECT_EQ(auth[0], "Bearer secret");

  const auto log = read_jsonl(transcript);
  ASSERT_EQ(log.size(), 3u);
  EXPECT_EQ(log[0].at("status"), 500);
  EXPECT_EQ(log[1].at("status"), 429);
  EXPECT_EQ(log[2].at("response"), "model=m1");
  EXPECT_EQ(log[2].at("attempt"), 3);
  EXPECT_EQ(log[2].at("key"), keys[0]);
  EXPECT_EQ(log[2].at("request").at("model"), "m1");
  std::filesystem::remove(transcript);
}

TEST(Chat, ClientErrorIsNotRetried) {
  MockServer mock;
  std::atomic<int> calls{0};
  mock.server().Post("/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 400;
    res.set_content("bad", "text/plain");
  });
  HttpChatClient client({mock.url(), "", "m"}, std::nullopt, fast());
  try {
    client.complete(hello());
    FAIL();
  } catch (const HttpStatusError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_FALSE(e.retriable());
    EXPECT_EQ(e.body(), "bad");
  }
  EXPECT_EQ(calls.load(), 1);
}

TEST(Chat, EmptyBodyIsMalformed) {
  MockServer mock;
  std::atomic<int> calls{0};
  mock.server().Post("/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 200;
  });
  const auto transcript = temp_file("empty.jsonl");
  HttpChatClient client({mock.url(), "", "m"}, transcript, fast());
  EXPECT_THROW(client.complete(hello()), MalformedResponse);
  EXPECT_EQ(calls.load(), 1);
  const auto log = read_jsonl(transcript);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_TRUE(log[0].contains("error"));
  std::filesystem::remove(transcript);
}

TEST(Chat, PersistentFailureExhaustsAttempts) {
  MockServer mock;
  std::atomic<int> calls{0};
  mock.server().Post("/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 503;
  });
  HttpChatClient client({mock.url(), "", "m"}, std::nullopt, fast(3));
  EXPECT_THROW(client.complete(hello()), HttpStatusError);
  EXPECT_EQ(calls.load(), 3);
}

TEST(Chat, TimeoutIsRetriable) {
  MockServer mock;
  std::atomic<int> calls{0};
  mock.server().Post("/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    if (++calls == 1) std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content(completion("late but fine"), "application/json");
  });
  HttpChatClient client({mock.url(), "", "m"}, std::nullopt,
                        RetryPolicy{2, std::chrono::milliseconds(1), std::chrono::seconds(1)});
  EXPECT_EQ(client.complete(hello()), "late but fine");
  EXPECT_EQ(calls.load(), 2);

  HttpChatClient once({mock.url(), "", "m"}, std::nullopt,
                      RetryPolicy{1, std::chrono::milliseconds(1), std::chrono::seconds(1)});
  calls = 0;
  try {
    once.complete(hello());
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_TRUE(e.retriable());
  }
}

TEST(Chat, UnreachableEndpoint) {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpChatClient client({"http://127.0.0.1:" + std::to_string(port), "", "m"}, std::nullopt, fast(2));
  EXPECT_THROW(client.complete(hello()), TransportError);
}

TEST(Chat, Helpers) {
  EXPECT_EQ(split_url("https://api.example.com/v1/").first, "https://api.example.com");
  EXPECT_EQ(split_url("https://api.example.com/v1/").second, "/v1");
  EXPECT_EQ(split_url("http://h:81").second, "");
  EXPECT_THROW(split_url("ftp://h"), std::invalid_argument);
  EXPECT_EQ(base64_encode("hello"), "aGVsbG8=");
  EXPECT_EQ(svg_data_url("<svg/>"), "data:image/svg+xml;base64," + base64_encode("<svg/>"));
  ::setenv("GIFT_TEST_EP_URL", "http://x:1/v1", 1);
  ::setenv("GIFT_TEST_EP_MODEL", "mm", 1);
  const auto ep = Endpoint::from_env("GIFT_TEST_EP");
  ASSERT_TRUE(ep.has_value());
  EXPECT_EQ(ep->base_url, "http://x:1/v1");
  EXPECT_EQ(ep->model, "mm");
  EXPECT_EQ(ep->token, "");
  EXPECT_FALSE(Endpoint::from_env("GIFT_TEST_UNSET").has_value());
}

TEST(Chat, ReplayMatchesLiveTranscript) {
  MockServer mock;
  mock.server().Post("/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion("- cyan object"), "application/json");
  });
  const auto transcript = temp_file("replay.jsonl");
  HttpChatClient client({mock.url(), "", "m"}, transcript, fast());
  const std::string live = client.complete(hello());
  auto replay = ReplayGenerator::from_jsonl(read_file(transcript));
  ChatRequest req = hello();
  req.model = "m";
  EXPECT_EQ(replay.complete(req), live);
  std::filesystem::remove(transcript);
}

TEST(Wire, MatchesLocalRuleAndBoundsConcurrency) {
  MockServer mock;
  const RuleClassifier truth(parse_concept("cyan object"));
  std::atomic<int> inflight{0}, peak{0};
  mock.server().Post("/predict", [&](const httplib::Request& req, httplib::Response& res) {
    const int now = ++inflight;
    for (int p = peak.load(); now > p && !peak.compare_exchange_weak(p, now);) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    const Scene s = Scene::from_json(json::parse(req.body).at("scene"));
    res.set_content(json{{"label", to_int(truth.classify(s))}}.dump(), "application/json");
    --inflight;
  });
  const WireClassifier remote(mock.url(), 2, fast());
  std::vector<Scene> scenes;
  for (std::uint64_t s = 0; s < 40; ++s) scenes.push_back(sample_scene(s, WorldConfig{}));
  std::vector<ClassLabel> got(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) { got[i] = remote.classify(scenes[i]); }, 6);
  for (std::size_t i = 0; i < scenes.size(); ++i) EXPECT_EQ(got[i], truth.classify(scenes[i]));
  EXPECT_LE(peak.load(), 2);
  EXPECT_NE(remote.describe().find(mock.url()), std::string::npos);
}

TEST(Wire, MalformedLabel) {
  MockServer mock;
  mock.server().Post("/predict", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"label": 7})", "application/json");
  });
  const WireClassifier remote(mock.url(), 1, fast());
  EXPECT_THROW(remote.classify(sample_scene(0, WorldConfig{})), MalformedResponse);
}

TEST(Wire, DrivesPipelineStages) {
  MockServer mock;
  const RuleClassifier truth(parse_concept("purple object"));
  mock.server().Post("/predict", [&](const httplib::Request& req, httplib::Response& res) {
    const Scene s = Scene::from_json(json::parse(req.body).at("scene"));
    res.set_content(json{{"label", to_int(truth.classify(s))}}.dump(), "application/json");
  });
  RunConfig c;
  c.classifier_kind = "wire";
  c.pairs = 4;
  c.budget = 1;
  Services s;
  s.wire_classifier = std::make_shared<WireClassifier>(mock.url(), 4, fast());
  const auto model = make_model(c, s);
  const auto pool = run_gen(c, *model);
  for (const auto& ls : pool) EXPECT_EQ(ls.label, truth.classify(ls.scene));
  const auto cex = run_cex(c, *model, pool, 2);
  for (const auto& p : cex.pairs) EXPECT_NE(truth.classify(p.target), truth.classify(p.source));
}
