#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <thread>

#include "httplib.h"
#include "subcite/error.hpp"
#include "subcite/llm.hpp"

using namespace subcite;
using namespace subcite::llm;
using namespace std::chrono_literals;

namespace {

GenerationRequest request(const std::string& user = "u") {
  GenerationRequest r;
  r.system_prompt = "s";
  r.user_prompt = user;
  r.temperature = 0.5;
  r.max_tokens = 16;
  r.model_name = "m";
  return r;
}

GenerationResponse response(const std::string& text) {
  GenerationResponse r;
  r.text = text;
  r.usage = {10, 3};
  r.latency = 42ms;
  r.backend_id = "test";
  r.created = parse_timestamp("2025-01-01T00:00:00Z");
  return r;
}

class ScriptedTransport : public HttpTransport {
 public:
  explicit ScriptedTransport(std::vector<HttpResult> script) : script_(std::move(script)) {}
  HttpResult post(const std::string& url, const std::string& body,
                  const std::vector<std::pair<std::string, std::string>>&,
                  std::chrono::seconds) override {
    urls.push_back(url);
    bodies.push_back(body);
    return script_.at(calls++);
  }
  std::vector<HttpResult> script_;
  std::size_t calls = 0;
  std::vector<std::string> urls;
  std::vector<std::string> bodies;
};

const std::string kOkBody =
    R"({"id":"x","created":1735689600,"choices":[{"index":0,"message":{"role":"assistant","content":"hello"}}],"usage":{"prompt_tokens":7,"completion_tokens":1}})";

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "subcite-llm-test";
  std::filesystem::create_directories(dir);
  auto p = dir / name;
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST(Fingerprint, IsSha256OfCanonicalRequestJson) {
  EXPECT_EQ(to_json(request()).dump(),
            R"({"max_tokens":16,"model_name":"m","system_prompt":"s","temperature":0.5,"user_prompt":"u"})");
  EXPECT_EQ(fingerprint(request()),
            "312b858caf93ff3a41823fd45c0bfef28cd531d7c6e2f881b87a7a845bebc1b1");
  auto other = request();
  other.temperature = 0.0;
  EXPECT_NE(fingerprint(other), fingerprint(request()));
}

TEST(Replay, HitReturnsRecordedResponseVerbatim) {
  auto cassette = std::make_shared<Cassette>();
  cassette->record(request(), response("exact text\n with newline"));
  ReplayBackend backend(cassette);
  EXPECT_EQ(backend.complete(request()), response("exact text\n with newline"));
}

TEST(Replay, MissCarriesFingerprint) {
  ReplayBackend backend(std::make_shared<Cassette>());
  try {
    backend.complete(request("other"));
    FAIL();
  } catch (const CassetteMissError& e) {
    EXPECT_EQ(e.fingerprint(), fingerprint(request("other")));
  }
}

TEST(Record, IdempotentForIdenticalAndRejectsConflicts) {
  Cassette cassette;
  EXPECT_TRUE(cassette.record(request(), response("a")));
  EXPECT_FALSE(cassette.record(request(), response("a")));
  EXPECT_THROW(cassette.record(request(), response("b")), RecordError);
  EXPECT_EQ(cassette.size(), 1u);
}

TEST(Record, PersistsAsJsonlAndReloads) {
  const auto file = temp_file("cassette.jsonl");
  {
    Cassette cassette(file);
    cassette.record(request("one"), response("first"));
    cassette.record(request("two"), response("second"));
  }
  Cassette reloaded(file);
  EXPECT_EQ(reloaded.size(), 2u);
  EXPECT_EQ(reloaded.find(fingerprint(request("two")))->text, "second");
  EXPECT_EQ(*reloaded.find(fingerprint(request("one"))), response("first"));
}

TEST(Record, RecordingBackendCapturesLiveCalls) {
  auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpResult>{{200, kOkBody, ""}});
  auto live = std::make_shared<OpenAiBackend>(OpenAiConfig{"http://llm.test/v1", "k"}, transport);
  auto cassette = std::make_shared<Cassette>();
  RecordingBackend recorder(live, cassette);
  const auto live_resp = recorder.complete(request());
  ReplayBackend replay(cassette);
  EXPECT_EQ(replay.complete(request()), live_resp);
  EXPECT_EQ(transport->calls, 1u);
}

TEST(OpenAi, RetriesAfter429WithOneBackoff) {
  auto transport = std::make_shared<ScriptedTransport>(
      std::vector<HttpResult>{{429, "slow down", ""}, {200, kOkBody, ""}});
  std::vector<std::chrono::milliseconds> sleeps;
  OpenAiBackend backend({"http://llm.test/v1/", "key"}, transport,
                        [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  const auto resp = backend.complete(request());
  EXPECT_EQ(resp.text, "hello");
  EXPECT_EQ(resp.usage, (Usage{7, 1}));
  EXPECT_EQ(format_timestamp(resp.created), "2025-01-01T00:00:00Z");
  EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{1000ms}));
  EXPECT_EQ(transport->urls.front(), "http://llm.test/v1/chat/completions");
  const auto body = nlohmann::json::parse(transport->bodies.front());
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["messages"][0]["role"], "system");
  EXPECT_EQ(body["messages"][1]["content"], "u");
  EXPECT_EQ(body["max_tokens"], 16);
}

TEST(OpenAi, ExhaustedRetriesBackOffExponentially) {
  auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpResult>{
      {503, "", ""}, {0, "", "timeout"}, {500, "", ""}, {502, "", ""}});
  std::vector<std::chrono::milliseconds> sleeps;
  OpenAiBackend backend({"http://llm.test", ""}, transport,
                        [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  EXPECT_THROW(backend.complete(request()), TransportError);
  EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{1000ms, 2000ms, 4000ms}));
  EXPECT_EQ(transport->calls, 4u);
}

TEST(OpenAi, ClientErrorsAreNotRetried) {
  auto transport =
      std::make_shared<ScriptedTransport>(std::vector<HttpResult>{{401, "unauthorized", ""}});
  OpenAiBackend backend({"http://llm.test", ""}, transport, [](auto) {});
  EXPECT_THROW(backend.complete(request()), TransportError);
  EXPECT_EQ(transport->calls, 1u);
}

TEST(OpenAi, NullContentIsEmptyText) {
  auto transport = std::make_shared<ScriptedTransport>(std::vector<HttpResult>{
      {200, R"({"choices":[{"message":{"role":"assistant","content":null}}]})", ""}});
  OpenAiBackend backend({"http://llm.test", ""}, transport);
  EXPECT_EQ(backend.complete(request()).text, "");
}

TEST(OpenAi, FakeServerOverRealHttp) {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string auth;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 429;
      return;
    }
    auth = req.get_header_value("Authorization");
    res.set_content(kOkBody, "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  std::vector<std::chrono::milliseconds> sleeps;
  OpenAiBackend backend({"http://127.0.0.1:" + std::to_string(port) + "/v1", "sk-test"},
                        make_http_transport(), [&](auto d) { sleeps.push_back(d); });
  const auto resp = backend.complete(request());
  server.stop();
  t.join();
  EXPECT_EQ(resp.text, "hello");
  EXPECT_EQ(hits.load(), 2);
  EXPECT_EQ(sleeps.size(), 1u);
  EXPECT_EQ(auth, "Bearer sk-test");
}
