#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "subcite/model.hpp"

namespace subcite::llm {

struct GenerationRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.7;
  int max_tokens = 2048;
  std::string model_name;

  /// Throws PreconditionError on empty prompts, max_tokens < 1 or a negative
  /// temperature.
  void check() const;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
  friend bool operator==(const Usage&, const Usage&) = default;
};

struct GenerationResponse {
  /// May be empty (refusal); callers decide what that means.
  std::string text;
  Usage usage;
  std::chrono::milliseconds latency{0};
  std::string backend_id;
  Timestamp created{};

  friend bool operator==(const GenerationResponse&, const GenerationResponse&) = default;
};

/// SHA-256 over the canonical JSON of (model, prompts, temperature,
/// max_tokens).
std::string fingerprint(const GenerationRequest& req);

nlohmann::json to_json(const GenerationRequest& req);
nlohmann::json to_json(const GenerationResponse& resp);
GenerationRequest request_from_json(const nlohmann::json& j);
GenerationResponse response_from_json(const nlohmann::json& j);

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual GenerationResponse complete(const GenerationRequest& req) = 0;
  virtual std::string id() const = 0;
};

/// Append-only fingerprint -> response store, optionally persisted as JSONL.
/// Safe for concurrent use; writes are serialised.
class Cassette {
 public:
  Cassette() = default;
  /// Loads `file` when it exists; later records are appended to it.
  explicit Cassette(std::filesystem::path file);

  std::optional<GenerationResponse> find(const std::string& fingerprint) const;

  /// Returns true when a new entry was written, false for an identical
  /// duplicate. Throws RecordError when the fingerprint is already bound to a
  /// different response text.
  bool record(const GenerationRequest& req, const GenerationResponse& resp);

  std::size_t size() const;

 private:
  struct Entry {
    GenerationRequest request;
    GenerationResponse response;
  };

  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> file_;
  std::map<std::string, Entry> entries_;
};

/// Serves responses from a cassette only; a miss is a CassetteMissError.
class ReplayBackend : public GenerationBackend {
 public:
  explicit ReplayBackend(std::shared_ptr<const Cassette> cassette);
  GenerationResponse complete(const GenerationRequest& req) override;
  std::string id() const override { return "replay"; }

 private:
  std::shared_ptr<const Cassette> cassette_;
};

/// Forwards to another backend and records every exchange.
class RecordingBackend : public GenerationBackend {
 public:
  RecordingBackend(std::shared_ptr<GenerationBackend> inner, std::shared_ptr<Cassette> cassette);
  GenerationResponse complete(const GenerationRequest& req) override;
  std::string id() const override { return inner_->id(); }

 private:
  std::shared_ptr<GenerationBackend> inner_;
  std::shared_ptr<Cassette> cassette_;
};

struct HttpResult {
  /// 0 when no HTTP response arrived (connect failure, timeout).
  int status = 0;
  std::string body;
  std::string error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post(const std::string& url, const std::string& body,
                          const std::vector<std::pair<std::string, std::string>>& headers,
                          std::chrono::seconds timeout) = 0;
};

std::shared_ptr<HttpTransport> make_http_transport();

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct OpenAiConfig {
  std::string base_url;
  std::string api_key;
  std::chrono::seconds timeout{120};
  /// Retries after the first attempt, with delays 1s, 2s, 4s, ...
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{1000};
};

/// OpenAI-compatible chat-completions client:
/// POST {base_url}/chat/completions, reads choices[0].message.content.
class OpenAiBackend : public GenerationBackend {
 public:
  OpenAiBackend(OpenAiConfig config, std::shared_ptr<HttpTransport> transport,
                Sleeper sleeper = {});
  GenerationResponse complete(const GenerationRequest& req) override;
  std::string id() const override { return "openai:" + config_.base_url; }

 private:
  OpenAiConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
};

}  // namespace subcite::llm
