#include "subcite/llm.hpp"

#include <fstream>
#include <thread>

#include "subcite/error.hpp"
#include "subcite/hash.hpp"
#include "subcite/json_io.hpp"

namespace subcite::llm {

using json = nlohmann::json;

void GenerationRequest::check() const {
  if (system_prompt.empty() || user_prompt.empty()) {
    throw PreconditionError("generation request needs non-empty prompts");
  }
  if (max_tokens < 1) throw PreconditionError("max_tokens must be >= 1");
  if (temperature < 0) throw PreconditionError("temperature must be >= 0");
}

json to_json(const GenerationRequest& req) {
  return {{"model_name", req.model_name},
          {"system_prompt", req.system_prompt},
          {"user_prompt", req.user_prompt},
          {"temperature", req.temperature},
          {"max_tokens", req.max_tokens}};
}

json to_json(const GenerationResponse& resp) {
  return {{"text", resp.text},
          {"usage",
           {{"prompt_tokens", resp.usage.prompt_tokens},
            {"completion_tokens", resp.usage.completion_tokens}}},
          {"latency_ms", resp.latency.count()},
          {"backend_id", resp.backend_id},
          {"created", format_timestamp(resp.created)}};
}

GenerationRequest request_from_json(const json& j) {
  GenerationRequest req;
  req.model_name = j.at("model_name").get<std::string>();
  req.system_prompt = j.at("system_prompt").get<std::string>();
  req.user_prompt = j.at("user_prompt").get<std::string>();
  req.temperature = j.at("temperature").get<double>();
  req.max_tokens = j.at("max_tokens").get<int>();
  return req;
}

GenerationResponse response_from_json(const json& j) {
  GenerationResponse resp;
  resp.text = j.at("text").get<std::string>();
  if (j.contains("usage")) {
    resp.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
    resp.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
  }
  resp.latency = std::chrono::milliseconds(j.value("latency_ms", 0));
  resp.backend_id = j.value("backend_id", "");
  if (j.contains("created")) resp.created = parse_timestamp(j["created"].get<std::string>());
  return resp;
}

std::string fingerprint(const GenerationRequest& req) {
  // Keys are emitted in sorted order by nlohmann::json, so the dump is canonical.
  return sha256_hex(to_json(req).dump());
}

Cassette::Cassette(std::filesystem::path file) : file_(std::move(file)) {
  if (!std::filesystem::exists(*file_)) return;
  json_io::read_jsonl(*file_, [&](const json& j, std::size_t line) {
    try {
      Entry e{request_from_json(j.at("request")), response_from_json(j.at("response"))};
      const auto fp = j.at("fingerprint").get<std::string>();
      if (fp != fingerprint(e.request)) {
        throw RecordError("fingerprint does not match request");
      }
      if (!entries_.emplace(fp, std::move(e)).second) {
        throw RecordError("duplicate fingerprint " + fp);
      }
    } catch (const json::exception& ex) {
      throw RecordError(file_->string() + ":" + std::to_string(line) + ": " + ex.what());
    } catch (const Error& ex) {
      throw RecordError(file_->string() + ":" + std::to_string(line) + ": " + ex.what());
    }
  });
}

std::optional<GenerationResponse> Cassette::find(const std::string& fp) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(fp);
  if (it == entries_.end()) return std::nullopt;
  return it->second.response;
}

bool Cassette::record(const GenerationRequest& req, const GenerationResponse& resp) {
  const auto fp = fingerprint(req);
  std::lock_guard lock(mutex_);
  if (auto it = entries_.find(fp); it != entries_.end()) {
    if (it->second.response.text != resp.text) {
      throw RecordError("fingerprint " + fp + " already recorded with a different response");
    }
    return false;
  }
  if (file_) {
    std::ofstream out(*file_, std::ios::binary | std::ios::app);
    if (!out) throw RecordError("cannot append to cassette " + file_->string());
    out << json_io::dump_line({{"fingerprint", fp},
                               {"request", to_json(req)},
                               {"response", to_json(resp)}})
        << '\n';
  }
  entries_.emplace(fp, Entry{req, resp});
  return true;
}

std::size_t Cassette::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

ReplayBackend::ReplayBackend(std::shared_ptr<const Cassette> cassette)
    : cassette_(std::move(cassette)) {}

GenerationResponse ReplayBackend::complete(const GenerationRequest& req) {
  req.check();
  const auto fp = fingerprint(req);
  auto resp = cassette_->find(fp);
  if (!resp) throw CassetteMissError(fp);
  return *resp;
}

RecordingBackend::RecordingBackend(std::shared_ptr<GenerationBackend> inner,
                                   std::shared_ptr<Cassette> cassette)
    : inner_(std::move(inner)), cassette_(std::move(cassette)) {}

GenerationResponse RecordingBackend::complete(const GenerationRequest& req) {
  auto resp = inner_->complete(req);
  cassette_->record(req, resp);
  return resp;
}

OpenAiBackend::OpenAiBackend(OpenAiConfig config, std::shared_ptr<HttpTransport> transport,
                             Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  if (config_.base_url.empty()) throw ConfigError("LLM base URL is not configured");
  while (!config_.base_url.empty() && config_.base_url.back() == '/') config_.base_url.pop_back();
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

namespace {

bool transient(const HttpResult& r) { return r.status == 0 || r.status == 429 || r.status >= 500; }

}  // namespace

GenerationResponse OpenAiBackend::complete(const GenerationRequest& req) {
  req.check();
  const json body = {{"model", req.model_name},
                     {"messages",
                      {{{"role", "system"}, {"content", req.system_prompt}},
                       {{"role", "user"}, {"content", req.user_prompt}}}},
                     {"temperature", req.temperature},
                     {"max_tokens", req.max_tokens}};
  std::vector<std::pair<std::string, std::string>> headers;
  if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);

  const auto url = config_.base_url + "/chat/completions";
  const auto payload = body.dump();
  auto delay = config_.initial_backoff;
  HttpResult result;
  for (int attempt = 0;; ++attempt) {
    const auto started = std::chrono::steady_clock::now();
    result = transport_->post(url, payload, headers, config_.timeout);
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    if (result.status >= 200 && result.status < 300) {
      json j;
      try {
        j = json::parse(result.body);
      } catch (const json::parse_error& e) {
        throw TransportError(std::string("unparseable completion body: ") + e.what());
      }
      GenerationResponse resp;
      try {
        const auto& content = j.at("choices").at(0).at("message").at("content");
        resp.text = content.is_null() ? "" : content.get<std::string>();
      } catch (const json::exception& e) {
        throw TransportError(std::string("completion body lacks choices[0].message.content: ") +
                             e.what());
      }
      if (j.contains("usage") && j["usage"].is_object()) {
        resp.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        resp.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
      }
      resp.latency = elapsed;
      resp.backend_id = id();
      resp.created = j.contains("created") && j["created"].is_number_integer()
                         ? Timestamp{std::chrono::seconds{j["created"].get<long long>()}}
                         : std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
      return resp;
    }
    if (!transient(result) || attempt >= config_.max_retries) break;
    sleeper_(delay);
    delay *= 2;
  }
  throw TransportError("chat completion failed (status " + std::to_string(result.status) + ")" +
                       (result.error.empty() ? "" : ": " + result.error));
}

}  // namespace subcite::llm
