#include "subcite/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>
#include <vector>

#include "subcite/error.hpp"

namespace subcite::cli {

namespace {

using StringList = std::vector<std::string>;
using Value = std::variant<std::string, double, bool, StringList>;

struct Entry {
  Value value;
  std::size_t line;
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

class Parser {
 public:
  Parser(std::string_view text, std::string origin) : text_(text), origin_(std::move(origin)) {}

  std::map<std::string, Entry> run() {
    std::map<std::string, Entry> out;
    std::string section;
    std::size_t pos = 0;
    while (pos <= text_.size()) {
      auto nl = text_.find('\n', pos);
      if (nl == std::string_view::npos) nl = text_.size();
      ++line_;
      line_text_ = text_.substr(pos, nl - pos);
      cursor_ = 0;
      pos = nl + 1;

      skip_space();
      if (done()) continue;
      if (peek() == '[') {
        ++cursor_;
        const auto close = line_text_.find(']', cursor_);
        if (close == std::string_view::npos) fail("unterminated section header");
        section = std::string(trim(line_text_.substr(cursor_, close - cursor_)));
        if (section.empty()) fail("empty section name");
        cursor_ = close + 1;
        expect_end();
        continue;
      }
      const auto eq = line_text_.find('=', cursor_);
      if (eq == std::string_view::npos) fail("expected key = value");
      const auto key = std::string(trim(line_text_.substr(cursor_, eq - cursor_)));
      if (key.empty()) fail("missing key");
      cursor_ = eq + 1;
      skip_space();
      auto value = parse_value();
      expect_end();
      const auto full = section.empty() ? key : section + "." + key;
      if (!out.emplace(full, Entry{std::move(value), line_}).second) fail("duplicate key " + full);
    }
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(origin_ + ":" + std::to_string(line_) + ": " + what);
  }
  bool done() const { return cursor_ >= line_text_.size() || line_text_[cursor_] == '#'; }
  char peek() const { return line_text_[cursor_]; }
  void skip_space() {
    while (cursor_ < line_text_.size() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) {
      ++cursor_;
    }
  }
  void expect_end() {
    skip_space();
    if (!done()) fail("unexpected text after value");
  }

  std::string parse_string() {
    ++cursor_;  // opening quote
    std::string out;
    while (cursor_ < line_text_.size()) {
      const char c = line_text_[cursor_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (cursor_ >= line_text_.size()) break;
      switch (const char e = line_text_[cursor_++]) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(std::string("unknown escape \\") + e);
      }
    }
    fail("unterminated string");
  }

  Value parse_value() {
    if (cursor_ >= line_text_.size()) fail("missing value");
    if (peek() == '"') return parse_string();
    if (peek() == '[') {
      ++cursor_;
      StringList items;
      for (;;) {
        skip_space();
        if (cursor_ >= line_text_.size()) fail("unterminated array");
        if (peek() == ']') {
          ++cursor_;
          return items;
        }
        if (peek() != '"') fail("arrays may only hold strings");
        items.push_back(parse_string());
        skip_space();
        if (cursor_ < line_text_.size() && peek() == ',') ++cursor_;
      }
    }
    auto end = line_text_.find_first_of(" \t#", cursor_);
    if (end == std::string_view::npos) end = line_text_.size();
    const auto token = line_text_.substr(cursor_, end - cursor_);
    cursor_ = end;
    if (token == "true") return true;
    if (token == "false") return false;
    double v = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      fail("cannot parse value \"" + std::string(token) + "\"");
    }
    return v;
  }

  std::string_view text_;
  std::string origin_;
  std::size_t line_ = 0;
  std::string_view line_text_;
  std::size_t cursor_ = 0;
};

class Binder {
 public:
  Binder(std::map<std::string, Entry> entries, std::string origin)
      : entries_(std::move(entries)), origin_(std::move(origin)) {}

  void string(const char* key, std::string& target) {
    if (auto* e = take(key)) target = as<std::string>(*e, key, "a string");
  }
  void number(const char* key, double& target) {
    if (auto* e = take(key)) target = as<double>(*e, key, "a number");
  }
  template <class Int>
  void integer(const char* key, Int& target) {
    if (auto* e = take(key)) {
      const double v = as<double>(*e, key, "an integer");
      if (v != static_cast<double>(static_cast<long long>(v)) || v < 0) {
        fail(*e, std::string(key) + " must be a non-negative integer");
      }
      target = static_cast<Int>(v);
    }
  }
  void list(const char* key, StringList& target) {
    if (auto* e = take(key)) target = as<StringList>(*e, key, "a list of strings");
  }
  template <class F>
  void custom(const char* key, F&& apply) {
    if (auto* e = take(key)) {
      try {
        apply(as<std::string>(*e, key, "a string"));
      } catch (const ConfigError& err) {
        fail(*e, err.what());
      }
    }
  }

  void finish() {
    for (const auto& [key, e] : entries_) {
      if (!used_.count(key)) fail(e, "unknown key " + key);
    }
  }

 private:
  const Entry* take(const char* key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    used_.emplace(key, true);
    return &it->second;
  }
  template <class T>
  const T& as(const Entry& e, const char* key, const char* what) {
    if (!std::holds_alternative<T>(e.value)) fail(e, std::string(key) + " must be " + what);
    return std::get<T>(e.value);
  }
  [[noreturn]] void fail(const Entry& e, const std::string& what) const {
    throw ConfigError(origin_ + ":" + std::to_string(e.line) + ": " + what);
  }

  std::map<std::string, Entry> entries_;
  std::map<std::string, bool> used_;
  std::string origin_;
};

}  // namespace

void Config::check() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(llm.temperature >= 0, "llm.temperature must be non-negative");
  require(llm.max_tokens >= 1, "llm.max_tokens must be at least 1");
  require(llm.max_in_flight >= 1, "llm.max_in_flight must be at least 1");
  require(llm.timeout_seconds >= 1, "llm.timeout_seconds must be at least 1");
  require(augment.few_shot >= 1 && augment.few_shot <= 8, "augment.few_shot must be 1..8");
  require(augment.per_request >= 1, "augment.per_request must be at least 1");
  require(augment.contexts_per_request >= 1, "augment.contexts_per_request must be at least 1");
  require(augment.budget_factor >= 1, "augment.budget_factor must be at least 1");
  require(credit.tau >= 0.0 && credit.tau <= 1.0, "credit.tau must lie in [0, 1]");
  try {
    credit.weights.check();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("credit weights: ") + e.what());
  }
  require(mix.min_fine_ratio >= 0.0 && mix.min_fine_ratio <= 1.0,
          "mix.min_fine_ratio must lie in [0, 1]");
  require(split.train_fraction > 0.0 && split.train_fraction < 1.0,
          "split.train_fraction must lie strictly between 0 and 1");
  require(serve.port >= 0 && serve.port <= 65535, "serve.port must be 0..65535");
  require(!store.root.empty(), "store.root must not be empty");
}

Config parse_config(std::string_view text, const std::string& origin) {
  Binder b(Parser(text, origin).run(), origin);
  Config c;
  b.string("llm.base_url", c.llm.base_url);
  b.string("llm.api_key", c.llm.api_key);
  b.string("llm.model", c.llm.model);
  b.number("llm.temperature", c.llm.temperature);
  b.integer("llm.max_tokens", c.llm.max_tokens);
  b.integer("llm.max_in_flight", c.llm.max_in_flight);
  b.integer("llm.timeout_seconds", c.llm.timeout_seconds);
  b.integer("llm.max_retries", c.llm.max_retries);
  b.integer("augment.few_shot", c.augment.few_shot);
  b.integer("augment.per_request", c.augment.per_request);
  b.integer("augment.contexts_per_request", c.augment.contexts_per_request);
  b.integer("augment.budget_factor", c.augment.budget_factor);
  b.custom("credit.backend", [&](const std::string& v) {
    auto kind = credit::try_parse_backend_kind(v);
    if (!kind) throw ConfigError("credit.backend must be heuristic or llm-judge");
    c.credit.backend = *kind;
  });
  b.number("credit.tau", c.credit.tau);
  b.number("credit.lambda_accuracy", c.credit.weights.accuracy);
  b.number("credit.lambda_conciseness", c.credit.weights.conciseness);
  b.number("credit.lambda_readability", c.credit.weights.readability);
  b.number("mix.min_fine_ratio", c.mix.min_fine_ratio);
  b.list("segment.abbreviations", c.segmentation.abbreviations);
  b.string("store.root", c.store.root);
  b.integer("split.seed", c.split.seed);
  b.number("split.train_fraction", c.split.train_fraction);
  b.string("serve.host", c.serve.host);
  b.integer("serve.port", c.serve.port);
  b.string("serve.ui_dir", c.serve.ui_dir);
  b.string("serve.cors_origin", c.serve.cors_origin);
  b.finish();
  c.check();
  return c;
}

Config load_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), file.string());
}

EnvLookup process_env() {
  return [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

void apply_env(Config& config, const EnvLookup& env) {
  if (auto v = env("SUBCITE_LLM_BASE_URL")) config.llm.base_url = *v;
  if (auto v = env("SUBCITE_LLM_API_KEY")) config.llm.api_key = *v;
  if (auto v = env("SUBCITE_LLM_MODEL")) config.llm.model = *v;
}

}  // namespace subcite::cli
