#include "httplib.h"

#include <regex>

#include "subcite/error.hpp"
#include "subcite/llm.hpp"

namespace subcite::llm {

namespace {

class HttplibTransport : public HttpTransport {
 public:
  HttpResult post(const std::string& url, const std::string& body,
                  const std::vector<std::pair<std::string, std::string>>& headers,
                  std::chrono::seconds timeout) override {
    static const std::regex kUrl(R"((https?://[^/]+)(/.*)?)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(url, m, kUrl)) throw ConfigError("invalid URL " + url);
    httplib::Client client(m[1].str());
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(m[2].matched ? m[2].str() : "/", h, body, "application/json");
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
  }
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

}  // namespace subcite::llm
