#include "subcite/service.hpp"

#include <algorithm>
#include <charconv>

#include "httplib.h"
#include "subcite/annotation.hpp"
#include "subcite/json_io.hpp"

namespace subcite::service {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxPageSize = 200;

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& message,
          const std::optional<std::string>& field = std::nullopt) {
  json body = {{"error", message}};
  if (field) body["field"] = *field;
  send(res, status, body);
}

json violations_json(const ValidationResult& result) {
  json out = json::array();
  for (const auto& v : result.violations) {
    json item = {{"name", v.name}, {"detail", v.detail}};
    item["span_index"] = v.span_index ? json(*v.span_index) : json(nullptr);
    out.push_back(std::move(item));
  }
  return out;
}

std::optional<std::size_t> parse_count(const std::string& s) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) return std::nullopt;
  return v;
}

json spans_json(const std::vector<Span>& spans) {
  json out = json::array();
  for (auto s : spans) out.push_back(json_io::to_json(s));
  return out;
}

json candidate_json(const augment::CandidateExample& cand) {
  auto j = augment::to_json(cand);
  if (cand.instance.gold) j["quotes"] = spans_to_quotes(cand.instance.gold->spans, cand.instance.context);
  return j;
}

json instance_summary(const QAInstance& inst) {
  return {{"id", inst.id},
          {"question", inst.question},
          {"answer", inst.answer},
          {"context_id", inst.context.id()},
          {"source", std::string(to_string(inst.context.source()))},
          {"annotated", inst.gold.has_value()},
          {"type", inst.gold ? json(std::string(to_string(inst.gold->type))) : json(nullptr)}};
}

json stats_json(const State& state) {
  std::array<std::size_t, 3> counts{};
  std::size_t annotated = 0;
  for (const auto& [_, inst] : state.instances) {
    if (!inst.gold) continue;
    ++annotated;
    ++counts[static_cast<std::size_t>(inst.gold->type)];
  }
  json out = {{"total", state.instances.size()}, {"annotated", annotated}};
  json ratios;
  for (auto t : kAllAnnotationTypes) {
    const auto i = static_cast<std::size_t>(t);
    const auto key = std::string(to_string(t));
    out[key] = counts[i];
    ratios[key] = annotated ? static_cast<double>(counts[i]) / static_cast<double>(annotated) : 0.0;
  }
  out["ratios"] = ratios;
  json pool;
  for (auto s : {augment::CandidateStatus::Pending, augment::CandidateStatus::Accepted,
                 augment::CandidateStatus::Downgraded, augment::CandidateStatus::Rejected}) {
    pool[std::string(augment::to_string(s))] = 0;
  }
  for (const auto& [_, cand] : state.candidates) {
    pool[std::string(augment::to_string(cand.status))] =
        pool[std::string(augment::to_string(cand.status))].get<std::size_t>() + 1;
  }
  out["candidates"] = pool;
  return out;
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  auto body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    fail(res, 400, "request body must be a JSON object", "body");
    return std::nullopt;
  }
  return body;
}

void list_instances(Store& store, const httplib::Request& req, httplib::Response& res) {
  std::optional<AnnotationType> type;
  std::optional<bool> annotated;
  std::size_t page = 1, page_size = 50;
  if (req.has_param("type")) {
    type = try_parse_annotation_type(req.get_param_value("type"));
    if (!type) return fail(res, 400, "unknown annotation type", "type");
  }
  if (req.has_param("annotated")) {
    const auto v = req.get_param_value("annotated");
    if (v != "true" && v != "false") return fail(res, 400, "expected true or false", "annotated");
    annotated = v == "true";
  }
  if (req.has_param("page")) {
    auto v = parse_count(req.get_param_value("page"));
    if (!v || *v == 0) return fail(res, 400, "page must be a positive integer", "page");
    page = *v;
  }
  if (req.has_param("page_size")) {
    auto v = parse_count(req.get_param_value("page_size"));
    if (!v || *v == 0 || *v > kMaxPageSize) {
      return fail(res, 400, "page_size must be between 1 and 200", "page_size");
    }
    page_size = *v;
  }

  const auto state = store.snapshot();
  std::vector<const QAInstance*> matched;
  for (const auto& [_, inst] : state->instances) {
    if (annotated && inst.gold.has_value() != *annotated) continue;
    if (type && (!inst.gold || inst.gold->type != *type)) continue;
    matched.push_back(&inst);
  }
  json items = json::array();
  const auto from = std::min(matched.size(), (page - 1) * page_size);
  const auto to = std::min(matched.size(), from + page_size);
  for (auto i = from; i < to; ++i) items.push_back(instance_summary(*matched[i]));
  send(res, 200,
       {{"items", std::move(items)}, {"total", matched.size()}, {"page", page},
        {"page_size", page_size}});
}

void get_instance(Store& store, const httplib::Request& req, httplib::Response& res) {
  const auto id = req.path_params.at("id");
  const auto state = store.snapshot();
  auto it = state->instances.find(id);
  if (it == state->instances.end()) return fail(res, 404, "no instance " + id);
  const auto& inst = it->second;
  const auto map = segment::segment_document(inst.context.chars(), store.options().segmentation);
  auto j = json_io::to_json(inst);
  j["sentences"] = spans_json(map.sentences);
  json clauses = json::array();
  for (std::size_t s = 0; s < map.sentences.size(); ++s) {
    clauses.push_back(spans_json(
        segment::clause_spans(map.sentences[s], map.clause_boundaries[s], inst.context.chars())));
  }
  j["clauses"] = std::move(clauses);
  if (inst.gold) j["gold"]["quotes"] = spans_to_quotes(inst.gold->spans, inst.context);
  send(res, 200, j);
}

void put_annotation(Store& store, const httplib::Request& req, httplib::Response& res) {
  const auto id = req.path_params.at("id");
  auto body = parse_body(req, res);
  if (!body) return;
  const auto state = store.snapshot();
  auto it = state->instances.find(id);
  if (it == state->instances.end()) return fail(res, 404, "no instance " + id);
  const auto& doc = it->second.context;

  CitationAnnotation ann;
  ann.annotator = body->value("annotator", std::string());
  if (ann.annotator.empty()) ann.annotator = req.get_header_value("X-Annotator");
  if (ann.annotator.empty()) ann.annotator = "anonymous";
  ann.created_at = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());

  const bool has_spans = body->contains("spans");
  const bool has_quotes = body->contains("quotes");
  if (has_spans == has_quotes) return fail(res, 400, "provide exactly one of spans or quotes", "spans");
  try {
    if (has_spans) {
      const auto& spans = (*body)["spans"];
      if (!spans.is_array()) return fail(res, 400, "spans must be a list", "spans");
      for (std::size_t i = 0; i < spans.size(); ++i) {
        ann.spans.push_back(json_io::span_from_json(spans[i], "spans[" + std::to_string(i) + "]"));
      }
    } else {
      const auto& quotes = (*body)["quotes"];
      if (!quotes.is_array() ||
          !std::all_of(quotes.begin(), quotes.end(), [](const json& q) { return q.is_string(); })) {
        return fail(res, 400, "quotes must be a list of strings", "quotes");
      }
      ann.spans = quotes_to_spans(quotes.get<std::vector<std::string>>(), doc).spans;
      std::sort(ann.spans.begin(), ann.spans.end());
    }
  } catch (const IngestionError& e) {
    return fail(res, 400, e.what(), e.path());
  } catch (const NotVerbatimError& e) {
    return send(res, 422, {{"error", "validation failed"},
                           {"violations", json::array({{{"name", "not verbatim"},
                                                        {"detail", e.quote()},
                                                        {"span_index", e.quote_index()}}})}});
  }

  if (auto t = body->find("type"); t != body->end() && !t->is_null()) {
    auto parsed = t->is_string() ? try_parse_annotation_type(t->get<std::string>()) : std::nullopt;
    if (!parsed) return fail(res, 400, "unknown annotation type", "type");
    ann.type = *parsed;
  } else {
    const auto sentences =
        segment::split_sentences(doc.chars(), store.options().segmentation).sentences;
    auto inferred = classify_spans(ann.spans, sentences);
    if (!inferred) {
      return send(res, 422, {{"error", "validation failed"},
                             {"violations", violations_json(validate_annotation(
                                                ann, doc, sentences))}});
    }
    ann.type = *inferred;
  }

  try {
    auto stored = store.set_annotation(id, ann);
    auto j = json_io::to_json(stored);
    j["quotes"] = spans_to_quotes(stored.spans, doc);
    send(res, 200, j);
  } catch (const ValidationError& e) {
    send(res, 422, {{"error", "validation failed"}, {"violations", violations_json(e.result())}});
  } catch (const NotFoundError& e) {
    fail(res, 404, e.what());
  }
}

void list_candidates(Store& store, const httplib::Request& req, httplib::Response& res) {
  std::optional<augment::CandidateStatus> status;
  if (req.has_param("status")) {
    status = augment::try_parse_candidate_status(req.get_param_value("status"));
    if (!status) return fail(res, 400, "unknown candidate status", "status");
  }
  const auto state = store.snapshot();
  json items = json::array();
  for (const auto& [_, cand] : state->candidates) {
    if (status && cand.status != *status) continue;
    items.push_back(candidate_json(cand));
  }
  const auto total = items.size();
  send(res, 200, {{"items", std::move(items)}, {"total", total}});
}

void get_candidate(Store& store, const httplib::Request& req, httplib::Response& res) {
  const auto id = req.path_params.at("id");
  const auto state = store.snapshot();
  auto it = state->candidates.find(id);
  if (it == state->candidates.end()) return fail(res, 404, "no candidate " + id);
  send(res, 200, candidate_json(it->second));
}

void review_candidate(Store& store, const httplib::Request& req, httplib::Response& res) {
  const auto id = req.path_params.at("id");
  auto body = parse_body(req, res);
  if (!body) return;
  const auto action_name = body->value("action", std::string());
  std::optional<credit::Action> action;
  for (auto a : {credit::Action::Accept, credit::Action::Reject, credit::Action::Downgrade}) {
    if (credit::to_string(a) == action_name) action = a;
  }
  if (!action) return fail(res, 400, "action must be accept, reject or downgrade", "action");
  auto reviewer = body->value("reviewer", std::string());
  if (reviewer.empty()) reviewer = req.get_header_value("X-Annotator");
  if (reviewer.empty()) reviewer = "anonymous";
  try {
    send(res, 200, candidate_json(store.review(id, *action, reviewer)));
  } catch (const NotFoundError& e) {
    fail(res, 404, e.what());
  } catch (const ConflictError& e) {
    fail(res, 409, e.what());
  }
}

}  // namespace

void mount(httplib::Server& server, Store& store, const ServiceOptions& options) {
  server.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                              {"Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type, X-Annotator"}});
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });

  auto bind = [&store](void (*handler)(Store&, const httplib::Request&, httplib::Response&)) {
    return [&store, handler](const httplib::Request& req, httplib::Response& res) {
      handler(store, req, res);
    };
  };
  server.Get("/api/instances", bind(list_instances));
  server.Get("/api/instances/:id", bind(get_instance));
  server.Put("/api/instances/:id/annotation", bind(put_annotation));
  server.Get("/api/candidates", bind(list_candidates));
  server.Get("/api/candidates/:id", bind(get_candidate));
  server.Post("/api/candidates/:id/review", bind(review_candidate));
  server.Get("/api/stats", [&store](const httplib::Request&, httplib::Response& res) {
    send(res, 200, stats_json(*store.snapshot()));
  });

  server.set_exception_handler(
      [](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
          std::rethrow_exception(ep);
        } catch (const std::exception& e) {
          fail(res, 500, e.what());
        } catch (...) {
          fail(res, 500, "internal error");
        }
      });

  if (options.ui_dir && std::filesystem::is_directory(*options.ui_dir)) {
    server.set_mount_point("/", options.ui_dir->string());
  }
}

Server::Server(Store& store, ServiceOptions options)
    : server_(std::make_unique<httplib::Server>()) {
  mount(*server_, store, options);
}

Server::~Server() { stop(); }

int Server::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host);
  } else if (!server_->bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void Server::run(const std::string& host, int port) {
  if (!server_->listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

void Server::stop() {
  if (server_->is_running()) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace subcite::service
