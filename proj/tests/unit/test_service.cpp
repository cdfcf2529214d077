#include <gtest/gtest.h>

#include <stdlib.h>

#include "httplib.h"
#include "subcite/annotation.hpp"
#include "subcite/service.hpp"
#include "support/examples.hpp"

using namespace subcite;
using namespace subcite::service;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

augment::CandidateExample candidate(const std::string& id) {
  auto inst = fixtures::instance(id, fixtures::kReefContext, fixtures::kReefQuestion,
                                 fixtures::kReefAnswer);
  const std::vector<std::string> q = {fixtures::kReefClause};
  inst.gold = CitationAnnotation{quotes_to_spans(q, inst.context).spans, AnnotationType::Type2,
                                 "gen", {}};
  return {inst, {"gen", "fp", {}}, std::nullopt, augment::CandidateStatus::Pending};
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::string tmpl = (fs::temp_directory_path() / "subcite-svc-XXXXXX").string();
    ASSERT_NE(::mkdtemp(tmpl.data()), nullptr);
    root_ = tmpl;
    store_ = std::make_unique<Store>(root_);
    auto annotated = fixtures::instance("reef-a", fixtures::kReefContext, fixtures::kReefQuestion,
                                        fixtures::kReefAnswer);
    const std::vector<std::string> q = {fixtures::kReefClause};
    annotated.gold = CitationAnnotation{quotes_to_spans(q, annotated.context).spans,
                                        AnnotationType::Type2, "a", {}};
    store_->add_instances({annotated,
                           fixtures::instance("reef-b", fixtures::kReefContext,
                                              fixtures::kReefQuestion, fixtures::kReefAnswer),
                           fixtures::instance("flag", fixtures::kFlagContext,
                                              fixtures::kFlagQuestion, fixtures::kFlagAnswer)});
    store_->add_candidates({candidate("c1"), candidate("c2")});
    server_ = std::make_unique<Server>(*store_);
    port_ = server_->start("127.0.0.1", 0);
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  void TearDown() override {
    server_->stop();
    fs::remove_all(root_);
  }

  std::pair<int, json> get(const std::string& path) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res);
    return {res->status, json::parse(res->body)};
  }

  std::pair<int, json> put(const std::string& path, const std::string& body) {
    auto res = client_->Put(path, body, "application/json");
    EXPECT_TRUE(res);
    return {res->status, json::parse(res->body)};
  }

  std::pair<int, json> post(const std::string& path, const std::string& body) {
    auto res = client_->Post(path, body, "application/json");
    EXPECT_TRUE(res);
    return {res->status, json::parse(res->body)};
  }

  fs::path root_;
  std::unique_ptr<Store> store_;
  std::unique_ptr<Server> server_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

}  // namespace

TEST_F(ServiceTest, PreflightCarriesCorsHeaders) {
  auto res = client_->Options("/api/instances");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_NE(res->get_header_value("Access-Control-Allow-Headers").find("X-Annotator"),
            std::string::npos);
}

TEST_F(ServiceTest, ListInstancesFiltersAndPages) {
  auto [status, body] = get("/api/instances");
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body["total"], 3);
  EXPECT_EQ(body["items"][0]["id"], "flag");

  std::tie(status, body) = get("/api/instances?annotated=false");
  EXPECT_EQ(body["total"], 2);
  std::tie(status, body) = get("/api/instances?type=type2");
  EXPECT_EQ(body["total"], 1);
  EXPECT_EQ(body["items"][0]["type"], "type2");
  std::tie(status, body) = get("/api/instances?page=2&page_size=2");
  EXPECT_EQ(body["items"].size(), 1u);
  EXPECT_EQ(body["items"][0]["id"], "reef-b");

  for (const char* bad : {"?type=type9", "?annotated=yes", "?page=0", "?page_size=201",
                          "?page=x"}) {
    std::tie(status, body) = get(std::string("/api/instances") + bad);
    EXPECT_EQ(status, 400) << bad;
    EXPECT_TRUE(body.contains("field")) << bad;
  }
}

TEST_F(ServiceTest, InstanceDetailHasSegmentation) {
  auto [status, body] = get("/api/instances/reef-a");
  ASSERT_EQ(status, 200);
  EXPECT_EQ(body["sentences"].size(), 3u);
  EXPECT_EQ(body["clauses"].size(), 3u);
  EXPECT_EQ(body["gold"]["quotes"][0], fixtures::kReefClause);
  std::tie(status, body) = get("/api/instances/missing");
  EXPECT_EQ(status, 404);
}

TEST_F(ServiceTest, PutAnnotationInfersType) {
  json req = {{"quotes", {fixtures::kReefSubject, fixtures::kReefClause}}, {"annotator", "b"}};
  auto [status, body] = put("/api/instances/reef-b/annotation", req.dump());
  ASSERT_EQ(status, 200) << body;
  EXPECT_EQ(body["type"], "type3");
  EXPECT_EQ(body["annotator"], "b");
  EXPECT_EQ(body["quotes"][1], fixtures::kReefClause);
  EXPECT_EQ(store_->snapshot()->instances.at("reef-b").gold->type, AnnotationType::Type3);
}

TEST_F(ServiceTest, PutAnnotationAnnotatorFromHeader) {
  json req = {{"quotes", {fixtures::kReefSubject}}};
  auto res = client_->Put("/api/instances/reef-b/annotation", {{"X-Annotator", "hdr"}},
                          req.dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["annotator"], "hdr");
  EXPECT_EQ(json::parse(res->body)["type"], "type1");
}

TEST_F(ServiceTest, PutAnnotationErrors) {
  // Explicit type that the spans do not satisfy.
  json req = {{"spans", {{{"start", 0}, {"end", 5}}}}, {"type", "type1"}};
  auto [status, body] = put("/api/instances/reef-b/annotation", req.dump());
  EXPECT_EQ(status, 422);
  EXPECT_EQ(body["violations"][0]["name"], violation::kType1NotSentence);

  std::tie(status, body) = put("/api/instances/reef-b/annotation",
                               json{{"quotes", {"coral reefs are everywhere"}}}.dump());
  EXPECT_EQ(status, 422);
  EXPECT_EQ(body["violations"][0]["name"], "not verbatim");
  EXPECT_EQ(body["violations"][0]["span_index"], 0);

  std::tie(status, body) = put("/api/instances/reef-b/annotation", "[1,2]");
  EXPECT_EQ(status, 400);
  std::tie(status, body) = put("/api/instances/reef-b/annotation",
                               json{{"quotes", {"x"}}, {"spans", json::array()}}.dump());
  EXPECT_EQ(status, 400);
  std::tie(status, body) = put("/api/instances/reef-b/annotation",
                               json{{"spans", {{{"start", 5}}}}}.dump());
  EXPECT_EQ(status, 400);
  EXPECT_EQ(body["field"], "spans[0].end");
  std::tie(status, body) = put("/api/instances/reef-b/annotation",
                               json{{"quotes", {fixtures::kReefSubject}}, {"type", "t4"}}.dump());
  EXPECT_EQ(status, 400);
  std::tie(status, body) = put("/api/instances/nope/annotation",
                               json{{"quotes", {"x"}}}.dump());
  EXPECT_EQ(status, 404);
  EXPECT_FALSE(store_->snapshot()->instances.at("reef-b").gold.has_value());
}

TEST_F(ServiceTest, CandidateReviewFlow) {
  auto [status, body] = get("/api/candidates?status=pending");
  EXPECT_EQ(body["total"], 2);
  EXPECT_EQ(body["items"][0]["quotes"][0], fixtures::kReefClause);

  std::tie(status, body) = post("/api/candidates/c1/review",
                                json{{"action", "accept"}, {"reviewer", "r"}}.dump());
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body["status"], "accepted");
  std::tie(status, body) = post("/api/candidates/c1/review", json{{"action", "reject"}}.dump());
  EXPECT_EQ(status, 409);
  std::tie(status, body) = post("/api/candidates/c2/review", json{{"action", "downgrade"}}.dump());
  EXPECT_EQ(status, 200);
  EXPECT_EQ(body["status"], "downgraded");
  EXPECT_EQ(body["gold"]["type"], "type1");

  std::tie(status, body) = post("/api/candidates/c2/review", json{{"action", "maybe"}}.dump());
  EXPECT_EQ(status, 400);
  EXPECT_EQ(body["field"], "action");
  std::tie(status, body) = post("/api/candidates/zz/review", json{{"action", "accept"}}.dump());
  EXPECT_EQ(status, 404);
  std::tie(status, body) = get("/api/candidates/zz");
  EXPECT_EQ(status, 404);
  std::tie(status, body) = get("/api/candidates?status=bogus");
  EXPECT_EQ(status, 400);
  std::tie(status, body) = get("/api/candidates/c1");
  EXPECT_EQ(body["status"], "accepted");
}

TEST_F(ServiceTest, Stats) {
  auto [status, body] = get("/api/stats");
  ASSERT_EQ(status, 200);
  EXPECT_EQ(body["total"], 3);
  EXPECT_EQ(body["annotated"], 1);
  EXPECT_EQ(body["type2"], 1);
  EXPECT_DOUBLE_EQ(body["ratios"]["type2"].get<double>(), 1.0);
  EXPECT_EQ(body["candidates"]["pending"], 2);
  EXPECT_EQ(body["candidates"]["accepted"], 0);
}
