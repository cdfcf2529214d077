#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "subcite/annotation.hpp"
#include "subcite/error.hpp"
#include "subcite/evalharness.hpp"
#include "support/examples.hpp"

using namespace subcite;
using namespace subcite::evalharness;
using nlohmann::json;

namespace {

const std::string kFixtures = SUBCITE_FIXTURES;

json read_json(const std::string& path) { return json::parse(std::ifstream(path)); }

QAInstance flag_instance() {
  auto inst = fixtures::instance("flag", fixtures::kFlagContext, fixtures::kFlagQuestion,
                                 fixtures::kFlagAnswer);
  const std::vector<std::string> q = {fixtures::kFlagGoldQuote};
  inst.gold = CitationAnnotation{quotes_to_spans(q, inst.context).spans, AnnotationType::Type2,
                                 "gold", {}};
  return inst;
}

QAInstance reef_instance() {
  auto inst = fixtures::instance("reef", fixtures::kReefContext, fixtures::kReefQuestion,
                                 fixtures::kReefAnswer);
  const std::vector<std::string> q = {fixtures::kReefSubject, fixtures::kReefClause};
  inst.gold = CitationAnnotation{quotes_to_spans(q, inst.context).spans, AnnotationType::Type3,
                                 "gold", {}};
  return inst;
}

std::filesystem::path write_lines(const std::string& name, const std::vector<json>& lines) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& l : lines) out << l.dump() << "\n";
  return path;
}

}  // namespace

TEST(LoadPredictions, QuoteAndSpanRecords) {
  const std::vector<QAInstance> corpus = {flag_instance(), reef_instance()};
  json quoted = {{"id", "flag"}, {"quotes", {fixtures::kFlagGoldQuote}}};
  json spanned = {{"id", "reef"}, {"type", "type2"}};
  spanned["spans"] = json::array({json{{"start", 0}, {"end", 10}}});
  const auto path = write_lines("subcite-preds-a.jsonl", {quoted, spanned});
  const auto run = load_predictions(path, "m", corpus);
  ASSERT_EQ(run.predictions.size(), 2u);
  EXPECT_EQ(run.predictions.at("flag"),
            (CitationAnnotation{corpus[0].gold->spans, AnnotationType::Type2, "m", {}}));
  EXPECT_EQ(run.predictions.at("reef").spans, (std::vector<Span>{{0, 10}}));
  EXPECT_EQ(run.predictions.at("reef").annotator, "m");
}

TEST(LoadPredictions, NonVerbatimQuoteNamesLineAndIndex) {
  const auto path = write_lines("subcite-preds-b.jsonl",
                                {json{{"id", "flag"}, {"quotes", {"The flag is divided", "zzz"}}}});
  try {
    load_predictions(path, "m", {flag_instance()});
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1.quotes[1]"), std::string::npos) << e.what();
  }
}

TEST(LoadPredictions, DuplicateIdRejected) {
  const auto path = write_lines("subcite-preds-c.jsonl",
                                {json{{"id", "flag"}, {"quotes", {fixtures::kFlagGoldQuote}}},
                                 json{{"id", "flag"}, {"quotes", {fixtures::kFlagGoldQuote}}}});
  EXPECT_THROW(load_predictions(path, "m", {flag_instance()}), IngestionError);
}

TEST(EvaluateRun, SentenceCitationHasFullRecallLowerPrecision) {
  const std::vector<QAInstance> corpus = {flag_instance(), reef_instance()};
  MethodRun run;
  run.method_name = "sentence";
  const std::vector<std::string> q = {fixtures::kFlagSentenceQuote};
  run.predictions["flag"] = CitationAnnotation{quotes_to_spans(q, corpus[0].context).spans,
                                               AnnotationType::Type2, "sentence", {}};
  const auto report = evaluate_run(run, corpus, {});
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_DOUBLE_EQ(report.rows[0].recall, 1.0);
  EXPECT_LT(report.rows[0].precision, 1.0);
  EXPECT_TRUE(report.rows[1].missing);
  EXPECT_EQ(report.rows[1].f1, 0.0);
  EXPECT_EQ(report.missing(), 1u);
  EXPECT_DOUBLE_EQ(report.aggregates.f1, report.rows[0].f1 / 2.0);
  EXPECT_FALSE(report.aggregates.quality);
  EXPECT_TRUE(aggregates_consistent(report));
}

TEST(EvaluateRun, GoldAgainstItselfIsPerfect) {
  const std::vector<QAInstance> corpus = {flag_instance(), reef_instance()};
  MethodRun run;
  run.method_name = "oracle";
  for (const auto& i : corpus) run.predictions[i.id] = *i.gold;
  int judged = 0;
  const auto report = evaluate_run(run, corpus, {}, [&](const QAInstance&, const CitationAnnotation&) {
    ++judged;
    return metrics::JudgeScores{5, 3, 4};
  });
  EXPECT_EQ(judged, 2);
  EXPECT_DOUBLE_EQ(report.aggregates.f1, 1.0);
  EXPECT_NEAR(report.aggregates.cosine, 1.0, 1e-12);
  ASSERT_TRUE(report.aggregates.quality);
  EXPECT_NEAR(*report.aggregates.quality, 0.75, 1e-12);
}

TEST(EvaluateRun, UnknownPredictionIsAnError) {
  MethodRun run;
  run.predictions["nope"] = CitationAnnotation{};
  EXPECT_THROW(evaluate_run(run, {flag_instance()}, {}), PreconditionError);
}

TEST(Report, JsonRoundTripAndConsistency) {
  const std::vector<QAInstance> corpus = {flag_instance(), reef_instance()};
  MethodRun run;
  run.method_name = "oracle";
  run.predictions["reef"] = *corpus[1].gold;
  auto report = evaluate_run(run, corpus, {});
  const auto back = report_from_json(json::parse(to_json(report).dump()));
  EXPECT_EQ(back, report);
  report.aggregates.f1 += 0.01;
  EXPECT_FALSE(aggregates_consistent(report));
}

// Mean of random rows against a Kahan-summed oracle.
TEST(Aggregate, MatchesCompensatedMean) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int round = 0; round < 100; ++round) {
    std::vector<InstanceRow> rows(1 + rng() % 50);
    double sum = 0, c = 0;
    for (auto& r : rows) {
      r.f1 = u(rng);
      const double y = r.f1 - c;
      const double t = sum + y;
      c = (t - sum) - y;
      sum = t;
    }
    EXPECT_NEAR(aggregate(rows, false).f1, sum / static_cast<double>(rows.size()), 1e-12);
  }
}

TEST(RenderComparison, ReferenceTableCells) {
  std::vector<MetricReport> reports;
  const auto doc = read_json(kFixtures + "/comparison_reports.json");
  for (const auto& r : doc.at("reports")) {
    reports.push_back(report_from_json(r));
  }
  const auto out = render_comparison(reports);
  EXPECT_NE(out.text.find("Method"), std::string::npos);
  EXPECT_NE(out.text.find("Judge"), std::string::npos);
  // The strongest row carries every best marker.
  EXPECT_NE(out.text.find("Subcite-Qwen2.5-7B    0.7319*  0.7977*  0.7624*"), std::string::npos)
      << out.text;
  EXPECT_NE(out.text.find("Qwen2.5-7B            0.4616   0.5542   0.4839"), std::string::npos)
      << out.text;
  EXPECT_EQ(out.data["rows"][1]["best"], json({"f1", "cosine", "quality"}));
  EXPECT_EQ(out.data["rows"][0]["best"], json::array());
}

TEST(RenderComparison, TiesAreAllMarked) {
  MetricReport a, b;
  a.method = "a";
  a.aggregates = {0.50004, 0, 0, 0.3, std::nullopt};
  b.method = "b";
  b.aggregates = {0.49996, 0, 0, 0.2, std::nullopt};
  const auto out = render_comparison({a, b});
  EXPECT_EQ(out.data["rows"][0]["best"], json({"f1", "cosine"}));
  EXPECT_EQ(out.data["rows"][1]["best"], json({"f1"}));
  EXPECT_TRUE(out.data["rows"][0]["quality"].is_null());
}

TEST(RenderAblation, ReferencePoints) {
  const auto out = render_ablation(ablation_from_json(read_json(kFixtures + "/ablation_points.json")));
  EXPECT_EQ(out.text,
            "Samples  F1\n"
            "-------  ------\n"
            "500      0.7319\n"
            "700      0.7387\n"
            "1000     0.7653\n");
  EXPECT_THROW(render_ablation({{700, 0.7}, {500, 0.6}}), PreconditionError);
  EXPECT_THROW(render_ablation({}), PreconditionError);
  EXPECT_THROW(ablation_from_json(json::object()), IngestionError);
}
