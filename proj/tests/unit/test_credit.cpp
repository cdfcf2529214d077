#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "subcite/annotation.hpp"
#include "subcite/credit.hpp"
#include "subcite/error.hpp"
#include "subcite/json_io.hpp"
#include "support/examples.hpp"

using namespace subcite;
using namespace subcite::credit;
using augment::CandidateExample;
using augment::CandidateStatus;

namespace {

const std::string kFixtures = SUBCITE_FIXTURES;

CandidateExample candidate(const std::string& context, const std::string& answer,
                           const std::vector<std::string>& quotes, AnnotationType type) {
  auto inst = fixtures::instance("c", context, "question?", answer);
  auto spans = quotes_to_spans(quotes, inst.context).spans;
  std::sort(spans.begin(), spans.end());
  inst.gold = CitationAnnotation{spans, type, "gen", {}};
  return {inst, {"gen", "fp", {}}, std::nullopt, CandidateStatus::Pending};
}

CandidateExample reef_type3() {
  return candidate(fixtures::kReefContext, fixtures::kReefAnswer,
                   {fixtures::kReefSubject, fixtures::kReefClause}, AnnotationType::Type3);
}

class ScriptedJudge : public llm::GenerationBackend {
 public:
  explicit ScriptedJudge(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  llm::GenerationResponse complete(const llm::GenerationRequest& req) override {
    requests.push_back(req);
    llm::GenerationResponse r;
    r.text = replies_.at(std::min(requests.size() - 1, replies_.size() - 1));
    return r;
  }
  std::string id() const override { return "scripted-judge"; }
  std::vector<llm::GenerationRequest> requests;

 private:
  std::vector<std::string> replies_;
};

class FixedScorer : public Scorer {
 public:
  explicit FixedScorer(JudgeScores s) : s_(s) {}
  JudgeScores score(const CandidateExample&) override { return s_; }
  BackendKind kind() const override { return BackendKind::LlmJudge; }

 private:
  JudgeScores s_;
};

}  // namespace

TEST(CreditConfig, RejectsBadThresholdAndWeights) {
  CreditConfig c;
  EXPECT_NO_THROW(c.check());
  c.tau = 1.2;
  EXPECT_THROW(c.check(), ConfigError);
  c.tau = 0.8;
  c.weights = {0.5, 0.5, 0.5};
  EXPECT_THROW(c.check(), ConfigError);
}

TEST(Heuristic, ReefSubjectPlusClauseScoresTopMarks) {
  // Cited mass 111 of 269 characters across the two touched sentences.
  EXPECT_EQ(heuristic_score(reef_type3()), (JudgeScores{5, 5, 5}));
}

TEST(Heuristic, WholeSentenceIsLessConcise) {
  const std::string answer = "the world's largest coral reef system";
  const auto c = candidate(fixtures::kReefContext, answer, {fixtures::kReefSubject},
                           AnnotationType::Type1);
  EXPECT_EQ(heuristic_score(c), (JudgeScores{5, 2, 5}));
  // Citing only the predicate scores better on conciseness.
  const auto sub = candidate(fixtures::kReefContext, answer,
                             {"the world's largest coral reef system"}, AnnotationType::Type2);
  const auto s = heuristic_score(sub);
  EXPECT_EQ(s.accuracy, 5);
  EXPECT_GT(s.conciseness, 2);
}

TEST(Heuristic, AnswerMissingFromCitation) {
  const auto c = candidate(fixtures::kReefContext, "Nobody knows",
                           {fixtures::kReefClause}, AnnotationType::Type2);
  EXPECT_EQ(heuristic_score(c).accuracy, 1);
}

TEST(Heuristic, MidWordBoundariesHurtReadability) {
  // "eef is the world" starts and ends inside words.
  const auto c = candidate(fixtures::kReefContext, "world", {"eef is the world"},
                           AnnotationType::Type2);
  EXPECT_EQ(heuristic_score(c).readability, 1);
}

TEST(Decide, ThresholdDowngradeReject) {
  const CreditConfig cfg;
  EXPECT_EQ(decide({5, 5, 5}, true, cfg).action, Action::Accept);
  // (5,2,5) -> 0.75 below 0.8; grounded citation is widened instead.
  const auto d = decide({5, 2, 5}, true, cfg);
  EXPECT_DOUBLE_EQ(d.score, 0.75);
  EXPECT_EQ(d.action, Action::Downgrade);
  EXPECT_EQ(decide({2, 5, 5}, true, cfg).action, Action::Reject);
  EXPECT_EQ(decide({3, 1, 1}, false, cfg).action, Action::Reject);
  CreditConfig low;
  low.tau = 0.0;
  EXPECT_EQ(decide({1, 1, 1}, false, low).action, Action::Accept);
}

TEST(Downgrade, WidensToWholeSentences) {
  const auto c = reef_type3();
  const auto d = downgrade_to_sentence(c);
  EXPECT_EQ(d.status, CandidateStatus::Downgraded);
  const auto quotes = spans_to_quotes(d.instance.gold->spans, d.instance.context);
  ASSERT_EQ(quotes.size(), 2u);
  EXPECT_EQ(quotes[0], fixtures::kReefSubject);
  EXPECT_EQ(quotes[1].rfind(fixtures::kReefClause, 0), 0u);
  EXPECT_EQ(d.instance.gold->type, AnnotationType::Type3);

  const auto single = candidate(fixtures::kReefContext, fixtures::kReefAnswer,
                                {fixtures::kReefClause}, AnnotationType::Type2);
  const auto w = downgrade_to_sentence(single);
  EXPECT_EQ(w.instance.gold->type, AnnotationType::Type1);
  const auto q = spans_to_quotes(w.instance.gold->spans, w.instance.context)[0];
  EXPECT_EQ(q.rfind(fixtures::kReefClause, 0), 0u);
  EXPECT_EQ(q.substr(q.size() - 7), "runoff.");
}

TEST(Judge, RequestMatchesGoldenSnapshot) {
  const auto corpus = json_io::read_instances(kFixtures + "/pipeline_corpus.jsonl");
  const auto req = judge_request(corpus[2], {"judge-model", 64});
  std::ifstream in(kFixtures + "/golden/judge_prompt.txt", std::ios::binary);
  std::ostringstream golden;
  golden << in.rdbuf();
  EXPECT_EQ("[system]\n" + req.system_prompt + "\n[user]\n" + req.user_prompt, golden.str());
  EXPECT_EQ(req.temperature, 0.0);
}

TEST(Judge, ParsesReplies) {
  EXPECT_EQ(parse_judge_reply("acc: 5, conc: 3, read: 4"), (JudgeScores{5, 3, 4}));
  EXPECT_EQ(parse_judge_reply("Sure!\nACC=2; CONC=2; READ=1\n"), (JudgeScores{2, 2, 1}));
  EXPECT_THROW(parse_judge_reply("acc: 6, conc: 3, read: 4"), JudgeError);
  EXPECT_THROW(parse_judge_reply("acc: 0, conc: 3, read: 4"), JudgeError);
  EXPECT_THROW(parse_judge_reply("looks good to me"), JudgeError);
  EXPECT_THROW(parse_judge_reply("acc: 99999999999, conc: 3, read: 4"), JudgeError);
}

TEST(Judge, RetriesOnceWithFormatHint) {
  const auto c = reef_type3();
  ScriptedJudge judge({"It is great.", "acc: 4, conc: 4, read: 5"});
  EXPECT_EQ(judge_score(c.instance, judge), (JudgeScores{4, 4, 5}));
  ASSERT_EQ(judge.requests.size(), 2u);
  EXPECT_EQ(judge.requests[0].user_prompt.find("did not follow"), std::string::npos);
  EXPECT_NE(judge.requests[1].user_prompt.find("did not follow"), std::string::npos);

  ScriptedJudge stubborn({"no", "still no"});
  EXPECT_THROW(judge_score(c.instance, stubborn), JudgeError);
  EXPECT_EQ(stubborn.requests.size(), 2u);
}

TEST(Filter, PartitionsAndRecordsCredit) {
  std::vector<CandidateExample> cands;
  cands.push_back(reef_type3());
  cands.push_back(candidate(fixtures::kReefContext, "the world's largest coral reef system",
                            {fixtures::kReefSubject}, AnnotationType::Type1));
  cands.back().instance.id = "c2";
  cands.push_back(candidate(fixtures::kReefContext, "Nobody knows", {fixtures::kReefClause},
                            AnnotationType::Type2));
  cands.back().instance.id = "c3";
  auto done = cands[0];
  done.instance.id = "c4";
  done.status = CandidateStatus::Accepted;
  cands.push_back(done);

  HeuristicScorer scorer;
  const auto out = filter_candidates(cands, scorer, CreditConfig{});
  ASSERT_EQ(out.accepted.size(), 1u);
  ASSERT_EQ(out.downgraded.size(), 1u);
  ASSERT_EQ(out.rejected.size(), 1u);
  EXPECT_EQ(out.decisions.size(), 3u);
  EXPECT_DOUBLE_EQ(*out.accepted[0].credit, 1.0);
  EXPECT_DOUBLE_EQ(*out.downgraded[0].credit, 0.75);
  EXPECT_EQ(out.rejected[0].status, CandidateStatus::Rejected);
}

TEST(Filter, JudgeFailuresLeaveCandidatesPending) {
  ScriptedJudge judge({"?"});
  JudgeScorer scorer(std::shared_ptr<llm::GenerationBackend>(&judge, [](auto*) {}));
  const auto out = filter_candidates({reef_type3()}, scorer, CreditConfig{});
  EXPECT_TRUE(out.decisions.empty());
  ASSERT_EQ(out.unscored.size(), 1u);
  EXPECT_EQ(out.unscored[0].status, CandidateStatus::Pending);
  EXPECT_EQ(out.errors.size(), 1u);
}

TEST(Filter, InvalidCitationIsRejectedEvenWithHighAccuracy) {
  auto c = reef_type3();
  c.instance.gold->type = AnnotationType::Type1;  // two spans cannot be Type1
  FixedScorer scorer({5, 1, 1});
  const auto out = filter_candidates({c}, scorer, CreditConfig{});
  ASSERT_EQ(out.rejected.size(), 1u);
  EXPECT_EQ(out.decisions[0].second.rationale, "invalid citation");
}

TEST(ScoreCandidate, RequiresPending) {
  auto c = reef_type3();
  c.status = CandidateStatus::Rejected;
  HeuristicScorer scorer;
  EXPECT_THROW(score_candidate(c, scorer, CreditConfig{}), PreconditionError);
}
