#include "subcite/credit.hpp"

#include <algorithm>
#include <regex>
#include <set>

#include "subcite/annotation.hpp"
#include "subcite/error.hpp"

namespace subcite::credit {

std::string_view to_string(BackendKind k) {
  return k == BackendKind::Heuristic ? "heuristic" : "llm-judge";
}

std::optional<BackendKind> try_parse_backend_kind(std::string_view s) {
  if (s == "heuristic") return BackendKind::Heuristic;
  if (s == "llm-judge") return BackendKind::LlmJudge;
  return std::nullopt;
}

std::string_view to_string(Action a) {
  switch (a) {
    case Action::Accept: return "accept";
    case Action::Downgrade: return "downgrade";
    case Action::Reject: return "reject";
  }
  return "reject";
}

void CreditConfig::check() const {
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ConfigError("credit threshold tau must lie in [0, 1], got " + std::to_string(tau));
  }
  try {
    weights.check();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (downgrade_min_accuracy < 1 || downgrade_min_accuracy > 5) {
    throw ConfigError("downgrade_min_accuracy must lie in 1..5");
  }
}

namespace {

int coverage_bucket(std::size_t covered, std::size_t total) {
  if (total == 0 || covered == 0) return 1;
  if (covered == total) return 5;
  if (4 * covered >= 3 * total) return 4;
  if (2 * covered >= total) return 3;
  if (4 * covered >= total) return 2;
  return 1;
}

// rho = cited / sentence mass, compared exactly in integers.
int concision_bucket(std::size_t cited, std::size_t mass) {
  if (mass == 0) return 1;
  if (2 * cited <= mass) return 5;
  if (10 * cited <= 7 * mass) return 4;
  if (20 * cited <= 17 * mass) return 3;
  if (cited <= mass) return 2;
  return 1;
}

int readability_bucket(std::size_t unaligned) {
  if (unaligned == 0) return 5;
  if (unaligned == 1) return 3;
  return 1;
}

}  // namespace

JudgeScores heuristic_score(const CandidateExample& cand,
                            const segment::SegmentOptions& segmentation) {
  const auto& inst = cand.instance;
  if (!inst.gold) throw PreconditionError("candidate " + cand.id() + " has no citation");
  const auto& doc = inst.context;
  const auto& spans = inst.gold->spans;
  const auto text = doc.chars();
  const auto map = segment::segment_document(text, segmentation);

  const auto answer_tokens = segment::tokenize(inst.answer).tokens;
  const std::set<std::string> answer(answer_tokens.begin(), answer_tokens.end());
  std::set<std::string> cited;
  for (auto s : spans) {
    for (auto& t : segment::tokenize(text.substr(s.start, s.length())).tokens) {
      cited.insert(std::move(t));
    }
  }
  std::size_t covered = 0;
  for (const auto& t : answer) covered += cited.count(t);

  std::set<std::size_t> touched;
  std::size_t cited_len = 0;
  for (auto s : spans) {
    cited_len += s.length();
    for (auto i : touched_sentences(s, map.sentences)) touched.insert(i);
  }
  std::size_t mass = 0;
  for (auto i : touched) mass += map.sentences[i].length();

  std::set<std::size_t> aligned;
  for (std::size_t i = 0; i < map.sentences.size(); ++i) {
    aligned.insert(map.sentences[i].start);
    aligned.insert(map.sentences[i].end);
    for (auto b : map.clause_boundaries[i]) aligned.insert(b);
    for (auto c : segment::clause_spans(map.sentences[i], map.clause_boundaries[i], text)) {
      aligned.insert(c.start);
      aligned.insert(c.end);
    }
  }
  std::size_t unaligned = 0;
  for (auto s : spans) {
    unaligned += !aligned.count(s.start);
    unaligned += !aligned.count(s.end);
  }

  return {coverage_bucket(covered, answer.size()), concision_bucket(cited_len, mass),
          readability_bucket(unaligned)};
}

llm::GenerationRequest judge_request(const QAInstance& inst, const JudgeOptions& options,
                                     bool retry) {
  if (!inst.gold) throw PreconditionError("instance " + inst.id + " has no citation");
  std::string user = "Grade the citation for the question and answer below.\n\nQuestion: " +
                     inst.question + "\nAnswer: " + inst.answer + "\nCitation:\n";
  const auto quotes = spans_to_quotes(inst.gold->spans, inst.context);
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    user += std::to_string(i + 1) + ". \"" + quotes[i] + "\"\n";
  }
  user +=
      "\nScore each dimension from 1 (poor) to 5 (excellent):\n"
      "- acc: the citation accurately supports the answer.\n"
      "- conc: the citation contains nothing the answer does not need.\n"
      "- read: the cited fragments read as fluent, coherent text.\n"
      "\nReply with one line in exactly this form: acc: N, conc: N, read: N\n";
  if (retry) {
    user +=
        "\nYour previous reply did not follow this form. Reply with the single line only.\n";
  }
  llm::GenerationRequest req;
  req.system_prompt = "You grade citations in question answering data.";
  req.user_prompt = std::move(user);
  req.temperature = 0.0;
  req.max_tokens = options.max_tokens;
  req.model_name = options.model_name;
  return req;
}

JudgeScores parse_judge_reply(std::string_view reply) {
  static const std::regex pattern(
      R"(\bacc\s*[:=]\s*(-?\d+)\s*[,;]?\s*conc\s*[:=]\s*(-?\d+)\s*[,;]?\s*read\s*[:=]\s*(-?\d+)\b)",
      std::regex::icase);
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(reply.begin(), reply.end(), m, pattern)) {
    throw JudgeError("judge reply lacks \"acc: N, conc: N, read: N\"");
  }
  auto value = [&](int group) {
    const auto digits = m[group].str();
    if (digits.size() > 3) throw JudgeError("judge score " + digits + " outside 1..5");
    return std::stoi(digits);
  };
  JudgeScores s{value(1), value(2), value(3)};
  try {
    s.check();
  } catch (const DomainError& e) {
    throw JudgeError(e.what());
  }
  return s;
}

JudgeScores judge_score(const QAInstance& inst, llm::GenerationBackend& backend,
                        const JudgeOptions& options) {
  try {
    return parse_judge_reply(backend.complete(judge_request(inst, options)).text);
  } catch (const JudgeError&) {
  }
  try {
    return parse_judge_reply(backend.complete(judge_request(inst, options, true)).text);
  } catch (const JudgeError& e) {
    throw JudgeError("instance " + inst.id + ": " + e.what() + " (after retry)");
  }
}

CreditDecision decide(const JudgeScores& scores, bool citation_valid, const CreditConfig& config) {
  CreditDecision d;
  d.scores = scores;
  d.score = metrics::quality_score(scores, config.weights);
  if (d.score >= config.tau) {
    d.action = Action::Accept;
    d.rationale = "score at or above threshold";
  } else if (citation_valid && scores.accuracy >= config.downgrade_min_accuracy) {
    d.action = Action::Downgrade;
    d.rationale = "below threshold, grounded citation kept at sentence level";
  } else {
    d.action = Action::Reject;
    d.rationale = citation_valid ? "below threshold, weak answer support" : "invalid citation";
  }
  return d;
}

CreditDecision score_candidate(const CandidateExample& cand, Scorer& scorer,
                               const CreditConfig& config,
                               const segment::SegmentOptions& segmentation) {
  if (cand.status != augment::CandidateStatus::Pending) {
    throw PreconditionError("candidate " + cand.id() + " is not pending");
  }
  if (!cand.instance.gold) throw PreconditionError("candidate " + cand.id() + " has no citation");
  const auto& doc = cand.instance.context;
  const auto sentences = segment::split_sentences(doc.chars(), segmentation).sentences;
  const bool valid = validate_annotation(*cand.instance.gold, doc, sentences).ok();
  return decide(scorer.score(cand), valid, config);
}

CandidateExample downgrade_to_sentence(const CandidateExample& cand,
                                       const segment::SegmentOptions& segmentation) {
  if (!cand.instance.gold) throw PreconditionError("candidate " + cand.id() + " has no citation");
  const auto& doc = cand.instance.context;
  const auto sentences = segment::split_sentences(doc.chars(), segmentation).sentences;

  std::set<std::size_t> touched;
  for (auto s : cand.instance.gold->spans) {
    for (auto i : touched_sentences(s, sentences)) touched.insert(i);
  }
  if (touched.empty()) throw PreconditionError("candidate " + cand.id() + " cites no sentence");

  CandidateExample out = cand;
  auto& gold = *out.instance.gold;
  gold.spans.clear();
  for (auto i : touched) gold.spans.push_back(sentences[i]);
  gold.type = gold.spans.size() == 1 ? AnnotationType::Type1 : AnnotationType::Type3;
  out.transition(augment::CandidateStatus::Downgraded);
  return out;
}

FilterOutcome filter_candidates(const std::vector<CandidateExample>& candidates, Scorer& scorer,
                                const CreditConfig& config,
                                const segment::SegmentOptions& segmentation) {
  config.check();
  FilterOutcome out;
  for (const auto& cand : candidates) {
    if (cand.status != augment::CandidateStatus::Pending) continue;
    CreditDecision d;
    try {
      d = score_candidate(cand, scorer, config, segmentation);
    } catch (const JudgeError& e) {
      out.errors.push_back(e.what());
      out.unscored.push_back(cand);
      continue;
    }
    CandidateExample next = cand;
    next.credit = d.score;
    switch (d.action) {
      case Action::Accept:
        next.transition(augment::CandidateStatus::Accepted);
        out.accepted.push_back(std::move(next));
        break;
      case Action::Downgrade:
        out.downgraded.push_back(downgrade_to_sentence(next, segmentation));
        break;
      case Action::Reject:
        next.transition(augment::CandidateStatus::Rejected);
        out.rejected.push_back(std::move(next));
        break;
    }
    out.decisions.emplace_back(cand.id(), std::move(d));
  }
  return out;
}

}  // namespace subcite::credit
