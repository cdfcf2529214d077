#include "subcite/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "subcite/annotation.hpp"
#include "subcite/error.hpp"

namespace subcite::metrics {

void JudgeScores::check() const {
  for (int s : {accuracy, conciseness, readability}) {
    if (s < 1 || s > 5) throw DomainError("judge score " + std::to_string(s) + " outside 1..5");
  }
}

void QualityWeights::check() const {
  if (accuracy < 0 || conciseness < 0 || readability < 0) {
    throw DomainError("quality weights must be non-negative");
  }
  if (std::abs(accuracy + conciseness + readability - 1.0) > 1e-12) {
    throw DomainError("quality weights must sum to 1");
  }
}

F1Result token_f1(std::string_view predicted, std::string_view reference) {
  const auto p = segment::tokenize(predicted).tokens;
  const auto r = segment::tokenize(reference).tokens;
  const std::set<std::string> pred(p.begin(), p.end());
  const std::set<std::string> ref(r.begin(), r.end());

  F1Result out;
  for (const auto& t : pred) out.tp += ref.count(t);
  if (!pred.empty()) out.precision = static_cast<double>(out.tp) / static_cast<double>(pred.size());
  if (!ref.empty()) out.recall = static_cast<double>(out.tp) / static_cast<double>(ref.size());
  if (out.precision + out.recall > 0) {
    out.f1 = 2 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

double cosine_similarity(std::string_view predicted, std::string_view reference) {
  std::map<std::string, std::pair<double, double>> counts;
  for (auto& t : segment::tokenize(predicted).tokens) counts[std::move(t)].first += 1;
  for (auto& t : segment::tokenize(reference).tokens) counts[std::move(t)].second += 1;

  double dot = 0, pp = 0, rr = 0;
  for (const auto& [_, c] : counts) {
    dot += c.first * c.second;
    pp += c.first * c.first;
    rr += c.second * c.second;
  }
  if (pp == 0 || rr == 0) return 0.0;
  return std::clamp(dot / (std::sqrt(pp) * std::sqrt(rr)), 0.0, 1.0);
}

double normalize_score(int s) {
  if (s < 1 || s > 5) throw DomainError("score " + std::to_string(s) + " outside 1..5");
  return (s - 1) / 4.0;
}

double quality_score(const JudgeScores& scores, const QualityWeights& weights) {
  weights.check();
  scores.check();
  const double q = weights.accuracy * normalize_score(scores.accuracy) +
                   weights.conciseness * normalize_score(scores.conciseness) +
                   weights.readability * normalize_score(scores.readability);
  return std::clamp(q, 0.0, 1.0);
}

std::string citation_text(const CitationAnnotation& ann, const ContextDocument& doc) {
  std::string out;
  for (const auto& q : spans_to_quotes(ann.spans, doc)) {
    if (!out.empty()) out += ' ';
    out += q;
  }
  return out;
}

MetricRow evaluate_instance(const CitationAnnotation& predicted, const CitationAnnotation& gold,
                            const ContextDocument& doc, const std::optional<JudgeScores>& judge,
                            const QualityWeights& weights,
                            const segment::SegmentOptions& segmentation) {
  const auto sentences = segment::split_sentences(doc.chars(), segmentation).sentences;
  for (const auto* ann : {&predicted, &gold}) {
    auto result = validate_annotation(*ann, doc, sentences);
    if (!result.ok()) throw ValidationError(std::move(result));
  }
  const auto pred_text = citation_text(predicted, doc);
  const auto gold_text = citation_text(gold, doc);

  MetricRow row;
  row.f1 = token_f1(pred_text, gold_text);
  row.cosine = cosine_similarity(pred_text, gold_text);
  if (judge) row.quality = quality_score(*judge, weights);
  return row;
}

}  // namespace subcite::metrics
