#pragma once

#include <optional>
#include <string_view>

#include "subcite/model.hpp"
#include "subcite/segment.hpp"

namespace subcite::metrics {

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
};

struct JudgeScores {
  int accuracy = 1;
  int conciseness = 1;
  int readability = 1;

  /// Throws DomainError unless every score is in 1..5.
  void check() const;
  friend bool operator==(const JudgeScores&, const JudgeScores&) = default;
};

struct QualityWeights {
  double accuracy = 1.0 / 3.0;
  double conciseness = 1.0 / 3.0;
  double readability = 1.0 / 3.0;

  /// Throws DomainError on negative weights or a sum that is not 1 (1e-12).
  void check() const;
  friend bool operator==(const QualityWeights&, const QualityWeights&) = default;
};

/// Token-set overlap. Duplicates are ignored on both sides.
F1Result token_f1(std::string_view predicted, std::string_view reference);

/// Bag-of-words cosine over term counts; 0 when either side has no tokens.
double cosine_similarity(std::string_view predicted, std::string_view reference);

/// (s - 1) / 4 for s in 1..5.
double normalize_score(int s);

double quality_score(const JudgeScores& scores, const QualityWeights& weights);

struct MetricRow {
  F1Result f1;
  double cosine = 0.0;
  std::optional<double> quality;
};

/// Space-joined quotes of an annotation, in span order.
std::string citation_text(const CitationAnnotation& ann, const ContextDocument& doc);

/// Validates both annotations (ValidationError on failure) and scores the
/// prediction against the gold citation.
MetricRow evaluate_instance(const CitationAnnotation& predicted, const CitationAnnotation& gold,
                            const ContextDocument& doc, const std::optional<JudgeScores>& judge,
                            const QualityWeights& weights,
                            const segment::SegmentOptions& segmentation = {});

}  // namespace subcite::metrics
