#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subcite/metrics.hpp"
#include "subcite/model.hpp"
#include "subcite/segment.hpp"

namespace subcite::evalharness {

struct MethodRun {
  std::string method_name;
  std::map<std::string, CitationAnnotation> predictions;
  nlohmann::json metadata = nlohmann::json::object();
};

/// Reads prediction JSONL: {"id","spans":[...],"type"} or {"id","quotes":[...]}.
/// Quote records are resolved against the instance's context and typed from
/// their span layout. Throws IngestionError with the line number.
MethodRun load_predictions(const std::filesystem::path& file, std::string method_name,
                           const std::vector<QAInstance>& corpus,
                           const segment::SegmentOptions& segmentation = {});

struct InstanceRow {
  std::string id;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double cosine = 0.0;
  std::optional<double> quality;
  /// No prediction was supplied; all metrics are 0.
  bool missing = false;

  friend bool operator==(const InstanceRow&, const InstanceRow&) = default;
};

struct Aggregates {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double cosine = 0.0;
  std::optional<double> quality;

  friend bool operator==(const Aggregates&, const Aggregates&) = default;
};

struct MetricReport {
  std::string method;
  std::vector<InstanceRow> rows;
  Aggregates aggregates;
  metrics::QualityWeights weights;
  nlohmann::json metadata = nlohmann::json::object();

  std::size_t missing() const;
  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Grades one prediction; used for the quality column.
using Judge = std::function<metrics::JudgeScores(const QAInstance&, const CitationAnnotation&)>;

/// Unweighted means; the quality mean is present when `with_quality`.
Aggregates aggregate(const std::vector<InstanceRow>& rows, bool with_quality);

/// True when the stored aggregates equal the row means within `tolerance`.
/// Reports without rows (aggregate-only figures) are trivially consistent.
bool aggregates_consistent(const MetricReport& report, double tolerance = 1e-9);

/// Scores every annotated corpus instance. Throws PreconditionError for a
/// prediction naming an unknown or unannotated instance, and ValidationError
/// for an invalid predicted annotation.
MetricReport evaluate_run(const MethodRun& run, const std::vector<QAInstance>& corpus,
                          const metrics::QualityWeights& weights, const Judge& judge = {},
                          const segment::SegmentOptions& segmentation = {});

nlohmann::json to_json(const MetricReport& report);
MetricReport report_from_json(const nlohmann::json& j);

struct Rendered {
  std::string text;
  nlohmann::json data;
};

/// Method rows with F1 / CS / Judge columns at 4 decimals. The best value of
/// each column is marked with '*', ties included.
Rendered render_comparison(const std::vector<MetricReport>& reports);

struct AblationPoint {
  std::size_t sample_size = 0;
  double f1 = 0.0;
};

/// Throws PreconditionError when empty or sizes are not strictly increasing.
Rendered render_ablation(const std::vector<AblationPoint>& points);

/// {"points":[{"sample_size","f1"}...]}
std::vector<AblationPoint> ablation_from_json(const nlohmann::json& j);

}  // namespace subcite::evalharness
