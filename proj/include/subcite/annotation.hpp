#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "subcite/error.hpp"
#include "subcite/model.hpp"

namespace subcite {

/// Stable violation names. Tests and the HTTP layer match on these.
namespace violation {
inline constexpr std::string_view kNoSpans = "no spans";
inline constexpr std::string_view kSpanOutOfRange = "span out of range";
inline constexpr std::string_view kEmptySpan = "empty span";
inline constexpr std::string_view kUnsorted = "spans not sorted";
inline constexpr std::string_view kOverlap = "spans overlap";
inline constexpr std::string_view kType1SpanCount = "type1 requires exactly one span";
inline constexpr std::string_view kType1NotSentence = "type1 span must coincide with a sentence";
inline constexpr std::string_view kType2CrossesSentence = "type2 span must lie within one sentence";
inline constexpr std::string_view kType2FullSentence =
    "type2 span must exclude part of its sentence";
inline constexpr std::string_view kType3SingleSegment = "type3 requires multiple segments";
}  // namespace violation

struct Violation {
  std::string name;
  std::string detail;
  std::optional<std::size_t> span_index;
};

struct ValidationResult {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(std::string_view name) const;
  std::string summary() const;
};

/// Raised where a valid annotation is a precondition.
class ValidationError : public Error {
 public:
  explicit ValidationError(ValidationResult result)
      : Error("invalid annotation: " + result.summary()), result_(std::move(result)) {}
  const ValidationResult& result() const noexcept { return result_; }

 private:
  ValidationResult result_;
};

/// Checks the structural and type-specific invariants of `ann` against the
/// sentence segmentation of `doc`. Never throws on malformed spans.
ValidationResult validate_annotation(const CitationAnnotation& ann, const ContextDocument& doc,
                                     std::span<const Span> sentences);

/// Index of the sentence fully containing `span`, if any.
std::optional<std::size_t> enclosing_sentence(Span span, std::span<const Span> sentences);

/// Indices of every sentence the span touches, in order.
std::vector<std::size_t> touched_sentences(Span span, std::span<const Span> sentences);

/// Infers the annotation type from the span layout: one span equal to a
/// sentence is Type1, one strict sub-range of a sentence is Type2, anything
/// with several segments (or one span across sentences) is Type3.
/// Returns nullopt for malformed span lists.
std::optional<AnnotationType> classify_spans(std::span<const Span> spans,
                                             std::span<const Span> sentences);

/// Throws RangeError naming the first invalid span.
std::vector<std::string> spans_to_quotes(std::span<const Span> spans, const ContextDocument& doc);

struct QuoteAmbiguity {
  std::size_t quote_index;
  std::size_t occurrences;
};

struct QuoteResolution {
  /// One span per quote, in quote order.
  std::vector<Span> spans;
  /// Quotes with more than one verbatim occurrence, and how they were resolved.
  std::vector<QuoteAmbiguity> ambiguities;

  bool unique() const { return ambiguities.empty(); }
};

/// Every start offset at which `needle` occurs in `haystack`.
std::vector<std::size_t> find_occurrences(std::u32string_view haystack,
                                          std::u32string_view needle);

/// Maps quoted fragments back to offsets. Quotes with several occurrences
/// are resolved to the assignment minimising the summed gap between
/// consecutive spans (nearest to the previously resolved span), ties going to
/// the earliest occurrences. Throws NotVerbatimError for a quote that does not
/// occur in the document (or is empty).
QuoteResolution quotes_to_spans(std::span<const std::string> quotes, const ContextDocument& doc);

/// Character gap between two spans; 0 when they touch or overlap.
std::size_t span_distance(Span a, Span b);

}  // namespace subcite
