#pragma once

#include <chrono>
#include <compare>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace subcite {

enum class Source { XorAttriQA, XQuAD, HotpotQA, Synthetic, Manual };

std::string_view to_string(Source s);
Source parse_source(std::string_view s);

/// Half-open range of Unicode scalar value offsets: [start, end).
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end > start ? end - start : 0; }
  bool contains(const Span& other) const { return start <= other.start && other.end <= end; }
  bool overlaps(const Span& other) const { return start < other.end && other.start < end; }

  friend auto operator<=>(const Span&, const Span&) = default;
};

enum class AnnotationType { Type1, Type2, Type3 };

inline constexpr AnnotationType kAllAnnotationTypes[] = {
    AnnotationType::Type1, AnnotationType::Type2, AnnotationType::Type3};

/// "type1" | "type2" | "type3"
std::string_view to_string(AnnotationType t);
AnnotationType parse_annotation_type(std::string_view s);
std::optional<AnnotationType> try_parse_annotation_type(std::string_view s);

using Timestamp = std::chrono::sys_seconds;

/// ISO-8601 UTC, second resolution: 2025-03-01T12:00:00Z
std::string format_timestamp(Timestamp t);
Timestamp parse_timestamp(std::string_view s);

/// A retrieved context passage. Immutable; keeps a decoded copy of the text so
/// that span offsets (Unicode scalar values) can be applied directly.
class ContextDocument {
 public:
  ContextDocument(std::string id, std::string text, Source source);

  const std::string& id() const { return id_; }
  const std::string& text() const { return text_; }
  Source source() const { return source_; }

  std::u32string_view chars() const { return *chars_; }
  std::size_t length() const { return chars_->size(); }

  /// UTF-8 substring for a span already known to be in range.
  std::string slice(Span span) const;

  friend bool operator==(const ContextDocument& a, const ContextDocument& b) {
    return a.id_ == b.id_ && a.text_ == b.text_ && a.source_ == b.source_;
  }

 private:
  std::string id_;
  std::string text_;
  Source source_;
  std::shared_ptr<const std::u32string> chars_;
};

struct CitationAnnotation {
  std::vector<Span> spans;
  AnnotationType type = AnnotationType::Type1;
  std::string annotator;
  Timestamp created_at{};

  friend bool operator==(const CitationAnnotation&, const CitationAnnotation&) = default;
};

struct QAInstance {
  std::string id;
  std::string question;
  std::string answer;
  ContextDocument context;
  std::optional<CitationAnnotation> gold;

  /// Throws PreconditionError when question or answer is empty.
  void check() const;

  friend bool operator==(const QAInstance&, const QAInstance&) = default;
};

}  // namespace subcite
