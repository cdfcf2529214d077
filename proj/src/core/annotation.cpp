#include "subcite/annotation.hpp"

#include <algorithm>
#include <limits>

#include "subcite/error.hpp"
#include "subcite/text.hpp"

namespace subcite {

namespace {

void add(ValidationResult& r, std::string_view name, std::string detail,
         std::optional<std::size_t> index = std::nullopt) {
  r.violations.push_back({std::string(name), std::move(detail), index});
}

std::string describe(Span s) {
  return "[" + std::to_string(s.start) + ", " + std::to_string(s.end) + ")";
}

bool is_sentence(Span span, std::span<const Span> sentences) {
  return std::binary_search(sentences.begin(), sentences.end(), span);
}

}  // namespace

bool ValidationResult::has(std::string_view name) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.name == name; });
}

std::string ValidationResult::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.name;
    if (!v.detail.empty()) out += " (" + v.detail + ")";
  }
  return out.empty() ? "ok" : out;
}

std::optional<std::size_t> enclosing_sentence(Span span, std::span<const Span> sentences) {
  // First sentence ending after span.start.
  auto it = std::upper_bound(sentences.begin(), sentences.end(), span.start,
                             [](std::size_t pos, const Span& s) { return pos < s.end; });
  if (it == sentences.end() || !it->contains(span)) return std::nullopt;
  return static_cast<std::size_t>(it - sentences.begin());
}

std::vector<std::size_t> touched_sentences(Span span, std::span<const Span> sentences) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].overlaps(span)) out.push_back(i);
  }
  return out;
}

ValidationResult validate_annotation(const CitationAnnotation& ann, const ContextDocument& doc,
                                     std::span<const Span> sentences) {
  ValidationResult r;
  const auto& spans = ann.spans;
  if (spans.empty()) {
    add(r, violation::kNoSpans, "annotation has no spans");
    return r;
  }

  bool well_formed = true;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].start >= spans[i].end) {
      add(r, violation::kEmptySpan, describe(spans[i]) + " has start >= end", i);
      well_formed = false;
    } else if (spans[i].end > doc.length()) {
      add(r, violation::kSpanOutOfRange,
          describe(spans[i]) + " exceeds document length " + std::to_string(doc.length()), i);
      well_formed = false;
    }
  }
  if (!well_formed) return r;

  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i].start < spans[i - 1].start) {
      add(r, violation::kUnsorted, describe(spans[i]) + " starts before " + describe(spans[i - 1]),
          i);
      break;
    }
  }
  for (std::size_t i = 0; i < spans.size(); ++i) {
    for (std::size_t j = i + 1; j < spans.size(); ++j) {
      if (spans[i].overlaps(spans[j])) {
        add(r, violation::kOverlap, describe(spans[i]) + " overlaps " + describe(spans[j]), j);
        i = spans.size();
        break;
      }
    }
  }
  if (!r.ok()) return r;

  switch (ann.type) {
    case AnnotationType::Type1:
      if (spans.size() != 1) {
        add(r, violation::kType1SpanCount, std::to_string(spans.size()) + " spans given");
      } else if (!is_sentence(spans.front(), sentences)) {
        add(r, violation::kType1NotSentence,
            describe(spans.front()) + " is not a sentence extent", 0);
      }
      break;
    case AnnotationType::Type2:
      for (std::size_t i = 0; i < spans.size(); ++i) {
        const auto enclosing = enclosing_sentence(spans[i], sentences);
        if (!enclosing) {
          add(r, violation::kType2CrossesSentence,
              describe(spans[i]) + " is not inside a single sentence", i);
        } else if (sentences[*enclosing] == spans[i]) {
          add(r, violation::kType2FullSentence,
              describe(spans[i]) + " covers its whole sentence", i);
        }
      }
      break;
    case AnnotationType::Type3:
      if (spans.size() == 1 && enclosing_sentence(spans.front(), sentences)) {
        add(r, violation::kType3SingleSegment,
            "single span " + describe(spans.front()) + " lies within one sentence", 0);
      }
      break;
  }
  return r;
}

std::optional<AnnotationType> classify_spans(std::span<const Span> spans,
                                             std::span<const Span> sentences) {
  if (spans.empty()) return std::nullopt;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].start >= spans[i].end) return std::nullopt;
    if (i > 0 && spans[i].start < spans[i - 1].end) return std::nullopt;
  }
  if (spans.size() > 1) return AnnotationType::Type3;
  const auto enclosing = enclosing_sentence(spans.front(), sentences);
  if (!enclosing) return AnnotationType::Type3;
  return sentences[*enclosing] == spans.front() ? AnnotationType::Type1 : AnnotationType::Type2;
}

std::vector<std::string> spans_to_quotes(std::span<const Span> spans, const ContextDocument& doc) {
  std::vector<std::string> out;
  out.reserve(spans.size());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const auto& s = spans[i];
    if (s.start >= s.end || s.end > doc.length()) {
      throw RangeError(i, "span " + std::to_string(i) + " " + describe(s) +
                              " is invalid for a document of length " +
                              std::to_string(doc.length()));
    }
    out.push_back(doc.slice(s));
  }
  return out;
}

std::vector<std::size_t> find_occurrences(std::u32string_view haystack,
                                          std::u32string_view needle) {
  std::vector<std::size_t> out;
  if (needle.empty()) return out;
  for (auto pos = haystack.find(needle); pos != std::u32string_view::npos;
       pos = haystack.find(needle, pos + 1)) {
    out.push_back(pos);
  }
  return out;
}

std::size_t span_distance(Span a, Span b) {
  if (a.end <= b.start) return b.start - a.end;
  if (b.end <= a.start) return a.start - b.end;
  return 0;
}

QuoteResolution quotes_to_spans(std::span<const std::string> quotes, const ContextDocument& doc) {
  QuoteResolution res;
  if (quotes.empty()) return res;

  std::vector<std::vector<Span>> options(quotes.size());
  for (std::size_t i = 0; i < quotes.size(); ++i) {
    const auto needle = text::decode_utf8(quotes[i]);
    for (auto start : find_occurrences(doc.chars(), needle)) {
      options[i].push_back({start, start + needle.size()});
    }
    if (options[i].empty()) throw NotVerbatimError(i, quotes[i]);
    if (options[i].size() > 1) res.ambiguities.push_back({i, options[i].size()});
  }

  // cost[i][k]: least summed gap from quote i (at occurrence k) to the end.
  const auto n = quotes.size();
  std::vector<std::vector<std::size_t>> cost(n);
  cost[n - 1].assign(options[n - 1].size(), 0);
  for (std::size_t i = n - 1; i-- > 0;) {
    cost[i].resize(options[i].size());
    for (std::size_t k = 0; k < options[i].size(); ++k) {
      auto best = std::numeric_limits<std::size_t>::max();
      for (std::size_t m = 0; m < options[i + 1].size(); ++m) {
        best = std::min(best, span_distance(options[i][k], options[i + 1][m]) + cost[i + 1][m]);
      }
      cost[i][k] = best;
    }
  }

  auto pick = [](std::size_t count, auto&& score) {
    std::size_t best_k = 0;
    for (std::size_t k = 1; k < count; ++k) {
      if (score(k) < score(best_k)) best_k = k;
    }
    return best_k;
  };
  auto k = pick(options[0].size(), [&](std::size_t c) { return cost[0][c]; });
  res.spans.push_back(options[0][k]);
  for (std::size_t i = 1; i < n; ++i) {
    const Span prev = res.spans.back();
    k = pick(options[i].size(),
             [&](std::size_t c) { return span_distance(prev, options[i][c]) + cost[i][c]; });
    res.spans.push_back(options[i][k]);
  }
  return res;
}

}  // namespace subcite
