#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "subcite/model.hpp"

namespace subcite::segment {

struct TokenSequence {
  /// Case-folded UTF-8 tokens.
  std::vector<std::string> tokens;
  std::vector<Span> offsets;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

/// Maximal runs of letters and digits, case folded. Offsets are relative to
/// the start of `text`.
TokenSequence tokenize(std::u32string_view text);
TokenSequence tokenize(std::string_view utf8);

struct SegmentOptions {
  std::vector<std::string> abbreviations = {"mr", "mrs", "dr", "e.g", "i.e",
                                            "etc", "vs", "st", "no"};
};

struct SentenceMap {
  std::vector<Span> sentences;
  /// Per sentence: offsets where a new clause begins, strictly inside it.
  std::vector<std::vector<std::size_t>> clause_boundaries;
};

/// Sentence spans only (`clause_boundaries` left empty).
SentenceMap split_sentences(std::u32string_view text, const SegmentOptions& options = {});

/// Clause start offsets within `sentence`.
std::vector<std::size_t> split_clauses(Span sentence, std::u32string_view text);

/// Sentences plus clause boundaries for every sentence.
SentenceMap segment_document(std::u32string_view text, const SegmentOptions& options = {});

/// Clause extents of one sentence, trimmed of surrounding whitespace and of
/// trailing ',', ';', ':'.
std::vector<Span> clause_spans(Span sentence, const std::vector<std::size_t>& boundaries,
                               std::u32string_view text);

/// Shrinks `span` past leading whitespace and trailing whitespace/clause
/// punctuation.
Span trim_clause(Span span, std::u32string_view text);

}  // namespace subcite::segment
