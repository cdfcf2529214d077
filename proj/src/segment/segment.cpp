#include "subcite/segment.hpp"

#include <algorithm>
#include <array>

#include "subcite/text.hpp"

namespace subcite::segment {

namespace {

bool is_terminator(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }
bool is_clause_punct(char32_t c) { return c == U',' || c == U';' || c == U':'; }
bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

constexpr std::array<std::u32string_view, 6> kClauseMarkers = {U"and", U"but", U"which",
                                                               U"that", U"where", U"who"};

/// The terminator at `pos` follows an abbreviation or a lone initial.
bool after_abbreviation(std::u32string_view text, std::size_t sentence_start, std::size_t pos,
                        const SegmentOptions& options) {
  std::size_t begin = pos;
  while (begin > sentence_start && !text::is_space(text[begin - 1])) --begin;
  while (begin < pos && !text::is_word_char(text[begin])) ++begin;
  if (begin == pos) return false;
  const auto word = text.substr(begin, pos - begin);
  if (word.size() == 1 && text::is_capital(word.front())) return true;
  const auto folded = text::encode_utf8(text::fold_case(word));
  return std::find(options.abbreviations.begin(), options.abbreviations.end(), folded) !=
         options.abbreviations.end();
}

/// Two or more line breaks inside a whitespace run end a paragraph.
bool paragraph_break_at(std::u32string_view text, std::size_t pos) {
  int newlines = 0;
  for (; pos < text.size() && text::is_space(text[pos]); ++pos) {
    if (text[pos] == U'\n') ++newlines;
  }
  return newlines >= 2;
}

}  // namespace

TokenSequence tokenize(std::u32string_view text) {
  TokenSequence seq;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!text::is_word_char(text[i])) {
      ++i;
      continue;
    }
    const auto start = i;
    while (i < text.size() && text::is_word_char(text[i])) ++i;
    seq.tokens.push_back(text::encode_utf8(text::fold_case(text.substr(start, i - start))));
    seq.offsets.push_back({start, i});
  }
  return seq;
}

TokenSequence tokenize(std::string_view utf8) { return tokenize(text::decode_utf8(utf8)); }

SentenceMap split_sentences(std::u32string_view text, const SegmentOptions& options) {
  SentenceMap map;
  const auto n = text.size();
  auto skip_space = [&](std::size_t p) {
    while (p < n && text::is_space(text[p])) ++p;
    return p;
  };

  std::size_t start = skip_space(0);
  while (start < n) {
    std::size_t end = n;
    for (std::size_t p = start; p < n; ++p) {
      const auto c = text[p];
      if (is_terminator(c) && (p + 1 == n || text::is_space(text[p + 1])) &&
          !after_abbreviation(text, start, p, options)) {
        end = p + 1;
        break;
      }
      if (text::is_space(c) && paragraph_break_at(text, p)) {
        end = p;
        break;
      }
    }
    while (end > start && text::is_space(text[end - 1])) --end;
    map.sentences.push_back({start, end});
    start = skip_space(end);
  }
  return map;
}

std::vector<std::size_t> split_clauses(Span sentence, std::u32string_view text) {
  std::vector<std::size_t> token_starts;
  for (auto off : tokenize(text.substr(sentence.start, sentence.length())).offsets) {
    token_starts.push_back(sentence.start + off.start);
  }
  auto tokens_between = [&](std::size_t a, std::size_t b) {
    return static_cast<std::size_t>(std::lower_bound(token_starts.begin(), token_starts.end(), b) -
                                    std::lower_bound(token_starts.begin(), token_starts.end(), a));
  };

  std::vector<std::size_t> candidates;
  for (std::size_t p = sentence.start; p < sentence.end; ++p) {
    const auto c = text[p];
    if (is_clause_punct(c)) {
      const bool numeric = p > sentence.start && p + 1 < sentence.end && is_digit(text[p - 1]) &&
                           is_digit(text[p + 1]);
      if (!numeric) candidates.push_back(p + 1);
    } else if (text::is_space(c)) {
      for (auto marker : kClauseMarkers) {
        const auto after = p + 1 + marker.size();
        if (after < sentence.end && text.substr(p + 1, marker.size()) == marker &&
            text::is_space(text[after])) {
          candidates.push_back(p + 1);
        }
      }
    }
  }

  std::vector<std::size_t> boundaries;
  std::size_t last = sentence.start;
  for (auto cand : candidates) {
    if (cand <= last || cand >= sentence.end) continue;
    if (tokens_between(last, cand) >= 2 && tokens_between(cand, sentence.end) >= 2) {
      boundaries.push_back(cand);
      last = cand;
    }
  }
  return boundaries;
}

SentenceMap segment_document(std::u32string_view text, const SegmentOptions& options) {
  auto map = split_sentences(text, options);
  map.clause_boundaries.reserve(map.sentences.size());
  for (const auto& s : map.sentences) map.clause_boundaries.push_back(split_clauses(s, text));
  return map;
}

Span trim_clause(Span span, std::u32string_view text) {
  auto start = span.start;
  auto end = span.end;
  while (start < end && text::is_space(text[start])) ++start;
  while (end > start && (text::is_space(text[end - 1]) || is_clause_punct(text[end - 1]))) --end;
  return {start, end};
}

std::vector<Span> clause_spans(Span sentence, const std::vector<std::size_t>& boundaries,
                               std::u32string_view text) {
  std::vector<Span> out;
  std::size_t from = sentence.start;
  for (auto b : boundaries) {
    out.push_back(trim_clause({from, b}, text));
    from = b;
  }
  out.push_back(trim_clause({from, sentence.end}, text));
  return out;
}

}  // namespace subcite::segment
