#include "subcite/candidates.hpp"

#include <algorithm>
#include <set>

#include "subcite/annotation.hpp"
#include "subcite/text.hpp"

namespace subcite::segment {

namespace {

using TokenSet = std::set<std::string>;

// Capitalised only because they open a sentence.
const std::set<std::string, std::less<>> kSentenceStarters = {
    "a",     "an",   "the",   "this", "that",  "these", "those", "it",    "its",  "he",
    "she",   "they", "we",    "you",  "his",   "her",   "their", "our",   "in",   "on",
    "at",    "for",  "of",    "to",   "from",  "by",    "with",  "as",    "after", "before",
    "but",   "and",  "or",    "if",   "when",  "while", "there", "here",  "since", "during",
    "although", "however", "many", "some", "most", "each", "every", "all", "both", "one"};

struct Clause {
  Span span;
  TokenSet tokens;
  TokenSet proper_nouns;
};

std::vector<std::vector<Clause>> build_clauses(std::u32string_view text, const SentenceMap& map) {
  std::vector<std::vector<Clause>> out;
  out.reserve(map.sentences.size());
  for (std::size_t s = 0; s < map.sentences.size(); ++s) {
    const auto sentence = map.sentences[s];
    std::vector<Clause> clauses;
    for (auto span : clause_spans(sentence, map.clause_boundaries[s], text)) {
      Clause clause{span, {}, {}};
      const auto seq = tokenize(text.substr(span.start, span.length()));
      for (std::size_t t = 0; t < seq.size(); ++t) {
        clause.tokens.insert(seq.tokens[t]);
        const auto first = span.start + seq.offsets[t].start;
        if (!text::is_capital(text[first])) continue;
        const bool sentence_initial = first == sentence.start;
        if (seq.tokens[t] == "i") continue;
        if (sentence_initial && kSentenceStarters.count(seq.tokens[t])) continue;
        clause.proper_nouns.insert(seq.tokens[t]);
      }
      clauses.push_back(std::move(clause));
    }
    out.push_back(std::move(clauses));
  }
  return out;
}

bool covers(const TokenSet& have, const TokenSet& needed) {
  return std::includes(have.begin(), have.end(), needed.begin(), needed.end());
}

}  // namespace

std::vector<CitationAnnotation> candidate_subspans(const QAInstance& instance,
                                                   const CandidateOptions& options) {
  const auto text = instance.context.chars();
  const auto map = segment_document(text, options.segmentation);
  const auto clauses = build_clauses(text, map);

  TokenSet answer;
  for (auto& t : tokenize(instance.answer).tokens) answer.insert(std::move(t));

  std::vector<CitationAnnotation> out;
  auto emit = [&](std::vector<Span> spans) {
    const auto type = classify_spans(spans, map.sentences);
    if (!type) return;
    CitationAnnotation ann{std::move(spans), *type, options.annotator, options.created_at};
    if (std::find(out.begin(), out.end(), ann) == out.end()) out.push_back(std::move(ann));
  };

  for (std::size_t s = 0; s < map.sentences.size(); ++s) {
    const auto& cl = clauses[s];
    TokenSet sentence_tokens;
    for (const auto& c : cl) sentence_tokens.insert(c.tokens.begin(), c.tokens.end());
    TokenSet needed;
    std::set_intersection(answer.begin(), answer.end(), sentence_tokens.begin(),
                          sentence_tokens.end(), std::inserter(needed, needed.end()));
    if (needed.empty()) continue;

    // Shortest clause run covering the shared answer tokens: fewest clauses,
    // then fewest characters, then earliest.
    std::size_t best_i = 0;
    std::size_t best_j = cl.size() - 1;
    for (std::size_t i = 0; i < cl.size(); ++i) {
      TokenSet have;
      for (std::size_t j = i; j < cl.size(); ++j) {
        have.insert(cl[j].tokens.begin(), cl[j].tokens.end());
        if (!covers(have, needed)) continue;
        const auto len = cl[j].span.end - cl[i].span.start;
        const auto best_len = cl[best_j].span.end - cl[best_i].span.start;
        if (j - i < best_j - best_i || (j - i == best_j - best_i && len < best_len)) {
          best_i = i;
          best_j = j;
        }
        break;
      }
    }

    Span run{cl[best_i].span.start, cl[best_j].span.end};
    if (best_i == 0 && best_j == cl.size() - 1) run = map.sentences[s];
    emit({run});

    TokenSet run_tokens;
    for (std::size_t k = best_i; k <= best_j; ++k) {
      run_tokens.insert(cl[k].tokens.begin(), cl[k].tokens.end());
    }
    auto names_new_subject = [&](const Clause& c) {
      return std::any_of(c.proper_nouns.begin(), c.proper_nouns.end(),
                         [&](const std::string& t) { return !run_tokens.count(t); });
    };

    // Nearest preceding clause, same sentence first, then earlier sentences.
    std::optional<Span> subject;
    for (std::size_t k = best_i; k-- > 0 && !subject;) {
      if (names_new_subject(cl[k])) subject = cl[k].span;
    }
    for (std::size_t ps = s; ps-- > 0 && !subject;) {
      for (std::size_t k = clauses[ps].size(); k-- > 0;) {
        if (names_new_subject(clauses[ps][k])) {
          subject = clauses[ps].size() == 1 ? map.sentences[ps] : clauses[ps][k].span;
          break;
        }
      }
    }
    if (subject) emit({*subject, run});
  }
  return out;
}

}  // namespace subcite::segment
