#include <gtest/gtest.h>

#include <algorithm>
#include <limits>
#include <random>

#include "subcite/annotation.hpp"
#include "subcite/json_io.hpp"
#include "subcite/segment.hpp"
#include "subcite/text.hpp"
#include "support/examples.hpp"
#include "support/random_text.hpp"

using namespace subcite;
namespace fx = subcite::fixtures;

namespace {

std::vector<Span> sentences_of(const ContextDocument& d) {
  return segment::split_sentences(d.chars()).sentences;
}

Span span_of(const ContextDocument& d, const std::string& quote) {
  const auto occ = find_occurrences(d.chars(), text::decode_utf8(quote));
  EXPECT_EQ(occ.size(), 1u) << quote;
  return {occ.at(0), occ.at(0) + text::decode_utf8(quote).size()};
}

CitationAnnotation ann(std::vector<Span> spans, AnnotationType type) {
  return {std::move(spans), type, "tester", {}};
}

}  // namespace

TEST(ContextDocument, CountsScalarValuesNotBytes) {
  const ContextDocument d("d", "Zürich 東京", Source::Manual);
  EXPECT_EQ(d.length(), 9u);
  EXPECT_EQ(d.slice({7, 9}), "東京");
  EXPECT_THROW(ContextDocument("e", "", Source::Manual), PreconditionError);
  EXPECT_THROW(ContextDocument("e", "\xff", Source::Manual), Error);
}

TEST(Timestamp, FormatsAndParsesUtc) {
  const auto t = parse_timestamp("2025-03-01T12:34:56Z");
  EXPECT_EQ(format_timestamp(t), "2025-03-01T12:34:56Z");
  EXPECT_THROW(parse_timestamp("2025-03-01 12:34:56"), Error);
}

TEST(ValidateAnnotation, SingleSentenceType1IsOk) {
  const auto d = fx::doc("assam", fx::kAssamContext);
  const auto sentences = sentences_of(d);
  EXPECT_TRUE(validate_annotation(ann({sentences[0]}, AnnotationType::Type1), d, sentences).ok());
}

TEST(ValidateAnnotation, OverlappingSpansAreReported) {
  const auto d = fx::doc("assam", fx::kAssamContext);
  const auto r =
      validate_annotation(ann({{0, 10}, {5, 15}}, AnnotationType::Type3), d, sentences_of(d));
  EXPECT_TRUE(r.has(violation::kOverlap));
}

TEST(ValidateAnnotation, ReefClauseWithSubjectIsType3) {
  const auto d = fx::doc("reef", fx::kReefContext);
  const auto a = ann({span_of(d, fx::kReefSubject), span_of(d, fx::kReefClause)},
                     AnnotationType::Type3);
  EXPECT_TRUE(validate_annotation(a, d, sentences_of(d)).ok());
}

TEST(ValidateAnnotation, MalformedSpansAreViolationsNotCrashes) {
  const auto d = fx::doc("assam", fx::kAssamContext);
  const auto s = sentences_of(d);
  EXPECT_TRUE(validate_annotation(ann({{5, 5}}, AnnotationType::Type2), d, s).has(violation::kEmptySpan));
  EXPECT_TRUE(validate_annotation(ann({{0, 100000}}, AnnotationType::Type2), d, s)
                  .has(violation::kSpanOutOfRange));
  EXPECT_TRUE(validate_annotation(ann({}, AnnotationType::Type1), d, s).has(violation::kNoSpans));
  EXPECT_TRUE(validate_annotation(ann({{20, 30}, {0, 10}}, AnnotationType::Type3), d, s)
                  .has(violation::kUnsorted));
}

TEST(ValidateAnnotation, TypeRules) {
  const auto d = fx::doc("assam", fx::kAssamContext);
  const auto s = sentences_of(d);
  const Span first = s[0];
  const Span sub{first.start, first.end - 5};
  EXPECT_TRUE(validate_annotation(ann({sub}, AnnotationType::Type1), d, s)
                  .has(violation::kType1NotSentence));
  EXPECT_TRUE(validate_annotation(ann({s[0], s[1]}, AnnotationType::Type1), d, s)
                  .has(violation::kType1SpanCount));
  EXPECT_TRUE(validate_annotation(ann({first}, AnnotationType::Type2), d, s)
                  .has(violation::kType2FullSentence));
  EXPECT_TRUE(validate_annotation(ann({{s[0].start, s[1].end}}, AnnotationType::Type2), d, s)
                  .has(violation::kType2CrossesSentence));
  EXPECT_TRUE(validate_annotation(ann({sub}, AnnotationType::Type2), d, s).ok());
  EXPECT_TRUE(validate_annotation(ann({sub}, AnnotationType::Type3), d, s)
                  .has(violation::kType3SingleSegment));
  // A single span across a sentence boundary is the multi-segment escape hatch.
  EXPECT_TRUE(validate_annotation(ann({{s[0].start, s[1].end}}, AnnotationType::Type3), d, s).ok());
}

TEST(SpansToQuotes, Examples) {
  const auto d = fx::doc("assam", fx::kAssamContext);
  const auto s = sentences_of(d);
  EXPECT_EQ(spans_to_quotes(std::vector<Span>{s[0]}, d),
            std::vector<std::string>{"Dispur is the capital of the state of Assam in India."});
  EXPECT_TRUE(spans_to_quotes(std::vector<Span>{}, d).empty());
  EXPECT_EQ(spans_to_quotes(std::vector<Span>{{0, d.length()}}, d).front(), d.text());
  try {
    spans_to_quotes(std::vector<Span>{s[0], {3, 100000}}, d);
    FAIL() << "expected RangeError";
  } catch (const RangeError& e) {
    EXPECT_EQ(e.span_index(), 1u);
  }
}

TEST(QuotesToSpans, UniqueQuoteResolves) {
  const auto d = fx::doc("flag", fx::kFlagContext);
  const std::vector<std::string> quotes{fx::kFlagGoldQuote};
  const auto r = quotes_to_spans(quotes, d);
  ASSERT_EQ(r.spans.size(), 1u);
  EXPECT_TRUE(r.unique());
  EXPECT_EQ(d.slice(r.spans[0]), fx::kFlagGoldQuote);
  EXPECT_EQ(r.spans[0].start, fx::kFlagContext.find(fx::kFlagGoldQuote));
}

TEST(QuotesToSpans, AbsentQuoteIsNotVerbatim) {
  const auto d = fx::doc("flag", fx::kFlagContext);
  const std::vector<std::string> quotes{"The flag has four colours"};
  try {
    quotes_to_spans(quotes, d);
    FAIL() << "expected NotVerbatimError";
  } catch (const NotVerbatimError& e) {
    EXPECT_EQ(e.quote(), "The flag has four colours");
    EXPECT_EQ(e.quote_index(), 0u);
  }
}

TEST(QuotesToSpans, RepeatedQuotePicksOccurrenceNearestPreviousSpan) {
  //                  0         1         2         3         4         5
  //                  0123456789012345678901234567890123456789012345678901234
  const auto d = fx::doc("rep", "alpha beta. gamma delta beta. epsilon beta zeta.");
  const std::vector<std::string> quotes{"epsilon", "beta"};
  const auto r = quotes_to_spans(quotes, d);
  ASSERT_EQ(r.ambiguities.size(), 1u);
  EXPECT_EQ(r.ambiguities[0].quote_index, 1u);
  EXPECT_EQ(r.ambiguities[0].occurrences, 3u);
  EXPECT_EQ(r.spans[1].start, 38u);
}

// Exhaustive oracle: every assignment of occurrences, minimal summed gap
// between consecutive spans, ties to the lexicographically first assignment.
std::vector<Span> brute_force_resolve(const std::vector<std::vector<Span>>& options) {
  std::vector<std::size_t> idx(options.size(), 0);
  std::vector<std::size_t> best;
  std::size_t best_cost = std::numeric_limits<std::size_t>::max();
  while (true) {
    std::size_t cost = 0;
    for (std::size_t i = 1; i < idx.size(); ++i) {
      const Span a = options[i - 1][idx[i - 1]];
      const Span b = options[i][idx[i]];
      cost += a.end <= b.start ? b.start - a.end : (b.end <= a.start ? a.start - b.end : 0);
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = idx;
    }
    bool wrapped = true;
    for (std::size_t k = idx.size(); k-- > 0;) {
      if (++idx[k] < options[k].size()) {
        wrapped = false;
        break;
      }
      idx[k] = 0;
    }
    if (wrapped) break;
  }
  std::vector<Span> out;
  for (std::size_t i = 0; i < best.size(); ++i) out.push_back(options[i][best[i]]);
  return out;
}

TEST(QuotesToSpans, MatchesExhaustiveAssignmentOracle) {
  std::mt19937_64 rng(7);
  const std::vector<std::string> words{"red", "blue", "red blue", "green", "blue red"};
  int checked = 0;
  for (int round = 0; round < 1500; ++round) {
    std::string text;
    const auto n = 4 + rng() % 14;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) text += rng() % 4 == 0 ? ". " : " ";
      text += words[rng() % words.size()];
    }
    const auto d = fx::doc("r", text);
    std::vector<std::string> quotes;
    std::vector<std::vector<Span>> options;
    const auto q = 1 + rng() % 4;
    for (std::size_t i = 0; i < q; ++i) {
      const auto& w = words[rng() % words.size()];
      const auto occ = find_occurrences(d.chars(), text::decode_utf8(w));
      if (occ.empty()) continue;
      quotes.push_back(w);
      options.emplace_back();
      for (auto o : occ) options.back().push_back({o, o + w.size()});
    }
    if (quotes.empty()) continue;
    const auto got = quotes_to_spans(quotes, d);
    EXPECT_EQ(got.spans, brute_force_resolve(options)) << text;
    ++checked;
  }
  EXPECT_GT(checked, 1000);
}

TEST(SpanAlgebraProperty, QuoteRoundTripOnUniqueQuotes) {
  testkit::ProseGenerator gen(11);
  int checked = 0;
  for (int round = 0; round < 1000; ++round) {
    const auto d = fx::doc("p", gen.document());
    // Random sorted non-overlapping spans.
    std::vector<std::size_t> cuts;
    const auto k = 2 * (1 + gen.pick(3));
    for (std::size_t i = 0; i < k; ++i) cuts.push_back(gen.pick(d.length() + 1));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::vector<Span> spans;
    for (std::size_t i = 0; i + 1 < cuts.size(); i += 2) spans.push_back({cuts[i], cuts[i + 1]});
    if (spans.empty()) continue;
    const auto quotes = spans_to_quotes(spans, d);
    const bool all_unique = std::all_of(quotes.begin(), quotes.end(), [&](const std::string& q) {
      return find_occurrences(d.chars(), text::decode_utf8(q)).size() == 1;
    });
    const auto back = quotes_to_spans(quotes, d);
    if (all_unique) {
      EXPECT_EQ(back.spans, spans);
      ++checked;
    }
    EXPECT_EQ(spans_to_quotes(back.spans, d), quotes);
  }
  EXPECT_GT(checked, 100);
}

TEST(ValidateAnnotationProperty, PureAndType2ShorterThanSentences) {
  testkit::ProseGenerator gen(3);
  int type2_ok = 0;
  for (int round = 0; round < 1000; ++round) {
    const auto d = fx::doc("p", gen.document());
    const auto s = sentences_of(d);
    const auto& sent = s[gen.pick(s.size())];
    const auto a = sent.start + gen.pick(sent.length());
    const auto b = a + 1 + gen.pick(sent.end - a);
    const auto annotation = ann({Span{a, b}}, AnnotationType::Type2);
    const auto r1 = validate_annotation(annotation, d, s);
    const auto r2 = validate_annotation(annotation, d, s);
    EXPECT_EQ(r1.summary(), r2.summary());
    if (r1.ok()) {
      ++type2_ok;
      EXPECT_LT(b - a, sent.length());
    }
  }
  EXPECT_GT(type2_ok, 500);
}

TEST(JsonIo, InstanceRoundTripsAndOmitsAbsentGold) {
  auto inst = fx::instance("q2", fx::kFlagContext, fx::kFlagQuestion, fx::kFlagAnswer);
  auto j = json_io::to_json(inst);
  EXPECT_FALSE(j.contains("gold"));
  EXPECT_EQ(json_io::instance_from_json(j), inst);

  inst.gold = ann({{39, 102}}, AnnotationType::Type2);
  inst.gold->created_at = parse_timestamp("2025-01-02T03:04:05Z");
  j = json_io::to_json(inst);
  EXPECT_EQ(j["gold"]["type"], "type2");
  EXPECT_EQ(j["gold"]["created_at"], "2025-01-02T03:04:05Z");
  EXPECT_EQ(j["context"]["source"], "manual");
  EXPECT_EQ(json_io::instance_from_json(j), inst);
}

TEST(JsonIo, MissingKeyNamesThePath) {
  auto j = json_io::to_json(fx::instance("q", fx::kFlagContext, "q?", "a"));
  j["context"].erase("text");
  try {
    json_io::instance_from_json(j, "line 3");
    FAIL();
  } catch (const IngestionError& e) {
    EXPECT_EQ(e.path(), "line 3.context.text");
  }
}
