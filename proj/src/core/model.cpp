#include "subcite/model.hpp"

#include <cstdio>
#include <ctime>

#include "subcite/error.hpp"
#include "subcite/text.hpp"

namespace subcite {

std::string_view to_string(Source s) {
  switch (s) {
    case Source::XorAttriQA: return "xor-attriqa";
    case Source::XQuAD: return "xquad";
    case Source::HotpotQA: return "hotpotqa";
    case Source::Synthetic: return "synthetic";
    case Source::Manual: return "manual";
  }
  return "manual";
}

Source parse_source(std::string_view s) {
  if (s == "xor-attriqa") return Source::XorAttriQA;
  if (s == "xquad") return Source::XQuAD;
  if (s == "hotpotqa") return Source::HotpotQA;
  if (s == "synthetic") return Source::Synthetic;
  if (s == "manual") return Source::Manual;
  throw Error("unknown context source \"" + std::string(s) + "\"");
}

std::string_view to_string(AnnotationType t) {
  switch (t) {
    case AnnotationType::Type1: return "type1";
    case AnnotationType::Type2: return "type2";
    case AnnotationType::Type3: return "type3";
  }
  return "type1";
}

std::optional<AnnotationType> try_parse_annotation_type(std::string_view s) {
  if (s == "type1") return AnnotationType::Type1;
  if (s == "type2") return AnnotationType::Type2;
  if (s == "type3") return AnnotationType::Type3;
  return std::nullopt;
}

AnnotationType parse_annotation_type(std::string_view s) {
  if (auto t = try_parse_annotation_type(s)) return *t;
  throw Error("unknown annotation type \"" + std::string(s) + "\"");
}

std::string format_timestamp(Timestamp t) {
  const std::time_t secs = t.time_since_epoch().count();
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Timestamp parse_timestamp(std::string_view s) {
  std::tm tm{};
  int consumed = 0;
  const std::string str(s);
  if (std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2dZ%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday,
                  &tm.tm_hour, &tm.tm_min, &tm.tm_sec, &consumed) != 6 ||
      static_cast<std::size_t>(consumed) != str.size()) {
    throw Error("invalid UTC timestamp \"" + str + "\" (expected YYYY-MM-DDTHH:MM:SSZ)");
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  return Timestamp{std::chrono::seconds{timegm(&tm)}};
}

ContextDocument::ContextDocument(std::string id, std::string text, Source source)
    : id_(std::move(id)),
      text_(std::move(text)),
      source_(source),
      chars_(std::make_shared<const std::u32string>(text::decode_utf8(text_))) {
  if (text_.empty()) throw PreconditionError("context " + id_ + ": text is empty");
}

std::string ContextDocument::slice(Span span) const {
  return text::encode_utf8(chars().substr(span.start, span.length()));
}

void QAInstance::check() const {
  if (question.empty()) throw PreconditionError("instance " + id + ": question is empty");
  if (answer.empty()) throw PreconditionError("instance " + id + ": answer is empty");
}

}  // namespace subcite
