#include "subcite/augment.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "subcite/annotation.hpp"
#include "subcite/error.hpp"
#include "subcite/hash.hpp"
#include "subcite/json_io.hpp"

namespace subcite::augment {

using nlohmann::json;

std::string_view to_string(CandidateStatus s) {
  switch (s) {
    case CandidateStatus::Pending: return "pending";
    case CandidateStatus::Accepted: return "accepted";
    case CandidateStatus::Rejected: return "rejected";
    case CandidateStatus::Downgraded: return "downgraded";
  }
  return "pending";
}

std::optional<CandidateStatus> try_parse_candidate_status(std::string_view s) {
  for (auto st : {CandidateStatus::Pending, CandidateStatus::Accepted, CandidateStatus::Rejected,
                  CandidateStatus::Downgraded}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

void CandidateExample::transition(CandidateStatus next) {
  if (next == CandidateStatus::Pending) throw PreconditionError("cannot return to pending");
  if (status != CandidateStatus::Pending) {
    throw ConflictError("candidate " + id() + " is already " + std::string(to_string(status)));
  }
  status = next;
}

std::string candidate_id(std::string_view context_id, std::string_view question,
                         std::span<const Span> spans) {
  std::string key;
  key.append(context_id).append("\n").append(question).append("\n");
  for (auto s : spans) key += std::to_string(s.start) + "-" + std::to_string(s.end) + ",";
  return "cand-" + sha256_hex(key).substr(0, 16);
}

json to_json(const CandidateExample& cand) {
  json j = json_io::to_json(cand.instance);
  j["provenance"] = {{"backend_id", cand.provenance.backend_id},
                     {"prompt_fingerprint", cand.provenance.prompt_fingerprint},
                     {"created_at", format_timestamp(cand.provenance.created_at)}};
  j["credit"] = cand.credit ? json(*cand.credit) : json(nullptr);
  j["status"] = std::string(to_string(cand.status));
  return j;
}

CandidateExample candidate_from_json(const json& j, const std::string& path) {
  CandidateExample cand{json_io::instance_from_json(j, path), {}, std::nullopt,
                        CandidateStatus::Pending};
  const auto prefix = path.empty() ? std::string() : path + ".";
  const auto& prov = json_io::member(j, "provenance", path);
  cand.provenance.backend_id = json_io::string_member(prov, "backend_id", prefix + "provenance");
  cand.provenance.prompt_fingerprint =
      json_io::string_member(prov, "prompt_fingerprint", prefix + "provenance");
  try {
    cand.provenance.created_at =
        parse_timestamp(json_io::string_member(prov, "created_at", prefix + "provenance"));
  } catch (const IngestionError&) {
    throw;
  } catch (const Error& e) {
    throw IngestionError(prefix + "provenance.created_at", e.what());
  }
  if (auto it = j.find("credit"); it != j.end() && !it->is_null()) {
    if (!it->is_number()) throw IngestionError(prefix + "credit", "expected a number or null");
    cand.credit = it->get<double>();
  }
  const auto status = json_io::string_member(j, "status", path);
  auto parsed = try_parse_candidate_status(status);
  if (!parsed) throw IngestionError(prefix + "status", "unknown status \"" + status + "\"");
  cand.status = *parsed;
  return cand;
}

std::vector<CandidateExample> read_candidates(const std::filesystem::path& file) {
  std::vector<CandidateExample> out;
  json_io::read_jsonl(file, [&](const json& j, std::size_t line) {
    out.push_back(candidate_from_json(j, "line " + std::to_string(line)));
  });
  return out;
}

void write_candidates(const std::filesystem::path& file,
                      const std::vector<CandidateExample>& candidates) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + file.string());
  for (const auto& c : candidates) out << json_io::dump_line(to_json(c)) << '\n';
}

PromptTemplate PromptTemplate::standard() {
  PromptTemplate t;
  t.system_prompt =
      "You create question answering training data with fine-grained citations. "
      "You follow the requested output format exactly.";
  t.task_instruction =
      "Read each context and write question-answer pairs that the context answers. "
      "For every pair, cite the smallest fragments of the context that support the answer. "
      "A citation may be a whole sentence, part of a sentence, or several separate fragments "
      "when the answer needs more than one.";
  t.constraints = {
      "Citations must provide accurate support for answer content.",
      "Maintain fluency: each cited fragment must read as natural, coherent text.",
      "Copy every cited fragment character for character from the context. Do not paraphrase.",
      "Leave out parts of a sentence that do not help verify the answer.",
      "If the answer needs an entity named elsewhere, also cite the nearest fragment naming it.",
  };
  t.output_schema_hint =
      "One JSON object per line, with keys \"context_id\", \"question\", \"answer\" and "
      "\"citation_quotes\" (a list of strings). No other text.";
  return t;
}

namespace {

std::string render_record(const std::string& context_id, const std::string& question,
                          const std::string& answer, const std::vector<std::string>& quotes) {
  nlohmann::ordered_json j;
  j["context_id"] = context_id;
  j["question"] = question;
  j["answer"] = answer;
  j["citation_quotes"] = quotes;
  return j.dump();
}

void render_context(std::ostringstream& out, const ContextDocument& doc) {
  out << "Context [" << doc.id() << "]:\n" << doc.text() << "\n";
}

}  // namespace

llm::GenerationRequest build_prompt(std::span<const QAInstance> seeds, const PromptTemplate& tmpl,
                                    std::size_t n_requested, const PromptOptions& options) {
  if (seeds.empty()) throw PreconditionError("at least one seed example is required");
  if (seeds.size() > kMaxFewShot) {
    throw PreconditionError("at most " + std::to_string(kMaxFewShot) + " seed examples");
  }
  if (n_requested == 0) throw PreconditionError("n_requested must be at least 1");
  for (const auto& s : seeds) {
    if (!s.gold) throw PreconditionError("seed " + s.id + " has no gold annotation");
  }

  std::ostringstream out;
  out << tmpl.task_instruction << "\n\n## Examples\n";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& s = seeds[i];
    out << "\n### Example " << i + 1 << " (" << to_string(s.gold->type) << ")\nInput:\n";
    render_context(out, s.context);
    out << "Output:\n"
        << render_record(s.context.id(), s.question, s.answer,
                         spans_to_quotes(s.gold->spans, s.context))
        << "\n";
  }
  out << "\n## Requirements\n";
  for (const auto& c : tmpl.constraints) out << "- " << c << "\n";
  out << "\n## Output format\n" << tmpl.output_schema_hint << "\n";

  std::vector<ContextDocument> targets = options.targets;
  if (targets.empty()) {
    std::set<std::string> seen;
    for (const auto& s : seeds) {
      if (seen.insert(s.context.id()).second) targets.push_back(s.context);
    }
  }
  out << "\n## Task\nWrite " << n_requested << (n_requested == 1 ? " new entry" : " new entries")
      << " for the contexts below.";
  if (options.batch) out << " Batch " << *options.batch << ".";
  out << "\n";
  for (const auto& t : targets) {
    out << "\n";
    render_context(out, t);
  }

  llm::GenerationRequest req;
  req.system_prompt = tmpl.system_prompt;
  req.user_prompt = out.str();
  req.model_name = options.model_name;
  req.temperature = options.temperature;
  req.max_tokens = options.max_tokens;
  req.check();
  return req;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

// Pulls record candidates out of the raw completion. Records that fail to
// parse become malformed rejects.
std::vector<json> extract_records(std::string_view raw, std::vector<ParseReject>& rejects) {
  std::string body;
  for (std::size_t pos = 0; pos <= raw.size();) {
    auto nl = raw.find('\n', pos);
    if (nl == std::string_view::npos) nl = raw.size();
    auto line = raw.substr(pos, nl - pos);
    if (!trim(line).starts_with("```")) body.append(line).append("\n");
    pos = nl + 1;
  }

  std::vector<json> records;
  auto whole = json::parse(body, nullptr, false);
  if (!whole.is_discarded()) {
    if (whole.is_array()) return whole.get<std::vector<json>>();
    if (whole.is_object()) {
      if (auto it = whole.find("candidates"); it != whole.end() && it->is_array()) {
        return it->get<std::vector<json>>();
      }
      return {whole};
    }
  }

  std::size_t index = 0;
  std::istringstream lines(body);
  for (std::string line; std::getline(lines, line);) {
    auto t = trim(line);
    if (!t.starts_with("{")) continue;
    auto j = json::parse(t, nullptr, false);
    if (j.is_discarded()) {
      rejects.push_back({std::string(reject::kMalformed), "record is not valid JSON", index});
      records.push_back(nullptr);
    } else {
      records.push_back(std::move(j));
    }
    ++index;
  }
  if (index == 0) rejects.push_back({std::string(reject::kMalformed), "no records found", {}});
  return records;
}

std::optional<std::string> non_empty_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return std::nullopt;
  auto s = it->get<std::string>();
  if (trim(s).empty()) return std::nullopt;
  return s;
}

}  // namespace

ParseResult parse_candidates(std::string_view raw, std::span<const ContextDocument> contexts,
                             const Provenance& provenance,
                             const segment::SegmentOptions& segmentation) {
  ParseResult result;
  auto records = extract_records(raw, result.rejects);

  std::map<std::string, const ContextDocument*> by_id;
  for (const auto& c : contexts) by_id.emplace(c.id(), &c);
  std::map<std::string, std::vector<Span>> sentence_cache;

  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.is_null()) continue;  // already rejected
    auto malformed = [&](std::string detail) {
      result.rejects.push_back({std::string(reject::kMalformed), std::move(detail), r});
    };
    if (!rec.is_object()) {
      malformed("record is not an object");
      continue;
    }
    auto context_id = non_empty_string(rec, "context_id");
    auto question = non_empty_string(rec, "question");
    auto answer = non_empty_string(rec, "answer");
    auto quotes_it = rec.find("citation_quotes");
    if (!context_id || !question || !answer) {
      malformed("missing context_id, question or answer");
      continue;
    }
    if (quotes_it == rec.end() || !quotes_it->is_array() || quotes_it->empty() ||
        !std::all_of(quotes_it->begin(), quotes_it->end(),
                     [](const json& q) { return q.is_string(); })) {
      malformed("citation_quotes must be a non-empty list of strings");
      continue;
    }
    auto ctx = by_id.find(*context_id);
    if (ctx == by_id.end()) {
      result.rejects.push_back({std::string(reject::kUnknownContext), *context_id, r});
      continue;
    }
    const auto& doc = *ctx->second;
    const auto quotes = quotes_it->get<std::vector<std::string>>();

    std::vector<Span> spans;
    try {
      spans = quotes_to_spans(quotes, doc).spans;
    } catch (const NotVerbatimError& e) {
      result.rejects.push_back({std::string(reject::kNotVerbatim), e.quote(), r});
      continue;
    }
    std::sort(spans.begin(), spans.end());

    auto [cached, fresh] = sentence_cache.try_emplace(doc.id());
    if (fresh) cached->second = segment::split_sentences(doc.chars(), segmentation).sentences;
    const auto& sentences = cached->second;

    auto type = classify_spans(spans, sentences);
    if (!type) {
      result.rejects.push_back({std::string(reject::kInvalidCitation), "overlapping quotes", r});
      continue;
    }
    CitationAnnotation ann{spans, *type, provenance.backend_id, provenance.created_at};
    if (auto v = validate_annotation(ann, doc, sentences); !v.ok()) {
      result.rejects.push_back({std::string(reject::kInvalidCitation), v.summary(), r});
      continue;
    }
    QAInstance inst{candidate_id(doc.id(), *question, spans), *question, *answer, doc,
                    std::move(ann)};
    result.candidates.push_back({std::move(inst), provenance, std::nullopt,
                                 CandidateStatus::Pending});
  }
  std::stable_sort(result.rejects.begin(), result.rejects.end(),
                   [](const ParseReject& a, const ParseReject& b) {
                     return a.record.value_or(SIZE_MAX) < b.record.value_or(SIZE_MAX);
                   });
  return result;
}

namespace {

std::vector<ContextDocument> target_pool(std::span<const QAInstance> seeds,
                                         const ExpandOptions& options) {
  if (!options.contexts.empty()) return options.contexts;
  std::vector<ContextDocument> pool;
  std::set<std::string> seen;
  for (const auto& s : seeds) {
    if (seen.insert(s.context.id()).second) pool.push_back(s.context);
  }
  return pool;
}

}  // namespace

llm::GenerationRequest expansion_request(std::span<const QAInstance> seeds,
                                         const PromptTemplate& tmpl, const ExpandOptions& options,
                                         std::size_t index) {
  if (seeds.empty()) throw PreconditionError("at least one seed example is required");
  std::map<AnnotationType, std::vector<std::size_t>> by_type;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!seeds[i].gold) throw PreconditionError("seed " + seeds[i].id + " has no gold annotation");
    by_type[seeds[i].gold->type].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> groups;
  for (const auto& [_, members] : by_type) groups.push_back(&members);

  // Round-robin over types, advancing the starting type and each type's
  // seed cursor with the request index.
  const std::size_t want = std::min({options.few_shot, seeds.size(), kMaxFewShot});
  const std::size_t n_types = groups.size();
  std::vector<QAInstance> chosen;
  std::set<std::size_t> used;
  for (std::size_t j = 0; chosen.size() < want && j < want * seeds.size() + n_types; ++j) {
    const auto& members = *groups[(index + j) % n_types];
    const auto pick = members[(index + j / n_types) % members.size()];
    if (used.insert(pick).second) chosen.push_back(seeds[pick]);
  }

  PromptOptions prompt;
  const auto pool = target_pool(seeds, options);
  const auto per = std::min(std::max<std::size_t>(options.contexts_per_request, 1), pool.size());
  for (std::size_t k = 0; k < per; ++k) prompt.targets.push_back(pool[(index * per + k) % pool.size()]);
  prompt.batch = index;
  prompt.model_name = options.model_name;
  prompt.temperature = options.temperature;
  prompt.max_tokens = options.max_tokens;
  return build_prompt(chosen, tmpl, std::max<std::size_t>(options.per_request, 1), prompt);
}

ExpandResult expand(std::span<const QAInstance> seeds, const PromptTemplate& tmpl,
                    llm::GenerationBackend& backend, std::size_t target_count,
                    const ExpandOptions& options) {
  if (target_count == 0) throw PreconditionError("target_count must be at least 1");
  const auto pool = target_pool(seeds, options);
  const std::size_t budget = std::max<std::size_t>(options.budget_factor, 1) * target_count;
  const std::size_t in_flight = std::max<std::size_t>(options.max_in_flight, 1);

  ExpandResult result;
  std::set<std::string> seen;
  bool stopped = false;
  while (!stopped && result.requests < budget && result.candidates.size() < target_count) {
    const auto batch = std::min(in_flight, budget - result.requests);
    std::vector<llm::GenerationRequest> requests;
    for (std::size_t k = 0; k < batch; ++k) {
      requests.push_back(expansion_request(seeds, tmpl, options, result.requests + k));
    }
    std::vector<std::future<llm::GenerationResponse>> pending;
    for (const auto& req : requests) {
      pending.push_back(std::async(batch == 1 ? std::launch::deferred : std::launch::async,
                                   [&backend, &req] { return backend.complete(req); }));
    }
    for (std::size_t k = 0; k < batch; ++k) {
      if (result.candidates.size() >= target_count) break;
      llm::GenerationResponse resp;
      try {
        resp = pending[k].get();
      } catch (const CassetteMissError& e) {
        result.warnings.push_back("cassette has no response for request " +
                                  std::to_string(result.requests + k) + "; stopping");
        stopped = true;
        break;
      }
      Provenance prov{resp.backend_id.empty() ? backend.id() : resp.backend_id,
                      llm::fingerprint(requests[k]), resp.created};
      auto parsed = parse_candidates(resp.text, pool, prov, options.segmentation);
      for (auto& r : parsed.rejects) result.rejects.push_back(std::move(r));
      for (auto& c : parsed.candidates) {
        if (!seen.insert(c.id()).second) {
          ++result.duplicates;
          continue;
        }
        result.candidates.push_back(std::move(c));
      }
    }
    // Wait for requests whose results were not needed.
    for (auto& f : pending) {
      if (f.valid()) f.wait();
    }
    result.requests += batch;
  }

  if (result.candidates.size() > target_count) {
    result.candidates.erase(result.candidates.begin() + static_cast<std::ptrdiff_t>(target_count),
                            result.candidates.end());
  }
  if (result.candidates.size() < target_count) {
    result.warnings.push_back("collected " + std::to_string(result.candidates.size()) + " of " +
                              std::to_string(target_count) + " candidates after " +
                              std::to_string(result.requests) + " requests");
  }
  for (const auto& c : result.candidates) ++result.type_counts[c.instance.gold->type];
  return result;
}

}  // namespace subcite::augment
