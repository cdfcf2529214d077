#include "subcite/datakit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "subcite/annotation.hpp"
#include "subcite/error.hpp"
#include "subcite/hash.hpp"
#include "subcite/json_io.hpp"
#include "subcite/text.hpp"

namespace subcite::datakit {

using nlohmann::json;

namespace {

std::string context_id(const std::string& text) { return "ctx-" + sha256_hex(text).substr(0, 12); }

json load_json(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IngestionError(file.string(), "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IngestionError(file.string(), std::string("invalid JSON: ") + e.what());
  }
}

std::string at(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const json& array_member(const json& j, const char* key, const std::string& path) {
  const auto& v = json_io::member(j, key, path);
  if (!v.is_array()) throw IngestionError(path + "." + key, "expected an array");
  return v;
}

}  // namespace

ImportResult import_squad(const std::filesystem::path& file) { return import_squad(load_json(file)); }

ImportResult import_squad(const json& doc) {
  ImportResult out;
  std::set<std::string> ids;
  const auto& data = array_member(doc, "data", "");
  for (std::size_t d = 0; d < data.size(); ++d) {
    const auto dpath = at("data", d);
    const auto& paragraphs = array_member(data[d], "paragraphs", dpath);
    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
      const auto ppath = at(dpath + ".paragraphs", p);
      const auto text = json_io::string_member(paragraphs[p], "context", ppath);
      if (text.empty()) throw IngestionError(ppath + ".context", "empty context");
      const ContextDocument context(context_id(text), text, Source::XQuAD);
      const auto& qas = array_member(paragraphs[p], "qas", ppath);
      for (std::size_t q = 0; q < qas.size(); ++q) {
        const auto qpath = at(ppath + ".qas", q);
        auto id = json_io::string_member(qas[q], "id", qpath);
        auto question = json_io::string_member(qas[q], "question", qpath);
        const auto& answers = array_member(qas[q], "answers", qpath);
        if (answers.empty()) {
          out.warnings.push_back(qpath + ": no answers, skipped");
          continue;
        }
        auto answer = json_io::string_member(answers[0], "text", qpath + ".answers[0]");
        if (question.empty() || answer.empty()) {
          out.warnings.push_back(qpath + ": empty question or answer, skipped");
          continue;
        }
        if (!ids.insert(id).second) {
          out.warnings.push_back(qpath + ": duplicate id " + id + ", skipped");
          continue;
        }
        out.instances.push_back(
            {std::move(id), std::move(question), std::move(answer), context, std::nullopt});
      }
    }
  }
  return out;
}

ImportResult import_hotpotqa(const std::filesystem::path& file,
                             const segment::SegmentOptions& segmentation) {
  return import_hotpotqa(load_json(file), segmentation);
}

ImportResult import_hotpotqa(const json& doc, const segment::SegmentOptions& segmentation) {
  if (!doc.is_array()) throw IngestionError("", "expected a list of records");
  ImportResult out;
  std::set<std::string> ids;
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const auto rpath = at("", r);
    const auto& rec = doc[r];
    std::string id = rec.is_object() && rec.contains("_id") ? json_io::string_member(rec, "_id", rpath)
                                                            : json_io::string_member(rec, "id", rpath);
    auto question = json_io::string_member(rec, "question", rpath);
    auto answer = json_io::string_member(rec, "answer", rpath);
    const auto& paragraphs = array_member(rec, "context", rpath);

    // Build the text while remembering each sentence's trimmed extent.
    std::string body;
    std::size_t length = 0;  // in scalar values
    std::map<std::pair<std::string, std::size_t>, Span> sentence_at;
    auto append = [&](const std::string& piece) {
      body += piece;
      length += text::decode_utf8(piece).size();
    };
    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
      const auto ppath = at(rpath + ".context", p);
      const auto& para = paragraphs[p];
      if (!para.is_array() || para.size() != 2 || !para[0].is_string() || !para[1].is_array()) {
        throw IngestionError(ppath, "expected [title, [sentences]]");
      }
      const auto title = para[0].get<std::string>();
      if (p > 0) append("\n\n");
      append(title);
      append("\n\n");
      bool first = true;
      for (std::size_t s = 0; s < para[1].size(); ++s) {
        if (!para[1][s].is_string()) throw IngestionError(at(ppath + "[1]", s), "expected a string");
        const auto sentence = para[1][s].get<std::string>();
        const auto chars = text::decode_utf8(sentence);
        std::size_t lead = 0;
        while (lead < chars.size() && text::is_space(chars[lead])) ++lead;
        if (lead == chars.size()) continue;
        std::size_t trail = chars.size();
        while (text::is_space(chars[trail - 1])) --trail;
        if (!first && lead == 0 && !body.empty() && !std::isspace(static_cast<unsigned char>(body.back()))) {
          append(" ");
        }
        sentence_at[{title, s}] = Span{length + lead, length + trail};
        append(sentence);
        first = false;
      }
    }
    if (body.empty() || question.empty() || answer.empty()) {
      out.warnings.push_back(rpath + ": empty context, question or answer, skipped");
      continue;
    }
    if (!ids.insert(id).second) {
      out.warnings.push_back(rpath + ": duplicate id " + id + ", skipped");
      continue;
    }
    const ContextDocument context(context_id(body), body, Source::HotpotQA);
    QAInstance inst{std::move(id), std::move(question), std::move(answer), context, std::nullopt};

    if (auto it = rec.find("supporting_facts"); it != rec.end() && it->is_array() && !it->empty()) {
      std::set<Span> spans;
      for (std::size_t f = 0; f < it->size(); ++f) {
        const auto& fact = (*it)[f];
        if (!fact.is_array() || fact.size() != 2 || !fact[0].is_string() ||
            !fact[1].is_number_integer()) {
          throw IngestionError(at(rpath + ".supporting_facts", f), "expected [title, index]");
        }
        const auto key = std::make_pair(fact[0].get<std::string>(),
                                        static_cast<std::size_t>(fact[1].get<long long>()));
        auto found = sentence_at.find(key);
        if (found == sentence_at.end()) {
          out.warnings.push_back(at(rpath + ".supporting_facts", f) + ": no such sentence");
          continue;
        }
        spans.insert(found->second);
      }
      if (!spans.empty()) {
        const std::vector<Span> sorted(spans.begin(), spans.end());
        const auto sentences = segment::split_sentences(context.chars(), segmentation).sentences;
        const auto type = classify_spans(sorted, sentences);
        CitationAnnotation draft{sorted, type.value_or(AnnotationType::Type3),
                                 "hotpotqa-supporting-facts", Timestamp{}};
        if (type && validate_annotation(draft, context, sentences).ok()) {
          inst.gold = std::move(draft);
        } else {
          out.warnings.push_back(rpath + ": supporting facts do not form a valid citation");
        }
      }
    }
    out.instances.push_back(std::move(inst));
  }
  return out;
}

CorpusStats compute_stats(const std::vector<QAInstance>& corpus) {
  if (corpus.empty()) throw PreconditionError("corpus is empty");
  std::vector<std::string> missing;
  CorpusStats stats;
  for (const auto& inst : corpus) {
    if (!inst.gold) {
      missing.push_back(inst.id);
      continue;
    }
    ++stats.counts[static_cast<std::size_t>(inst.gold->type)];
  }
  if (!missing.empty()) {
    std::string ids;
    for (const auto& id : missing) ids += (ids.empty() ? "" : ", ") + id;
    throw PreconditionError("instances without gold annotation: " + ids);
  }
  stats.total = corpus.size();
  for (std::size_t t = 0; t < 3; ++t) {
    stats.ratios[t] = static_cast<double>(stats.counts[t]) / static_cast<double>(stats.total);
  }
  return stats;
}

json to_json(const CorpusStats& stats) {
  json counts, ratios;
  for (auto t : kAllAnnotationTypes) {
    counts[std::string(to_string(t))] = stats.count(t);
    ratios[std::string(to_string(t))] = stats.ratio(t);
  }
  return {{"total", stats.total}, {"counts", counts}, {"ratios", ratios}};
}

namespace {

// Uniform in [0, n) without modulo bias; std distributions differ across
// standard libraries.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const auto r = rng();
    if (r >= threshold) return r % n;
  }
}

}  // namespace

Split split(const std::vector<QAInstance>& corpus, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw PreconditionError("train_fraction must lie strictly between 0 and 1");
  }
  const auto n = corpus.size();
  if (n < 2) throw PreconditionError("cannot split fewer than 2 instances");

  std::array<std::vector<std::size_t>, 4> strata;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& g = corpus[i].gold;
    strata[g ? static_cast<std::size_t>(g->type) : 3].push_back(i);
  }

  auto total_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  total_train = std::clamp<std::size_t>(total_train, 1, n - 1);

  std::array<std::size_t, 4> quota{};
  std::array<double, 4> frac{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 4; ++s) {
    const double exact = static_cast<double>(strata[s].size()) * train_fraction;
    quota[s] = static_cast<std::size_t>(std::floor(exact));
    frac[s] = exact - static_cast<double>(quota[s]);
    assigned += quota[s];
  }
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < total_train && k < 8; ++k) {
    const auto s = order[k % 4];
    if (quota[s] < strata[s].size() && (k >= 4 || frac[s] > 0)) {
      ++quota[s];
      ++assigned;
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<bool> in_train(n, false);
  for (std::size_t s = 0; s < 4; ++s) {
    auto& members = strata[s];
    for (std::size_t i = members.size(); i > 1; --i) {
      std::swap(members[i - 1], members[bounded(rng, i)]);
    }
    for (std::size_t k = 0; k < quota[s]; ++k) in_train[members[k]] = true;
  }

  Split out;
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? out.train : out.test).push_back(corpus[i]);
  return out;
}

void MixPolicy::check() const {
  if (!(min_fine_grained_ratio >= 0.0 && min_fine_grained_ratio <= 1.0)) {
    throw ConfigError("min_fine_grained_ratio must lie in [0, 1]");
  }
}

bool is_fine_grained(const QAInstance& inst, const segment::SegmentOptions& segmentation) {
  if (!inst.gold) return false;
  switch (inst.gold->type) {
    case AnnotationType::Type1: return false;
    case AnnotationType::Type2: return true;
    case AnnotationType::Type3: break;
  }
  const auto sentences = segment::split_sentences(inst.context.chars(), segmentation).sentences;
  return std::any_of(inst.gold->spans.begin(), inst.gold->spans.end(), [&](Span s) {
    return std::find(sentences.begin(), sentences.end(), s) == sentences.end();
  });
}

json to_json(const ExportManifest& m) {
  return {{"total", m.total}, {"fine", m.fine},     {"coarse", m.coarse},
          {"ratio", m.ratio}, {"sha256", m.sha256}, {"coarse_dropped", m.coarse_dropped}};
}

const std::string kCitationInstruction =
    "Answer the question using the context. After the answer, list the exact fragments of the "
    "context that support it, one per line, each wrapped in <cite></cite>. Cite only what the "
    "answer needs.";

json chat_record(const QAInstance& inst) {
  if (!inst.gold) throw PreconditionError("instance " + inst.id + " has no citation");
  std::string assistant = inst.answer;
  for (const auto& q : spans_to_quotes(inst.gold->spans, inst.context)) {
    assistant += "\n<cite>" + q + "</cite>";
  }
  return {{"messages",
           json::array({{{"role", "system"}, {"content", kCitationInstruction}},
                        {{"role", "user"},
                         {"content", "Context:\n" + inst.context.text() +
                                         "\n\nQuestion: " + inst.question}},
                        {{"role", "assistant"}, {"content", assistant}}})}};
}

namespace {

std::size_t allowed_coarse(std::size_t fine, std::size_t coarse, double r) {
  if (r <= 0.0) return coarse;
  if (fine == 0) return 0;
  const double f = static_cast<double>(fine);
  auto c = static_cast<std::size_t>(std::floor(f * (1.0 - r) / r + 1e-9));
  c = std::min(c, coarse);
  while (c > 0 && f < r * (f + static_cast<double>(c)) - 1e-12) --c;
  return c;
}

}  // namespace

ExportManifest export_finetune(const std::vector<QAInstance>& seed_corpus,
                               const std::vector<augment::CandidateExample>& pool,
                               const MixPolicy& policy, std::ostream& out,
                               const segment::SegmentOptions& segmentation) {
  policy.check();
  std::vector<const QAInstance*> records;
  for (const auto& inst : seed_corpus) {
    if (!inst.gold) throw PreconditionError("seed instance " + inst.id + " has no gold citation");
    records.push_back(&inst);
  }
  for (const auto& cand : pool) {
    if (cand.status != augment::CandidateStatus::Accepted &&
        cand.status != augment::CandidateStatus::Downgraded) {
      throw PreconditionError("candidate " + cand.id() + " is " +
                              std::string(augment::to_string(cand.status)) +
                              "; only accepted or downgraded candidates can be exported");
    }
    records.push_back(&cand.instance);
  }
  if (records.empty()) throw PreconditionError("nothing to export");

  std::vector<bool> fine(records.size());
  std::size_t n_fine = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    fine[i] = is_fine_grained(*records[i], segmentation);
    n_fine += fine[i];
  }
  const std::size_t n_coarse = records.size() - n_fine;
  const std::size_t keep = allowed_coarse(n_fine, n_coarse, policy.min_fine_grained_ratio);
  if (n_fine + keep == 0) throw PreconditionError("mix policy leaves nothing to export");

  std::string body;
  std::size_t kept_coarse = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!fine[i]) {
      if (kept_coarse == keep) continue;
      ++kept_coarse;
    }
    body += json_io::dump_line(chat_record(*records[i]));
    body += '\n';
  }
  out << body;

  ExportManifest m;
  m.fine = n_fine;
  m.coarse = keep;
  m.total = n_fine + keep;
  m.ratio = static_cast<double>(n_fine) / static_cast<double>(m.total);
  m.coarse_dropped = n_coarse - keep;
  m.sha256 = sha256_hex(body);
  return m;
}

ExportManifest export_finetune(const std::vector<QAInstance>& seed_corpus,
                               const std::vector<augment::CandidateExample>& pool,
                               const MixPolicy& policy, const std::filesystem::path& out,
                               const segment::SegmentOptions& segmentation) {
  std::ostringstream buffer;
  auto m = export_finetune(seed_corpus, pool, policy, buffer, segmentation);
  {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + out.string());
    f << buffer.str();
  }
  std::ofstream mf(out.string() + ".manifest.json", std::ios::binary | std::ios::trunc);
  if (!mf) throw Error("cannot write manifest for " + out.string());
  mf << to_json(m).dump(2) << '\n';
  return m;
}

}  // namespace subcite::datakit
