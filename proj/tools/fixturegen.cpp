// Regenerates the committed test fixtures under tests/fixtures.
//
//   subcite-fixturegen <fixtures-dir>
//
// Output is deterministic; rerunning it on an unchanged tree leaves git clean.

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subcite/annotation.hpp"
#include "subcite/augment.hpp"
#include "subcite/cli.hpp"
#include "subcite/credit.hpp"
#include "subcite/hash.hpp"
#include "subcite/json_io.hpp"
#include "subcite/llm.hpp"
#include "subcite/segment.hpp"
#include "subcite/store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace subcite;

namespace {

const std::array<const char*, 16> kPlaces = {
    "Harbor", "Granite", "Willow", "Copper", "Meadow", "Falcon", "Juniper", "Cedar",
    "Lantern", "Orchard", "Basalt", "Heron",  "Quarry", "Saffron", "Tundra", "Amber"};
const std::array<const char*, 10> kFirst = {"Ana",   "Tomas", "Lena", "Omar", "Ines",
                                            "Pavel", "Yara",  "Hugo", "Mina", "Rafael"};
const std::array<const char*, 9> kLast = {"Okafor", "Lindqvist", "Moreau", "Tanaka", "Silva",
                                          "Novak",  "Haddad",    "Brennan", "Kowalski"};
const std::array<const char*, 4> kDirections = {"north", "south", "east", "west"};

struct Museum {
  std::string place, director, year, paintings, direction, text;
};

Museum museum(std::size_t i) {
  Museum m;
  m.place = std::string(kPlaces[i % kPlaces.size()]) + " Valley";
  if (i >= kPlaces.size()) m.place += " " + std::to_string(i / kPlaces.size() + 1);
  m.director = std::string(kFirst[i % kFirst.size()]) + " " + kLast[(i / 3) % kLast.size()];
  m.year = std::to_string(1900 + (i * 7) % 120);
  m.paintings = std::to_string(120 + i * 3);
  m.direction = kDirections[i % kDirections.size()];
  m.text = "The " + m.place + " museum opened in " + m.year + ", and it holds " + m.paintings +
           " paintings. Its director is " + m.director + ". Visitors reach the building by train "
           "from the " + m.direction + " district. The collection began with a single donation, "
           "but it grew quickly after the war.";
  return m;
}

QAInstance annotated(const std::string& id, const std::string& question, const std::string& answer,
                     const ContextDocument& doc, const std::vector<std::string>& quotes,
                     AnnotationType expected, const std::string& annotator) {
  auto spans = quotes_to_spans(quotes, doc).spans;
  std::sort(spans.begin(), spans.end());
  const auto sentences = segment::split_sentences(doc.chars()).sentences;
  const auto type = classify_spans(spans, sentences);
  if (!type || *type != expected) throw Error(id + ": quotes do not form the expected type");
  CitationAnnotation ann{spans, expected, annotator, parse_timestamp("2025-03-01T12:00:00Z")};
  if (auto v = validate_annotation(ann, doc, sentences); !v.ok()) {
    throw Error(id + ": " + v.summary());
  }
  return QAInstance{id, question, answer, doc, ann};
}

// Type mix per block of 20: 3 Type1, 7 Type2, 10 Type3.
AnnotationType type_for(std::size_t i) {
  const auto r = i % 20;
  if (r < 3) return AnnotationType::Type1;
  if (r < 10) return AnnotationType::Type2;
  return AnnotationType::Type3;
}

QAInstance corpus_instance(const std::string& prefix, std::size_t i, AnnotationType type,
                           Source source) {
  const auto m = museum(i);
  char id[32];
  std::snprintf(id, sizeof id, "%s-%04zu", prefix.c_str(), i + 1);
  const ContextDocument doc("ctx-" + std::string(id), m.text, source);
  const std::string annotator = i % 2 ? "annotator-b" : "annotator-a";
  switch (type) {
    case AnnotationType::Type1:
      return annotated(id, "Who directs the museum in " + m.place + "?", m.director, doc,
                       {"Its director is " + m.director + "."}, type, annotator);
    case AnnotationType::Type2:
      return annotated(id, "When did the " + m.place + " museum open?", m.year, doc,
                       {"The " + m.place + " museum opened in " + m.year}, type, annotator);
    case AnnotationType::Type3:
      break;
  }
  return annotated(id, "How many paintings does the museum directed by " + m.director + " hold?",
                   m.paintings + " paintings", doc,
                   {"it holds " + m.paintings + " paintings", "Its director is " + m.director},
                   type, annotator);
}

std::vector<QAInstance> reference_corpus() {
  std::vector<QAInstance> out;
  for (std::size_t i = 0; i < 800; ++i) {
    out.push_back(corpus_instance("inst", i, type_for(i), Source::XorAttriQA));
  }
  return out;
}

// Four of each type.
std::vector<QAInstance> pipeline_corpus() {
  std::vector<QAInstance> out;
  for (std::size_t i = 0; i < 12; ++i) {
    out.push_back(
        corpus_instance("pipe", 200 + i, kAllAnnotationTypes[i % 3], Source::XorAttriQA));
  }
  return out;
}

struct Fragments {
  std::vector<std::string> sentences;
  std::vector<std::vector<std::string>> clauses;
};

Fragments fragments(const ContextDocument& doc) {
  Fragments f;
  const auto map = segment::segment_document(doc.chars());
  for (std::size_t s = 0; s < map.sentences.size(); ++s) {
    f.sentences.push_back(doc.slice(map.sentences[s]));
    std::vector<std::string> cl;
    for (auto span : segment::clause_spans(map.sentences[s], map.clause_boundaries[s], doc.chars())) {
      cl.push_back(doc.slice(span));
    }
    f.clauses.push_back(cl);
  }
  return f;
}

std::string last_words(const std::string& quote, std::size_t n) {
  const auto tokens = segment::tokenize(std::string_view(quote));
  std::string out;
  const auto from = tokens.size() > n ? tokens.size() - n : 0;
  for (auto i = from; i < tokens.size(); ++i) {
    if (!out.empty()) out += ' ';
    out += tokens.tokens[i];
  }
  return out;
}

json record(const std::string& ctx, const std::string& q, const std::string& a,
            const std::vector<std::string>& quotes) {
  json j;
  j["context_id"] = ctx;
  j["question"] = q;
  j["answer"] = a;
  j["citation_quotes"] = quotes;
  return j;
}

// Pretends to be a generation model: reads the target contexts out of the
// prompt and writes records that cite them in several shapes.
class ScriptedGenerator : public llm::GenerationBackend {
 public:
  ScriptedGenerator(std::vector<ContextDocument> pool, bool paraphrase)
      : pool_(std::move(pool)), paraphrase_(paraphrase) {}

  llm::GenerationResponse complete(const llm::GenerationRequest& req) override {
    const auto& prompt = req.user_prompt;
    const auto task = prompt.find("## Task");
    std::size_t batch = 0;
    if (auto b = prompt.find(" Batch ", task); b != std::string::npos) {
      batch = std::stoul(prompt.substr(b + 7));
    }
    std::vector<const ContextDocument*> targets;
    for (auto p = prompt.find("Context [", task); p != std::string::npos;
         p = prompt.find("Context [", p + 1)) {
      const auto id = prompt.substr(p + 9, prompt.find(']', p) - p - 9);
      for (const auto& d : pool_) {
        if (d.id() == id) targets.push_back(&d);
      }
    }
    const std::size_t n = paraphrase_ ? 10 : 5;
    std::ostringstream out;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& doc = *targets[k % targets.size()];
      const auto f = fragments(doc);
      const auto tag = std::to_string(batch) + "." + std::to_string(k);
      json rec;
      switch ((batch * n + k) % 5) {
        case 0: {
          const auto& s = f.sentences[(batch + k) % f.sentences.size()];
          rec = record(doc.id(), "What does sentence " + tag + " state?", last_words(s, 2), {s});
          break;
        }
        case 1: {
          const auto& c = f.clauses[0][0];
          rec = record(doc.id(), "Which fact opens passage " + tag + "?", last_words(c, 1), {c});
          break;
        }
        case 2: {
          const auto& c1 = f.clauses[0][1];
          const auto& c2 = f.clauses[1][0];
          rec = record(doc.id(), "What links the fragments in " + tag + "?",
                       last_words(c1, 2) + " with " + last_words(c2, 2), {c1, c2});
          break;
        }
        case 3: {
          const auto& c = f.clauses[3][0];
          rec = record(doc.id(), "Who wrote passage " + tag + "?", "Nobody knows", {c});
          break;
        }
        default: {
          const auto& c = f.clauses[3].back();
          rec = record(doc.id(), "How did the collection change in " + tag + "?", last_words(c, 3),
                       {c});
        }
      }
      if (paraphrase_ && k == 6) {
        rec["question"] = "When did the museum in " + tag + " open its doors?";
        rec["citation_quotes"] = {"The museum first opened its doors to the public"};
      }
      out << rec.dump() << "\n";
    }
    llm::GenerationResponse resp;
    resp.text = out.str();
    resp.backend_id = id();
    resp.created = parse_timestamp("2025-03-02T09:00:00Z");
    resp.usage = {static_cast<int>(req.user_prompt.size() / 4), static_cast<int>(out.str().size() / 4)};
    return resp;
  }

  std::string id() const override { return "scripted:generator"; }

 private:
  std::vector<ContextDocument> pool_;
  bool paraphrase_;
};

void record_cassette(const fs::path& file, const std::vector<QAInstance>& corpus,
                     std::size_t target, bool paraphrase) {
  fs::remove(file);
  const auto tmp = fs::temp_directory_path() / ("subcite-fixturegen-" + file.stem().string());
  fs::remove_all(tmp);
  service::Store store(tmp);
  store.add_instances(corpus);
  const auto state = store.snapshot();
  const cli::Config config;
  const auto seeds = cli::pick_seeds(*state, 6);
  const auto opts = cli::expand_options(config, *state);
  auto cassette = std::make_shared<llm::Cassette>(file);
  auto inner = std::make_shared<ScriptedGenerator>(opts.contexts, paraphrase);
  if (paraphrase) {
    // A single response; later requests miss the cassette.
    const auto req = augment::expansion_request(seeds, augment::PromptTemplate::standard(), opts, 0);
    cassette->record(req, inner->complete(req));
  } else {
    llm::RecordingBackend backend(inner, cassette);
    const auto result = augment::expand(seeds, augment::PromptTemplate::standard(), backend,
                                        target, opts);
    std::cout << result.candidates.size() << " candidates, " << result.rejects.size()
              << " rejects; ";
  }
  std::cout << file.filename().string() << ": " << cassette->size() << " responses\n";
  fs::remove_all(tmp);
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
}

json report(const std::string& method, double f1, double cs, double judge) {
  return {{"method", method},
          {"aggregates", {{"f1", f1}, {"cosine", cs}, {"quality", judge}}},
          {"rows", json::array()},
          {"metadata", {{"origin", "reference aggregates"}}}};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: subcite-fixturegen <fixtures-dir>\n";
    return 2;
  }
  try {
    const fs::path dir = argv[1];
    fs::create_directories(dir / "golden");

    json_io::write_instances(dir / "reference_corpus.jsonl", reference_corpus());
    const auto pipeline = pipeline_corpus();
    json_io::write_instances(dir / "pipeline_corpus.jsonl", pipeline);
    record_cassette(dir / "pipeline_cassette.jsonl", pipeline, 24, false);
    record_cassette(dir / "paraphrase_cassette.jsonl", pipeline, 10, true);

    json comparison = {{"reports",
                    {report("Qwen2.5-7B", 0.4616, 0.5542, 0.4839),
                     report("Subcite-Qwen2.5-7B", 0.7319, 0.7977, 0.7624),
                     report("LlaMa3.1-8B", 0.3976, 0.4692, 0.4358),
                     report("LongCite-llama3.1-8B", 0.5328, 0.6021, 0.5637),
                     report("Subcite-llama3.1-8B", 0.6547, 0.7336, 0.6953)}}};
    write_text(dir / "comparison_reports.json", comparison.dump(2) + "\n");
    json ablation = {{"points",
                    {{{"sample_size", 500}, {"f1", 0.7319}},
                     {{"sample_size", 700}, {"f1", 0.7387}},
                     {{"sample_size", 1000}, {"f1", 0.7653}}}}};
    write_text(dir / "ablation_points.json", ablation.dump(2) + "\n");

    // Prompt snapshots.
    const auto state_corpus = pipeline;
    std::vector<QAInstance> seeds(state_corpus.begin(), state_corpus.begin() + 3);
    augment::PromptOptions po;
    po.batch = 0;
    po.model_name = "gen-model";
    const auto gen = augment::build_prompt(seeds, augment::PromptTemplate::standard(), 5, po);
    write_text(dir / "golden" / "expansion_prompt.txt",
               "[system]\n" + gen.system_prompt + "\n[user]\n" + gen.user_prompt);
    const auto judge = credit::judge_request(state_corpus[2], {"judge-model", 64});
    write_text(dir / "golden" / "judge_prompt.txt",
               "[system]\n" + judge.system_prompt + "\n[user]\n" + judge.user_prompt);
    std::cout << "fixtures written to " << dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
