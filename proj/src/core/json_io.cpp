#include "subcite/json_io.hpp"

#include <fstream>
#include <ostream>

#include "subcite/error.hpp"

namespace subcite::json_io {

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::size_t offset_member(const json& j, const char* key, const std::string& path) {
  const auto& v = member(j, key, path);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw IngestionError(join(path, key), "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

const json& member(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw IngestionError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw IngestionError(join(path, key), "missing required key");
  return *it;
}

std::string string_member(const json& j, const char* key, const std::string& path) {
  const auto& v = member(j, key, path);
  if (!v.is_string()) throw IngestionError(join(path, key), "expected a string");
  return v.get<std::string>();
}

json to_json(Span s) { return {{"start", s.start}, {"end", s.end}}; }

json to_json(const ContextDocument& doc) {
  return {{"id", doc.id()}, {"text", doc.text()}, {"source", std::string(to_string(doc.source()))}};
}

json to_json(const CitationAnnotation& ann) {
  json spans = json::array();
  for (auto s : ann.spans) spans.push_back(to_json(s));
  return {{"spans", std::move(spans)},
          {"type", std::string(to_string(ann.type))},
          {"annotator", ann.annotator},
          {"created_at", format_timestamp(ann.created_at)}};
}

json to_json(const QAInstance& inst) {
  json j = {{"id", inst.id},
            {"question", inst.question},
            {"answer", inst.answer},
            {"context", to_json(inst.context)}};
  if (inst.gold) j["gold"] = to_json(*inst.gold);
  return j;
}

Span span_from_json(const json& j, const std::string& path) {
  return {offset_member(j, "start", path), offset_member(j, "end", path)};
}

ContextDocument context_from_json(const json& j, const std::string& path) {
  auto id = string_member(j, "id", path);
  auto text = string_member(j, "text", path);
  Source source = Source::Manual;
  if (j.contains("source")) {
    try {
      source = parse_source(string_member(j, "source", path));
    } catch (const IngestionError&) {
      throw;
    } catch (const Error& e) {
      throw IngestionError(join(path, "source"), e.what());
    }
  }
  try {
    return ContextDocument(std::move(id), std::move(text), source);
  } catch (const Error& e) {
    throw IngestionError(join(path, "text"), e.what());
  }
}

CitationAnnotation annotation_from_json(const json& j, const std::string& path) {
  CitationAnnotation ann;
  const auto& spans = member(j, "spans", path);
  if (!spans.is_array()) throw IngestionError(join(path, "spans"), "expected an array");
  for (std::size_t i = 0; i < spans.size(); ++i) {
    ann.spans.push_back(span_from_json(spans[i], join(path, "spans") + "[" + std::to_string(i) + "]"));
  }
  const auto type = try_parse_annotation_type(string_member(j, "type", path));
  if (!type) throw IngestionError(join(path, "type"), "expected type1, type2 or type3");
  ann.type = *type;
  ann.annotator = j.contains("annotator") ? string_member(j, "annotator", path) : "";
  if (j.contains("created_at")) {
    try {
      ann.created_at = parse_timestamp(string_member(j, "created_at", path));
    } catch (const IngestionError&) {
      throw;
    } catch (const Error& e) {
      throw IngestionError(join(path, "created_at"), e.what());
    }
  }
  return ann;
}

QAInstance instance_from_json(const json& j, const std::string& path) {
  QAInstance inst{string_member(j, "id", path), string_member(j, "question", path),
                  string_member(j, "answer", path),
                  context_from_json(member(j, "context", path), join(path, "context")),
                  std::nullopt};
  if (j.contains("gold") && !j.at("gold").is_null()) {
    inst.gold = annotation_from_json(j.at("gold"), join(path, "gold"));
  }
  try {
    inst.check();
  } catch (const Error& e) {
    throw IngestionError(path, e.what());
  }
  return inst;
}

void read_jsonl(const std::filesystem::path& file,
                const std::function<void(const json&, std::size_t)>& on_record) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IngestionError(file.string(), "cannot open file");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IngestionError("line " + std::to_string(line_no), e.what());
    }
    on_record(j, line_no);
  }
}

std::string dump_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::strict); }

void write_jsonl(std::ostream& out, const std::vector<json>& records) {
  for (const auto& r : records) out << dump_line(r) << '\n';
}

std::vector<QAInstance> read_instances(const std::filesystem::path& file) {
  std::vector<QAInstance> out;
  read_jsonl(file, [&](const json& j, std::size_t line) {
    out.push_back(instance_from_json(j, "line " + std::to_string(line)));
  });
  return out;
}

void write_instances(const std::filesystem::path& file, const std::vector<QAInstance>& instances) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + file.string());
  for (const auto& inst : instances) out << dump_line(to_json(inst)) << '\n';
}

}  // namespace subcite::json_io
