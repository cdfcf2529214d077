#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subcite/model.hpp"

namespace subcite::json_io {

using json = nlohmann::json;

json to_json(Span s);
json to_json(const ContextDocument& doc);
json to_json(const CitationAnnotation& ann);
json to_json(const QAInstance& inst);

/// Parsers throw IngestionError with a JSON-pointer-like path on bad input.
Span span_from_json(const json& j, const std::string& path = "");
ContextDocument context_from_json(const json& j, const std::string& path = "");
CitationAnnotation annotation_from_json(const json& j, const std::string& path = "");
QAInstance instance_from_json(const json& j, const std::string& path = "");

/// Required-member accessors used by every schema reader.
const json& member(const json& j, const char* key, const std::string& path);
std::string string_member(const json& j, const char* key, const std::string& path);

/// Reads a JSONL file line by line; blank lines are skipped. The callback
/// receives the parsed record and the 1-based line number.
void read_jsonl(const std::filesystem::path& file,
                const std::function<void(const json&, std::size_t)>& on_record);
void write_jsonl(std::ostream& out, const std::vector<json>& records);

std::vector<QAInstance> read_instances(const std::filesystem::path& file);
void write_instances(const std::filesystem::path& file, const std::vector<QAInstance>& instances);

/// Serialises with a stable layout (compact, insertion-independent key order).
std::string dump_line(const json& j);

}  // namespace subcite::json_io
