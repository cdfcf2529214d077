#include "subcite/evalharness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <set>

#include "subcite/annotation.hpp"
#include "subcite/error.hpp"
#include "subcite/json_io.hpp"

namespace subcite::evalharness {

using nlohmann::json;

MethodRun load_predictions(const std::filesystem::path& file, std::string method_name,
                           const std::vector<QAInstance>& corpus,
                           const segment::SegmentOptions& segmentation) {
  std::map<std::string, const QAInstance*> by_id;
  for (const auto& inst : corpus) by_id.emplace(inst.id, &inst);

  MethodRun run;
  run.method_name = std::move(method_name);
  run.metadata["predictions"] = file.filename().string();
  json_io::read_jsonl(file, [&](const json& rec, std::size_t line) {
    const auto path = "line " + std::to_string(line);
    auto id = json_io::string_member(rec, "id", path);
    if (run.predictions.count(id)) throw IngestionError(path + ".id", "duplicate prediction " + id);
    if (rec.contains("spans")) {
      json ann = rec;
      ann.erase("id");
      if (!ann.contains("annotator")) ann["annotator"] = run.method_name;
      if (!ann.contains("created_at")) ann["created_at"] = format_timestamp(Timestamp{});
      run.predictions.emplace(std::move(id), json_io::annotation_from_json(ann, path));
      return;
    }
    const auto& quotes = json_io::member(rec, "quotes", path);
    if (!quotes.is_array() || quotes.empty()) {
      throw IngestionError(path + ".quotes", "expected a non-empty list of strings");
    }
    auto inst = by_id.find(id);
    if (inst == by_id.end()) throw IngestionError(path + ".id", "unknown instance " + id);
    const auto& doc = inst->second->context;
    std::vector<Span> spans;
    try {
      spans = quotes_to_spans(quotes.get<std::vector<std::string>>(), doc).spans;
    } catch (const NotVerbatimError& e) {
      throw IngestionError(path + ".quotes[" + std::to_string(e.quote_index()) + "]", e.what());
    } catch (const json::exception& e) {
      throw IngestionError(path + ".quotes", e.what());
    }
    std::sort(spans.begin(), spans.end());
    const auto sentences = segment::split_sentences(doc.chars(), segmentation).sentences;
    const auto type = classify_spans(spans, sentences);
    if (!type) throw IngestionError(path + ".quotes", "quotes overlap");
    run.predictions.emplace(std::move(id),
                            CitationAnnotation{spans, *type, run.method_name, Timestamp{}});
  });
  return run;
}

std::size_t MetricReport::missing() const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(), [](const InstanceRow& r) { return r.missing; }));
}

Aggregates aggregate(const std::vector<InstanceRow>& rows, bool with_quality) {
  Aggregates a;
  if (with_quality) a.quality = 0.0;
  if (rows.empty()) return a;
  for (const auto& r : rows) {
    a.f1 += r.f1;
    a.precision += r.precision;
    a.recall += r.recall;
    a.cosine += r.cosine;
    if (with_quality) *a.quality += r.quality.value_or(0.0);
  }
  const auto n = static_cast<double>(rows.size());
  a.f1 /= n;
  a.precision /= n;
  a.recall /= n;
  a.cosine /= n;
  if (with_quality) *a.quality /= n;
  return a;
}

bool aggregates_consistent(const MetricReport& report, double tolerance) {
  if (report.rows.empty()) return true;
  const auto expect = aggregate(report.rows, report.aggregates.quality.has_value());
  auto close = [&](double x, double y) { return std::abs(x - y) <= tolerance; };
  return close(expect.f1, report.aggregates.f1) &&
         close(expect.precision, report.aggregates.precision) &&
         close(expect.recall, report.aggregates.recall) &&
         close(expect.cosine, report.aggregates.cosine) &&
         (!expect.quality || close(*expect.quality, *report.aggregates.quality));
}

MetricReport evaluate_run(const MethodRun& run, const std::vector<QAInstance>& corpus,
                          const metrics::QualityWeights& weights, const Judge& judge,
                          const segment::SegmentOptions& segmentation) {
  weights.check();
  std::map<std::string, const QAInstance*> by_id;
  for (const auto& inst : corpus) by_id.emplace(inst.id, &inst);
  for (const auto& [id, _] : run.predictions) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw PreconditionError("prediction for unknown instance " + id);
    if (!it->second->gold) throw PreconditionError("prediction for unannotated instance " + id);
  }

  MetricReport report;
  report.method = run.method_name;
  report.weights = weights;
  report.metadata = run.metadata;
  report.metadata["judge"] = static_cast<bool>(judge);
  for (const auto& inst : corpus) {
    if (!inst.gold) continue;
    InstanceRow row;
    row.id = inst.id;
    auto pred = run.predictions.find(inst.id);
    if (pred == run.predictions.end()) {
      row.missing = true;
      if (judge) row.quality = 0.0;
      report.rows.push_back(std::move(row));
      continue;
    }
    std::optional<metrics::JudgeScores> scores;
    if (judge) scores = judge(inst, pred->second);
    const auto m = metrics::evaluate_instance(pred->second, *inst.gold, inst.context, scores,
                                              weights, segmentation);
    row.f1 = m.f1.f1;
    row.precision = m.f1.precision;
    row.recall = m.f1.recall;
    row.cosine = m.cosine;
    row.quality = m.quality;
    report.rows.push_back(std::move(row));
  }
  report.aggregates = aggregate(report.rows, static_cast<bool>(judge));
  return report;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    std::string l;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      l += c + 1 == cells.size() ? cells[c] : pad(cells[c], width[c]) + "  ";
    }
    while (!l.empty() && l.back() == ' ') l.pop_back();
    out += l + "\n";
  };
  line(header);
  std::vector<std::string> rule;
  for (auto w : width) rule.push_back(std::string(w, '-'));
  line(rule);
  for (const auto& r : rows) line(r);
  return out;
}

}  // namespace

json to_json(const MetricReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"id", r.id},
                    {"f1", r.f1},
                    {"precision", r.precision},
                    {"recall", r.recall},
                    {"cosine", r.cosine},
                    {"quality", optional_number(r.quality)},
                    {"missing", r.missing}});
  }
  const auto& a = report.aggregates;
  return {{"method", report.method},
          {"weights",
           {{"accuracy", report.weights.accuracy},
            {"conciseness", report.weights.conciseness},
            {"readability", report.weights.readability}}},
          {"metadata", report.metadata},
          {"aggregates",
           {{"f1", a.f1},
            {"precision", a.precision},
            {"recall", a.recall},
            {"cosine", a.cosine},
            {"quality", optional_number(a.quality)}}},
          {"missing", report.missing()},
          {"rows", std::move(rows)}};
}

MetricReport report_from_json(const json& j) {
  try {
    MetricReport r;
    r.method = j.at("method").get<std::string>();
    if (auto w = j.find("weights"); w != j.end()) {
      r.weights = {w->at("accuracy").get<double>(), w->at("conciseness").get<double>(),
                   w->at("readability").get<double>()};
    }
    if (auto m = j.find("metadata"); m != j.end()) r.metadata = *m;
    const auto& a = j.at("aggregates");
    r.aggregates.f1 = a.at("f1").get<double>();
    r.aggregates.precision = a.value("precision", 0.0);
    r.aggregates.recall = a.value("recall", 0.0);
    r.aggregates.cosine = a.at("cosine").get<double>();
    r.aggregates.quality = read_optional(a, "quality");
    if (auto rows = j.find("rows"); rows != j.end()) {
      for (const auto& row : *rows) {
        r.rows.push_back({row.at("id").get<std::string>(), row.at("f1").get<double>(),
                          row.at("precision").get<double>(), row.at("recall").get<double>(),
                          row.at("cosine").get<double>(), read_optional(row, "quality"),
                          row.value("missing", false)});
      }
    }
    return r;
  } catch (const json::exception& e) {
    throw IngestionError("report", e.what());
  }
}

Rendered render_comparison(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw PreconditionError("no reports to compare");

  // Best is judged on the rendered value so display ties are all marked.
  std::vector<std::array<std::optional<std::string>, 3>> cells;
  for (const auto& r : reports) {
    cells.push_back({fixed4(r.aggregates.f1), fixed4(r.aggregates.cosine),
                     r.aggregates.quality ? std::optional(fixed4(*r.aggregates.quality))
                                          : std::nullopt});
  }
  std::array<std::optional<double>, 3> best;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 3; ++c) {
      if (!row[c]) continue;
      const double v = std::stod(*row[c]);
      if (!best[c] || v > *best[c]) best[c] = v;
    }
  }

  const std::array<const char*, 3> keys = {"f1", "cosine", "quality"};
  std::vector<std::vector<std::string>> text_rows;
  json rows = json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    std::vector<std::string> line = {reports[i].method};
    json row = {{"method", reports[i].method}};
    json marked = json::array();
    for (std::size_t c = 0; c < 3; ++c) {
      const auto& cell = cells[i][c];
      if (!cell) {
        line.emplace_back();
        row[keys[c]] = nullptr;
        continue;
      }
      const bool is_best = std::stod(*cell) == *best[c];
      line.push_back(*cell + (is_best ? "*" : ""));
      row[keys[c]] = std::stod(*cell);
      if (is_best) marked.push_back(keys[c]);
    }
    row["best"] = std::move(marked);
    rows.push_back(std::move(row));
    text_rows.push_back(std::move(line));
  }

  Rendered out;
  out.text = render_table({"Method", "F1", "CS", "Judge"}, text_rows);
  json weights = json::array();
  for (const auto& r : reports) {
    weights.push_back({{"method", r.method},
                       {"accuracy", r.weights.accuracy},
                       {"conciseness", r.weights.conciseness},
                       {"readability", r.weights.readability}});
  }
  out.data = {{"columns", {"method", "f1", "cosine", "quality"}},
              {"rows", std::move(rows)},
              {"weights", std::move(weights)}};
  return out;
}

Rendered render_ablation(const std::vector<AblationPoint>& points) {
  if (points.empty()) throw PreconditionError("no ablation points");
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].sample_size <= points[i - 1].sample_size) {
      throw PreconditionError("sample sizes must be strictly increasing");
    }
  }
  std::vector<std::vector<std::string>> rows;
  json data = json::array();
  for (const auto& p : points) {
    rows.push_back({std::to_string(p.sample_size), fixed4(p.f1)});
    data.push_back({{"sample_size", p.sample_size}, {"f1", std::stod(fixed4(p.f1))}});
  }
  return {render_table({"Samples", "F1"}, rows), {{"points", std::move(data)}}};
}

std::vector<AblationPoint> ablation_from_json(const json& j) {
  try {
    std::vector<AblationPoint> out;
    for (const auto& p : j.at("points")) {
      out.push_back({p.at("sample_size").get<std::size_t>(), p.at("f1").get<double>()});
    }
    return out;
  } catch (const json::exception& e) {
    throw IngestionError("ablation", e.what());
  }
}

}  // namespace subcite::evalharness
