#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subcite/augment.hpp"
#include "subcite/model.hpp"
#include "subcite/segment.hpp"

namespace subcite::datakit {

struct ImportResult {
  std::vector<QAInstance> instances;
  std::vector<std::string> warnings;
};

/// SQuAD/XQuAD JSON. One instance per question; the first answer wins;
/// questions without answers are skipped with a warning.
ImportResult import_squad(const std::filesystem::path& file);
ImportResult import_squad(const nlohmann::json& doc);

/// HotpotQA JSON list. Paragraphs render as "Title\n\nsentences" and are
/// separated by blank lines. Supporting facts become a draft gold citation.
ImportResult import_hotpotqa(const std::filesystem::path& file,
                             const segment::SegmentOptions& segmentation = {});
ImportResult import_hotpotqa(const nlohmann::json& doc,
                             const segment::SegmentOptions& segmentation = {});

struct CorpusStats {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> ratios{};
  std::size_t total = 0;

  std::size_t count(AnnotationType t) const { return counts[static_cast<std::size_t>(t)]; }
  double ratio(AnnotationType t) const { return ratios[static_cast<std::size_t>(t)]; }
};

/// Throws PreconditionError on an empty corpus or one with unannotated
/// instances (their ids are listed).
CorpusStats compute_stats(const std::vector<QAInstance>& corpus);

nlohmann::json to_json(const CorpusStats& stats);

struct Split {
  std::vector<QAInstance> train;
  std::vector<QAInstance> test;
};

/// Seeded shuffle stratified by annotation type (unannotated instances form
/// their own stratum). Each side keeps the corpus order.
Split split(const std::vector<QAInstance>& corpus, double train_fraction, std::uint64_t seed);

struct MixPolicy {
  double min_fine_grained_ratio = 0.8;
  void check() const;
};

/// Type2, or Type3 with at least one span short of a full sentence.
bool is_fine_grained(const QAInstance& inst, const segment::SegmentOptions& segmentation = {});

struct ExportManifest {
  std::size_t total = 0;
  std::size_t fine = 0;
  std::size_t coarse = 0;
  double ratio = 0.0;
  std::string sha256;
  std::size_t coarse_dropped = 0;

  friend bool operator==(const ExportManifest&, const ExportManifest&) = default;
};

nlohmann::json to_json(const ExportManifest& m);

/// System message of every exported record.
extern const std::string kCitationInstruction;

/// One chat record: system instruction, context plus question, and the
/// answer followed by one <cite>quote</cite> line per span.
nlohmann::json chat_record(const QAInstance& inst);

/// Writes chat JSONL for the annotated seed instances and the accepted or
/// downgraded candidates. Coarse records beyond what the policy allows are
/// dropped from the end. Throws PreconditionError for pending or rejected
/// candidates, unannotated seeds, or nothing to export.
ExportManifest export_finetune(const std::vector<QAInstance>& seed_corpus,
                               const std::vector<augment::CandidateExample>& pool,
                               const MixPolicy& policy, std::ostream& out,
                               const segment::SegmentOptions& segmentation = {});

/// Writes `out` and `<out>.manifest.json`.
ExportManifest export_finetune(const std::vector<QAInstance>& seed_corpus,
                               const std::vector<augment::CandidateExample>& pool,
                               const MixPolicy& policy, const std::filesystem::path& out,
                               const segment::SegmentOptions& segmentation = {});

}  // namespace subcite::datakit
