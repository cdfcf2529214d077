#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "subcite/llm.hpp"
#include "subcite/model.hpp"
#include "subcite/segment.hpp"

namespace subcite::augment {

enum class CandidateStatus { Pending, Accepted, Rejected, Downgraded };

std::string_view to_string(CandidateStatus s);
std::optional<CandidateStatus> try_parse_candidate_status(std::string_view s);

struct Provenance {
  std::string backend_id;
  std::string prompt_fingerprint;
  Timestamp created_at{};

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// A machine-generated QA pair with its parsed citation in `instance.gold`.
struct CandidateExample {
  QAInstance instance;
  Provenance provenance;
  std::optional<double> credit;
  CandidateStatus status = CandidateStatus::Pending;

  const std::string& id() const { return instance.id; }

  /// Moves a pending candidate to a terminal status. Throws ConflictError
  /// when the candidate is already terminal and PreconditionError when
  /// `next` is Pending.
  void transition(CandidateStatus next);

  friend bool operator==(const CandidateExample&, const CandidateExample&) = default;
};

/// "cand-" plus a digest of (context id, question, spans).
std::string candidate_id(std::string_view context_id, std::string_view question,
                         std::span<const Span> spans);

nlohmann::json to_json(const CandidateExample& cand);
CandidateExample candidate_from_json(const nlohmann::json& j, const std::string& path = "");
std::vector<CandidateExample> read_candidates(const std::filesystem::path& file);
void write_candidates(const std::filesystem::path& file,
                      const std::vector<CandidateExample>& candidates);

struct PromptTemplate {
  std::string system_prompt;
  std::string task_instruction;
  std::vector<std::string> constraints;
  std::string output_schema_hint;

  /// Built-in wording. Its constraints carry the two core requirements.
  static PromptTemplate standard();
};

inline constexpr std::size_t kMaxFewShot = 8;

struct PromptOptions {
  /// Contexts to generate for. Empty means the seeds' own contexts.
  std::vector<ContextDocument> targets;
  /// Rendered into the prompt so that repeated requests stay distinct.
  std::optional<std::size_t> batch;
  std::string model_name;
  double temperature = 0.7;
  int max_tokens = 2048;
};

/// Throws PreconditionError when there are no seeds, more than kMaxFewShot,
/// a seed without gold, or n_requested == 0.
llm::GenerationRequest build_prompt(std::span<const QAInstance> seeds, const PromptTemplate& tmpl,
                                    std::size_t n_requested, const PromptOptions& options = {});

namespace reject {
inline constexpr std::string_view kMalformed = "malformed output";
inline constexpr std::string_view kNotVerbatim = "not verbatim";
inline constexpr std::string_view kUnknownContext = "unknown context";
inline constexpr std::string_view kInvalidCitation = "invalid citation";
}  // namespace reject

struct ParseReject {
  std::string reason;
  std::string detail;
  /// Position of the record in the output, when one could be isolated.
  std::optional<std::size_t> record;
};

struct ParseResult {
  std::vector<CandidateExample> candidates;
  std::vector<ParseReject> rejects;
};

/// Reads a JSON array of records, a single record, or one record per line.
/// Every candidate returned is pending, verbatim and validated.
ParseResult parse_candidates(std::string_view raw, std::span<const ContextDocument> contexts,
                             const Provenance& provenance,
                             const segment::SegmentOptions& segmentation = {});

struct ExpandOptions {
  /// Generation targets; defaults to the seeds' contexts.
  std::vector<ContextDocument> contexts;
  std::size_t few_shot = 3;
  std::size_t contexts_per_request = 2;
  std::size_t per_request = 5;
  std::size_t max_in_flight = 4;
  /// Request budget as a multiple of the target count.
  std::size_t budget_factor = 3;
  std::string model_name;
  double temperature = 0.7;
  int max_tokens = 2048;
  segment::SegmentOptions segmentation;
};

struct ExpandResult {
  std::vector<CandidateExample> candidates;
  std::vector<ParseReject> rejects;
  std::vector<std::string> warnings;
  std::size_t requests = 0;
  std::size_t duplicates = 0;
  std::map<AnnotationType, std::size_t> type_counts;
};

/// The request expand issues at position `index`. Pure.
llm::GenerationRequest expansion_request(std::span<const QAInstance> seeds,
                                         const PromptTemplate& tmpl, const ExpandOptions& options,
                                         std::size_t index);

/// Generates until `target_count` unique candidates are collected or the
/// request budget runs out. A cassette miss ends the run like an exhausted
/// budget. Shortfalls are reported in `warnings`.
ExpandResult expand(std::span<const QAInstance> seeds, const PromptTemplate& tmpl,
                    llm::GenerationBackend& backend, std::size_t target_count,
                    const ExpandOptions& options = {});

}  // namespace subcite::augment
