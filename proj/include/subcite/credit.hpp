#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "subcite/augment.hpp"
#include "subcite/llm.hpp"
#include "subcite/metrics.hpp"
#include "subcite/segment.hpp"

namespace subcite::credit {

using augment::CandidateExample;
using metrics::JudgeScores;

enum class BackendKind { Heuristic, LlmJudge };

std::string_view to_string(BackendKind k);
std::optional<BackendKind> try_parse_backend_kind(std::string_view s);

struct CreditConfig {
  BackendKind kind = BackendKind::Heuristic;
  double tau = 0.8;
  metrics::QualityWeights weights;
  /// Minimum s_acc for a below-threshold candidate to be downgraded.
  int downgrade_min_accuracy = 3;

  /// Throws ConfigError on tau outside [0, 1] or invalid weights.
  void check() const;
};

enum class Action { Accept, Downgrade, Reject };

std::string_view to_string(Action a);

struct CreditDecision {
  double score = 0.0;
  Action action = Action::Reject;
  std::string rationale;
  JudgeScores scores;
};

/// Deterministic bucket scores from answer coverage, citation/sentence
/// length ratio and clause alignment of span ends.
JudgeScores heuristic_score(const CandidateExample& cand,
                            const segment::SegmentOptions& segmentation = {});

struct JudgeOptions {
  std::string model_name;
  int max_tokens = 64;
};

/// `retry` adds a reminder of the reply format, which also changes the
/// request fingerprint.
llm::GenerationRequest judge_request(const QAInstance& inst, const JudgeOptions& options = {},
                                     bool retry = false);

/// Strict "acc: N, conc: N, read: N" parser. Throws JudgeError on anything
/// else, including scores outside 1..5.
JudgeScores parse_judge_reply(std::string_view reply);

/// Asks the backend to grade the triple; one retry on an unusable reply.
JudgeScores judge_score(const QAInstance& inst, llm::GenerationBackend& backend,
                        const JudgeOptions& options = {});

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual JudgeScores score(const CandidateExample& cand) = 0;
  virtual BackendKind kind() const = 0;
};

class HeuristicScorer : public Scorer {
 public:
  explicit HeuristicScorer(segment::SegmentOptions segmentation = {})
      : segmentation_(std::move(segmentation)) {}
  JudgeScores score(const CandidateExample& cand) override {
    return heuristic_score(cand, segmentation_);
  }
  BackendKind kind() const override { return BackendKind::Heuristic; }

 private:
  segment::SegmentOptions segmentation_;
};

class JudgeScorer : public Scorer {
 public:
  JudgeScorer(std::shared_ptr<llm::GenerationBackend> backend, JudgeOptions options = {})
      : backend_(std::move(backend)), options_(std::move(options)) {}
  JudgeScores score(const CandidateExample& cand) override {
    return judge_score(cand.instance, *backend_, options_);
  }
  BackendKind kind() const override { return BackendKind::LlmJudge; }

 private:
  std::shared_ptr<llm::GenerationBackend> backend_;
  JudgeOptions options_;
};

/// Applies the decision rule to already computed scores.
CreditDecision decide(const JudgeScores& scores, bool citation_valid, const CreditConfig& config);

/// Throws PreconditionError unless the candidate is pending.
CreditDecision score_candidate(const CandidateExample& cand, Scorer& scorer,
                               const CreditConfig& config,
                               const segment::SegmentOptions& segmentation = {});

/// Widens every span to its enclosing sentences, merges, retypes and marks
/// the candidate downgraded.
CandidateExample downgrade_to_sentence(const CandidateExample& cand,
                                       const segment::SegmentOptions& segmentation = {});

struct FilterOutcome {
  std::vector<CandidateExample> accepted;
  std::vector<CandidateExample> downgraded;
  std::vector<CandidateExample> rejected;
  /// Candidates left pending because the judge failed on them.
  std::vector<CandidateExample> unscored;
  std::vector<std::pair<std::string, CreditDecision>> decisions;
  std::vector<std::string> errors;
};

/// Scores every pending candidate in order and partitions the results.
/// Candidates that are not pending are ignored.
FilterOutcome filter_candidates(const std::vector<CandidateExample>& candidates, Scorer& scorer,
                                const CreditConfig& config,
                                const segment::SegmentOptions& segmentation = {});

}  // namespace subcite::credit
