#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subcite/augment.hpp"
#include "subcite/credit.hpp"
#include "subcite/error.hpp"
#include "subcite/model.hpp"
#include "subcite/segment.hpp"

namespace subcite::service {

/// Immutable view of the store at one point in the event sequence.
struct State {
  std::map<std::string, QAInstance> instances;
  std::map<std::string, augment::CandidateExample> candidates;
  std::uint64_t seq = 0;
};

struct StoreOptions {
  /// fsync the event log and snapshot files before acknowledging a write.
  bool fsync = false;
  segment::SegmentOptions segmentation;
};

/// Raised by the crash test hook.
class SimulatedCrash : public Error {
 public:
  SimulatedCrash() : Error("simulated crash after event append") {}
};

/// File-backed store under `root`:
///   corpus.jsonl, candidates.jsonl  snapshot, rewritten atomically
///   events.jsonl                    append-only log of full-value events
///   snapshot.meta.json              {"applied_seq": N}
/// Every mutation appends its events before rewriting the snapshot; loading
/// replays events newer than applied_seq. Writers are serialised; readers
/// get an immutable State.
class Store {
 public:
  explicit Store(std::filesystem::path root, StoreOptions options = {});

  std::shared_ptr<const State> snapshot() const;
  const std::filesystem::path& root() const { return root_; }
  const StoreOptions& options() const { return options_; }

  struct AddResult {
    std::size_t added = 0;
    std::vector<std::string> duplicates;
  };

  /// Ids already present are reported as duplicates and left untouched.
  AddResult add_instances(const std::vector<QAInstance>& instances);

  /// Validates and stores `ann` as the instance's gold citation. A repeat of
  /// the stored spans, type and annotator is a no-op returning the stored
  /// value. Throws NotFoundError or ValidationError.
  CitationAnnotation set_annotation(const std::string& id, CitationAnnotation ann);

  AddResult add_candidates(const std::vector<augment::CandidateExample>& candidates);

  /// Applies a reviewer action to a pending candidate. Throws NotFoundError
  /// or ConflictError (candidate already terminal).
  augment::CandidateExample review(const std::string& id, credit::Action action,
                                   const std::string& reviewer);

  /// Stores filter results. Each candidate must exist and still be pending
  /// in the store (ConflictError otherwise).
  void update_candidates(const std::vector<augment::CandidateExample>& updated,
                         const std::string& actor);

  /// Test hook: the next mutation throws SimulatedCrash right after its
  /// events reach the log, before the snapshot is rewritten.
  void crash_after_next_append() { crash_next_ = true; }

 private:
  struct Event {
    std::string kind;
    std::string id;
    nlohmann::json value;
    nlohmann::json extra;
  };

  void load();
  void commit(std::shared_ptr<State> next, std::vector<Event> events, bool corpus_changed,
              bool candidates_changed);
  void write_snapshot(const State& state, bool corpus, bool candidates);
  static void apply(State& state, const nlohmann::json& event);

  std::filesystem::path root_;
  StoreOptions options_;
  mutable std::mutex read_mutex_;
  std::mutex write_mutex_;
  std::shared_ptr<const State> state_;
  bool crash_next_ = false;
};

}  // namespace subcite::service
