#include "subcite/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "subcite/annotation.hpp"
#include "subcite/json_io.hpp"

namespace subcite::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kCorpus = "corpus.jsonl";
constexpr const char* kCandidates = "candidates.jsonl";
constexpr const char* kEvents = "events.jsonl";
constexpr const char* kMeta = "snapshot.meta.json";

[[noreturn]] void io_failure(const std::string& what, const fs::path& path) {
  throw Error(what + " " + path.string() + ": " + std::strerror(errno));
}

void write_all(int fd, const std::string& data, const fs::path& path) {
  std::size_t done = 0;
  while (done < data.size()) {
    const auto n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      io_failure("cannot write", path);
    }
    done += static_cast<std::size_t>(n);
  }
}

void append_file(const fs::path& path, const std::string& data, bool sync) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd < 0) io_failure("cannot open", path);
  write_all(fd, data, path);
  if (sync && ::fsync(fd) != 0) io_failure("cannot sync", path);
  ::close(fd);
}

void replace_file(const fs::path& path, const std::string& data, bool sync) {
  const auto tmp = fs::path(path.string() + ".tmp");
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) io_failure("cannot open", tmp);
  write_all(fd, data, tmp);
  if (sync && ::fsync(fd) != 0) io_failure("cannot sync", tmp);
  ::close(fd);
  if (::rename(tmp.c_str(), path.c_str()) != 0) io_failure("cannot rename onto", path);
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path, std::ios::binary);
  for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
  return lines;
}

bool is_blank(const std::string& s) { return s.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

Store::Store(fs::path root, StoreOptions options)
    : root_(std::move(root)), options_(std::move(options)) {
  fs::create_directories(root_);
  load();
}

std::shared_ptr<const State> Store::snapshot() const {
  std::lock_guard lock(read_mutex_);
  return state_;
}

void Store::apply(State& state, const json& event) {
  const auto kind = event.at("kind").get<std::string>();
  const auto& value = event.at("value");
  if (kind.starts_with("instance.")) {
    auto inst = json_io::instance_from_json(value, "event.value");
    auto id = inst.id;
    state.instances.insert_or_assign(std::move(id), std::move(inst));
  } else if (kind.starts_with("candidate.")) {
    auto cand = augment::candidate_from_json(value, "event.value");
    auto id = cand.id();
    state.candidates.insert_or_assign(std::move(id), std::move(cand));
  } else {
    throw Error("unknown event kind " + kind);
  }
}

void Store::load() {
  auto state = std::make_shared<State>();
  if (fs::exists(root_ / kCorpus)) {
    for (auto& inst : json_io::read_instances(root_ / kCorpus)) {
      auto id = inst.id;
      state->instances.insert_or_assign(std::move(id), std::move(inst));
    }
  }
  if (fs::exists(root_ / kCandidates)) {
    for (auto& cand : augment::read_candidates(root_ / kCandidates)) {
      auto id = cand.id();
      state->candidates.insert_or_assign(std::move(id), std::move(cand));
    }
  }
  std::uint64_t applied = 0;
  if (fs::exists(root_ / kMeta)) {
    std::ifstream in(root_ / kMeta);
    applied = json::parse(in).at("applied_seq").get<std::uint64_t>();
  }
  state->seq = applied;

  const auto events_path = root_ / kEvents;
  bool replayed = false;
  if (fs::exists(events_path)) {
    auto lines = read_lines(events_path);
    while (!lines.empty() && is_blank(lines.back())) lines.pop_back();
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (is_blank(lines[i])) continue;
      auto event = json::parse(lines[i], nullptr, false);
      if (event.is_discarded()) {
        if (i + 1 != lines.size()) {
          throw Error("corrupt event log " + events_path.string() + " at line " +
                      std::to_string(i + 1));
        }
        // Torn final append: never acknowledged, drop it.
        lines.pop_back();
        std::string kept;
        for (const auto& l : lines) kept += l + "\n";
        replace_file(events_path, kept, options_.fsync);
        break;
      }
      const auto seq = event.at("seq").get<std::uint64_t>();
      if (seq <= applied) continue;
      apply(*state, event);
      state->seq = std::max(state->seq, seq);
      replayed = true;
    }
  }
  // Later commits rewrite only the files they touch, so replayed events must
  // reach both snapshot files before applied_seq moves past them.
  if (replayed) write_snapshot(*state, true, true);
  state_ = std::move(state);
}

void Store::write_snapshot(const State& state, bool corpus, bool candidates) {
  if (corpus) {
    std::string body;
    for (const auto& [_, inst] : state.instances) body += json_io::dump_line(json_io::to_json(inst)) + "\n";
    replace_file(root_ / kCorpus, body, options_.fsync);
  }
  if (candidates) {
    std::string body;
    for (const auto& [_, cand] : state.candidates) {
      body += json_io::dump_line(augment::to_json(cand)) + "\n";
    }
    replace_file(root_ / kCandidates, body, options_.fsync);
  }
  replace_file(root_ / kMeta, json{{"applied_seq", state.seq}}.dump() + "\n", options_.fsync);
}

void Store::commit(std::shared_ptr<State> next, std::vector<Event> events, bool corpus_changed,
                   bool candidates_changed) {
  if (events.empty()) return;
  std::uint64_t seq = state_->seq;
  std::string log;
  for (auto& e : events) {
    json line = {{"seq", ++seq}, {"kind", e.kind}, {"id", e.id}, {"value", std::move(e.value)}};
    if (e.extra.is_object()) {
      for (auto& [k, v] : e.extra.items()) line[k] = v;
    }
    log += json_io::dump_line(line) + "\n";
  }
  next->seq = seq;
  append_file(root_ / kEvents, log, options_.fsync);
  if (crash_next_) {
    crash_next_ = false;
    throw SimulatedCrash();
  }
  write_snapshot(*next, corpus_changed, candidates_changed);
  std::lock_guard lock(read_mutex_);
  state_ = std::move(next);
}

Store::AddResult Store::add_instances(const std::vector<QAInstance>& instances) {
  std::lock_guard lock(write_mutex_);
  auto next = std::make_shared<State>(*state_);
  AddResult result;
  std::vector<Event> events;
  for (const auto& inst : instances) {
    inst.check();
    if (inst.gold) {
      const auto sentences =
          segment::split_sentences(inst.context.chars(), options_.segmentation).sentences;
      auto v = validate_annotation(*inst.gold, inst.context, sentences);
      if (!v.ok()) throw IngestionError(inst.id + ".gold", v.summary());
    }
    if (!next->instances.emplace(inst.id, inst).second) {
      result.duplicates.push_back(inst.id);
      continue;
    }
    ++result.added;
    events.push_back({"instance.put", inst.id, json_io::to_json(inst), nullptr});
  }
  commit(std::move(next), std::move(events), true, false);
  return result;
}

CitationAnnotation Store::set_annotation(const std::string& id, CitationAnnotation ann) {
  std::lock_guard lock(write_mutex_);
  auto found = state_->instances.find(id);
  if (found == state_->instances.end()) throw NotFoundError("no instance " + id);
  const auto& current = found->second;
  if (current.gold && current.gold->spans == ann.spans && current.gold->type == ann.type &&
      current.gold->annotator == ann.annotator) {
    return *current.gold;
  }
  const auto sentences =
      segment::split_sentences(current.context.chars(), options_.segmentation).sentences;
  auto result = validate_annotation(ann, current.context, sentences);
  if (!result.ok()) throw ValidationError(std::move(result));

  auto next = std::make_shared<State>(*state_);
  auto& inst = next->instances.at(id);
  json prior = inst.gold ? json_io::to_json(*inst.gold) : json(nullptr);
  inst.gold = ann;
  commit(next, {{"instance.annotate", id, json_io::to_json(inst),
                 {{"actor", ann.annotator}, {"prior", std::move(prior)}}}},
         true, false);
  return ann;
}

Store::AddResult Store::add_candidates(const std::vector<augment::CandidateExample>& candidates) {
  std::lock_guard lock(write_mutex_);
  auto next = std::make_shared<State>(*state_);
  AddResult result;
  std::vector<Event> events;
  for (const auto& cand : candidates) {
    if (!next->candidates.emplace(cand.id(), cand).second) {
      result.duplicates.push_back(cand.id());
      continue;
    }
    ++result.added;
    events.push_back({"candidate.put", cand.id(), augment::to_json(cand), nullptr});
  }
  commit(std::move(next), std::move(events), false, true);
  return result;
}

augment::CandidateExample Store::review(const std::string& id, credit::Action action,
                                        const std::string& reviewer) {
  std::lock_guard lock(write_mutex_);
  auto found = state_->candidates.find(id);
  if (found == state_->candidates.end()) throw NotFoundError("no candidate " + id);
  auto cand = found->second;
  const auto prior = std::string(augment::to_string(cand.status));
  switch (action) {
    case credit::Action::Accept: cand.transition(augment::CandidateStatus::Accepted); break;
    case credit::Action::Reject: cand.transition(augment::CandidateStatus::Rejected); break;
    case credit::Action::Downgrade:
      if (cand.status != augment::CandidateStatus::Pending) {
        throw ConflictError("candidate " + id + " is already " + prior);
      }
      cand = credit::downgrade_to_sentence(cand, options_.segmentation);
      break;
  }
  auto next = std::make_shared<State>(*state_);
  next->candidates.insert_or_assign(id, cand);
  commit(next, {{"candidate.review", id, augment::to_json(cand),
                 {{"actor", reviewer},
                  {"action", std::string(credit::to_string(action))},
                  {"prior_status", prior}}}},
         false, true);
  return cand;
}

void Store::update_candidates(const std::vector<augment::CandidateExample>& updated,
                              const std::string& actor) {
  std::lock_guard lock(write_mutex_);
  auto next = std::make_shared<State>(*state_);
  std::vector<Event> events;
  for (const auto& cand : updated) {
    auto found = next->candidates.find(cand.id());
    if (found == next->candidates.end()) throw NotFoundError("no candidate " + cand.id());
    if (found->second.status != augment::CandidateStatus::Pending) {
      throw ConflictError("candidate " + cand.id() + " is already " +
                          std::string(augment::to_string(found->second.status)));
    }
    found->second = cand;
    events.push_back({"candidate.update", cand.id(), augment::to_json(cand),
                      {{"actor", actor}}});
  }
  commit(std::move(next), std::move(events), false, true);
}

}  // namespace subcite::service
