#include "subcite/cli.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "subcite/augment.hpp"
#include "subcite/credit.hpp"
#include "subcite/datakit.hpp"
#include "subcite/error.hpp"
#include "subcite/evalharness.hpp"
#include "subcite/json_io.hpp"
#include "subcite/llm.hpp"
#include "subcite/service.hpp"
#include "subcite/store.hpp"

namespace subcite::cli {

namespace {

using nlohmann::json;

/// Bad invocation that CLI11 cannot see (missing prerequisites).
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Io {
  std::ostream& out;
  std::ostream& err;
  bool as_json = false;

  void warn(const std::string& msg) const { err << "warning: " << msg << "\n"; }
  void emit(const json& j) const { out << j.dump(2) << "\n"; }
};

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::vector<QAInstance> corpus_of(const service::State& state) {
  std::vector<QAInstance> out;
  for (const auto& [_, inst] : state.instances) out.push_back(inst);
  return out;
}

std::vector<QAInstance> annotated_of(const service::State& state, std::size_t& unannotated) {
  std::vector<QAInstance> out;
  unannotated = 0;
  for (const auto& [_, inst] : state.instances) {
    if (inst.gold) {
      out.push_back(inst);
    } else {
      ++unannotated;
    }
  }
  return out;
}

std::shared_ptr<llm::GenerationBackend> make_backend(const Config& config,
                                                     const std::string& cassette, bool record) {
  if (!cassette.empty() && !record) {
    if (!std::filesystem::exists(cassette)) throw UsageError("cassette not found: " + cassette);
    return std::make_shared<llm::ReplayBackend>(std::make_shared<llm::Cassette>(cassette));
  }
  if (config.llm.base_url.empty()) {
    throw ConfigError("llm.base_url is not set (config file or SUBCITE_LLM_BASE_URL)");
  }
  llm::OpenAiConfig oc;
  oc.base_url = config.llm.base_url;
  oc.api_key = config.llm.api_key;
  oc.timeout = std::chrono::seconds(config.llm.timeout_seconds);
  oc.max_retries = config.llm.max_retries;
  std::shared_ptr<llm::GenerationBackend> live =
      std::make_shared<llm::OpenAiBackend>(oc, llm::make_http_transport());
  if (cassette.empty()) return live;
  return std::make_shared<llm::RecordingBackend>(live, std::make_shared<llm::Cassette>(cassette));
}

// ---- ingest ---------------------------------------------------------------

struct IngestArgs {
  std::string format = "squad";
  std::string input;
};

int ingest(const IngestArgs& args, const Config& config, service::Store& store, const Io& io) {
  datakit::ImportResult imported;
  if (args.format == "squad") {
    imported = datakit::import_squad(std::filesystem::path(args.input));
  } else if (args.format == "hotpotqa") {
    imported = datakit::import_hotpotqa(std::filesystem::path(args.input), config.segmentation);
  } else {
    imported.instances = json_io::read_instances(args.input);
  }
  const auto added = store.add_instances(imported.instances);
  for (const auto& w : imported.warnings) io.warn(w);
  if (!added.duplicates.empty()) {
    io.warn("skipped " + std::to_string(added.duplicates.size()) + " instances already in the store");
  }
  if (io.as_json) {
    io.emit({{"command", "ingest"},
             {"file", args.input},
             {"format", args.format},
             {"read", imported.instances.size()},
             {"imported", added.added},
             {"duplicates", added.duplicates},
             {"warnings", imported.warnings}});
  } else {
    io.out << "imported " << added.added << " instances from " << args.input << "\n";
  }
  return kExitOk;
}

}  // namespace

std::vector<QAInstance> pick_seeds(const service::State& state, std::size_t n) {
  std::map<AnnotationType, std::vector<const QAInstance*>> by_type;
  for (const auto& [_, inst] : state.instances) {
    if (inst.gold) by_type[inst.gold->type].push_back(&inst);
  }
  std::vector<QAInstance> out;
  for (std::size_t round = 0; out.size() < n; ++round) {
    bool any = false;
    for (const auto& [_, members] : by_type) {
      if (round < members.size() && out.size() < n) {
        out.push_back(*members[round]);
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

augment::ExpandOptions expand_options(const Config& config, const service::State& state) {
  augment::ExpandOptions opts;
  std::set<std::string> seen;
  for (const auto& [_, inst] : state.instances) {
    if (seen.insert(inst.context.id()).second) opts.contexts.push_back(inst.context);
  }
  opts.few_shot = static_cast<std::size_t>(config.augment.few_shot);
  opts.per_request = static_cast<std::size_t>(config.augment.per_request);
  opts.contexts_per_request = static_cast<std::size_t>(config.augment.contexts_per_request);
  opts.budget_factor = static_cast<std::size_t>(config.augment.budget_factor);
  opts.max_in_flight = static_cast<std::size_t>(config.llm.max_in_flight);
  opts.model_name = config.llm.model;
  opts.temperature = config.llm.temperature;
  opts.max_tokens = config.llm.max_tokens;
  opts.segmentation = config.segmentation;

  return opts;
}

namespace {

// ---- generate -------------------------------------------------------------

struct GenerateArgs {
  std::size_t seeds = 6;
  std::size_t target = 0;
  std::string cassette;
  bool record = false;
};

int generate(const GenerateArgs& args, const Config& config, service::Store& store, const Io& io) {
  const auto state = store.snapshot();
  const auto seeds = pick_seeds(*state, args.seeds);
  if (seeds.empty()) throw UsageError("no gold seeds: the store has no annotated instances");

  const auto opts = expand_options(config, *state);
  auto backend = make_backend(config, args.cassette, args.record);
  const auto result = augment::expand(seeds, augment::PromptTemplate::standard(), *backend,
                                      args.target, opts);
  const auto added = store.add_candidates(result.candidates);

  std::map<std::string, std::size_t> reasons;
  for (const auto& r : result.rejects) ++reasons[r.reason];
  json types = json::object();
  for (auto t : kAllAnnotationTypes) {
    auto it = result.type_counts.find(t);
    types[std::string(to_string(t))] = it == result.type_counts.end() ? 0 : it->second;
  }
  for (const auto& w : result.warnings) io.warn(w);
  if (!added.duplicates.empty()) {
    io.warn(std::to_string(added.duplicates.size()) + " candidates were already in the store");
  }
  if (io.as_json) {
    io.emit({{"command", "generate"},
             {"seeds", seeds.size()},
             {"generated", result.candidates.size()},
             {"added", added.added},
             {"requests", result.requests},
             {"types", types},
             {"rejects", reasons},
             {"duplicates_in_output", result.duplicates},
             {"warnings", result.warnings}});
  } else {
    io.out << "generated " << result.candidates.size() << " pending candidates from "
           << result.requests << " requests (type1 " << types["type1"] << ", type2 "
           << types["type2"] << ", type3 " << types["type3"] << ")\n";
    for (const auto& [reason, n] : reasons) io.out << "rejected " << n << " " << reason << "\n";
  }
  return kExitOk;
}

// ---- filter ---------------------------------------------------------------

struct FilterArgs {
  std::string backend;
  std::optional<double> tau;
  std::string cassette;
  bool record = false;
  std::string decisions;
};

int filter(const FilterArgs& args, Config config, service::Store& store, const Io& io) {
  if (!args.backend.empty()) {
    auto kind = credit::try_parse_backend_kind(args.backend);
    if (!kind) throw UsageError("--backend must be heuristic or llm-judge");
    config.credit.backend = *kind;
  }
  if (args.tau) config.credit.tau = *args.tau;
  credit::CreditConfig cc{config.credit.backend, config.credit.tau, config.credit.weights, 3};
  cc.check();

  std::unique_ptr<credit::Scorer> scorer;
  if (cc.kind == credit::BackendKind::Heuristic) {
    scorer = std::make_unique<credit::HeuristicScorer>(config.segmentation);
  } else {
    scorer = std::make_unique<credit::JudgeScorer>(make_backend(config, args.cassette, args.record),
                                                   credit::JudgeOptions{config.llm.model, 64});
  }

  const auto state = store.snapshot();
  std::vector<augment::CandidateExample> pending;
  for (const auto& [_, cand] : state->candidates) {
    if (cand.status == augment::CandidateStatus::Pending) pending.push_back(cand);
  }
  auto outcome = credit::filter_candidates(pending, *scorer, cc, config.segmentation);

  std::vector<augment::CandidateExample> updated;
  for (auto* group : {&outcome.accepted, &outcome.downgraded, &outcome.rejected}) {
    updated.insert(updated.end(), group->begin(), group->end());
  }
  store.update_candidates(updated, "filter:" + std::string(credit::to_string(cc.kind)));

  if (!args.decisions.empty()) {
    std::ofstream f(args.decisions, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + args.decisions);
    for (const auto& [id, d] : outcome.decisions) {
      f << json_io::dump_line({{"id", id},
                               {"score", d.score},
                               {"action", std::string(credit::to_string(d.action))},
                               {"scores",
                                {{"accuracy", d.scores.accuracy},
                                 {"conciseness", d.scores.conciseness},
                                 {"readability", d.scores.readability}}},
                               {"rationale", d.rationale}})
        << "\n";
    }
  }
  for (const auto& e : outcome.errors) io.err << "error: " << e << "\n";
  if (io.as_json) {
    io.emit({{"command", "filter"},
             {"backend", std::string(credit::to_string(cc.kind))},
             {"tau", cc.tau},
             {"scored", outcome.decisions.size()},
             {"accepted", outcome.accepted.size()},
             {"downgraded", outcome.downgraded.size()},
             {"rejected", outcome.rejected.size()},
             {"unscored", outcome.unscored.size()},
             {"errors", outcome.errors}});
  } else {
    io.out << "scored " << outcome.decisions.size() << " candidates: accepted "
           << outcome.accepted.size() << ", downgraded " << outcome.downgraded.size()
           << ", rejected " << outcome.rejected.size() << "\n";
    if (!outcome.unscored.empty()) {
      io.out << outcome.unscored.size() << " candidates left pending after judge errors\n";
    }
  }
  return outcome.errors.empty() ? kExitOk : kExitFailure;
}

// ---- export ---------------------------------------------------------------

struct ExportArgs {
  std::string out;
  std::optional<double> ratio;
};

int export_cmd(const ExportArgs& args, const Config& config, service::Store& store, const Io& io) {
  datakit::MixPolicy policy{args.ratio.value_or(config.mix.min_fine_ratio)};
  try {
    policy.check();
  } catch (const ConfigError& e) {
    throw UsageError(std::string("--ratio: ") + e.what());
  }
  const auto state = store.snapshot();
  std::vector<QAInstance> seeds;
  for (const auto& [_, inst] : state->instances) {
    if (inst.gold) seeds.push_back(inst);
  }
  std::vector<augment::CandidateExample> pool;
  for (const auto& [_, cand] : state->candidates) {
    if (cand.status == augment::CandidateStatus::Accepted ||
        cand.status == augment::CandidateStatus::Downgraded) {
      pool.push_back(cand);
    }
  }
  const auto m = datakit::export_finetune(seeds, pool, policy, std::filesystem::path(args.out),
                                          config.segmentation);
  if (m.coarse_dropped > 0) {
    io.warn("dropped " + std::to_string(m.coarse_dropped) +
            " coarse records to keep the fine-grained ratio at or above " +
            fixed4(policy.min_fine_grained_ratio));
  }
  if (io.as_json) {
    auto j = datakit::to_json(m);
    j["command"] = "export";
    j["out"] = args.out;
    j["manifest"] = args.out + ".manifest.json";
    io.emit(j);
  } else {
    io.out << "exported " << m.total << " records (fine " << m.fine << ", coarse " << m.coarse
           << ", ratio " << fixed4(m.ratio) << ") to " << args.out << "\nsha256 " << m.sha256
           << "\n";
  }
  return kExitOk;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
  std::string predictions;
  std::string method;
  std::string out;
  bool judge = false;
  std::string cassette;
};

int evaluate(const EvaluateArgs& args, const Config& config, service::Store& store, const Io& io) {
  const auto corpus = corpus_of(*store.snapshot());
  const auto method =
      args.method.empty() ? std::filesystem::path(args.predictions).stem().string() : args.method;
  auto run = evalharness::load_predictions(args.predictions, method, corpus, config.segmentation);

  evalharness::Judge judge;
  if (args.judge) {
    auto backend = make_backend(config, args.cassette, false);
    judge = [backend, model = config.llm.model](const QAInstance& inst,
                                                const CitationAnnotation& predicted) {
      QAInstance graded = inst;
      graded.gold = predicted;
      return credit::judge_score(graded, *backend, {model, 64});
    };
  }
  const auto report =
      evalharness::evaluate_run(run, corpus, config.credit.weights, judge, config.segmentation);
  if (!args.out.empty()) {
    std::ofstream f(args.out, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + args.out);
    f << evalharness::to_json(report).dump(2) << "\n";
  }
  const auto& a = report.aggregates;
  if (io.as_json) {
    auto j = evalharness::to_json(report);
    j.erase("rows");
    j["command"] = "evaluate";
    j["instances"] = report.rows.size();
    j["out"] = args.out;
    io.emit(j);
  } else {
    io.out << method << ": f1 " << fixed4(a.f1) << ", cosine " << fixed4(a.cosine);
    if (a.quality) io.out << ", quality " << fixed4(*a.quality);
    io.out << " over " << report.rows.size() << " instances (" << report.missing()
           << " without prediction)\n";
  }
  return kExitOk;
}

// ---- report ---------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> comparison;
  std::string ablation;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path, "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IngestionError(path, std::string("invalid JSON: ") + e.what());
  }
}

int report(const ReportArgs& args, const Io& io) {
  if (args.comparison.empty() == args.ablation.empty()) {
    throw UsageError("give either --comparison FILE... or --ablation FILE");
  }
  evalharness::Rendered rendered;
  if (!args.ablation.empty()) {
    rendered = evalharness::render_ablation(evalharness::ablation_from_json(read_json_file(args.ablation)));
  } else {
    std::vector<evalharness::MetricReport> reports;
    for (const auto& file : args.comparison) {
      const auto j = read_json_file(file);
      const json* list = j.is_array() ? &j : (j.contains("reports") ? &j["reports"] : nullptr);
      if (list) {
        for (const auto& r : *list) reports.push_back(evalharness::report_from_json(r));
      } else {
        reports.push_back(evalharness::report_from_json(j));
      }
    }
    for (const auto& r : reports) {
      if (!evalharness::aggregates_consistent(r)) {
        throw IngestionError(r.method, "aggregates disagree with per-instance rows");
      }
    }
    rendered = evalharness::render_comparison(reports);
  }
  if (io.as_json) {
    io.emit(rendered.data);
  } else {
    io.out << rendered.text;
  }
  return kExitOk;
}

// ---- stats / split / serve ------------------------------------------------

// Statistics cover annotated instances; the rest are only counted.
int stats(service::Store& store, const Io& io) {
  std::size_t unannotated = 0;
  const auto s = datakit::compute_stats(annotated_of(*store.snapshot(), unannotated));
  if (io.as_json) {
    auto j = datakit::to_json(s);
    j["command"] = "stats";
    j["unannotated"] = unannotated;
    io.emit(j);
    return kExitOk;
  }
  io.out << "type   count  ratio\n";
  for (auto t : kAllAnnotationTypes) {
    char line[64];
    std::snprintf(line, sizeof line, "%-6s %5zu  %.4f\n", std::string(to_string(t)).c_str(),
                  s.count(t), s.ratio(t));
    io.out << line;
  }
  io.out << "total  " << s.total << "\n";
  if (unannotated) io.out << "unannotated " << unannotated << "\n";
  return kExitOk;
}

struct SplitArgs {
  std::string out_dir;
  std::optional<double> fraction;
  std::optional<std::uint64_t> seed;
};

int split_cmd(const SplitArgs& args, const Config& config, service::Store& store, const Io& io) {
  const auto result = datakit::split(corpus_of(*store.snapshot()),
                                     args.fraction.value_or(config.split.train_fraction),
                                     args.seed.value_or(config.split.seed));
  std::filesystem::create_directories(args.out_dir);
  const auto dir = std::filesystem::path(args.out_dir);
  json_io::write_instances(dir / "train.jsonl", result.train);
  json_io::write_instances(dir / "test.jsonl", result.test);
  if (io.as_json) {
    io.emit({{"command", "split"},
             {"train", result.train.size()},
             {"test", result.test.size()},
             {"out_dir", args.out_dir}});
  } else {
    io.out << "train " << result.train.size() << ", test " << result.test.size() << " written to "
           << args.out_dir << "\n";
  }
  return kExitOk;
}

struct ServeArgs {
  std::string host;
  std::optional<int> port;
  std::string ui;
};

int serve(const ServeArgs& args, const Config& config, service::Store& store, const Io& io) {
  service::ServiceOptions opts;
  opts.cors_origin = config.serve.cors_origin;
  const auto ui = args.ui.empty() ? config.serve.ui_dir : args.ui;
  if (!ui.empty()) opts.ui_dir = ui;
  const auto host = args.host.empty() ? config.serve.host : args.host;
  const auto port = args.port.value_or(config.serve.port);
  service::Server server(store, opts);
  if (io.as_json) {
    io.emit({{"command", "serve"}, {"host", host}, {"port", port}});
  } else {
    io.out << "serving " << store.root().string() << " on http://" << host << ":" << port << "\n";
  }
  io.out.flush();
  server.run(host, port);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const EnvLookup& env) {
  CLI::App app{"Build, filter, export and evaluate sub-sentence citation datasets."};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file, store_root;
  bool json_output = false;
  app.add_option("--config", config_file, "Config file (TOML subset)");
  app.add_option("--store", store_root, "Store directory (overrides store.root)");
  app.add_flag("--json", json_output, "Print machine-readable JSON");

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "Import QA instances into the store");
  ingest_cmd->add_option("--format", ingest_args.format, "squad, hotpotqa or jsonl")
      ->check(CLI::IsMember({"squad", "hotpotqa", "jsonl"}));
  ingest_cmd->add_option("--in", ingest_args.input, "Input file")->required();

  GenerateArgs gen_args;
  auto* gen_cmd = app.add_subcommand("generate", "Expand the corpus with generated candidates");
  gen_cmd->add_option("--seeds", gen_args.seeds, "Number of annotated seed examples")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--target", gen_args.target, "Number of candidates wanted")
      ->required()
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--cassette", gen_args.cassette, "Replay responses from this cassette");
  gen_cmd->add_flag("--record", gen_args.record, "Call the live backend and record into --cassette");

  FilterArgs filter_args;
  auto* filter_cmd = app.add_subcommand("filter", "Score pending candidates and apply decisions");
  filter_cmd->add_option("--backend", filter_args.backend, "heuristic or llm-judge")
      ->check(CLI::IsMember({"heuristic", "llm-judge"}));
  filter_cmd->add_option("--tau", filter_args.tau, "Acceptance threshold in [0, 1]");
  filter_cmd->add_option("--cassette", filter_args.cassette, "Judge cassette");
  filter_cmd->add_flag("--record", filter_args.record, "Record live judge replies into --cassette");
  filter_cmd->add_option("--decisions", filter_args.decisions, "Write decisions JSONL here");

  ExportArgs export_args;
  auto* export_sub = app.add_subcommand("export", "Write chat-format fine-tuning JSONL");
  export_sub->add_option("--out", export_args.out, "Output JSONL")->required();
  export_sub->add_option("--ratio", export_args.ratio, "Minimum fine-grained ratio");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against gold citations");
  eval_cmd->add_option("--predictions", eval_args.predictions, "Prediction JSONL")->required();
  eval_cmd->add_option("--method", eval_args.method, "Method name (default: file stem)");
  eval_cmd->add_option("--out", eval_args.out, "Write the report JSON here");
  eval_cmd->add_flag("--judge", eval_args.judge, "Add judge quality scores");
  eval_cmd->add_option("--cassette", eval_args.cassette, "Judge cassette");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Render comparison or ablation tables");
  report_cmd->add_option("--comparison", report_args.comparison, "Report JSON files");
  report_cmd->add_option("--ablation", report_args.ablation, "Ablation JSON file");

  auto* stats_cmd = app.add_subcommand("stats", "Annotation type statistics of the store");

  SplitArgs split_args;
  auto* split_sub = app.add_subcommand("split", "Stratified train/test split of the store");
  split_sub->add_option("--out-dir", split_args.out_dir, "Directory for train/test JSONL")
      ->required();
  split_sub->add_option("--train-fraction", split_args.fraction, "Share of the train side");
  split_sub->add_option("--seed", split_args.seed, "Shuffle seed");

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Run the annotation HTTP service");
  serve_cmd->add_option("--host", serve_args.host, "Listen address");
  serve_cmd->add_option("--port", serve_args.port, "Listen port");
  serve_cmd->add_option("--ui", serve_args.ui, "UI bundle directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const Io io{out, err, json_output};
  auto fail = [&](int code, const std::string& what) {
    if (json_output) {
      io.emit({{"error", what}, {"exit_code", code}});
    }
    err << "error: " << what << "\n";
    return code;
  };

  try {
    Config config = config_file.empty() ? Config{} : load_config(config_file);
    apply_env(config, env);
    if (!store_root.empty()) config.store.root = store_root;
    config.check();

    if (report_cmd->parsed()) return report(report_args, io);

    service::Store store(config.store.root, {false, config.segmentation});
    if (ingest_cmd->parsed()) return ingest(ingest_args, config, store, io);
    if (gen_cmd->parsed()) return generate(gen_args, config, store, io);
    if (filter_cmd->parsed()) return filter(filter_args, config, store, io);
    if (export_sub->parsed()) return export_cmd(export_args, config, store, io);
    if (eval_cmd->parsed()) return evaluate(eval_args, config, store, io);
    if (stats_cmd->parsed()) return stats(store, io);
    if (split_sub->parsed()) return split_cmd(split_args, config, store, io);
    if (serve_cmd->parsed()) return serve(serve_args, config, store, io);
    return fail(kExitUsage, "no command given");
  } catch (const UsageError& e) {
    return fail(kExitUsage, e.what());
  } catch (const ConfigError& e) {
    return fail(kExitUsage, e.what());
  } catch (const IngestionError& e) {
    return fail(kExitUsage, e.what());
  } catch (const std::exception& e) {
    return fail(kExitFailure, e.what());
  }
}

}  // namespace subcite::cli
