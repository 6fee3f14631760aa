#include "forpkg/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "forpkg/classifier.h"
#include "forpkg/corpus.h"
#include "forpkg/error.h"
#include "forpkg/evaluation.h"
#include "forpkg/extraction.h"
#include "forpkg/graph_io.h"
#include "forpkg/graph_store.h"
#include "forpkg/llm_client.h"
#include "forpkg/net.h"
#include "forpkg/rag.h"
#include "forpkg/similarity.h"

namespace forpkg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path report_path(const fs::path& output) {
  return output.parent_path() / (output.stem().string() + ".report.json");
}

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Settings {
  std::string corpus;
  std::string graph;
  std::string output;
  std::string input;
  double lambda = 0.85;
  double tau = 0.35;
  std::string llm = "replay";
  std::string classifier = "rule";
  std::string transcripts;
  std::string record;
  std::string embed_cache;
  std::string provider = "hash-ngram";
  std::string prompt_dir;
  bool strict = false;
  int parallelism = 1;
  std::string format;
  std::string script;
  std::string gold;
  std::string policy = "normalized";
  double jaccard = 0.5;
  std::string text;
  int hops = 2;
  int max = 40;
  std::vector<std::string> relations;
};

void require_dir(const std::string& flag, const std::string& path) {
  if (path.empty()) throw ConfigError(flag + " is required");
  if (!fs::is_directory(path)) throw ConfigError(flag + ": no such directory: " + path);
}

void require_file(const std::string& flag, const std::string& path) {
  if (path.empty()) throw ConfigError(flag + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(flag + ": no such file: " + path);
}

void require_positive(const std::string& flag, int value) {
  if (value < 1) throw ConfigError(flag + " must be a positive integer, got " + std::to_string(value));
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kUnreadableFile, "cannot write " + path.string());
    out << content;
    if (!out.flush()) throw Error(ErrorCode::kUnreadableFile, "cannot write " + path.string());
  }
  fs::rename(tmp, path);
}

std::unique_ptr<graph::GraphStore> load_snapshot(const fs::path& path) {
  try {
    return graph::import_graph(read_text(path), ontology::builtin_schema_ptr());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message(), e.line());
  }
}

void save_snapshot(const fs::path& path, const graph::GraphStore& store) {
  write_text(path, graph::export_graph(store, graph::ExportFormat::kJsonl));
}

bool offline_mode(const Settings& s) {
  return s.llm == "replay" && s.classifier == "rule" && s.provider.rfind("http", 0) != 0;
}

void validate_pipeline(const Settings& s, bool similarity, bool extract) {
  require_dir("--corpus", s.corpus);
  require_positive("--parallelism", s.parallelism);
  if (similarity) {
    if (!(s.lambda > 0.0 && s.lambda < 1.0)) {
      throw ConfigError("--lambda must lie in (0, 1), got " + std::to_string(s.lambda));
    }
    similarity::make_provider(s.provider);  // throws InvalidConfig
  }
  if (extract) {
    if (!(s.tau >= 0.0 && s.tau <= 1.0)) {
      throw ConfigError("--tau must lie in [0, 1], got " + std::to_string(s.tau));
    }
    if (s.llm == "replay") {
      require_file("--transcripts", s.transcripts);
      if (!s.record.empty()) throw ConfigError("--record needs --llm http");
    }
    if (!s.prompt_dir.empty()) require_dir("--prompt-dir", s.prompt_dir);
  }
}

struct Run {
  json stages = json::object();
  std::size_t failures = 0;  // counted toward --strict
};

void note_stage(Run& run, const std::string& name, const extraction::PipelineReport& report,
                std::ostream& out) {
  run.stages[name] = report.to_json();
  run.failures += report.total_errors() + report.count("corpus_warnings") +
                  report.count("metadata_warnings");
  out << name << ":";
  for (const auto& [k, v] : report.counters) out << " " << k << "=" << v;
  out << "\n";
}

extraction::PipelineReport ingest_stage(const corpus::LoadResult& loaded,
                                        graph::GraphStore& store) {
  auto report = extraction::run_document_level(loaded.documents, store);
  report.add("corpus_warnings", loaded.warnings.size());
  for (const auto& w : loaded.warnings) report.issues.push_back(w);
  return report;
}

extraction::PipelineReport similarity_stage(const Settings& s, const corpus::LoadResult& loaded,
                                            graph::GraphStore& store) {
  const auto provider = similarity::make_provider(s.provider);
  similarity::SimilarityConfig config;
  config.threshold = s.lambda;
  config.parallelism = static_cast<std::size_t>(s.parallelism);
  if (!s.embed_cache.empty()) config.cache_path = s.embed_cache;
  return extraction::run_similarity(loaded.documents, *provider, config, store);
}

extraction::PipelineReport extract_stage(const Settings& s, const corpus::LoadResult& loaded,
                                         graph::GraphStore& store) {
  std::unique_ptr<llm::LlmClient> base;
  if (s.llm == "replay") {
    base = llm::ReplayLlmClient::from_file(s.transcripts);
  } else {
    base = std::make_unique<llm::HttpLlmClient>(llm::HttpLlmConfig::from_env());
  }
  std::unique_ptr<llm::RecordingLlmClient> recorder;
  llm::LlmClient* client = base.get();
  if (!s.record.empty()) {
    recorder = std::make_unique<llm::RecordingLlmClient>(*base, s.record);
    client = recorder.get();
  }
  std::unique_ptr<classifier::ClassifierClient> cls;
  if (s.classifier == "rule") {
    cls = classifier::rule_fallback_classifier(store.schema());
  } else {
    cls = std::make_unique<classifier::HttpClassifierClient>(
        classifier::HttpClassifierConfig::from_env(), store.schema().relation_labels());
  }
  extraction::ExtractionConfig config;
  config.tau = s.tau;
  config.parallelism = static_cast<std::size_t>(s.parallelism);
  if (!s.prompt_dir.empty()) config.prompt_dir = s.prompt_dir;
  return extraction::run_content_extraction(loaded.documents, *client, *cls, config, store);
}

corpus::LoadResult load_documents(const Settings& s) {
  return corpus::load_corpus(s.corpus);
}

int finish(const Settings& s, Run& run, const std::string& command, const fs::path& output,
           const graph::GraphStore& store, std::ostream& err) {
  const int status = s.strict && run.failures > 0 ? kExitFailures : kExitOk;
  json report = {
      {"command", command},
      {"settings",
       {{"lambda", s.lambda},
        {"tau", s.tau},
        {"llm", s.llm},
        {"classifier", s.classifier},
        {"provider", s.provider},
        {"parallelism", s.parallelism},
        {"strict", s.strict}}},
      {"stages", run.stages},
      {"graph",
       {{"entities", store.entity_count()},
        {"triples", store.triple_count()},
        {"derived", store.derived_count()}}},
      {"exit_status", status},
  };
  write_text(report_path(output), report.dump(2) + "\n");
  if (status != kExitOk) {
    err << "strict: " << run.failures << " per-document failures or warnings, see "
        << report_path(output).string() << "\n";
  }
  return status;
}

int cmd_ingest(const Settings& s, std::ostream& out, std::ostream& err) {
  validate_pipeline(s, false, false);
  if (s.output.empty()) throw ConfigError("--output is required");
  const auto loaded = load_documents(s);
  graph::GraphStore store(ontology::builtin_schema_ptr());
  Run run;
  note_stage(run, "ingest", ingest_stage(loaded, store), out);
  save_snapshot(s.output, store);
  return finish(s, run, "ingest", s.output, store, err);
}

int cmd_link_similar(const Settings& s, std::ostream& out, std::ostream& err) {
  validate_pipeline(s, true, false);
  require_file("--graph", s.graph);
  const std::string output = s.output.empty() ? s.graph : s.output;
  auto store = load_snapshot(s.graph);
  const auto loaded = load_documents(s);
  Run run;
  note_stage(run, "link-similar", similarity_stage(s, loaded, *store), out);
  save_snapshot(output, *store);
  return finish(s, run, "link-similar", output, *store, err);
}

int cmd_extract(const Settings& s, std::ostream& out, std::ostream& err) {
  validate_pipeline(s, false, true);
  require_file("--graph", s.graph);
  const std::string output = s.output.empty() ? s.graph : s.output;
  auto store = load_snapshot(s.graph);
  const auto loaded = load_documents(s);
  Run run;
  note_stage(run, "extract", extract_stage(s, loaded, *store), out);
  save_snapshot(output, *store);
  return finish(s, run, "extract", output, *store, err);
}

int cmd_run_all(const Settings& s, std::ostream& out, std::ostream& err) {
  validate_pipeline(s, true, true);
  if (s.output.empty()) throw ConfigError("--output is required");
  const auto loaded = load_documents(s);
  graph::GraphStore store(ontology::builtin_schema_ptr());
  Run run;
  note_stage(run, "ingest", ingest_stage(loaded, store), out);
  save_snapshot(s.output, store);
  note_stage(run, "link-similar", similarity_stage(s, loaded, store), out);
  save_snapshot(s.output, store);
  note_stage(run, "extract", extract_stage(s, loaded, store), out);
  save_snapshot(s.output, store);
  if (!s.script.empty()) {
    write_text(s.script, graph::export_graph(store, graph::ExportFormat::kGraphDbScript));
  }
  return finish(s, run, "run-all", s.output, store, err);
}

int cmd_export(const Settings& s, std::ostream& out) {
  require_file("--graph", s.graph);
  const auto format = s.format == "graphdb_script" ? graph::ExportFormat::kGraphDbScript
                                                   : graph::ExportFormat::kJsonl;
  const auto text = graph::export_graph(*load_snapshot(s.graph), format);
  if (s.output.empty()) {
    out << text;
  } else {
    write_text(s.output, text);
  }
  return kExitOk;
}

int cmd_import(const Settings& s, std::ostream& out) {
  require_file("--input", s.input);
  if (s.output.empty()) throw ConfigError("--output is required");
  const auto store = load_snapshot(s.input);
  save_snapshot(s.output, *store);
  out << "import: entities=" << store->entity_count() << " triples=" << store->triple_count()
      << " derived=" << store->derived_count() << "\n";
  return kExitOk;
}

int cmd_eval(const Settings& s, std::ostream& out) {
  require_file("--gold", s.gold);
  require_file("--graph", s.graph);
  evaluation::MatchPolicy policy;
  try {
    policy.mode = evaluation::match_mode_from_name(s.policy);
    policy.jaccard_min = s.jaccard;
    evaluation::validate(policy);
  } catch (const Error& e) {
    throw ConfigError((s.policy.empty() ? "--jaccard: " : "--policy/--jaccard: ") + e.message());
  }
  const auto format = evaluation::report_format_from_name(s.format.empty() ? "text" : s.format);
  const auto gold = evaluation::load_gold(s.gold, ontology::builtin_schema());
  const auto store = load_snapshot(s.graph);
  const auto report = evaluation::score(evaluation::extracted_triples(*store), gold, policy);
  const auto text = evaluation::render_report(report, format, store->schema());
  if (s.output.empty()) {
    out << text;
  } else {
    write_text(s.output, text);
  }
  return kExitOk;
}

int cmd_query(const Settings& s, std::ostream& out) {
  require_file("--graph", s.graph);
  if (s.text.empty()) throw ConfigError("--text is required");
  require_positive("--hops", s.hops);
  require_positive("--max", s.max);
  rag::RetrievalConfig config;
  config.max_hops = static_cast<std::size_t>(s.hops);
  config.max_triples = static_cast<std::size_t>(s.max);
  if (!s.relations.empty()) {
    config.relation_filter = std::set<std::string>(s.relations.begin(), s.relations.end());
  }
  const auto store = load_snapshot(s.graph);
  try {
    rag::validate(config, store->schema());
  } catch (const Error& e) {
    throw ConfigError("--relations: " + e.message());
  }
  out << rag::answer_context(*store, s.text, config).context;
  return kExitOk;
}

void add_pipeline_options(CLI::App* sub, Settings& s, bool similarity, bool extract) {
  sub->add_option("--corpus", s.corpus, "Directory of <doc_id>.txt and .meta.json files");
  sub->add_flag("--strict", s.strict, "Exit 1 when any document fails or warns");
  sub->add_option("--parallelism", s.parallelism, "Worker threads");
  if (similarity) {
    sub->add_option("--lambda", s.lambda, "Cosine threshold for relevance edges");
    sub->add_option("--provider", s.provider, "hash-ngram, hash-ngram:<dim>:<n> or http");
    sub->add_option("--embed-cache", s.embed_cache, "Embedding cache file");
  }
  if (extract) {
    sub->add_option("--llm", s.llm, "replay or http")->check(CLI::IsMember({"replay", "http"}));
    sub->add_option("--classifier", s.classifier, "rule or http")
        ->check(CLI::IsMember({"rule", "http"}));
    sub->add_option("--tau", s.tau, "Abstention threshold on the top label score");
    sub->add_option("--transcripts", s.transcripts, "Transcript file for --llm replay");
    sub->add_option("--record", s.record, "Append live interactions to this transcript file");
    sub->add_option("--prompt-dir", s.prompt_dir, "Directory of prompt templates");
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Settings s;
  CLI::App app{"Builds and queries a typed knowledge graph of policy documents", "forpkg"};
  app.set_config("--config", "", "TOML file of option values; flags take precedence");
  app.require_subcommand(1, 1);

  auto* ingest = app.add_subcommand("ingest", "Load a corpus and store document-level triples");
  add_pipeline_options(ingest, s, false, false);
  ingest->add_option("--output", s.output, "Graph snapshot to write");

  auto* link = app.add_subcommand("link-similar", "Add relevance edges between similar documents");
  add_pipeline_options(link, s, true, false);
  link->add_option("--graph", s.graph, "Graph snapshot to update");
  link->add_option("--output", s.output, "Write here instead of --graph");

  auto* extract = app.add_subcommand("extract", "Run content-level triple extraction");
  add_pipeline_options(extract, s, false, true);
  extract->add_option("--graph", s.graph, "Graph snapshot to update");
  extract->add_option("--output", s.output, "Write here instead of --graph");

  auto* run_all = app.add_subcommand("run-all", "ingest, link-similar, extract and export");
  add_pipeline_options(run_all, s, true, true);
  run_all->add_option("--output", s.output, "Graph snapshot to write");
  run_all->add_option("--script", s.script, "Also write a graph database import script");

  auto* exp = app.add_subcommand("export", "Export a graph snapshot");
  exp->add_option("--graph", s.graph, "Graph snapshot");
  exp->add_option("--format", s.format, "jsonl or graphdb_script")
      ->check(CLI::IsMember({"jsonl", "graphdb_script"}));
  exp->add_option("--output", s.output, "Output file; standard output when absent");

  auto* imp = app.add_subcommand("import", "Validate a jsonl export and write it as a snapshot");
  imp->add_option("--input", s.input, "jsonl export");
  imp->add_option("--output", s.output, "Graph snapshot to write");

  auto* eval = app.add_subcommand("eval", "Score a graph against gold triples");
  eval->add_option("--graph", s.graph, "Graph snapshot");
  eval->add_option("--gold", s.gold, "Gold triples, one JSON object per line");
  eval->add_option("--policy", s.policy, "exact, normalized or overlap");
  eval->add_option("--jaccard", s.jaccard, "Minimum character Jaccard for overlap");
  eval->add_option("--format", s.format, "text, csv or radar_data");
  eval->add_option("--output", s.output, "Output file; standard output when absent");

  auto* query = app.add_subcommand("query", "Print the graph context for a question");
  query->add_option("--graph", s.graph, "Graph snapshot");
  query->add_option("--text", s.text, "Question text");
  query->add_option("--hops", s.hops, "Maximum hops from linked entities");
  query->add_option("--max", s.max, "Maximum number of triples");
  query->add_option("--relations", s.relations, "Only follow these relation codes")
      ->delimiter(',');

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    std::unique_ptr<net::NetworkGuard> guard;
    const bool pipeline = ingest->parsed() || link->parsed() || extract->parsed() ||
                          run_all->parsed();
    if (!pipeline || offline_mode(s)) guard = std::make_unique<net::NetworkGuard>();
    if (ingest->parsed()) return cmd_ingest(s, out, err);
    if (link->parsed()) return cmd_link_similar(s, out, err);
    if (extract->parsed()) return cmd_extract(s, out, err);
    if (run_all->parsed()) return cmd_run_all(s, out, err);
    if (exp->parsed()) return cmd_export(s, out);
    if (imp->parsed()) return cmd_import(s, out);
    if (eval->parsed()) return cmd_eval(s, out);
    if (query->parsed()) return cmd_query(s, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidConfig || e.code() == ErrorCode::kUnreadableFile) {
      err << "config error: " << e.what() << "\n";
      return kExitConfig;
    }
    err << "error: " << e.what() << "\n";
    return kExitFailures;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailures;
  }
  return kExitConfig;
}

}  // namespace forpkg::cli
