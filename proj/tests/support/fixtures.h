#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "forpkg/graph_store.h"
#include "forpkg/llm_client.h"
#include "forpkg/ontology.h"

namespace forpkg::testing {

std::filesystem::path fixture_dir();
std::filesystem::path data_dir();
std::string read_file(const std::filesystem::path& path);

// Table 2 of the ontology, transcribed row by row as text and parsed here,
// so it shares no code with the library's builtin schema.
struct OracleRow {
  std::set<std::string> domain;
  std::set<std::string> range;
};
const std::map<std::string, OracleRow>& relation_table_oracle();
const std::vector<std::string>& entity_type_oracle();
bool oracle_allows(const std::string& head, const std::string& relation,
                   const std::string& tail);

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Random store with `entities` entities spread over all types and
// `triples` distinct schema-valid base triples.
std::unique_ptr<graph::GraphStore> random_graph(std::uint64_t seed,
                                                std::size_t entities,
                                                std::size_t triples);

// Stands in for a chat model. Head-entity answers are registered per
// document (matched by a body substring); relation words and tail types are
// answered from cue lists so that the responses look like a model's.
class ScriptedLlmClient final : public llm::LlmClient {
 public:
  void add_head_answer(std::string body_marker, std::string response);
  std::string complete(const llm::Prompt& prompt) override;
  std::size_t calls() const { return calls_; }

 private:
  std::vector<std::pair<std::string, std::string>> heads_;
  std::atomic<std::size_t> calls_{0};
};

// The three-document corpus under fixtures/corpus3 and the scripted head
// answers its transcripts were recorded from.
std::filesystem::path corpus3_dir();
void add_corpus3_answers(ScriptedLlmClient& client);

}  // namespace forpkg::testing
