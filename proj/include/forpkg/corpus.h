#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forpkg/graph_store.h"

namespace forpkg::corpus {

enum class Timeliness { kInForce, kRepealed, kExpired, kUnknown };

std::string_view timeliness_name(Timeliness t);
// Unrecognized values map to kUnknown.
Timeliness timeliness_from_name(std::string_view name);

using Date = std::chrono::year_month_day;

// Strict YYYY-MM-DD; nullopt for malformed or impossible dates.
std::optional<Date> parse_date(std::string_view text);
std::string format_date(const Date& date);

struct PolicyMetadata {
  std::string issuing_org;
  std::optional<Date> release_date;
  std::optional<Date> implementation_date;
  std::vector<std::string> keywords;
  Timeliness timeliness = Timeliness::kUnknown;
  std::optional<std::string> category;
};

struct PolicyDocument {
  std::string doc_id;
  std::string title;
  std::string body;
  PolicyMetadata metadata;
};

struct LoadResult {
  std::vector<PolicyDocument> documents;  // sorted by doc_id
  std::vector<std::string> warnings;
};

// Reads every `<doc_id>.txt` with its optional `<doc_id>.meta.json` sidecar.
// A sidecar may override the doc id with a "doc_id" field. Missing or
// malformed sidecars, bad dates and empty bodies degrade to warnings.
// Throws UnreadableFile(path) or DuplicateDocId.
LoadResult load_corpus(const std::filesystem::path& directory);

// Parses one sidecar object into `doc`, appending warnings.
void apply_sidecar(const nlohmann::json& sidecar, PolicyDocument& doc,
                   std::vector<std::string>& warnings);

struct IngestResult {
  std::vector<graph::TripleId> triples;  // base triples only
  std::vector<std::string> warnings;
};

graph::EntityId document_entity(const PolicyDocument& doc);

// Upserts the DOC entity with date/keyword/timeliness attributes and emits
// <ORG, publish, DOC> and <DOC, classifyTo, CLS>.
IngestResult metadata_to_triples(const PolicyDocument& doc,
                                 graph::GraphStore& store);

// Exact-title citation edges: <A, cite, B> when B's title (at least
// `min_title_chars` code points) occurs verbatim in A's body, A != B.
std::vector<graph::TripleId> detect_citations(
    const std::vector<PolicyDocument>& corpus, graph::GraphStore& store,
    std::size_t min_title_chars = 6);

}  // namespace forpkg::corpus
