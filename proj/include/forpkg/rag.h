#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "forpkg/graph_store.h"

namespace forpkg::rag {

struct RetrievalConfig {
  std::size_t max_hops = 2;       // at least 1
  std::size_t max_triples = 40;   // at least 1
  std::optional<std::set<std::string>> relation_filter;  // forward codes
};

void validate(const RetrievalConfig& config,
              const ontology::OntologySchema& schema);  // throws InvalidConfig

// An entity mention found in the query text. Offsets are bytes.
struct EntityLink {
  graph::EntityId id;
  std::string surface;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Matches canonical mentions and aliases against the query. Longer matches
// win and any match overlapping an accepted one is dropped, except that
// entities sharing the exact accepted span are all kept. Sorted by offset,
// then id.
std::vector<EntityLink> link_query(const graph::GraphStore& store,
                                   std::string_view query);

struct RetrievedTriple {
  graph::Triple triple;
  std::size_t hop = 0;  // 1 for triples touching a seed
};

struct Subgraph {
  std::vector<graph::EntityId> seeds;
  std::map<graph::EntityId, std::size_t> distance;  // reached entities
  std::vector<RetrievedTriple> triples;  // hop, confidence desc, id
  std::size_t omitted = 0;               // dropped by max_triples
};

// Breadth-first expansion over base triples, ignoring direction. A triple is
// taken when one endpoint lies fewer than max_hops steps from a seed.
// Throws MissingEntity for an unknown seed.
Subgraph retrieve_subgraph(const graph::GraphStore& store,
                           const std::vector<graph::EntityId>& seeds,
                           const RetrievalConfig& config);

// One "⟨head (TYPE)⟩ —[Display]→ ⟨tail (TYPE)⟩" line per triple, grouped
// under "[doc_id]" headers by the triple's first source document. A final
// line reports triples dropped by the cap.
std::string serialize_context(const graph::GraphStore& store, const Subgraph& subgraph);

struct QueryResult {
  std::vector<EntityLink> links;
  Subgraph subgraph;
  std::string context;
};

QueryResult answer_context(const graph::GraphStore& store, std::string_view query,
                           const RetrievalConfig& config);

}  // namespace forpkg::rag
