#pragma once

#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "forpkg/graph_store.h"

namespace forpkg::graph {

enum class ExportFormat { kJsonl, kGraphDbScript };

// kJsonl: entities then non-derived triples, each sorted by id, one JSON
// object per line with sorted keys. Derived inverse edges appear only as the
// "inverse" field of their origin. kGraphDbScript: MERGE statements, nodes
// first, then relationships.
std::string export_graph(const GraphStore& store, ExportFormat format);

// Parses the jsonl dialect; every triple is re-validated and inverse edges
// are re-materialized. Throws ParseError or SignatureViolation carrying the
// 1-based line number.
std::unique_ptr<GraphStore> import_graph(std::string_view data,
                                         ontology::SchemaPtr schema);

nlohmann::json provenance_to_json(const Provenance& p);
Provenance provenance_from_json(const nlohmann::json& j);

}  // namespace forpkg::graph
