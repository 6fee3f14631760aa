#include "forpkg/graph_io.h"

#include <sstream>

#include "forpkg/error.h"

namespace forpkg::graph {

using nlohmann::json;

json provenance_to_json(const Provenance& p) {
  json j = {{"doc_id", p.doc_id},
            {"segment_index", p.segment_index},
            {"stage", stage_name(p.stage)},
            {"confidence", p.confidence}};
  if (p.char_span) j["char_span"] = {p.char_span->start, p.char_span->end};
  if (!p.note.empty()) j["note"] = p.note;
  return j;
}

Provenance provenance_from_json(const json& j) {
  Provenance p;
  p.doc_id = j.at("doc_id").get<std::string>();
  p.segment_index = j.at("segment_index").get<std::size_t>();
  p.stage = stage_from_name(j.at("stage").get<std::string>());
  p.confidence = j.at("confidence").get<double>();
  if (j.contains("char_span")) {
    const auto& span = j.at("char_span");
    p.char_span = CharSpan{span.at(0).get<std::size_t>(),
                           span.at(1).get<std::size_t>()};
  }
  p.note = j.value("note", "");
  return p;
}

namespace {

std::string dump_line(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::strict);
}

std::string export_jsonl(const GraphStore& store) {
  std::string out;
  for (const auto& e : store.entities()) {
    json j = {{"kind", "entity"},
              {"id", e.id.value},
              {"type", e.type_code},
              {"mention", e.canonical_mention},
              {"aliases", e.aliases},
              {"attributes", e.attributes},
              {"first_seen", provenance_to_json(e.first_seen)}};
    out += dump_line(j);
    out += '\n';
  }
  for (const auto& t : store.triples(false)) {
    json prov = json::array();
    for (const auto& p : t.provenance) prov.push_back(provenance_to_json(p));
    json j = {{"kind", "triple"},
              {"id", t.id.value},
              {"head", t.head.value},
              {"relation", t.relation},
              {"tail", t.tail.value},
              {"provenance", std::move(prov)}};
    const auto& rel = store.schema().relation(t.relation);
    if (rel.materializes_inverse()) j["inverse"] = *rel.inverse_code;
    out += dump_line(j);
    out += '\n';
  }
  return out;
}

std::string cypher_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '"': out += "\\\""; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

std::string cypher_number(double v) { return json(v).dump(); }

std::string export_script(const GraphStore& store) {
  std::ostringstream out;
  out << "// forpkg property-graph import script (schema "
      << store.schema().version << ")\n";
  const auto entities = store.entities();
  std::map<EntityId, std::string> labels;
  for (const auto& e : entities) {
    labels.emplace(e.id, e.type_code);
    out << "MERGE (n:" << e.type_code << " {id: " << cypher_string(e.id.value)
        << "}) SET n.mention = " << cypher_string(e.canonical_mention)
        << ", n.doc_id = " << cypher_string(e.first_seen.doc_id)
        << ", n.confidence = " << cypher_number(e.first_seen.confidence)
        << ";\n";
  }
  for (const auto& t : store.triples(false)) {
    const std::string doc =
        t.provenance.empty() ? std::string() : t.provenance.front().doc_id;
    out << "MATCH (a:" << labels.at(t.head)
        << " {id: " << cypher_string(t.head.value) << "}), (b:"
        << labels.at(t.tail) << " {id: " << cypher_string(t.tail.value)
        << "}) MERGE (a)-[r:" << t.relation << "]->(b) SET r.doc_id = "
        << cypher_string(doc)
        << ", r.confidence = " << cypher_number(t.confidence()) << ";\n";
  }
  return out.str();
}

}  // namespace

std::string export_graph(const GraphStore& store, ExportFormat format) {
  return format == ExportFormat::kJsonl ? export_jsonl(store)
                                        : export_script(store);
}

std::unique_ptr<GraphStore> import_graph(std::string_view data,
                                         ontology::SchemaPtr schema) {
  auto store = std::make_unique<GraphStore>(std::move(schema));
  struct Record {
    std::size_t line;
    json value;
  };
  std::vector<Record> entity_records;
  std::vector<Record> triple_records;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < data.size()) {
    std::size_t end = data.find('\n', pos);
    if (end == std::string_view::npos) end = data.size();
    std::string_view line = data.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, e.what(), line_no);
    }
    const std::string kind = j.is_object() ? j.value("kind", "") : "";
    if (kind == "entity") {
      entity_records.push_back({line_no, std::move(j)});
    } else if (kind == "triple") {
      triple_records.push_back({line_no, std::move(j)});
    } else {
      throw Error(ErrorCode::kParseError, "record has no valid \"kind\"",
                  line_no);
    }
  }

  for (const auto& rec : entity_records) {
    try {
      const auto& j = rec.value;
      const std::string type = j.at("type").get<std::string>();
      const std::string mention = j.at("mention").get<std::string>();
      EntityId id = store->upsert_entity(
          type, mention, provenance_from_json(j.at("first_seen")));
      if (id.value != j.at("id").get<std::string>()) {
        throw Error(ErrorCode::kParseError,
                    "entity id does not match its type and mention");
      }
      const json aliases = j.value("aliases", json::array());
      for (const auto& alias : aliases) {
        store->add_alias(id, alias.get<std::string>());
      }
      const json attributes = j.value("attributes", json::object());
      for (const auto& [key, value] : attributes.items()) {
        store->set_attribute(id, key, value);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, e.what(), rec.line);
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError, e.what(), rec.line);
    }
  }

  for (const auto& rec : triple_records) {
    try {
      const auto& j = rec.value;
      const EntityId head{j.at("head").get<std::string>()};
      const EntityId tail{j.at("tail").get<std::string>()};
      const std::string relation = j.at("relation").get<std::string>();
      const auto& provenance = j.at("provenance");
      if (!provenance.is_array() || provenance.empty()) {
        throw Error(ErrorCode::kParseError, "triple has no provenance");
      }
      InsertResult result;
      for (const auto& p : provenance) {
        result = store->insert_triple(head, relation, tail,
                                      provenance_from_json(p));
      }
      if (result.id.value != j.at("id").get<std::string>()) {
        throw Error(ErrorCode::kParseError,
                    "triple id does not match its endpoints and relation");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, e.what(), rec.line);
    } catch (const Error& e) {
      const ErrorCode code = e.code() == ErrorCode::kSignatureViolation
                                 ? ErrorCode::kSignatureViolation
                                 : ErrorCode::kParseError;
      throw Error(code, e.what(), rec.line);
    }
  }
  store->verify();
  return store;
}

}  // namespace forpkg::graph
