#include "forpkg/ontology.h"

#include <fstream>
#include <sstream>

#include "forpkg/error.h"

namespace forpkg::ontology {

using nlohmann::json;

bool OntologySchema::has_entity_type(std::string_view code) const {
  return entity_types.find(std::string(code)) != entity_types.end();
}

bool OntologySchema::has_relation(std::string_view code) const {
  return relation_types.find(std::string(code)) != relation_types.end();
}

const RelationTypeDef& OntologySchema::relation(std::string_view code) const {
  auto it = relation_types.find(std::string(code));
  if (it == relation_types.end()) {
    throw Error(ErrorCode::kUnknownRelationType,
                "unknown relation '" + std::string(code) + "'");
  }
  return it->second;
}

std::map<std::string, std::string> OntologySchema::inverse_labels() const {
  std::map<std::string, std::string> out;
  for (const auto& [code, rel] : relation_types) {
    if (!rel.inverse_code || rel.is_symmetric) continue;
    if (has_relation(*rel.inverse_code)) continue;
    out.emplace(*rel.inverse_code, code);
  }
  return out;
}

std::vector<std::string> OntologySchema::relation_labels() const {
  std::set<std::string> labels;
  for (const auto& [code, rel] : relation_types) labels.insert(code);
  for (const auto& [label, fwd] : inverse_labels()) labels.insert(label);
  return {labels.begin(), labels.end()};
}

ResolvedLabel OntologySchema::resolve_label(std::string_view label) const {
  if (has_relation(label)) return {std::string(label), false};
  const auto inverses = inverse_labels();
  auto it = inverses.find(std::string(label));
  if (it == inverses.end()) {
    throw Error(ErrorCode::kUnknownRelationLabel,
                "unknown relation label '" + std::string(label) + "'");
  }
  return {it->second, true};
}

std::string OntologySchema::display_name_of(std::string_view label) const {
  const ResolvedLabel r = resolve_label(label);
  const auto& rel = relation(r.forward_code);
  if (!r.inverted) return rel.display_name;
  return rel.inverse_display_name.empty() ? std::string(label)
                                          : rel.inverse_display_name;
}

namespace {

OntologySchema make_builtin() {
  OntologySchema s;
  s.version = "forestry-policy-1.0";
  auto add_entity = [&](std::string code, std::string name, std::string desc) {
    s.entity_types.emplace(code, EntityTypeDef{code, std::move(name),
                                               std::move(desc)});
  };
  add_entity("ORG", "Organizations",
             "Companies, research institutions, government agencies, and "
             "non-profit organizations related to forestry");
  add_entity("PER", "Person",
             "Individuals in the forestry field, including government "
             "officials, scientists, policymakers, environmental activists, "
             "and forestry entrepreneurs");
  add_entity("LOC", "Geographical Locations",
             "General geographic locations or geographic entities related to "
             "forestry");
  add_entity("DOC", "Policy Documents", "Policy document title");
  add_entity("CLS", "Categories", "The forestry policy categories involved");
  add_entity("CONC", "Abstract Concepts",
             "Terms, theories, and methods in forestry");
  add_entity("OBJ", "Concrete Objects",
             "Specific tools, items, etc. related to forestry");
  add_entity("EXP_DEF", "Explanations/Definitions",
             "An explanation or definition of the concept of forestry");
  add_entity("ACT", "Action", "Actions that an able subject can perform");
  add_entity("STATE", "State",
             "The state presented by an incapacitated subject");

  auto add_rel = [&](RelationTypeDef def) {
    std::string code = def.code;
    s.relation_types.emplace(std::move(code), std::move(def));
  };
  add_rel({"publish", "Publish", {"ORG"}, {"DOC"}, "isPublished",
           "Be Published", false, false});
  add_rel({"locate", "Locate", {"ORG", "LOC"}, {"LOC"}, "contain", "Contain",
           false, false});
  add_rel({"belongTo", "Belong to", {"ORG"}, {"ORG"}, "contain", "Contain",
           false, false});
  add_rel({"workFor", "Take Office", {"PER"}, {"ORG"}, "employ", "Employ",
           false, false});
  const std::set<std::string> actors{"PER", "ORG", "OBJ"};
  const std::set<std::string> deeds{"ACT", "STATE"};
  add_rel({"duty", "Have the Duty", actors, deeds, std::nullopt, "", false,
           true});
  add_rel({"isProhibited", "Prohibit", actors, deeds, std::nullopt, "", false,
           true});
  add_rel({"hasRight", "Have the Right", actors, deeds, std::nullopt, "",
           false, true});
  add_rel({"define", "Define", {"CONC", "OBJ"}, {"EXP_DEF"}, std::nullopt, "",
           false, false});
  const std::set<std::string> relevant{"CONC", "OBJ", "EXP_DEF",
                                       "ACT",  "STATE", "DOC"};
  add_rel({"relevant", "Be Relevant to", relevant, relevant, "relevant",
           "Be Relevant to", true, false});
  add_rel({"classifyTo", "Be Classified into", {"DOC"}, {"CLS"}, "contain",
           "Contain", false, false});
  add_rel({"cite", "Cite", {"DOC"}, {"DOC"}, "isCited", "Be Cited", false,
           false});
  add_rel({"contain", "Contain", {"DOC", "LOC", "ORG", "STATE", "ACT", "CLS"},
           {"DOC", "LOC", "ORG", "CONC", "OBJ"}, std::nullopt, "", false,
           false});
  return s;
}

std::string join(const std::set<std::string>& items) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += "/";
    out += item;
  }
  return out;
}

void require_entity_type(const OntologySchema& schema, std::string_view code) {
  if (!schema.has_entity_type(code)) {
    throw Error(ErrorCode::kUnknownEntityType,
                "unknown entity type '" + std::string(code) + "'");
  }
}

bool subset_of(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& x : a) {
    if (!b.count(x)) return false;
  }
  return true;
}

}  // namespace

const OntologySchema& builtin_schema() {
  static const OntologySchema schema = make_builtin();
  return schema;
}

SchemaPtr builtin_schema_ptr() {
  static const SchemaPtr ptr = std::make_shared<const OntologySchema>(
      builtin_schema());
  return ptr;
}

void check_invariants(const OntologySchema& schema) {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidSchema, msg);
  };
  for (const auto& [code, def] : schema.entity_types) {
    if (code.empty() || code != def.code) {
      fail("entity type key '" + code + "' does not match its code");
    }
  }
  std::map<std::string, std::string> inverse_owner;
  for (const auto& [code, rel] : schema.relation_types) {
    if (code.empty() || code != rel.code) {
      fail("relation key '" + code + "' does not match its code");
    }
    if (schema.has_entity_type(code)) {
      fail("relation code '" + code + "' collides with an entity type");
    }
    if (rel.domain.empty() || rel.range.empty()) {
      fail("relation '" + code + "' has an empty domain or range");
    }
    for (const auto* side : {&rel.domain, &rel.range}) {
      for (const auto& t : *side) {
        if (!schema.has_entity_type(t)) {
          fail("relation '" + code + "' references undeclared type '" + t +
               "'");
        }
      }
    }
    if (rel.is_symmetric && rel.domain != rel.range) {
      fail("symmetric relation '" + code + "' has domain != range");
    }
    if (!rel.inverse_code) continue;
    const std::string& inv = *rel.inverse_code;
    if (rel.is_symmetric) {
      if (inv != code) fail("symmetric relation '" + code + "' names inverse");
      continue;
    }
    if (inv == code) fail("relation '" + code + "' is its own inverse");
    if (schema.has_entity_type(inv)) {
      fail("inverse label '" + inv + "' collides with an entity type");
    }
    if (schema.has_relation(inv)) {
      // Reverse edge is stored as the other relation; it must validate.
      const auto& target = schema.relation(inv);
      if (!subset_of(rel.range, target.domain) ||
          !subset_of(rel.domain, target.range)) {
        fail("inverse edges of '" + code + "' do not validate as '" + inv +
             "'");
      }
      continue;
    }
    auto [it, inserted] = inverse_owner.emplace(inv, code);
    if (!inserted) {
      fail("inverse label '" + inv + "' is claimed by both '" + it->second +
           "' and '" + code + "'");
    }
  }
}

SignatureVerdict validate_signature(const OntologySchema& schema,
                                    std::string_view head_type,
                                    std::string_view relation,
                                    std::string_view tail_type) {
  require_entity_type(schema, head_type);
  require_entity_type(schema, tail_type);
  const auto& rel = schema.relation(relation);
  const bool head_ok = rel.domain.count(std::string(head_type)) > 0;
  const bool tail_ok = rel.range.count(std::string(tail_type)) > 0;
  SignatureVerdict v;
  if (head_ok && tail_ok) return v;
  if (!head_ok && !tail_ok) {
    v.failed = FailedSide::kBoth;
  } else {
    v.failed = head_ok ? FailedSide::kRange : FailedSide::kDomain;
  }
  std::ostringstream msg;
  msg << "(" << head_type << ", " << relation << ", " << tail_type << "):";
  if (!head_ok) {
    msg << " head type " << head_type << " not in domain {"
        << join(rel.domain) << "}";
  }
  if (!tail_ok) {
    msg << " tail type " << tail_type << " not in range {" << join(rel.range)
        << "}";
  }
  v.reason = msg.str();
  return v;
}

NormalizedRelation normalize_relation(const OntologySchema& schema,
                                      std::string_view head_type,
                                      std::string_view label,
                                      std::string_view tail_type) {
  const ResolvedLabel resolved = schema.resolve_label(label);
  NormalizedRelation out;
  out.relation = resolved.forward_code;
  out.swapped = resolved.inverted;
  out.head_type = std::string(resolved.inverted ? tail_type : head_type);
  out.tail_type = std::string(resolved.inverted ? head_type : tail_type);
  const auto verdict =
      validate_signature(schema, out.head_type, out.relation, out.tail_type);
  if (!verdict.ok()) {
    throw Error(ErrorCode::kSignatureViolation, verdict.reason);
  }
  return out;
}

OntologySchema extend_schema(const OntologySchema& base,
                             const OntologySchema& extension) {
  OntologySchema merged = base;
  for (const auto& [code, def] : extension.entity_types) {
    auto [it, inserted] = merged.entity_types.emplace(code, def);
    if (!inserted && !(it->second == def)) {
      throw Error(ErrorCode::kConflictingDefinition,
                  "entity type '" + code + "' redefined");
    }
  }
  for (const auto& [code, def] : extension.relation_types) {
    auto [it, inserted] = merged.relation_types.emplace(code, def);
    if (!inserted && !(it->second == def)) {
      throw Error(ErrorCode::kConflictingDefinition,
                  "relation '" + code + "' redefined");
    }
  }
  if (!extension.version.empty() && extension.version != base.version) {
    merged.version = base.version + "+" + extension.version;
  }
  check_invariants(merged);
  return merged;
}

json to_json(const OntologySchema& schema) {
  json entities = json::array();
  for (const auto& [code, def] : schema.entity_types) {
    entities.push_back({{"code", def.code},
                        {"display_name", def.display_name},
                        {"description", def.description}});
  }
  json relations = json::array();
  for (const auto& [code, rel] : schema.relation_types) {
    json r = {{"code", rel.code},
              {"display_name", rel.display_name},
              {"domain", rel.domain},
              {"range", rel.range},
              {"symmetric", rel.is_symmetric},
              {"deontic", rel.is_deontic}};
    if (rel.inverse_code) {
      r["inverse"] = *rel.inverse_code;
      r["inverse_display_name"] = rel.inverse_display_name;
    }
    relations.push_back(std::move(r));
  }
  return {{"version", schema.version},
          {"entity_types", std::move(entities)},
          {"relation_types", std::move(relations)}};
}

OntologySchema schema_from_json(const json& j) {
  OntologySchema s;
  try {
    s.version = j.value("version", "");
    for (const auto& e : j.value("entity_types", json::array())) {
      EntityTypeDef def{e.at("code").get<std::string>(),
                        e.value("display_name", ""),
                        e.value("description", "")};
      const std::string code = def.code;
      if (!s.entity_types.emplace(code, std::move(def)).second) {
        throw Error(ErrorCode::kInvalidSchema,
                    "duplicate entity type '" + code + "'");
      }
    }
    for (const auto& r : j.value("relation_types", json::array())) {
      RelationTypeDef def;
      def.code = r.at("code").get<std::string>();
      def.display_name = r.value("display_name", def.code);
      def.domain = r.at("domain").get<std::set<std::string>>();
      def.range = r.at("range").get<std::set<std::string>>();
      if (r.contains("inverse") && !r["inverse"].is_null()) {
        def.inverse_code = r["inverse"].get<std::string>();
        def.inverse_display_name = r.value("inverse_display_name", "");
      }
      def.is_symmetric = r.value("symmetric", false);
      def.is_deontic = r.value("deontic", false);
      const std::string code = def.code;
      if (!s.relation_types.emplace(code, std::move(def)).second) {
        throw Error(ErrorCode::kInvalidSchema,
                    "duplicate relation '" + code + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidSchema, e.what());
  }
  return s;
}

OntologySchema load_schema_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kUnreadableFile, "cannot open " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
  return schema_from_json(j);
}

void save_schema_file(const OntologySchema& schema,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::kUnreadableFile, "cannot write " + path.string());
  }
  out << to_json(schema).dump(2) << "\n";
}

}  // namespace forpkg::ontology
