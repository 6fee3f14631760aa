#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace forpkg::ontology {

struct EntityTypeDef {
  std::string code;
  std::string display_name;
  std::string description;

  bool operator==(const EntityTypeDef&) const = default;
};

struct RelationTypeDef {
  std::string code;
  std::string display_name;
  std::set<std::string> domain;
  std::set<std::string> range;
  // Either another stored forward relation (contain) or a pure inverse
  // label that is resolved back to this relation (isPublished).
  std::optional<std::string> inverse_code;
  std::string inverse_display_name;
  bool is_symmetric = false;
  bool is_deontic = false;

  // True when inserting this relation also stores a derived reverse edge.
  bool materializes_inverse() const { return inverse_code && !is_symmetric; }

  bool operator==(const RelationTypeDef&) const = default;
};

// Result of resolving any relation label against a schema.
struct ResolvedLabel {
  std::string forward_code;
  bool inverted = false;  // label was an inverse label (isPublished, ...)
};

class OntologySchema {
 public:
  std::map<std::string, EntityTypeDef> entity_types;
  std::map<std::string, RelationTypeDef> relation_types;
  std::string version;

  bool has_entity_type(std::string_view code) const;
  bool has_relation(std::string_view code) const;
  // Throws UnknownRelationType.
  const RelationTypeDef& relation(std::string_view code) const;

  // Inverse labels that are not stored relations, mapped to their forward
  // relation (isPublished -> publish).
  std::map<std::string, std::string> inverse_labels() const;

  // Every label the extraction stages may emit: forward codes plus inverse
  // labels, sorted.
  std::vector<std::string> relation_labels() const;

  // Throws UnknownRelationLabel.
  ResolvedLabel resolve_label(std::string_view label) const;

  // Human-readable name for a forward code or inverse label.
  std::string display_name_of(std::string_view label) const;

  bool operator==(const OntologySchema&) const = default;
};

using SchemaPtr = std::shared_ptr<const OntologySchema>;

// The 10 entity / 12 forward (15 labelled) relation forestry policy ontology.
const OntologySchema& builtin_schema();
SchemaPtr builtin_schema_ptr();

// Throws InvalidSchema naming the first violated invariant.
void check_invariants(const OntologySchema& schema);

enum class FailedSide { kNone, kDomain, kRange, kBoth };

struct SignatureVerdict {
  FailedSide failed = FailedSide::kNone;
  std::string reason;

  bool ok() const { return failed == FailedSide::kNone; }
};

// Forward relation codes only. Throws UnknownEntityType / UnknownRelationType.
SignatureVerdict validate_signature(const OntologySchema& schema,
                                    std::string_view head_type,
                                    std::string_view relation,
                                    std::string_view tail_type);

struct NormalizedRelation {
  std::string head_type;
  std::string relation;  // forward code
  std::string tail_type;
  bool swapped = false;  // head and tail roles were exchanged

  bool operator==(const NormalizedRelation&) const = default;
};

// Rewrites inverse labels to their forward code with roles swapped, then
// validates. Throws UnknownRelationLabel, UnknownEntityType or
// SignatureViolation.
NormalizedRelation normalize_relation(const OntologySchema& schema,
                                      std::string_view head_type,
                                      std::string_view label,
                                      std::string_view tail_type);

// Disjoint union with identical re-declarations allowed. Throws
// ConflictingDefinition(code) or InvalidSchema.
OntologySchema extend_schema(const OntologySchema& base,
                             const OntologySchema& extension);

nlohmann::json to_json(const OntologySchema& schema);
// Partial schemas (extensions) may reference base entity types, so
// invariants are not checked here.
OntologySchema schema_from_json(const nlohmann::json& j);

OntologySchema load_schema_file(const std::filesystem::path& path);
void save_schema_file(const OntologySchema& schema,
                      const std::filesystem::path& path);

}  // namespace forpkg::ontology
