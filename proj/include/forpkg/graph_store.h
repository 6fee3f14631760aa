#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "forpkg/ontology.h"

namespace forpkg::graph {

struct EntityId {
  std::string value;
  auto operator<=>(const EntityId&) const = default;
};

struct TripleId {
  std::string value;
  auto operator<=>(const TripleId&) const = default;
};

enum class Stage {
  kDocumentLevel,
  kSimilarity,
  kHeadEntity,
  kRelationClassify,
  kTailExtract,
  kManual,
};

std::string_view stage_name(Stage stage);
Stage stage_from_name(std::string_view name);  // throws ParseError

struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const CharSpan&) const = default;
};

struct Provenance {
  std::string doc_id;
  std::size_t segment_index = 0;
  std::optional<CharSpan> char_span;  // byte offsets into the document body
  Stage stage = Stage::kManual;
  double confidence = 1.0;
  std::string note;

  bool operator==(const Provenance&) const = default;
};

// Throws InvalidProvenance. `document_length` is checked when given.
void check_provenance(const Provenance& p,
                      std::optional<std::size_t> document_length = {});

struct Entity {
  EntityId id;
  std::string type_code;
  std::string canonical_mention;
  std::set<std::string> aliases;  // surface forms differing from canonical
  Provenance first_seen;
  nlohmann::json attributes = nlohmann::json::object();
};

struct Triple {
  TripleId id;
  EntityId head;
  // Forward code for base triples; the inverse label (isPublished, contain)
  // for derived ones.
  std::string relation;
  EntityId tail;
  std::vector<Provenance> provenance;
  bool derived = false;
  std::optional<TripleId> origin;  // set iff derived

  double confidence() const;  // max over provenance, 0 when empty
};

// Trims ASCII and CJK whitespace; case and inner punctuation are kept.
std::string normalize_mention(std::string_view mention);

EntityId make_entity_id(std::string_view type_code, std::string_view mention);

struct InsertResult {
  TripleId id;
  std::optional<TripleId> inverse_id;
  bool created = false;  // false when provenance was merged into an existing
};

enum class Direction { kOut, kIn, kBoth };

struct NeighborQuery {
  Direction direction = Direction::kBoth;
  std::optional<std::set<std::string>> relation_filter;
  std::size_t max = 100;
  // Defaults to true only for kIn.
  std::optional<bool> include_derived;
};

struct Neighbor {
  Triple triple;
  Entity other;
};

// Validated triple store. Reads take a shared lock, writes an exclusive one.
class GraphStore {
 public:
  explicit GraphStore(ontology::SchemaPtr schema);

  GraphStore(const GraphStore& other);
  GraphStore& operator=(const GraphStore& other);
  GraphStore(GraphStore&&) = delete;
  GraphStore& operator=(GraphStore&&) = delete;

  const ontology::OntologySchema& schema() const { return *schema_; }
  ontology::SchemaPtr schema_ptr() const { return schema_; }

  // Throws UnknownEntityType, EmptyMention, InvalidProvenance.
  EntityId upsert_entity(std::string_view type_code, std::string_view mention,
                         const Provenance& provenance);

  // Throws MissingEntity, EmptyMention.
  void add_alias(const EntityId& id, std::string_view alias);

  // Throws MissingEntity.
  void set_attribute(const EntityId& id, const std::string& key,
                     nlohmann::json value);

  // `relation` must be a forward code. Inserting an existing triple adds the
  // provenance record unless an identical one is present. Throws MissingEntity,
  // UnknownRelationType, SignatureViolation, InvalidProvenance.
  InsertResult insert_triple(const EntityId& head, std::string_view relation,
                             const EntityId& tail,
                             const Provenance& provenance);

  // Ordered by (relation, other entity id, triple id). Throws MissingEntity.
  std::vector<Neighbor> neighbors(const EntityId& id,
                                  const NeighborQuery& query) const;

  std::optional<Entity> find_entity(const EntityId& id) const;
  std::optional<Triple> find_triple(const TripleId& id) const;
  bool contains_entity(const EntityId& id) const;

  std::vector<Entity> entities() const;  // sorted by id
  std::vector<Triple> triples(bool include_derived = false) const;  // by id

  std::size_t entity_count() const;
  std::size_t triple_count() const;   // non-derived
  std::size_t derived_count() const;

  // Bulk mode skips per-insert signature checks; finish_bulk_load()
  // re-verifies everything and the store refuses reads until it has.
  void begin_bulk_load();
  void finish_bulk_load();
  bool in_bulk_load() const;

  // Full scan of every invariant. Throws SignatureViolation / MissingEntity /
  // InvalidSchema describing the first failure.
  void verify() const;

 private:
  using Key = std::tuple<std::string, std::string, std::string>;

  void require_readable() const;
  void check_invariants_locked() const;
  const Entity& entity_locked(const EntityId& id) const;
  void link(const Triple& t);

  ontology::SchemaPtr schema_;
  mutable std::shared_mutex mutex_;
  bool bulk_ = false;
  std::map<EntityId, Entity> entities_;
  std::map<TripleId, Triple> triples_;
  std::map<Key, TripleId> base_index_;
  std::unordered_map<std::string, std::vector<TripleId>> out_;
  std::unordered_map<std::string, std::vector<TripleId>> in_;
};

}  // namespace forpkg::graph
