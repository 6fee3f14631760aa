#include "forpkg/graph_store.h"

#include <algorithm>
#include <mutex>

#include "forpkg/error.h"
#include "forpkg/text.h"

namespace forpkg::graph {

namespace {

constexpr std::size_t kIdHexLength = 16;

TripleId base_triple_id(const EntityId& head, std::string_view relation,
                        const EntityId& tail) {
  std::string key = "triple\x1f" + head.value + "\x1f" + std::string(relation) +
                    "\x1f" + tail.value;
  return {"t_" + text::sha256_hex(key).substr(0, kIdHexLength)};
}

TripleId derived_triple_id(const TripleId& origin) {
  return {"t_" + text::sha256_hex("derived\x1f" + origin.value)
                     .substr(0, kIdHexLength)};
}

}  // namespace

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kDocumentLevel: return "document_level";
    case Stage::kSimilarity: return "similarity";
    case Stage::kHeadEntity: return "head_entity";
    case Stage::kRelationClassify: return "relation_classify";
    case Stage::kTailExtract: return "tail_extract";
    case Stage::kManual: return "manual";
  }
  return "manual";
}

Stage stage_from_name(std::string_view name) {
  for (Stage s : {Stage::kDocumentLevel, Stage::kSimilarity, Stage::kHeadEntity,
                  Stage::kRelationClassify, Stage::kTailExtract,
                  Stage::kManual}) {
    if (stage_name(s) == name) return s;
  }
  throw Error(ErrorCode::kParseError,
              "unknown provenance stage '" + std::string(name) + "'");
}

void check_provenance(const Provenance& p,
                      std::optional<std::size_t> document_length) {
  if (!(p.confidence >= 0.0 && p.confidence <= 1.0)) {
    throw Error(ErrorCode::kInvalidProvenance,
                "confidence " + std::to_string(p.confidence) +
                    " outside [0, 1]");
  }
  if (p.char_span) {
    const auto& span = *p.char_span;
    if (span.start >= span.end ||
        (document_length && span.end > *document_length)) {
      throw Error(ErrorCode::kInvalidProvenance,
                  "char span [" + std::to_string(span.start) + ", " +
                      std::to_string(span.end) + ") is invalid");
    }
  }
}

double Triple::confidence() const {
  double best = 0.0;
  for (const auto& p : provenance) best = std::max(best, p.confidence);
  return best;
}

std::string normalize_mention(std::string_view mention) {
  return std::string(text::trim(mention));
}

EntityId make_entity_id(std::string_view type_code, std::string_view mention) {
  const std::string key = std::string(type_code) + "\x1f" +
                          normalize_mention(mention);
  return {"e_" + text::sha256_hex(key).substr(0, kIdHexLength)};
}

GraphStore::GraphStore(ontology::SchemaPtr schema) : schema_(std::move(schema)) {
  if (!schema_) {
    throw Error(ErrorCode::kInvalidSchema, "graph store needs a schema");
  }
}

GraphStore::GraphStore(const GraphStore& other) {
  std::shared_lock lock(other.mutex_);
  schema_ = other.schema_;
  bulk_ = other.bulk_;
  entities_ = other.entities_;
  triples_ = other.triples_;
  base_index_ = other.base_index_;
  out_ = other.out_;
  in_ = other.in_;
}

GraphStore& GraphStore::operator=(const GraphStore& other) {
  if (this == &other) return *this;
  GraphStore copy(other);
  std::unique_lock lock(mutex_);
  schema_ = std::move(copy.schema_);
  bulk_ = copy.bulk_;
  entities_ = std::move(copy.entities_);
  triples_ = std::move(copy.triples_);
  base_index_ = std::move(copy.base_index_);
  out_ = std::move(copy.out_);
  in_ = std::move(copy.in_);
  return *this;
}

EntityId GraphStore::upsert_entity(std::string_view type_code,
                                   std::string_view mention,
                                   const Provenance& provenance) {
  if (!schema_->has_entity_type(type_code)) {
    throw Error(ErrorCode::kUnknownEntityType,
                "unknown entity type '" + std::string(type_code) + "'");
  }
  std::string canonical = normalize_mention(mention);
  if (canonical.empty()) {
    throw Error(ErrorCode::kEmptyMention, "mention is empty after trimming");
  }
  check_provenance(provenance);
  EntityId id = make_entity_id(type_code, canonical);
  std::unique_lock lock(mutex_);
  auto it = entities_.find(id);
  if (it != entities_.end()) {
    if (mention != it->second.canonical_mention) {
      it->second.aliases.insert(std::string(mention));
    }
    return id;
  }
  Entity e;
  e.id = id;
  e.type_code = std::string(type_code);
  e.canonical_mention = std::move(canonical);
  e.first_seen = provenance;
  entities_.emplace(id, std::move(e));
  return id;
}

void GraphStore::add_alias(const EntityId& id, std::string_view alias) {
  if (normalize_mention(alias).empty()) {
    throw Error(ErrorCode::kEmptyMention, "alias is empty after trimming");
  }
  std::unique_lock lock(mutex_);
  auto it = entities_.find(id);
  if (it == entities_.end()) {
    throw Error(ErrorCode::kMissingEntity, "no entity " + id.value);
  }
  if (alias != it->second.canonical_mention) {
    it->second.aliases.insert(std::string(alias));
  }
}

void GraphStore::set_attribute(const EntityId& id, const std::string& key,
                               nlohmann::json value) {
  std::unique_lock lock(mutex_);
  auto it = entities_.find(id);
  if (it == entities_.end()) {
    throw Error(ErrorCode::kMissingEntity, "no entity " + id.value);
  }
  it->second.attributes[key] = std::move(value);
}

const Entity& GraphStore::entity_locked(const EntityId& id) const {
  auto it = entities_.find(id);
  if (it == entities_.end()) {
    throw Error(ErrorCode::kMissingEntity, "no entity " + id.value);
  }
  return it->second;
}

void GraphStore::link(const Triple& t) {
  out_[t.head.value].push_back(t.id);
  if (t.tail != t.head) in_[t.tail.value].push_back(t.id);
}

InsertResult GraphStore::insert_triple(const EntityId& head,
                                       std::string_view relation,
                                       const EntityId& tail,
                                       const Provenance& provenance) {
  check_provenance(provenance);
  std::unique_lock lock(mutex_);
  const Entity& h = entity_locked(head);
  const Entity& t = entity_locked(tail);
  const auto& rel = schema_->relation(relation);
  if (!bulk_) {
    const auto verdict =
        ontology::validate_signature(*schema_, h.type_code, rel.code, t.type_code);
    if (!verdict.ok()) {
      throw Error(ErrorCode::kSignatureViolation, verdict.reason);
    }
  }

  EntityId from = head;
  EntityId to = tail;
  if (rel.is_symmetric && to < from) std::swap(from, to);

  InsertResult result;
  const Key key{from.value, rel.code, to.value};
  if (auto found = base_index_.find(key); found != base_index_.end()) {
    result.id = found->second;
    auto append = [&](std::vector<Provenance>& list) {
      if (std::find(list.begin(), list.end(), provenance) == list.end()) {
        list.push_back(provenance);
      }
    };
    append(triples_.at(found->second).provenance);
    if (rel.materializes_inverse()) {
      TripleId inv = derived_triple_id(found->second);
      append(triples_.at(inv).provenance);
      result.inverse_id = inv;
    }
    return result;
  }

  Triple base;
  base.id = base_triple_id(from, rel.code, to);
  base.head = from;
  base.relation = rel.code;
  base.tail = to;
  base.provenance.push_back(provenance);
  result.id = base.id;
  result.created = true;

  if (rel.materializes_inverse()) {
    Triple inv;
    inv.id = derived_triple_id(base.id);
    inv.head = to;
    inv.relation = *rel.inverse_code;
    inv.tail = from;
    inv.provenance = base.provenance;
    inv.derived = true;
    inv.origin = base.id;
    result.inverse_id = inv.id;
    link(inv);
    triples_.emplace(inv.id, std::move(inv));
  }
  base_index_.emplace(key, base.id);
  link(base);
  triples_.emplace(base.id, std::move(base));
  return result;
}

void GraphStore::require_readable() const {
  if (bulk_) {
    throw Error(ErrorCode::kInvalidSchema,
                "store is in bulk-load mode; call finish_bulk_load() first");
  }
}

std::vector<Neighbor> GraphStore::neighbors(const EntityId& id,
                                            const NeighborQuery& query) const {
  std::shared_lock lock(mutex_);
  require_readable();
  entity_locked(id);
  const bool include_derived =
      query.include_derived.value_or(query.direction == Direction::kIn);

  std::vector<const Triple*> hits;
  auto collect = [&](const auto& index, bool outgoing) {
    auto it = index.find(id.value);
    if (it == index.end()) return;
    for (const auto& tid : it->second) {
      const Triple& t = triples_.at(tid);
      if (t.derived && !include_derived) continue;
      if (query.relation_filter && !query.relation_filter->count(t.relation)) {
        continue;
      }
      const bool symmetric = !t.derived && schema_->relation(t.relation).is_symmetric;
      const bool wanted =
          symmetric || query.direction == Direction::kBoth ||
          (outgoing ? query.direction == Direction::kOut
                    : query.direction == Direction::kIn);
      if (wanted) hits.push_back(&t);
    }
  };
  collect(out_, true);
  collect(in_, false);

  std::vector<Neighbor> result;
  result.reserve(hits.size());
  for (const Triple* t : hits) {
    const EntityId& other = t->head == id ? t->tail : t->head;
    result.push_back({*t, entity_locked(other)});
  }
  std::sort(result.begin(), result.end(), [](const Neighbor& a, const Neighbor& b) {
    return std::tie(a.triple.relation, a.other.id, a.triple.id) <
           std::tie(b.triple.relation, b.other.id, b.triple.id);
  });
  result.erase(std::unique(result.begin(), result.end(),
                           [](const Neighbor& a, const Neighbor& b) {
                             return a.triple.id == b.triple.id;
                           }),
               result.end());
  if (result.size() > query.max) result.resize(query.max);
  return result;
}

std::optional<Entity> GraphStore::find_entity(const EntityId& id) const {
  std::shared_lock lock(mutex_);
  auto it = entities_.find(id);
  if (it == entities_.end()) return std::nullopt;
  return it->second;
}

std::optional<Triple> GraphStore::find_triple(const TripleId& id) const {
  std::shared_lock lock(mutex_);
  auto it = triples_.find(id);
  if (it == triples_.end()) return std::nullopt;
  return it->second;
}

bool GraphStore::contains_entity(const EntityId& id) const {
  std::shared_lock lock(mutex_);
  return entities_.count(id) > 0;
}

std::vector<Entity> GraphStore::entities() const {
  std::shared_lock lock(mutex_);
  require_readable();
  std::vector<Entity> out;
  out.reserve(entities_.size());
  for (const auto& [id, e] : entities_) out.push_back(e);
  return out;
}

std::vector<Triple> GraphStore::triples(bool include_derived) const {
  std::shared_lock lock(mutex_);
  require_readable();
  std::vector<Triple> out;
  out.reserve(triples_.size());
  for (const auto& [id, t] : triples_) {
    if (t.derived && !include_derived) continue;
    out.push_back(t);
  }
  return out;
}

std::size_t GraphStore::entity_count() const {
  std::shared_lock lock(mutex_);
  return entities_.size();
}

std::size_t GraphStore::triple_count() const {
  std::shared_lock lock(mutex_);
  return base_index_.size();
}

std::size_t GraphStore::derived_count() const {
  std::shared_lock lock(mutex_);
  return triples_.size() - base_index_.size();
}

void GraphStore::begin_bulk_load() {
  std::unique_lock lock(mutex_);
  bulk_ = true;
}

void GraphStore::finish_bulk_load() {
  std::unique_lock lock(mutex_);
  check_invariants_locked();
  bulk_ = false;
}

bool GraphStore::in_bulk_load() const {
  std::shared_lock lock(mutex_);
  return bulk_;
}

void GraphStore::verify() const {
  std::shared_lock lock(mutex_);
  check_invariants_locked();
}

void GraphStore::check_invariants_locked() const {
  for (const auto& [id, e] : entities_) {
    if (!schema_->has_entity_type(e.type_code)) {
      throw Error(ErrorCode::kUnknownEntityType,
                  "entity " + id.value + " has unknown type " + e.type_code);
    }
    if (make_entity_id(e.type_code, e.canonical_mention) != id) {
      throw Error(ErrorCode::kInvalidSchema,
                  "entity " + id.value + " id does not match its content");
    }
  }
  std::size_t expected_derived = 0;
  for (const auto& [id, t] : triples_) {
    const Entity& h = entity_locked(t.head);
    const Entity& tl = entity_locked(t.tail);
    if (!t.derived) {
      const auto& rel = schema_->relation(t.relation);
      const auto verdict = ontology::validate_signature(*schema_, h.type_code,
                                                        rel.code, tl.type_code);
      if (!verdict.ok()) {
        throw Error(ErrorCode::kSignatureViolation,
                    "triple " + id.value + " " + verdict.reason);
      }
      if (rel.is_symmetric && t.tail < t.head) {
        throw Error(ErrorCode::kInvalidSchema,
                    "symmetric triple " + id.value + " is not canonical");
      }
      if (rel.materializes_inverse()) {
        ++expected_derived;
        if (!triples_.count(derived_triple_id(id))) {
          throw Error(ErrorCode::kInvalidSchema,
                      "triple " + id.value + " lacks its inverse edge");
        }
      }
      continue;
    }
    if (!t.origin) {
      throw Error(ErrorCode::kInvalidSchema,
                  "derived triple " + id.value + " has no origin");
    }
    auto origin = triples_.find(*t.origin);
    if (origin == triples_.end() || origin->second.derived) {
      throw Error(ErrorCode::kInvalidSchema,
                  "derived triple " + id.value + " has no base origin");
    }
    const Triple& o = origin->second;
    const auto& rel = schema_->relation(o.relation);
    if (!rel.materializes_inverse() || *rel.inverse_code != t.relation ||
        o.head != t.tail || o.tail != t.head) {
      throw Error(ErrorCode::kInvalidSchema,
                  "derived triple " + id.value + " does not mirror its origin");
    }
    if (schema_->has_relation(t.relation)) {
      const auto verdict = ontology::validate_signature(
          *schema_, h.type_code, t.relation, tl.type_code);
      if (!verdict.ok()) {
        throw Error(ErrorCode::kSignatureViolation,
                    "derived triple " + id.value + " " + verdict.reason);
      }
    }
  }
  if (expected_derived != triples_.size() - base_index_.size()) {
    throw Error(ErrorCode::kInvalidSchema,
                "derived edge count does not match inverse-bearing triples");
  }
}

}  // namespace forpkg::graph
