#include "forpkg/rag.h"

#include <algorithm>
#include <deque>
#include <sstream>
#include <tuple>

#include "forpkg/error.h"
#include "forpkg/text.h"

namespace forpkg::rag {

void validate(const RetrievalConfig& config, const ontology::OntologySchema& schema) {
  if (config.max_hops < 1) throw Error(ErrorCode::kInvalidConfig, "max_hops must be at least 1");
  if (config.max_triples < 1) {
    throw Error(ErrorCode::kInvalidConfig, "max_triples must be at least 1");
  }
  if (config.relation_filter) {
    for (const auto& code : *config.relation_filter) {
      if (!schema.has_relation(code)) {
        throw Error(ErrorCode::kInvalidConfig,
                    "relation_filter: '" + code + "' is not a forward relation code");
      }
    }
  }
}

std::vector<EntityLink> link_query(const graph::GraphStore& store, std::string_view query) {
  std::vector<EntityLink> found;
  for (const auto& e : store.entities()) {
    std::set<std::string> surfaces(e.aliases.begin(), e.aliases.end());
    surfaces.insert(e.canonical_mention);
    for (const auto& s : surfaces) {
      if (s.empty()) continue;
      for (std::size_t at : text::find_all(query, s)) {
        found.push_back({e.id, s, at, at + s.size()});
      }
    }
  }
  std::sort(found.begin(), found.end(), [](const EntityLink& a, const EntityLink& b) {
    return std::tuple(b.end - b.begin, a.begin, a.id) < std::tuple(a.end - a.begin, b.begin, b.id);
  });
  std::vector<EntityLink> accepted;
  for (auto& link : found) {
    bool keep = true;
    for (const auto& a : accepted) {
      const bool same_span = a.begin == link.begin && a.end == link.end;
      if (same_span && a.id == link.id) {
        keep = false;  // alias equal to another surface at the same place
        break;
      }
      if (!same_span && link.begin < a.end && a.begin < link.end) {
        keep = false;
        break;
      }
    }
    if (keep) accepted.push_back(std::move(link));
  }
  std::sort(accepted.begin(), accepted.end(), [](const EntityLink& a, const EntityLink& b) {
    return std::tie(a.begin, a.id) < std::tie(b.begin, b.id);
  });
  return accepted;
}

Subgraph retrieve_subgraph(const graph::GraphStore& store,
                           const std::vector<graph::EntityId>& seeds,
                           const RetrievalConfig& config) {
  validate(config, store.schema());
  Subgraph out;
  std::deque<graph::EntityId> queue;
  for (const auto& s : seeds) {
    if (!store.contains_entity(s)) {
      throw Error(ErrorCode::kMissingEntity, "unknown seed entity " + s.value);
    }
    if (out.distance.emplace(s, 0).second) {
      out.seeds.push_back(s);
      queue.push_back(s);
    }
  }

  graph::NeighborQuery q;
  q.direction = graph::Direction::kBoth;
  q.include_derived = false;
  q.max = static_cast<std::size_t>(-1);
  q.relation_filter = config.relation_filter;

  std::map<graph::TripleId, RetrievedTriple> taken;
  while (!queue.empty()) {
    const auto id = queue.front();
    queue.pop_front();
    const std::size_t d = out.distance.at(id);
    if (d >= config.max_hops) continue;
    for (auto& n : store.neighbors(id, q)) {
      if (out.distance.emplace(n.other.id, d + 1).second) queue.push_back(n.other.id);
      const auto tid = n.triple.id;
      taken.try_emplace(tid, RetrievedTriple{std::move(n.triple), d + 1});
    }
  }

  for (auto& [tid, rt] : taken) out.triples.push_back(std::move(rt));
  std::sort(out.triples.begin(), out.triples.end(),
            [](const RetrievedTriple& a, const RetrievedTriple& b) {
              const double ca = a.triple.confidence(), cb = b.triple.confidence();
              return std::tie(a.hop, cb, a.triple.id) < std::tie(b.hop, ca, b.triple.id);
            });
  if (out.triples.size() > config.max_triples) {
    out.omitted = out.triples.size() - config.max_triples;
    out.triples.resize(config.max_triples);
  }
  return out;
}

namespace {

std::string first_doc(const graph::Triple& t) {
  std::string best;
  for (const auto& p : t.provenance) {
    if (best.empty() || p.doc_id < best) best = p.doc_id;
  }
  return best;
}

std::string mention(const graph::GraphStore& store, const graph::EntityId& id) {
  const auto e = store.find_entity(id);
  return "⟨" + e->canonical_mention + " (" + e->type_code + ")⟩";
}

}  // namespace

std::string serialize_context(const graph::GraphStore& store, const Subgraph& subgraph) {
  std::map<std::string, std::vector<const graph::Triple*>> by_doc;
  for (const auto& rt : subgraph.triples) by_doc[first_doc(rt.triple)].push_back(&rt.triple);
  std::ostringstream out;
  for (const auto& [doc, triples] : by_doc) {
    out << "[" << doc << "]\n";
    for (const auto* t : triples) {
      out << mention(store, t->head) << " —["
          << store.schema().display_name_of(t->relation) << "]→ "
          << mention(store, t->tail) << "\n";
    }
  }
  if (subgraph.omitted > 0) {
    out << "(" << subgraph.omitted << " more triples omitted)\n";
  }
  return out.str();
}

QueryResult answer_context(const graph::GraphStore& store, std::string_view query,
                           const RetrievalConfig& config) {
  QueryResult r;
  r.links = link_query(store, query);
  std::vector<graph::EntityId> seeds;
  for (const auto& l : r.links) seeds.push_back(l.id);
  r.subgraph = retrieve_subgraph(store, seeds, config);
  r.context = serialize_context(store, r.subgraph);
  return r;
}

}  // namespace forpkg::rag
