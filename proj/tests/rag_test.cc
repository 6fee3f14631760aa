#include "forpkg/rag.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "forpkg/error.h"
#include "support/fixtures.h"

namespace forpkg::rag {
namespace {

graph::Provenance P(std::string doc, double confidence = 0.9) {
  return {std::move(doc), 0, std::nullopt, graph::Stage::kTailExtract, confidence, ""};
}

struct SmallGraph {
  graph::GraphStore store{ontology::builtin_schema_ptr()};
  graph::EntityId bureau, admin, rules, seeds_rules, category, center;
  SmallGraph() {
    bureau = store.upsert_entity("ORG", "国家林业局", P("d1"));
    admin = store.upsert_entity("ORG", "国家林业和草原局", P("d3"));
    rules = store.upsert_entity("DOC", "林业标准化管理办法", P("d1"));
    seeds_rules = store.upsert_entity("DOC", "林木种子质量管理办法", P("d2"));
    category = store.upsert_entity("CLS", "标准管理", P("d1"));
    center = store.upsert_entity("ORG", "天然林保护修复中心", P("d3"));
    store.add_alias(bureau, "林业局");
    store.insert_triple(bureau, "publish", rules, P("d1", 0.95));
    store.insert_triple(bureau, "publish", seeds_rules, P("d2", 0.9));
    store.insert_triple(rules, "classifyTo", category, P("d1", 0.8));
    store.insert_triple(seeds_rules, "cite", rules, P("d2", 0.7));
    store.insert_triple(center, "belongTo", admin, P("d3", 0.6));
  }
};

TEST(Link, LongestMatchWins) {
  SmallGraph g;
  const auto links = link_query(g.store, "国家林业局发布的林业标准化管理办法属于哪一类？");
  ASSERT_EQ(links.size(), 2u);
  EXPECT_EQ(links[0].id, g.bureau);
  EXPECT_EQ(links[0].surface, "国家林业局");
  EXPECT_EQ(links[0].begin, 0u);
  EXPECT_EQ(links[1].id, g.rules);
}

TEST(Link, AliasAndNoOverlap) {
  SmallGraph g;
  auto links = link_query(g.store, "林业局负责什么");
  ASSERT_EQ(links.size(), 1u);
  EXPECT_EQ(links[0].id, g.bureau);
  EXPECT_EQ(links[0].surface, "林业局");
  // 国家林业和草原局 contains no shorter entity mention inside it that survives.
  links = link_query(g.store, "国家林业和草原局");
  ASSERT_EQ(links.size(), 1u);
  EXPECT_EQ(links[0].id, g.admin);
  EXPECT_TRUE(link_query(g.store, "无关的问题").empty());
}

TEST(Link, SameSpanKeepsAllEntities) {
  graph::GraphStore store(ontology::builtin_schema_ptr());
  const auto a = store.upsert_entity("CONC", "种子", P("d"));
  const auto b = store.upsert_entity("OBJ", "种子", P("d"));
  const auto links = link_query(store, "种子的定义");
  ASSERT_EQ(links.size(), 2u);
  EXPECT_EQ(links[0].id, std::min(a, b));
  EXPECT_EQ(links[1].id, std::max(a, b));
}

TEST(Retrieve, HopsAndOrder) {
  SmallGraph g;
  RetrievalConfig one{1, 40, std::nullopt};
  auto sub = retrieve_subgraph(g.store, {g.bureau}, one);
  ASSERT_EQ(sub.triples.size(), 2u);
  EXPECT_EQ(sub.triples[0].triple.tail, g.rules);  // higher confidence first
  EXPECT_EQ(sub.triples[1].triple.tail, g.seeds_rules);

  sub = retrieve_subgraph(g.store, {g.bureau}, RetrievalConfig{});
  ASSERT_EQ(sub.triples.size(), 4u);
  EXPECT_EQ(sub.triples[2].hop, 2u);
  EXPECT_EQ(sub.triples[2].triple.relation, "classifyTo");
  EXPECT_EQ(sub.triples[3].triple.relation, "cite");
  EXPECT_FALSE(sub.distance.contains(g.center));
  EXPECT_EQ(sub.omitted, 0u);
}

TEST(Retrieve, FilterCapAndErrors) {
  SmallGraph g;
  auto sub = retrieve_subgraph(g.store, {g.bureau},
                               RetrievalConfig{2, 40, std::set<std::string>{"publish"}});
  EXPECT_EQ(sub.triples.size(), 2u);
  sub = retrieve_subgraph(g.store, {g.bureau}, RetrievalConfig{2, 3, std::nullopt});
  EXPECT_EQ(sub.triples.size(), 3u);
  EXPECT_EQ(sub.omitted, 1u);
  EXPECT_THROW(retrieve_subgraph(g.store, {graph::EntityId{"ORG:missing"}}, RetrievalConfig{}),
               Error);
  EXPECT_THROW(retrieve_subgraph(g.store, {g.bureau}, RetrievalConfig{0, 40, std::nullopt}),
               Error);
  EXPECT_THROW(retrieve_subgraph(g.store, {g.bureau},
                                 RetrievalConfig{2, 40, std::set<std::string>{"isPublished"}}),
               Error);
  EXPECT_TRUE(retrieve_subgraph(g.store, {}, RetrievalConfig{}).triples.empty());
}

TEST(Serialize, GroupsByDocument) {
  SmallGraph g;
  const auto r = answer_context(g.store, "林业标准化管理办法", RetrievalConfig{1, 40, std::nullopt});
  EXPECT_EQ(r.context,
            "[d1]\n"
            "⟨国家林业局 (ORG)⟩ —[Publish]→ ⟨林业标准化管理办法 (DOC)⟩\n"
            "⟨林业标准化管理办法 (DOC)⟩ —[Be Classified into]→ ⟨标准管理 (CLS)⟩\n"
            "[d2]\n"
            "⟨林木种子质量管理办法 (DOC)⟩ —[Cite]→ ⟨林业标准化管理办法 (DOC)⟩\n");
  const auto capped = answer_context(g.store, "林业标准化管理办法", RetrievalConfig{1, 1, std::nullopt});
  EXPECT_EQ(capped.context,
            "[d1]\n"
            "⟨国家林业局 (ORG)⟩ —[Publish]→ ⟨林业标准化管理办法 (DOC)⟩\n"
            "(2 more triples omitted)\n");
  EXPECT_EQ(answer_context(g.store, "无关", RetrievalConfig{}).context, "");
}

// Distances by repeated relaxation over an adjacency matrix, then every base
// triple with an endpoint closer than max_hops, sorted and capped.
std::vector<std::string> oracle(const graph::GraphStore& store,
                                const std::vector<graph::EntityId>& seeds,
                                const RetrievalConfig& config) {
  const auto entities = store.entities();
  std::map<graph::EntityId, std::size_t> index;
  for (std::size_t i = 0; i < entities.size(); ++i) index[entities[i].id] = i;
  const std::size_t n = entities.size();
  const std::size_t inf = static_cast<std::size_t>(-1) / 2;
  std::vector<std::vector<bool>> adj(n, std::vector<bool>(n));
  std::vector<graph::Triple> usable;
  for (const auto& t : store.triples(false)) {
    if (config.relation_filter && !config.relation_filter->contains(t.relation)) continue;
    usable.push_back(t);
    adj[index[t.head]][index[t.tail]] = adj[index[t.tail]][index[t.head]] = true;
  }
  std::vector<std::size_t> dist(n, inf);
  for (const auto& s : seeds) dist[index[s]] = 0;
  for (std::size_t round = 0; round < n; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (adj[i][j] && dist[i] + 1 < dist[j]) dist[j] = dist[i] + 1;
      }
    }
  }
  std::vector<std::tuple<std::size_t, double, std::string>> keyed;
  for (const auto& t : usable) {
    const std::size_t d = std::min(dist[index[t.head]], dist[index[t.tail]]);
    if (d < config.max_hops) keyed.emplace_back(d + 1, -t.confidence(), t.id.value);
  }
  std::sort(keyed.begin(), keyed.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < keyed.size() && i < config.max_triples; ++i) {
    out.push_back(std::get<2>(keyed[i]));
  }
  return out;
}

TEST(Retrieve, MatchesOracleOn50RandomGraphs) {
  std::vector<std::string> relations;
  for (const auto& [code, rel] : ontology::builtin_schema().relation_types) relations.push_back(code);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto store = testing::random_graph(seed, 40 + seed % 20, 60 + seed * 3);
    std::mt19937_64 rng(seed);
    const auto entities = store->entities();
    std::vector<graph::EntityId> seeds;
    for (int i = 0; i < 1 + static_cast<int>(seed % 3); ++i) {
      seeds.push_back(entities[rng() % entities.size()].id);
    }
    RetrievalConfig config;
    config.max_hops = 1 + seed % 3;
    config.max_triples = 5 + rng() % 60;
    if (seed % 4 == 3) {
      config.relation_filter = std::set<std::string>{relations[rng() % relations.size()],
                                                     relations[rng() % relations.size()]};
    }
    const auto sub = retrieve_subgraph(*store, seeds, config);
    std::vector<std::string> got;
    for (const auto& rt : sub.triples) got.push_back(rt.triple.id.value);
    EXPECT_EQ(got, oracle(*store, seeds, config)) << "seed " << seed;
  }
}

}  // namespace
}  // namespace forpkg::rag
