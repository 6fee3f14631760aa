#include "forpkg/evaluation.h"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "forpkg/error.h"
#include "support/fixtures.h"

namespace forpkg::evaluation {
namespace {

using testing::TempDir;

LabeledTriple T(std::string doc, std::string head, std::string ht, std::string rel,
                std::string tail, std::string tt) {
  return {std::move(doc), std::move(head), std::move(ht), std::move(rel),
          std::move(tail), std::move(tt)};
}

// One gold record per base triple, attributed to its first source document.
std::vector<GoldTriple> gold_from(const graph::GraphStore& store) {
  std::vector<GoldTriple> out;
  for (const auto& t : store.triples(false)) {
    const auto h = store.find_entity(t.head);
    const auto tl = store.find_entity(t.tail);
    out.push_back({t.provenance.front().doc_id, h->canonical_mention, h->type_code,
                   t.relation, tl->canonical_mention, tl->type_code});
  }
  return out;
}

const MatchPolicy kExact{MatchMode::kExact, 0.5};
const MatchPolicy kNormalized{MatchMode::kNormalized, 0.5};
const MatchPolicy kOverlap{MatchMode::kOverlap, 0.5};

// Eight gold triples, five predictions, three of them correct.
struct HandFixture {
  std::vector<GoldTriple> gold = {
      T("d1", "国家林业局", "ORG", "publish", "林业标准化管理办法", "DOC"),
      T("d1", "林业标准化管理办法", "DOC", "classifyTo", "标准管理", "CLS"),
      T("d1", "县级以上林业主管部门", "ORG", "duty", "监督检查", "ACT"),
      T("d2", "国家林业局", "ORG", "publish", "林木种子质量管理办法", "DOC"),
      T("d2", "种子", "CONC", "define", "种植材料", "EXP_DEF"),
      T("d2", "生产者", "ORG", "duty", "质量检验", "ACT"),
      T("d3", "天然林保护修复中心", "ORG", "belongTo", "国家林业和草原局", "ORG"),
      T("d3", "国家林业和草原局", "ORG", "publish", "天然林保护修复制度方案", "DOC"),
  };
  std::vector<LabeledTriple> predicted = {
      T("d1", "国家林业局", "ORG", "publish", "林业标准化管理办法", "DOC"),
      T("d2", "种子", "CONC", "define", "种植材料", "EXP_DEF"),
      T("d3", "天然林保护修复中心", "ORG", "belongTo", "国家林业和草原局", "ORG"),
      T("d1", "国家林业局", "ORG", "publish", "林木种子质量管理办法", "DOC"),
      T("d2", "生产者", "ORG", "hasRight", "质量检验", "ACT"),
  };
};

TEST(Score, HandFixtureArithmetic) {
  HandFixture f;
  const auto r = score(f.predicted, f.gold, kNormalized);
  EXPECT_EQ(r.counts.predicted, 5u);
  EXPECT_EQ(r.counts.gold, 8u);
  EXPECT_EQ(r.counts.matched, 3u);
  EXPECT_NEAR(r.precision, 0.6, 1e-12);
  EXPECT_NEAR(r.recall, 0.375, 1e-12);
  EXPECT_NEAR(r.f1, 2 * 0.6 * 0.375 / (0.6 + 0.375), 1e-12);
}

TEST(Score, EmptySides) {
  HandFixture f;
  auto r = score({}, f.gold, kNormalized);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_EQ(r.f1, 0.0);
  r = score(f.predicted, {}, kNormalized);
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.recall, 0.0);
  EXPECT_TRUE(r.per_relation_type_accuracy.empty());
  EXPECT_TRUE(r.per_entity_type_accuracy.empty());
}

TEST(Score, DutyFourOfFive) {
  std::vector<GoldTriple> gold;
  for (int i = 0; i < 5; ++i) {
    gold.push_back(T("d", "部门" + std::to_string(i), "ORG", "duty",
                     "职责" + std::to_string(i), "ACT"));
  }
  gold.push_back(T("d", "国家林业局", "ORG", "publish", "办法", "DOC"));
  std::vector<LabeledTriple> predicted(gold.begin(), gold.begin() + 4);
  predicted.push_back(gold.back());
  const auto r = score(predicted, gold, kNormalized);
  EXPECT_DOUBLE_EQ(r.per_relation_type_accuracy.at("duty"), 0.8);
  EXPECT_DOUBLE_EQ(r.per_relation_type_accuracy.at("publish"), 1.0);
  EXPECT_EQ(r.per_relation_type_accuracy.size(), 2u);
}

TEST(Score, AllMatchedGivesFullEntityAccuracy) {
  HandFixture f;
  const auto r = score(f.gold, f.gold, kExact);
  std::set<std::string> types;
  for (const auto& g : f.gold) types.insert({g.head_type, g.tail_type});
  ASSERT_EQ(r.per_entity_type_accuracy.size(), types.size());
  for (const auto& [type, acc] : r.per_entity_type_accuracy) {
    EXPECT_TRUE(types.contains(type));
    EXPECT_DOUBLE_EQ(acc, 1.0) << type;
  }
  EXPECT_FALSE(r.per_entity_type_accuracy.contains("PER"));
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
}

TEST(Score, EntityAccuracyPoolsHeadsAndTails) {
  // 国家林业和草原局 is found as a tail of another triple even though the
  // triple it heads is missed.
  std::vector<GoldTriple> gold = {
      T("d", "天然林保护修复中心", "ORG", "belongTo", "国家林业和草原局", "ORG"),
      T("d", "国家林业和草原局", "ORG", "publish", "办法", "DOC"),
  };
  std::vector<LabeledTriple> predicted = {
      T("d", "天然林保护中心", "ORG", "belongTo", "国家林业和草原局", "ORG"),
  };
  const auto b = per_type_breakdown(predicted, gold, kExact);
  EXPECT_DOUBLE_EQ(b.per_entity_type_accuracy.at("ORG"), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(b.per_entity_type_accuracy.at("DOC"), 0.0);
  EXPECT_DOUBLE_EQ(b.per_relation_type_accuracy.at("belongTo"), 0.0);
  EXPECT_DOUBLE_EQ(b.per_relation_type_accuracy.at("publish"), 0.0);
}

TEST(Match, PolicyTiers) {
  std::vector<GoldTriple> gold = {T("d", "国家林业局", "ORG", "publish", "《办法》", "DOC")};
  std::vector<LabeledTriple> spaced = {T("d", "国家 林业局", "ORG", "publish", "办法", "DOC")};
  std::vector<LabeledTriple> partial = {T("d", "国家林业", "ORG", "publish", "办法", "DOC")};
  EXPECT_EQ(match(spaced, gold, kExact).size(), 0u);
  EXPECT_EQ(match(spaced, gold, kNormalized).size(), 1u);
  EXPECT_EQ(match(partial, gold, kNormalized).size(), 0u);
  EXPECT_EQ(match(partial, gold, kOverlap).size(), 1u);
  EXPECT_EQ(match(partial, gold, MatchPolicy{MatchMode::kOverlap, 0.9}).size(), 0u);
}

TEST(Match, FrameMustAgree) {
  const auto g = T("d", "甲", "ORG", "duty", "乙", "ACT");
  for (auto p : {T("e", "甲", "ORG", "duty", "乙", "ACT"), T("d", "甲", "ORG", "hasRight", "乙", "ACT"),
                 T("d", "甲", "PER", "duty", "乙", "ACT"), T("d", "甲", "ORG", "duty", "乙", "EXP")}) {
    EXPECT_TRUE(match({p}, {g}, kOverlap).empty());
  }
}

TEST(Match, OneToOne) {
  const auto g = T("d", "甲", "ORG", "duty", "乙", "ACT");
  const auto r = score({g, g, g}, {g}, kNormalized);
  EXPECT_EQ(r.counts.matched, 1u);
  EXPECT_NEAR(r.precision, 1.0 / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
}

TEST(Match, ExactPrefersIdenticalOverLooserCandidate) {
  // The tiers stop a looser prediction from taking the gold triple that an
  // identical prediction later in the list would have matched.
  std::vector<GoldTriple> gold = {T("d", "林业局", "ORG", "duty", "检查", "ACT"),
                                  T("d", "林业 局", "ORG", "duty", "检查", "ACT")};
  std::vector<LabeledTriple> predicted = {T("d", "林业 局", "ORG", "duty", "检查", "ACT"),
                                          T("d", "林业局", "ORG", "duty", "检查", "ACT")};
  const auto pairs = match(predicted, gold, kNormalized);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0], (std::pair<std::size_t, std::size_t>{1, 0}));
  EXPECT_EQ(pairs[1], (std::pair<std::size_t, std::size_t>{0, 1}));
}

TEST(Match, InvalidPolicy) {
  EXPECT_THROW(match({}, {}, MatchPolicy{MatchMode::kOverlap, 0.0}), Error);
  EXPECT_THROW(match({}, {}, MatchPolicy{MatchMode::kOverlap, 1.5}), Error);
  EXPECT_THROW(match_mode_from_name("fuzzy"), Error);
  EXPECT_EQ(match_mode_from_name("overlap"), MatchMode::kOverlap);
}

TEST(Jaccard, KnownValues) {
  EXPECT_DOUBLE_EQ(char_jaccard("国家林业", "国家林业局"), 0.8);
  EXPECT_DOUBLE_EQ(char_jaccard("", "，"), 1.0);
  EXPECT_DOUBLE_EQ(char_jaccard("甲", "乙"), 0.0);
  EXPECT_DOUBLE_EQ(char_jaccard("甲乙", "乙甲"), 1.0);
}

std::vector<LabeledTriple> perturb(const std::vector<GoldTriple>& gold, std::mt19937_64& rng) {
  std::vector<LabeledTriple> out;
  for (const auto& g : gold) {
    auto p = g;
    switch (rng() % 6) {
      case 0: break;
      case 1: p.head_surface = " " + p.head_surface + "。"; break;
      case 2: p.tail_surface.insert(p.tail_surface.size() / 2, " "); break;
      case 3: p.tail_surface += "局"; break;
      case 4: p.head_surface = "完全不同的名称"; break;
      case 5: continue;
    }
    out.push_back(std::move(p));
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

TEST(Score, MonotoneAcrossPolicies200) {
  auto graph = testing::random_graph(42, 120, 200);
  const auto gold = gold_from(*graph);
  ASSERT_EQ(gold.size(), 200u);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    const auto predicted = perturb(gold, rng);
    std::set<std::pair<std::size_t, std::size_t>> prev;
    double prev_p = -1, prev_r = -1;
    for (const auto& policy : {kExact, kNormalized, kOverlap}) {
      const auto pairs = match(predicted, gold, policy);
      const std::set<std::pair<std::size_t, std::size_t>> now(pairs.begin(), pairs.end());
      EXPECT_TRUE(std::includes(now.begin(), now.end(), prev.begin(), prev.end()));
      const auto r = score(predicted, gold, policy);
      EXPECT_GE(r.precision, prev_p);
      EXPECT_GE(r.recall, prev_r);
      prev = now;
      prev_p = r.precision;
      prev_r = r.recall;
    }
  }
}

TEST(Score, ExactCountEqualsMultisetIntersection) {
  auto graph = testing::random_graph(7, 80, 150);
  auto gold = gold_from(*graph);
  gold.insert(gold.end(), gold.begin(), gold.begin() + 20);  // duplicates
  std::mt19937_64 rng(99);
  const auto predicted = perturb(gold, rng);
  auto key = [](const LabeledTriple& t) {
    return t.doc_id + "\x1f" + t.head_surface + "\x1f" + t.head_type + "\x1f" + t.relation +
           "\x1f" + t.tail_surface + "\x1f" + t.tail_type;
  };
  std::multiset<std::string> gs, ps;
  for (const auto& g : gold) gs.insert(key(g));
  for (const auto& p : predicted) ps.insert(key(p));
  std::size_t common = 0;
  for (auto it = gs.begin(); it != gs.end(); it = gs.upper_bound(*it)) {
    common += std::min(gs.count(*it), ps.count(*it));
  }
  EXPECT_EQ(match(predicted, gold, kExact).size(), common);
}

std::vector<std::vector<std::string>> parse_csv(const std::string& s) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted) {
      if (c == '"' && i + 1 < s.size() && s[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
    } else if (c == '\n') {
      row.push_back(std::move(cell));
      cell.clear();
      rows.push_back(std::move(row));
      row.clear();
    } else {
      cell += c;
    }
  }
  return rows;
}

TEST(Render, Text) {
  HandFixture f;
  const auto text = render_report(score(f.predicted, f.gold, kNormalized), ReportFormat::kText);
  EXPECT_NE(text.find("precision   0.6000"), std::string::npos) << text;
  EXPECT_NE(text.find("recall      0.3750"), std::string::npos);
  EXPECT_NE(text.find("duty"), std::string::npos);
}

TEST(Render, CsvRoundTrips) {
  HandFixture f;
  const auto r = score(f.predicted, f.gold, kNormalized);
  const auto rows = parse_csv(render_report(r, ReportFormat::kCsv));
  ASSERT_GE(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"metric", "key", "value"}));
  std::map<std::string, double> metrics;
  std::map<std::string, double> relations;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 3u);
    if (rows[i][0] == "relation_type_accuracy") relations[rows[i][1]] = std::stod(rows[i][2]);
    else if (rows[i][0] != "policy") metrics[rows[i][0]] = std::stod(rows[i][2]);
  }
  EXPECT_EQ(metrics.at("precision"), r.precision);
  EXPECT_EQ(metrics.at("recall"), r.recall);
  EXPECT_EQ(metrics.at("f1"), r.f1);
  EXPECT_EQ(relations, r.per_relation_type_accuracy);
}

TEST(Render, RadarAxesMatchPresentTypes) {
  HandFixture f;
  const auto r = score(f.predicted, f.gold, kNormalized);
  const auto rows = parse_csv(render_report(r, ReportFormat::kRadarData));
  std::size_t entity_axes = 0, relation_axes = 0;
  std::set<std::string> labels;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    ASSERT_EQ(rows[i].size(), 3u);
    entity_axes += rows[i][0] == "entity_type";
    relation_axes += rows[i][0] == "relation_type";
    labels.insert(rows[i][1]);
  }
  EXPECT_EQ(entity_axes, r.per_entity_type_accuracy.size());
  EXPECT_EQ(relation_axes, r.per_relation_type_accuracy.size());
  EXPECT_TRUE(labels.contains("Have the Duty"));
  EXPECT_TRUE(labels.contains("Publish"));
}

TEST(Render, EmptyReportIsHeadersOnly) {
  const EvalReport empty;
  EXPECT_EQ(render_report(empty, ReportFormat::kCsv), "metric,key,value\n");
  EXPECT_EQ(render_report(empty, ReportFormat::kRadarData), "chart,axis,value\n");
  const auto text = render_report(empty, ReportFormat::kText);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
  EXPECT_THROW(report_format_from_name("pdf"), Error);
}

TEST(Gold, ParseErrorsCarryLineNumbers) {
  const auto& schema = ontology::builtin_schema();
  const std::string ok = gold_line(T("d", "甲", "ORG", "duty", "乙", "ACT"));
  auto expect_line = [&](const std::string& text, ErrorCode code, std::size_t line) {
    try {
      parse_gold(text, schema);
      ADD_FAILURE() << "no error for " << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code) << e.what();
      EXPECT_EQ(e.line(), line);
    }
  };
  expect_line(ok + "\n{not json\n", ErrorCode::kParseError, 2);
  expect_line(ok + "\n\n" + gold_line(T("d", "甲", "ORG", "isPublished", "乙", "DOC")),
              ErrorCode::kUnknownRelationType, 3);
  expect_line(gold_line(T("d", "甲", "PER", "publish", "乙", "DOC")),
              ErrorCode::kSignatureViolation, 1);
  expect_line(gold_line(T("d", "甲", "XYZ", "publish", "乙", "DOC")),
              ErrorCode::kUnknownEntityType, 1);
  expect_line(R"({"doc_id":"d"})", ErrorCode::kParseError, 1);
}

TEST(Gold, MissingFileNamesPath) {
  try {
    load_gold("/nonexistent/gold.jsonl", ontology::builtin_schema());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnreadableFile);
    EXPECT_NE(std::string(e.what()).find("/nonexistent/gold.jsonl"), std::string::npos);
  }
}

TEST(Gold, RoundTrip) {
  HandFixture f;
  TempDir dir;
  {
    std::ofstream out(dir.path() / "gold.jsonl");
    for (const auto& g : f.gold) out << gold_line(g) << "\n";
  }
  EXPECT_EQ(load_gold(dir.path() / "gold.jsonl", ontology::builtin_schema()), f.gold);
}

TEST(Gold, SyntheticFixture) {
  const auto gold =
      load_gold(testing::fixture_dir() / "gold_1126.jsonl", ontology::builtin_schema());
  ASSERT_EQ(gold.size(), 1126u);
  std::set<std::string> docs;
  for (const auto& g : gold) docs.insert(g.doc_id);
  EXPECT_EQ(docs.size(), 50u);
  const auto self = score(gold, gold, kExact);
  EXPECT_DOUBLE_EQ(self.precision, 1.0);
  EXPECT_DOUBLE_EQ(self.recall, 1.0);
  for (const auto& [k, v] : self.per_relation_type_accuracy) EXPECT_DOUBLE_EQ(v, 1.0) << k;
}

TEST(Extracted, OneRecordPerSourceDocument) {
  graph::GraphStore store(ontology::builtin_schema_ptr());
  graph::Provenance p1{"d1", 0, std::nullopt, graph::Stage::kTailExtract, 0.9, ""};
  graph::Provenance p2{"d2", 0, std::nullopt, graph::Stage::kTailExtract, 0.8, ""};
  const auto h = store.upsert_entity("ORG", "国家林业局", p1);
  const auto t = store.upsert_entity("DOC", "办法", p1);
  store.insert_triple(h, "publish", t, p1);
  store.insert_triple(h, "publish", t, p2);
  store.insert_triple(h, "publish", t, p2);
  const auto out = extracted_triples(store);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], T("d1", "国家林业局", "ORG", "publish", "办法", "DOC"));
  EXPECT_EQ(out[1].doc_id, "d2");
}

}  // namespace
}  // namespace forpkg::evaluation
