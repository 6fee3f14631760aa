#include "forpkg/evaluation.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "forpkg/error.h"
#include "forpkg/text.h"

namespace forpkg::evaluation {

using nlohmann::json;

std::string_view match_mode_name(MatchMode mode) {
  switch (mode) {
    case MatchMode::kExact: return "exact";
    case MatchMode::kNormalized: return "normalized";
    case MatchMode::kOverlap: return "overlap";
  }
  return "normalized";
}

MatchMode match_mode_from_name(std::string_view name) {
  for (auto m : {MatchMode::kExact, MatchMode::kNormalized, MatchMode::kOverlap}) {
    if (match_mode_name(m) == name) return m;
  }
  throw Error(ErrorCode::kInvalidConfig,
              "policy must be exact, normalized or overlap, got '" +
                  std::string(name) + "'");
}

void validate(const MatchPolicy& policy) {
  if (!(policy.jaccard_min > 0.0 && policy.jaccard_min <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "jaccard_min must lie in (0, 1]");
  }
}

double char_jaccard(std::string_view a, std::string_view b) {
  const auto ca = text::code_points(text::strip_space_and_punct(a));
  const auto cb = text::code_points(text::strip_space_and_punct(b));
  const std::set<char32_t> sa(ca.begin(), ca.end());
  const std::set<char32_t> sb(cb.begin(), cb.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t common = 0;
  for (char32_t c : sa) common += sb.count(c);
  return static_cast<double>(common) /
         static_cast<double>(sa.size() + sb.size() - common);
}

namespace {

bool tier_match(std::string_view a, std::string_view b, MatchMode tier,
                double jaccard_min) {
  switch (tier) {
    case MatchMode::kExact:
      return a == b;
    case MatchMode::kNormalized:
      return a == b || text::strip_space_and_punct(a) == text::strip_space_and_punct(b);
    case MatchMode::kOverlap:
      return a == b || char_jaccard(a, b) >= jaccard_min;
  }
  return false;
}

bool same_frame(const LabeledTriple& p, const LabeledTriple& g) {
  return p.doc_id == g.doc_id && p.relation == g.relation &&
         p.head_type == g.head_type && p.tail_type == g.tail_type;
}

std::vector<MatchMode> tiers_up_to(MatchMode mode) {
  std::vector<MatchMode> out{MatchMode::kExact};
  if (mode != MatchMode::kExact) out.push_back(MatchMode::kNormalized);
  if (mode == MatchMode::kOverlap) out.push_back(MatchMode::kOverlap);
  return out;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string shortest(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string pad(std::string_view s, std::size_t width) {
  std::string out(s);
  const std::size_t cps = text::code_point_count(s);
  if (cps < width) out.append(width - cps, ' ');
  return out;
}

}  // namespace

bool surfaces_match(std::string_view a, std::string_view b, const MatchPolicy& policy) {
  return tier_match(a, b, policy.mode, policy.jaccard_min) ||
         (policy.mode == MatchMode::kOverlap &&
          tier_match(a, b, MatchMode::kNormalized, policy.jaccard_min));
}

std::vector<std::pair<std::size_t, std::size_t>> match(
    const std::vector<LabeledTriple>& predicted, const std::vector<GoldTriple>& gold,
    const MatchPolicy& policy) {
  validate(policy);
  std::vector<bool> pred_used(predicted.size()), gold_used(gold.size());
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (MatchMode tier : tiers_up_to(policy.mode)) {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (gold_used[g]) continue;
      for (std::size_t p = 0; p < predicted.size(); ++p) {
        if (pred_used[p] || !same_frame(predicted[p], gold[g])) continue;
        if (tier_match(predicted[p].head_surface, gold[g].head_surface, tier,
                       policy.jaccard_min) &&
            tier_match(predicted[p].tail_surface, gold[g].tail_surface, tier,
                       policy.jaccard_min)) {
          pred_used[p] = gold_used[g] = true;
          pairs.emplace_back(p, g);
          break;
        }
      }
    }
  }
  return pairs;
}

Breakdown per_type_breakdown(const std::vector<LabeledTriple>& predicted,
                             const std::vector<GoldTriple>& gold,
                             const MatchPolicy& policy) {
  Breakdown out;
  const auto pairs = match(predicted, gold, policy);
  std::vector<bool> gold_matched(gold.size());
  for (const auto& [p, g] : pairs) gold_matched[g] = true;

  std::map<std::string, std::pair<std::size_t, std::size_t>> rel;  // hit, total
  for (std::size_t g = 0; g < gold.size(); ++g) {
    auto& [hit, total] = rel[gold[g].relation];
    ++total;
    hit += gold_matched[g];
  }
  for (const auto& [code, ht] : rel) {
    out.per_relation_type_accuracy[code] =
        static_cast<double>(ht.first) / static_cast<double>(ht.second);
  }

  // (doc, type) -> predicted surfaces
  std::map<std::pair<std::string, std::string>, std::set<std::string>> found;
  for (const auto& p : predicted) {
    found[{p.doc_id, p.head_type}].insert(p.head_surface);
    found[{p.doc_id, p.tail_type}].insert(p.tail_surface);
  }
  auto mention_found = [&](const std::string& doc, const std::string& type,
                           const std::string& surface) {
    auto it = found.find({doc, type});
    if (it == found.end()) return false;
    if (it->second.contains(surface)) return true;
    for (const auto& s : it->second) {
      if (surfaces_match(s, surface, policy)) return true;
    }
    return false;
  };
  std::map<std::string, std::pair<std::size_t, std::size_t>> ent;
  for (const auto& g : gold) {
    for (const auto& [type, surface] :
         {std::pair{g.head_type, g.head_surface}, std::pair{g.tail_type, g.tail_surface}}) {
      auto& [hit, total] = ent[type];
      ++total;
      hit += mention_found(g.doc_id, type, surface);
    }
  }
  for (const auto& [code, ht] : ent) {
    out.per_entity_type_accuracy[code] =
        static_cast<double>(ht.first) / static_cast<double>(ht.second);
  }
  return out;
}

EvalReport score(const std::vector<LabeledTriple>& predicted,
                 const std::vector<GoldTriple>& gold, const MatchPolicy& policy) {
  EvalReport r;
  r.policy = policy;
  r.counts = {predicted.size(), gold.size(), match(predicted, gold, policy).size()};
  if (r.counts.predicted > 0) {
    r.precision = static_cast<double>(r.counts.matched) /
                  static_cast<double>(r.counts.predicted);
  }
  if (r.counts.gold > 0) {
    r.recall = static_cast<double>(r.counts.matched) / static_cast<double>(r.counts.gold);
  }
  if (r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  }
  auto b = per_type_breakdown(predicted, gold, policy);
  r.per_entity_type_accuracy = std::move(b.per_entity_type_accuracy);
  r.per_relation_type_accuracy = std::move(b.per_relation_type_accuracy);
  return r;
}

ReportFormat report_format_from_name(std::string_view name) {
  if (name == "text") return ReportFormat::kText;
  if (name == "csv") return ReportFormat::kCsv;
  if (name == "radar_data") return ReportFormat::kRadarData;
  throw Error(ErrorCode::kInvalidConfig,
              "format must be text, csv or radar_data, got '" + std::string(name) + "'");
}

std::string render_report(const EvalReport& r, ReportFormat format,
                          const ontology::OntologySchema& schema) {
  const bool empty = r.counts.predicted == 0 && r.counts.gold == 0;
  std::ostringstream out;
  switch (format) {
    case ReportFormat::kText: {
      out << pad("metric", 12) << "value\n";
      if (empty) break;
      out << pad("policy", 12) << match_mode_name(r.policy.mode);
      if (r.policy.mode == MatchMode::kOverlap) {
        out << " (jaccard >= " << fixed(r.policy.jaccard_min, 2) << ")";
      }
      out << "\n"
          << pad("predicted", 12) << r.counts.predicted << "\n"
          << pad("gold", 12) << r.counts.gold << "\n"
          << pad("matched", 12) << r.counts.matched << "\n"
          << pad("precision", 12) << fixed(r.precision, 4) << "\n"
          << pad("recall", 12) << fixed(r.recall, 4) << "\n"
          << pad("f1", 12) << fixed(r.f1, 4) << "\n";
      out << "\n" << pad("entity type", 14) << "accuracy\n";
      for (const auto& [k, v] : r.per_entity_type_accuracy) {
        out << pad(k, 14) << fixed(v, 4) << "\n";
      }
      out << "\n" << pad("relation", 14) << "accuracy\n";
      for (const auto& [k, v] : r.per_relation_type_accuracy) {
        out << pad(k, 14) << fixed(v, 4) << "\n";
      }
      break;
    }
    case ReportFormat::kCsv: {
      out << "metric,key,value\n";
      if (empty) break;
      out << "policy," << match_mode_name(r.policy.mode) << ","
          << shortest(r.policy.jaccard_min) << "\n"
          << "precision,," << shortest(r.precision) << "\n"
          << "recall,," << shortest(r.recall) << "\n"
          << "f1,," << shortest(r.f1) << "\n"
          << "predicted,," << r.counts.predicted << "\n"
          << "gold,," << r.counts.gold << "\n"
          << "matched,," << r.counts.matched << "\n";
      for (const auto& [k, v] : r.per_entity_type_accuracy) {
        out << "entity_type_accuracy," << k << "," << shortest(v) << "\n";
      }
      for (const auto& [k, v] : r.per_relation_type_accuracy) {
        out << "relation_type_accuracy," << k << "," << shortest(v) << "\n";
      }
      break;
    }
    case ReportFormat::kRadarData: {
      out << "chart,axis,value\n";
      if (empty) break;
      auto quoted = [](const std::string& s) {
        return s.find(',') == std::string::npos ? s : "\"" + s + "\"";
      };
      for (const auto& [k, v] : r.per_entity_type_accuracy) {
        auto it = schema.entity_types.find(k);
        out << "entity_type," << quoted(it == schema.entity_types.end() ? k : it->second.display_name)
            << "," << shortest(v) << "\n";
      }
      for (const auto& [k, v] : r.per_relation_type_accuracy) {
        out << "relation_type,"
            << quoted(schema.has_relation(k) ? schema.relation(k).display_name : k) << ","
            << shortest(v) << "\n";
      }
      break;
    }
  }
  return out.str();
}

std::vector<GoldTriple> parse_gold(std::string_view content,
                                   const ontology::OntologySchema& schema) {
  std::vector<GoldTriple> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    const std::string_view line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;
    GoldTriple g;
    try {
      const json j = json::parse(line);
      g = {j.at("doc_id").get<std::string>(),    j.at("head_surface").get<std::string>(),
           j.at("head_type").get<std::string>(), j.at("relation").get<std::string>(),
           j.at("tail_surface").get<std::string>(), j.at("tail_type").get<std::string>()};
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, e.what(), line_no);
    }
    if (!schema.has_relation(g.relation)) {
      throw Error(ErrorCode::kUnknownRelationType,
                  "'" + g.relation + "' is not a forward relation code", line_no);
    }
    ontology::SignatureVerdict verdict;
    try {
      verdict = ontology::validate_signature(schema, g.head_type, g.relation, g.tail_type);
    } catch (const Error& e) {
      throw Error(e.code(), e.message(), line_no);
    }
    if (!verdict.ok()) {
      throw Error(ErrorCode::kSignatureViolation, verdict.reason, line_no);
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GoldTriple> load_gold(const std::filesystem::path& path,
                                  const ontology::OntologySchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_gold(ss.str(), schema);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message(), e.line());
  }
}

std::string gold_line(const GoldTriple& g) {
  return json{{"doc_id", g.doc_id},         {"head_surface", g.head_surface},
              {"head_type", g.head_type},   {"relation", g.relation},
              {"tail_surface", g.tail_surface}, {"tail_type", g.tail_type}}
      .dump();
}

std::vector<LabeledTriple> extracted_triples(const graph::GraphStore& store) {
  std::vector<LabeledTriple> out;
  for (const auto& t : store.triples(false)) {
    const auto head = store.find_entity(t.head);
    const auto tail = store.find_entity(t.tail);
    std::set<std::string> docs;
    for (const auto& p : t.provenance) docs.insert(p.doc_id);
    for (const auto& d : docs) {
      out.push_back({d, head->canonical_mention, head->type_code, t.relation,
                     tail->canonical_mention, tail->type_code});
    }
  }
  return out;
}

}  // namespace forpkg::evaluation
