#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "forpkg/graph_store.h"
#include "forpkg/ontology.h"

namespace forpkg::evaluation {

// One triple with surfaces, as annotated or as extracted.
struct LabeledTriple {
  std::string doc_id;
  std::string head_surface;
  std::string head_type;
  std::string relation;  // forward code
  std::string tail_surface;
  std::string tail_type;

  bool operator==(const LabeledTriple&) const = default;
};
using GoldTriple = LabeledTriple;

enum class MatchMode { kExact, kNormalized, kOverlap };

std::string_view match_mode_name(MatchMode mode);
MatchMode match_mode_from_name(std::string_view name);  // throws InvalidConfig

struct MatchPolicy {
  MatchMode mode = MatchMode::kNormalized;
  double jaccard_min = 0.5;  // overlap mode only, in (0, 1]
};

void validate(const MatchPolicy& policy);  // throws InvalidConfig

// Character-set Jaccard of the two surfaces after removing whitespace and
// punctuation. Two empty surfaces give 1.
double char_jaccard(std::string_view a, std::string_view b);

bool surfaces_match(std::string_view a, std::string_view b, const MatchPolicy& policy);

// One-to-one greedy matching, in tiers: exact surfaces first, then
// normalized, then overlap, stopping at the policy's mode. Within a tier,
// gold triples are visited in order and each takes the first unused
// predicted triple that agrees on doc, relation, both types and both
// surfaces. Returns (predicted index, gold index) pairs.
std::vector<std::pair<std::size_t, std::size_t>> match(
    const std::vector<LabeledTriple>& predicted,
    const std::vector<GoldTriple>& gold, const MatchPolicy& policy);

struct Counts {
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t matched = 0;
};

struct Breakdown {
  std::map<std::string, double> per_entity_type_accuracy;
  std::map<std::string, double> per_relation_type_accuracy;
};

struct EvalReport {
  MatchPolicy policy;
  double precision = 0.0;  // 0 when nothing was predicted
  double recall = 0.0;     // 0 when there is no gold
  double f1 = 0.0;
  std::map<std::string, double> per_entity_type_accuracy;
  std::map<std::string, double> per_relation_type_accuracy;
  Counts counts;
};

// Relation accuracy: matched gold triples of a relation over gold triples of
// that relation. Entity accuracy pools head and tail mentions: a gold mention
// counts as found when a predicted triple from the same document has a head
// or tail of the same type whose surface matches under the policy. Types
// absent from the gold set are absent from the maps.
Breakdown per_type_breakdown(const std::vector<LabeledTriple>& predicted,
                             const std::vector<GoldTriple>& gold,
                             const MatchPolicy& policy);

EvalReport score(const std::vector<LabeledTriple>& predicted,
                 const std::vector<GoldTriple>& gold, const MatchPolicy& policy);

enum class ReportFormat { kText, kCsv, kRadarData };
ReportFormat report_format_from_name(std::string_view name);  // InvalidConfig

// A report with no predicted and no gold triples renders headers only.
std::string render_report(const EvalReport& report, ReportFormat format,
                          const ontology::OntologySchema& schema =
                              ontology::builtin_schema());

// Line-delimited objects with the LabeledTriple field names. Throws
// UnreadableFile(path), ParseError(line), UnknownRelationType(line),
// SignatureViolation(line).
std::vector<GoldTriple> load_gold(const std::filesystem::path& path,
                                  const ontology::OntologySchema& schema);
std::vector<GoldTriple> parse_gold(std::string_view text,
                                   const ontology::OntologySchema& schema);
std::string gold_line(const GoldTriple& triple);

// Base triples of a graph, one record per distinct source document.
std::vector<LabeledTriple> extracted_triples(const graph::GraphStore& store);

}  // namespace forpkg::evaluation
