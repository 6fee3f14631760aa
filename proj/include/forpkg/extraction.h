#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "forpkg/classifier.h"
#include "forpkg/corpus.h"
#include "forpkg/graph_store.h"
#include "forpkg/llm_client.h"
#include "forpkg/similarity.h"

namespace forpkg::extraction {

// Spans are byte offsets. Segment spans index the document body; the spans
// inside TailExtraction index the segment text.
struct Segment {
  std::string doc_id;
  std::size_t index = 0;
  std::string text;
  graph::CharSpan span;
};

// Splits after 。；！？ and at newline runs, trims each fragment and drops
// fragments with no content besides whitespace and terminators.
std::vector<Segment> segment_document(const corpus::PolicyDocument& doc);

struct HeadEntityMention {
  std::string doc_id;
  std::string surface;
  std::string type_code;
  std::vector<graph::CharSpan> occurrences;  // in the document body
};

struct HeadItem {
  std::string surface;
  std::string type_code;  // as written by the model, upper-cased
};

struct ParsedHeads {
  std::vector<HeadItem> items;
  std::size_t unparsed_lines = 0;
};

// Accepts "surface<TAB>TYPE", "surface | TYPE", "surface：TYPE",
// "surface（TYPE）" and similar, with optional list numbering, or a JSON
// array of {"surface"/"entity", "type"} objects. "无" / "NONE" / "[]" mean
// no entities. Throws UnparseableResponse when nothing parses.
ParsedHeads parse_head_response(std::string_view response);

struct HeadRecognition {
  std::vector<HeadEntityMention> mentions;  // in first-occurrence order
  std::vector<std::string> warnings;
};

// One whole-document prompt. Items naming an unknown type or a surface that
// does not occur in the body are dropped with a warning. Throws
// ClientError, UnparseableResponse, UnrecordedPrompt.
HeadRecognition recognize_head_entities(const corpus::PolicyDocument& doc,
                                        llm::LlmClient& client,
                                        const llm::PromptSet& prompts,
                                        const ontology::OntologySchema& schema);

struct RelationCandidate {
  Segment segment;
  HeadEntityMention head;
  std::string label;
  std::map<std::string, double> scores;
  bool abstained = false;
  std::string note;  // set when the fallback classifier answered
};

struct ClassifyOptions {
  double tau = 0.35;
  // Consulted when the primary client raises ClassifierUnavailable.
  const classifier::ClassifierClient* fallback = nullptr;
};

// Abstains when the top score is below tau. Ties go to the smallest label.
// Throws std::invalid_argument when the head does not occur in the segment;
// ClassifierUnavailable propagates only without a fallback.
RelationCandidate classify_relation(const Segment& segment,
                                    const HeadEntityMention& head,
                                    const classifier::ClassifierClient& client,
                                    const ClassifyOptions& options = {});

struct TextSpan {
  std::string text;
  graph::CharSpan span;
};

struct TailExtraction {
  RelationCandidate candidate;
  TextSpan relation_word;
  TextSpan tail;
  std::string tail_type_code;
};

// Legal tail types for a label: the range of a forward label, the domain of
// the forward relation for an inverse label.
std::set<std::string> tail_types_for(const ontology::OntologySchema& schema,
                                     std::string_view label);

// Trims the text after `start`: leading whitespace and separators, trailing
// punctuation, and bracket pairs that enclose the whole tail. nullopt when
// nothing is left.
std::optional<graph::CharSpan> tail_span(std::string_view segment,
                                         std::size_t start);

// Throws RelationWordNotFound, EmptyTail, TailTypeUnresolved, ClientError,
// UnrecordedPrompt; std::invalid_argument for an abstained candidate.
TailExtraction extract_tail(const RelationCandidate& candidate,
                            llm::LlmClient& client,
                            const llm::PromptSet& prompts,
                            const ontology::OntologySchema& schema);

// Counters merge by addition, so merge order never changes the result.
struct PipelineReport {
  std::map<std::string, std::size_t> counters;
  std::vector<std::string> issues;  // "<doc_id>: <message>"

  void add(const std::string& counter, std::size_t n = 1);
  void error(const std::string& doc_id, const std::exception& e);
  void merge(const PipelineReport& other);
  std::size_t count(const std::string& counter) const;
  std::size_t total_errors() const;
  nlohmann::json to_json() const;  // issues sorted
};

enum class AssemblyOutcome { kStored, kDroppedSchema };

struct AssemblyResult {
  AssemblyOutcome outcome = AssemblyOutcome::kDroppedSchema;
  std::optional<graph::TripleId> triple;
  std::string reason;
};

// Normalizes the label, validates the signature and only then touches the
// store. Schema failures are reported, never stored.
AssemblyResult assemble(const TailExtraction& extraction,
                        graph::GraphStore& store);

struct ExtractionConfig {
  double tau = 0.35;
  std::size_t parallelism = 1;
  std::filesystem::path prompt_dir = llm::default_prompt_dir();
};

// Stage 1 for a whole corpus: metadata triples and citation edges.
PipelineReport run_document_level(const std::vector<corpus::PolicyDocument>& corpus,
                                  graph::GraphStore& store);

// Stage 2: relevance edges from document embeddings.
PipelineReport run_similarity(const std::vector<corpus::PolicyDocument>& corpus,
                              const similarity::EmbeddingProvider& provider,
                              const similarity::SimilarityConfig& config,
                              graph::GraphStore& store);

// Content-level extraction. Documents run concurrently up to
// config.parallelism; results are stored in doc_id order. Per-document
// failures are counted and the document is skipped.
PipelineReport run_content_extraction(
    const std::vector<corpus::PolicyDocument>& corpus, llm::LlmClient& llm,
    const classifier::ClassifierClient& classifier,
    const ExtractionConfig& config, graph::GraphStore& store);

// Document level, similarity linking (skipped when provider is null) and
// content extraction, in that order.
PipelineReport run_pipeline(const std::vector<corpus::PolicyDocument>& corpus,
                            llm::LlmClient& llm,
                            const classifier::ClassifierClient& classifier,
                            const similarity::EmbeddingProvider* provider,
                            const similarity::SimilarityConfig& similarity,
                            const ExtractionConfig& config,
                            graph::GraphStore& store);

}  // namespace forpkg::extraction
