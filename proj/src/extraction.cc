#include "forpkg/extraction.h"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "forpkg/error.h"
#include "forpkg/text.h"

namespace forpkg::extraction {

using nlohmann::json;

namespace {

bool is_terminator(char32_t cp) {
  return cp == U'。' || cp == U'；' || cp == U'！' || cp == U'？';
}

bool is_newline(char32_t cp) { return cp == U'\n' || cp == U'\r'; }

// Byte range of `inner` inside `outer` (inner must be a view into outer).
graph::CharSpan span_of(std::string_view outer, std::string_view inner) {
  const auto start = static_cast<std::size_t>(inner.data() - outer.data());
  return {start, start + inner.size()};
}

char32_t first_cp(std::string_view s) {
  std::size_t pos = 0;
  return text::next_code_point(s, pos);
}

// Code point ending at `end` and its start offset.
char32_t last_cp(std::string_view s, std::size_t end, std::size_t& start) {
  start = end;
  do {
    --start;
  } while (start > 0 && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80);
  std::size_t pos = start;
  return text::next_code_point(s, pos);
}

std::size_t cp_len(std::string_view s, std::size_t pos) {
  const std::size_t begin = pos;
  text::next_code_point(s, pos);
  return pos - begin;
}

char32_t closer_of(char32_t open) {
  switch (open) {
    case U'（': return U'）';
    case U'(': return U')';
    case U'《': return U'》';
    case U'「': return U'」';
    case U'『': return U'』';
    case U'【': return U'】';
    case U'“': return U'”';
    case U'‘': return U'’';
    case U'[': return U']';
    case U'〔': return U'〕';
    case U'〈': return U'〉';
    case U'"': return U'"';
    case U'\'': return U'\'';
    default: return 0;
  }
}

bool is_closer(char32_t cp) {
  switch (cp) {
    case U'）': case U')': case U'》': case U'」': case U'』': case U'】':
    case U'”': case U'’': case U']': case U'〕': case U'〉': case U'"':
    case U'\'':
      return true;
    default:
      return false;
  }
}

bool is_leading_separator(char32_t cp) {
  return cp == U'：' || cp == U':' || cp == U'，' || cp == U',' ||
         cp == U'、' || text::is_space(cp);
}

std::string upper_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

bool is_type_token(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
  });
}

bool starts_with(std::string_view s, std::string_view p) {
  return s.substr(0, p.size()) == p;
}
bool ends_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

std::string_view strip_quotes(std::string_view s) {
  static const std::vector<std::pair<std::string_view, std::string_view>> pairs = {
      {"\"", "\""}, {"'", "'"}, {"`", "`"}, {"“", "”"}, {"‘", "’"},
      {"「", "」"}, {"『", "』"}, {"《", "》"}};
  bool changed = true;
  while (changed) {
    changed = false;
    s = text::trim(s);
    for (const auto& [open, close] : pairs) {
      if (s.size() >= open.size() + close.size() && starts_with(s, open) &&
          ends_with(s, close)) {
        s = s.substr(open.size(), s.size() - open.size() - close.size());
        changed = true;
        break;
      }
    }
  }
  return s;
}

std::string_view strip_list_marker(std::string_view line) {
  for (std::string_view bullet : {"- ", "* ", "•", "·"}) {
    if (starts_with(line, bullet)) return text::trim(line.substr(bullet.size()));
  }
  std::size_t digits = 0;
  std::size_t offset = 0;
  std::string_view open_paren;
  for (std::string_view p : {"(", "（"}) {
    if (starts_with(line, p)) {
      open_paren = p;
      offset = p.size();
    }
  }
  while (offset + digits < line.size() &&
         std::isdigit(static_cast<unsigned char>(line[offset + digits]))) {
    ++digits;
  }
  if (digits == 0) return line;
  const std::string_view rest = line.substr(offset + digits);
  const std::vector<std::string_view> closers =
      open_paren.empty()
          ? std::vector<std::string_view>{".", ")", "、", "．", "）", ":", "："}
          : std::vector<std::string_view>{")", "）"};
  for (auto c : closers) {
    if (starts_with(rest, c)) return text::trim(rest.substr(c.size()));
  }
  return line;
}

std::string_view trim_separators(std::string_view s) {
  s = text::trim(s);
  for (bool changed = true; changed && !s.empty();) {
    changed = false;
    for (std::string_view sep : {"-", "—", "–", ":", "：", "|", "｜", ",", "，", "、"}) {
      if (ends_with(s, sep)) {
        s = text::trim(s.substr(0, s.size() - sep.size()));
        changed = true;
      }
      if (starts_with(s, sep)) {
        s = text::trim(s.substr(sep.size()));
        changed = true;
      }
    }
  }
  return s;
}

std::optional<HeadItem> parse_head_line(std::string_view raw) {
  std::string_view line = text::trim(raw);
  while (!line.empty() && (line.front() == '|' || starts_with(line, "｜"))) {
    line = text::trim(line.substr(line.front() == '|' ? 1 : 3));
  }
  while (!line.empty() && (line.back() == '|' || ends_with(line, "｜"))) {
    line = text::trim(line.substr(0, line.size() - (line.back() == '|' ? 1 : 3)));
  }
  line = strip_list_marker(line);
  if (line.empty()) return std::nullopt;

  std::string_view surface;
  std::string_view type;
  bool split = false;
  for (auto [open, close] : {std::pair<std::string_view, std::string_view>{"（", "）"},
                             {"(", ")"}}) {
    if (ends_with(line, close)) {
      const auto at = line.rfind(open);
      if (at != std::string_view::npos && at > 0) {
        surface = line.substr(0, at);
        type = line.substr(at + open.size(),
                           line.size() - at - open.size() - close.size());
        split = true;
        break;
      }
    }
  }
  if (!split) {
    for (std::string_view sep : {"\t", "|", "｜", "：", ":", "，", ",", " "}) {
      const auto at = line.rfind(sep);
      if (at == std::string_view::npos) continue;
      surface = line.substr(0, at);
      type = line.substr(at + sep.size());
      split = true;
      break;
    }
  }
  if (!split) return std::nullopt;
  type = strip_quotes(trim_separators(type));
  surface = strip_quotes(trim_separators(surface));
  if (!is_type_token(type) || surface.empty()) return std::nullopt;
  return HeadItem{std::string(surface), upper_ascii(type)};
}

std::string type_catalogue(const ontology::OntologySchema& schema,
                           const std::set<std::string>* only = nullptr) {
  std::string out;
  for (const auto& [code, def] : schema.entity_types) {
    if (only && !only->contains(code)) continue;
    out += code + "：" + def.display_name + "，" + def.description + "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string clean_relation_word(std::string_view response) {
  std::string_view line;
  std::size_t pos = 0;
  while (pos <= response.size()) {
    auto nl = response.find('\n', pos);
    if (nl == std::string_view::npos) nl = response.size();
    line = text::trim(response.substr(pos, nl - pos));
    if (!line.empty() && !starts_with(line, "```")) break;
    line = {};
    pos = nl + 1;
  }
  for (std::string_view colon : {"：", ":"}) {
    const auto at = line.rfind(colon);
    if (at != std::string_view::npos &&
        !text::trim(line.substr(at + colon.size())).empty()) {
      line = line.substr(at + colon.size());
    }
  }
  line = strip_quotes(line);
  for (std::string_view stop : {"。", "．", "."}) {
    while (ends_with(line, stop)) line = line.substr(0, line.size() - stop.size());
  }
  return std::string(text::trim(line));
}

}  // namespace

std::vector<Segment> segment_document(const corpus::PolicyDocument& doc) {
  const std::string_view body = doc.body;
  std::vector<Segment> out;
  std::size_t start = 0;
  auto flush = [&](std::size_t end) {
    const std::string_view piece = text::trim(body.substr(start, end - start));
    bool content = false;
    for (std::size_t p = 0; p < piece.size() && !content;) {
      const char32_t cp = text::next_code_point(piece, p);
      content = !is_terminator(cp) && !text::is_space(cp);
    }
    if (!content) return;
    out.push_back({doc.doc_id, out.size(), std::string(piece), span_of(body, piece)});
  };
  std::size_t pos = 0;
  while (pos < body.size()) {
    const std::size_t cp_start = pos;
    const char32_t cp = text::next_code_point(body, pos);
    if (is_terminator(cp)) {
      flush(pos);
      start = pos;
    } else if (is_newline(cp)) {
      flush(cp_start);
      start = pos;
    }
  }
  flush(body.size());
  return out;
}

ParsedHeads parse_head_response(std::string_view response) {
  ParsedHeads out;
  const std::string_view trimmed = text::trim(response);
  for (std::string_view none : {"", "无", "无。", "NONE", "None", "none", "[]"}) {
    if (trimmed == none) return out;
  }
  if (!trimmed.empty() && trimmed.front() == '[') {
    try {
      const json j = json::parse(trimmed);
      if (j.is_array()) {
        for (const auto& item : j) {
          if (!item.is_object()) continue;
          std::string surface, type;
          for (const char* k : {"surface", "entity", "text", "name"}) {
            if (item.contains(k) && item[k].is_string()) {
              surface = item[k].get<std::string>();
              break;
            }
          }
          for (const char* k : {"type", "type_code", "label"}) {
            if (item.contains(k) && item[k].is_string()) {
              type = item[k].get<std::string>();
              break;
            }
          }
          const auto s = strip_quotes(surface);
          if (s.empty() || !is_type_token(text::trim(type))) {
            ++out.unparsed_lines;
            continue;
          }
          out.items.push_back({std::string(s), upper_ascii(text::trim(type))});
        }
        if (out.items.empty() && !j.empty()) {
          throw Error(ErrorCode::kUnparseableResponse,
                      "no usable items in JSON head-entity list");
        }
        return out;
      }
    } catch (const json::exception&) {
      // Not JSON after all; fall through to line parsing.
    }
  }
  std::size_t pos = 0;
  std::size_t nonblank = 0;
  while (pos <= trimmed.size()) {
    auto nl = trimmed.find('\n', pos);
    if (nl == std::string_view::npos) nl = trimmed.size();
    const std::string_view line = text::trim(trimmed.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty() || starts_with(line, "```")) continue;
    ++nonblank;
    if (auto item = parse_head_line(line)) {
      out.items.push_back(std::move(*item));
    } else {
      ++out.unparsed_lines;
    }
  }
  if (out.items.empty() && nonblank > 0) {
    throw Error(ErrorCode::kUnparseableResponse,
                "no line of the head-entity response has the form "
                "'surface<TAB>TYPE'");
  }
  return out;
}

HeadRecognition recognize_head_entities(const corpus::PolicyDocument& doc,
                                        llm::LlmClient& client,
                                        const llm::PromptSet& prompts,
                                        const ontology::OntologySchema& schema) {
  const auto prompt = prompts.head_entities.render(
      {{"entity_types", type_catalogue(schema)}, {"document", doc.body}});
  const auto parsed = parse_head_response(client.complete(prompt));
  HeadRecognition out;
  if (parsed.unparsed_lines > 0) {
    out.warnings.push_back(std::to_string(parsed.unparsed_lines) +
                           " unparsed line(s) in head-entity response");
  }
  std::map<std::string, std::string> seen;  // surface -> type
  for (const auto& item : parsed.items) {
    if (!schema.has_entity_type(item.type_code)) {
      out.warnings.push_back("dropped '" + item.surface + "': unknown type " +
                             item.type_code);
      continue;
    }
    const auto starts = text::find_all(doc.body, item.surface);
    if (starts.empty()) {
      out.warnings.push_back("dropped '" + item.surface +
                             "': not found in document");
      continue;
    }
    if (auto it = seen.find(item.surface); it != seen.end()) {
      if (it->second != item.type_code) {
        out.warnings.push_back("dropped '" + item.surface + "' as " +
                               item.type_code + ": already typed " + it->second);
      }
      continue;
    }
    seen.emplace(item.surface, item.type_code);
    HeadEntityMention m{doc.doc_id, item.surface, item.type_code, {}};
    for (auto s : starts) m.occurrences.push_back({s, s + item.surface.size()});
    out.mentions.push_back(std::move(m));
  }
  std::stable_sort(out.mentions.begin(), out.mentions.end(),
                   [](const auto& a, const auto& b) {
                     if (a.occurrences[0].start != b.occurrences[0].start) {
                       return a.occurrences[0].start < b.occurrences[0].start;
                     }
                     return a.surface < b.surface;
                   });
  return out;
}

RelationCandidate classify_relation(const Segment& segment,
                                    const HeadEntityMention& head,
                                    const classifier::ClassifierClient& client,
                                    const ClassifyOptions& options) {
  if (head.surface.empty() ||
      segment.text.find(head.surface) == std::string::npos) {
    throw std::invalid_argument("head '" + head.surface +
                                "' does not occur in the segment");
  }
  RelationCandidate c{segment, head, "", {}, false, ""};
  classifier::Verdict v;
  try {
    v = client.classify(segment.text, head.surface);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kClassifierUnavailable || !options.fallback) throw;
    v = options.fallback->classify(segment.text, head.surface);
    c.note = "ClassifierUnavailable: answered by " + options.fallback->id();
  }
  double sum = 0.0;
  for (const auto& [label, s] : v.scores) sum += s;
  if (v.scores.empty() || !(sum > 0.0)) {
    throw Error(ErrorCode::kClientError, "classifier returned no scores");
  }
  double best = -1.0;
  for (const auto& [label, s] : v.scores) {
    const double p = s / sum;
    c.scores[label] = p;
    if (p > best) {  // map order: the smallest label wins a tie
      best = p;
      c.label = label;
    }
  }
  c.abstained = best < options.tau;
  return c;
}

std::set<std::string> tail_types_for(const ontology::OntologySchema& schema,
                                     std::string_view label) {
  const auto resolved = schema.resolve_label(label);
  const auto& rel = schema.relation(resolved.forward_code);
  return resolved.inverted ? rel.domain : rel.range;
}

std::optional<graph::CharSpan> tail_span(std::string_view segment,
                                         std::size_t start) {
  std::size_t s = std::min(start, segment.size());
  std::size_t e = segment.size();
  auto strip_leading = [&] {
    while (s < e) {
      std::size_t p = s;
      const char32_t cp = text::next_code_point(segment, p);
      if (!is_leading_separator(cp)) break;
      s = p;
    }
  };
  auto strip_trailing = [&] {
    while (e > s) {
      std::size_t at = 0;
      const char32_t cp = last_cp(segment, e, at);
      if (text::is_space(cp) || (text::is_punctuation(cp) && !is_closer(cp))) {
        e = at;
      } else {
        break;
      }
    }
  };
  // A closer with no opener inside the tail belongs to text before it.
  auto strip_unmatched_closer = [&] {
    if (e <= s) return false;
    std::size_t at = 0;
    const char32_t cp = last_cp(segment, e, at);
    if (!is_closer(cp)) return false;
    for (std::size_t p = s; p < at;) {
      if (closer_of(text::next_code_point(segment, p)) == cp) return false;
    }
    e = at;
    return true;
  };
  // Removes an opener/closer pair wrapping the whole tail.
  auto strip_enclosing = [&] {
    if (e <= s) return false;
    const std::string_view t = segment.substr(s, e - s);
    const char32_t open = first_cp(t);
    const char32_t close = closer_of(open);
    if (close == 0) return false;
    std::size_t at = 0;
    if (last_cp(segment, e, at) != close || at <= s) return false;
    int depth = 0;
    for (std::size_t p = s; p < e;) {
      const std::size_t here = p;
      const char32_t cp = text::next_code_point(segment, p);
      if (open != close && cp == open) {
        ++depth;
      } else if (cp == close) {
        if (open == close) {
          depth = depth == 0 ? 1 : 0;
          if (depth == 0 && here != at) return false;
          continue;
        }
        --depth;
        if (depth == 0 && here != at) return false;
      }
    }
    s += cp_len(segment, s);
    e = at;
    return true;
  };
  do {
    strip_leading();
    strip_trailing();
  } while (strip_unmatched_closer() || strip_enclosing());
  if (s >= e) return std::nullopt;
  return graph::CharSpan{s, e};
}

TailExtraction extract_tail(const RelationCandidate& candidate,
                            llm::LlmClient& client,
                            const llm::PromptSet& prompts,
                            const ontology::OntologySchema& schema) {
  if (candidate.abstained) {
    throw std::invalid_argument("extract_tail on an abstained candidate");
  }
  const std::string& seg = candidate.segment.text;
  const std::string relation_name = schema.display_name_of(candidate.label);
  const auto word_prompt = prompts.relation_word.render(
      {{"segment", seg}, {"head", candidate.head.surface}, {"relation", relation_name}});
  const std::string word = clean_relation_word(client.complete(word_prompt));
  if (word.empty()) {
    throw Error(ErrorCode::kRelationWordNotFound, "empty relation word");
  }
  const auto head_at = seg.find(candidate.head.surface);
  if (head_at == std::string::npos) {
    throw std::invalid_argument("head does not occur in the segment");
  }
  const auto word_at = seg.find(word, head_at + candidate.head.surface.size());
  if (word_at == std::string::npos) {
    throw Error(ErrorCode::kRelationWordNotFound,
                "'" + word + "' does not follow '" + candidate.head.surface +
                    "' in segment " + std::to_string(candidate.segment.index));
  }
  const auto span = tail_span(seg, word_at + word.size());
  if (!span) {
    throw Error(ErrorCode::kEmptyTail,
                "nothing follows '" + word + "' in segment " +
                    std::to_string(candidate.segment.index));
  }
  TailExtraction out{candidate,
                     {word, {word_at, word_at + word.size()}},
                     {seg.substr(span->start, span->end - span->start), *span},
                     ""};
  const auto legal = tail_types_for(schema, candidate.label);
  if (legal.size() == 1) {
    out.tail_type_code = *legal.begin();
    return out;
  }
  const auto type_prompt = prompts.tail_type.render(
      {{"segment", seg},
       {"head", candidate.head.surface},
       {"relation", relation_name},
       {"tail", out.tail.text},
       {"candidates", type_catalogue(schema, &legal)}});
  const std::string answer = client.complete(type_prompt);
  for (std::size_t i = 0; i < answer.size();) {
    if (!(std::isalpha(static_cast<unsigned char>(answer[i])) || answer[i] == '_')) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < answer.size() &&
           (std::isalpha(static_cast<unsigned char>(answer[j])) || answer[j] == '_')) {
      ++j;
    }
    const std::string token = upper_ascii(std::string_view(answer).substr(i, j - i));
    if (legal.contains(token)) {
      out.tail_type_code = token;
      return out;
    }
    i = j;
  }
  throw Error(ErrorCode::kTailTypeUnresolved,
              "type answer names none of the legal tail types");
}

void PipelineReport::add(const std::string& counter, std::size_t n) {
  if (n > 0) counters[counter] += n;
}

void PipelineReport::error(const std::string& doc_id, const std::exception& e) {
  const auto* err = dynamic_cast<const Error*>(&e);
  add("errors." + (err ? std::string(error_code_name(err->code())) : "Internal"));
  issues.push_back(doc_id + ": " + e.what());
}

void PipelineReport::merge(const PipelineReport& other) {
  for (const auto& [k, v] : other.counters) add(k, v);
  issues.insert(issues.end(), other.issues.begin(), other.issues.end());
}

std::size_t PipelineReport::count(const std::string& counter) const {
  auto it = counters.find(counter);
  return it == counters.end() ? 0 : it->second;
}

std::size_t PipelineReport::total_errors() const {
  std::size_t n = 0;
  for (const auto& [k, v] : counters) {
    if (starts_with(k, "errors.")) n += v;
  }
  return n;
}

json PipelineReport::to_json() const {
  auto sorted = issues;
  std::sort(sorted.begin(), sorted.end());
  return json{{"counters", counters}, {"issues", sorted}};
}

AssemblyResult assemble(const TailExtraction& ex, graph::GraphStore& store) {
  const auto& schema = store.schema();
  const auto& c = ex.candidate;
  AssemblyResult result;
  ontology::NormalizedRelation norm;
  try {
    norm = ontology::normalize_relation(schema, c.head.type_code, c.label,
                                        ex.tail_type_code);
  } catch (const Error& e) {
    result.reason = e.what();
    return result;
  }
  if (!ontology::validate_signature(schema, norm.head_type, norm.relation,
                                    norm.tail_type)
           .ok()) {
    result.reason = "signature check failed after normalization";
    return result;
  }
  if (text::trim(c.head.surface).empty() || text::trim(ex.tail.text).empty()) {
    result.reason = "empty surface";
    return result;
  }
  const auto& seg = c.segment;
  const auto head_in_seg = seg.text.find(c.head.surface);
  std::optional<graph::CharSpan> head_span;
  if (head_in_seg != std::string::npos) {
    head_span = graph::CharSpan{seg.span.start + head_in_seg,
                                seg.span.start + head_in_seg + c.head.surface.size()};
  }
  const graph::Provenance head_prov{seg.doc_id, seg.index, head_span,
                                    graph::Stage::kHeadEntity, 1.0, ""};
  const graph::Provenance tail_prov{
      seg.doc_id, seg.index,
      graph::CharSpan{seg.span.start + ex.tail.span.start,
                      seg.span.start + ex.tail.span.end},
      graph::Stage::kTailExtract, 1.0, ""};
  auto score = c.scores.find(c.label);
  const graph::Provenance triple_prov{
      seg.doc_id, seg.index, seg.span, graph::Stage::kTailExtract,
      score == c.scores.end() ? 0.0 : std::clamp(score->second, 0.0, 1.0), c.note};

  const auto head = store.upsert_entity(c.head.type_code, c.head.surface, head_prov);
  const auto tail = store.upsert_entity(ex.tail_type_code, ex.tail.text, tail_prov);
  const auto& [from, to] = norm.swapped ? std::pair{tail, head} : std::pair{head, tail};
  result.triple = store.insert_triple(from, norm.relation, to, triple_prov).id;
  result.outcome = AssemblyOutcome::kStored;
  return result;
}

PipelineReport run_document_level(const std::vector<corpus::PolicyDocument>& corpus,
                                  graph::GraphStore& store) {
  PipelineReport report;
  report.add("documents", corpus.size());
  for (const auto& doc : corpus) {
    const auto r = corpus::metadata_to_triples(doc, store);
    report.add("metadata_triples", r.triples.size());
    for (const auto& w : r.warnings) {
      report.add("metadata_warnings");
      report.issues.push_back(doc.doc_id + ": " + w);
    }
  }
  report.add("citation_triples", corpus::detect_citations(corpus, store).size());
  return report;
}

PipelineReport run_similarity(const std::vector<corpus::PolicyDocument>& corpus,
                              const similarity::EmbeddingProvider& provider,
                              const similarity::SimilarityConfig& config,
                              graph::GraphStore& store) {
  const auto r = similarity::build_relevance_edges(corpus, provider, config, store);
  PipelineReport report;
  report.add("similarity_evaluations", r.evaluations);
  report.add("similarity_triples", r.triples.size());
  report.add("similarity_cache_hits", r.cache_hits);
  for (const auto& w : r.warnings) report.issues.push_back(w);
  return report;
}

namespace {

struct DocumentOutcome {
  std::vector<TailExtraction> tails;
  PipelineReport report;
};

DocumentOutcome extract_document(const corpus::PolicyDocument& doc,
                                 llm::LlmClient& llm,
                                 const classifier::ClassifierClient& classifier,
                                 const classifier::ClassifierClient& fallback,
                                 const llm::PromptSet& prompts,
                                 const ontology::OntologySchema& schema,
                                 double tau) {
  DocumentOutcome out;
  auto& report = out.report;
  HeadRecognition heads;
  try {
    heads = recognize_head_entities(doc, llm, prompts, schema);
  } catch (const Error& e) {
    report.error(doc.doc_id, e);
    report.add("documents_skipped");
    return out;
  }
  report.add("documents_extracted");
  report.add("head_mentions", heads.mentions.size());
  for (const auto& w : heads.warnings) {
    report.add("head_warnings");
    report.issues.push_back(doc.doc_id + ": " + w);
  }
  const auto segments = segment_document(doc);
  report.add("segments", segments.size());
  for (const auto& seg : segments) {
    for (const auto& head : heads.mentions) {
      if (seg.text.find(head.surface) == std::string::npos) continue;
      report.add("candidates");
      RelationCandidate cand;
      try {
        cand = classify_relation(seg, head, classifier, {tau, &fallback});
      } catch (const Error& e) {
        report.error(doc.doc_id, e);
        continue;
      }
      if (!cand.note.empty()) {
        report.add("errors.ClassifierUnavailable");
        report.add("classifier_fallback");
        report.issues.push_back(doc.doc_id + ": segment " +
                                std::to_string(seg.index) + ": " + cand.note);
      }
      if (cand.abstained) {
        report.add("abstained");
        continue;
      }
      report.add("classified");
      try {
        out.tails.push_back(extract_tail(cand, llm, prompts, schema));
        report.add("tails_extracted");
      } catch (const Error& e) {
        report.error(doc.doc_id, e);
      }
    }
  }
  return out;
}

}  // namespace

PipelineReport run_content_extraction(
    const std::vector<corpus::PolicyDocument>& corpus, llm::LlmClient& llm,
    const classifier::ClassifierClient& classifier,
    const ExtractionConfig& config, graph::GraphStore& store) {
  if (!(config.tau >= 0.0 && config.tau <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "tau must lie in [0, 1]");
  }
  if (config.parallelism == 0) {
    throw Error(ErrorCode::kInvalidConfig, "parallelism must be positive");
  }
  PipelineReport report;
  if (corpus.empty()) return report;
  const auto prompts = llm::PromptSet::load(config.prompt_dir);
  const auto& schema = store.schema();
  const auto fallback = classifier::rule_fallback_classifier(schema);

  std::vector<const corpus::PolicyDocument*> docs;
  for (const auto& d : corpus) docs.push_back(&d);
  std::sort(docs.begin(), docs.end(),
            [](const auto* a, const auto* b) { return a->doc_id < b->doc_id; });

  std::vector<DocumentOutcome> outcomes(docs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < docs.size(); i = next++) {
      try {
        outcomes[i] = extract_document(*docs[i], llm, classifier, *fallback,
                                       prompts, schema, config.tau);
      } catch (const std::exception& e) {
        outcomes[i] = {};
        outcomes[i].report.error(docs[i]->doc_id, e);
        outcomes[i].report.add("documents_skipped");
      }
    }
  };
  const std::size_t threads = std::min(config.parallelism, docs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t i = 0; i < docs.size(); ++i) {
    report.merge(outcomes[i].report);
    for (const auto& tail : outcomes[i].tails) {
      const auto r = assemble(tail, store);
      if (r.outcome == AssemblyOutcome::kStored) {
        report.add("triples_stored");
      } else {
        report.add("dropped_schema");
        report.issues.push_back(docs[i]->doc_id + ": dropped <" +
                                tail.candidate.head.surface + ", " +
                                tail.candidate.label + ", " + tail.tail.text +
                                ">: " + r.reason);
      }
    }
  }
  return report;
}

PipelineReport run_pipeline(const std::vector<corpus::PolicyDocument>& corpus,
                            llm::LlmClient& llm,
                            const classifier::ClassifierClient& classifier,
                            const similarity::EmbeddingProvider* provider,
                            const similarity::SimilarityConfig& similarity,
                            const ExtractionConfig& config,
                            graph::GraphStore& store) {
  PipelineReport report = run_document_level(corpus, store);
  if (provider) report.merge(run_similarity(corpus, *provider, similarity, store));
  report.merge(run_content_extraction(corpus, llm, classifier, config, store));
  return report;
}

}  // namespace forpkg::extraction
