#include "forpkg/corpus.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "forpkg/error.h"
#include "forpkg/text.h"

namespace forpkg::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view timeliness_name(Timeliness t) {
  switch (t) {
    case Timeliness::kInForce: return "in_force";
    case Timeliness::kRepealed: return "repealed";
    case Timeliness::kExpired: return "expired";
    case Timeliness::kUnknown: return "unknown";
  }
  return "unknown";
}

Timeliness timeliness_from_name(std::string_view name) {
  for (Timeliness t : {Timeliness::kInForce, Timeliness::kRepealed,
                       Timeliness::kExpired}) {
    if (timeliness_name(t) == name) return t;
  }
  return Timeliness::kUnknown;
}

std::optional<Date> parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  auto number = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
    int v = 0;
    const char* first = text.data() + pos;
    const char* last = first + len;
    if (!std::all_of(first, last, [](char c) { return c >= '0' && c <= '9'; })) {
      return std::nullopt;
    }
    std::from_chars(first, last, v);
    return v;
  };
  const auto y = number(0, 4);
  const auto m = number(5, 2);
  const auto d = number(8, 2);
  if (!y || !m || !d) return std::nullopt;
  const Date date{std::chrono::year{*y}, std::chrono::month(*m),
                  std::chrono::day(*d)};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(date.year()),
                unsigned(date.month()), unsigned(date.day()));
  return buf;
}

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kUnreadableFile, path.string());
  std::string s = ss.str();
  if (s.rfind("\xEF\xBB\xBF", 0) == 0) s.erase(0, 3);
  return s;
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::optional<Date> date_field(const json& sidecar, const char* key,
                               const std::string& doc_id,
                               std::vector<std::string>& warnings) {
  if (!sidecar.contains(key) || sidecar[key].is_null()) return std::nullopt;
  const auto& v = sidecar[key];
  std::optional<Date> parsed;
  if (v.is_string()) parsed = parse_date(v.get<std::string>());
  if (!parsed) {
    warnings.push_back(doc_id + ": malformed " + key + " " + v.dump() +
                       ", treated as unknown");
  }
  return parsed;
}

}  // namespace

void apply_sidecar(const json& sidecar, PolicyDocument& doc,
                   std::vector<std::string>& warnings) {
  if (!sidecar.is_object()) {
    warnings.push_back(doc.doc_id + ": sidecar is not a JSON object");
    return;
  }
  auto text_field = [&](const char* key) -> std::string {
    if (!sidecar.contains(key) || sidecar[key].is_null()) return "";
    if (!sidecar[key].is_string()) {
      warnings.push_back(doc.doc_id + ": field " + key + " is not a string");
      return "";
    }
    return std::string(text::trim(sidecar[key].get<std::string>()));
  };
  if (auto title = text_field("title"); !title.empty()) doc.title = title;
  auto& meta = doc.metadata;
  meta.issuing_org = text_field("issuing_org");
  meta.release_date = date_field(sidecar, "release_date", doc.doc_id, warnings);
  meta.implementation_date =
      date_field(sidecar, "implementation_date", doc.doc_id, warnings);
  if (meta.release_date && meta.implementation_date &&
      *meta.implementation_date < *meta.release_date) {
    warnings.push_back(doc.doc_id +
                       ": implementation_date precedes release_date, dropped");
    meta.implementation_date.reset();
  }
  if (sidecar.contains("keywords") && sidecar["keywords"].is_array()) {
    for (const auto& k : sidecar["keywords"]) {
      if (!k.is_string()) continue;
      std::string kw(text::trim(k.get<std::string>()));
      if (!kw.empty()) meta.keywords.push_back(std::move(kw));
    }
  }
  const std::string timeliness = text_field("timeliness");
  meta.timeliness = timeliness_from_name(timeliness);
  if (!timeliness.empty() && meta.timeliness == Timeliness::kUnknown &&
      timeliness != "unknown") {
    warnings.push_back(doc.doc_id + ": unrecognized timeliness '" +
                       timeliness + "'");
  }
  if (auto category = text_field("category"); !category.empty()) {
    meta.category = category;
  }
}

LoadResult load_corpus(const fs::path& directory) {
  std::error_code ec;
  if (!fs::is_directory(directory, ec)) {
    throw Error(ErrorCode::kUnreadableFile,
                directory.string() + " is not a readable directory");
  }
  std::vector<fs::path> bodies;
  for (const auto& entry : fs::directory_iterator(directory, ec)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && ends_with(name, ".txt")) {
      bodies.push_back(entry.path());
    }
  }
  if (ec) throw Error(ErrorCode::kUnreadableFile, directory.string());
  std::sort(bodies.begin(), bodies.end());

  LoadResult result;
  std::map<std::string, fs::path> seen;
  for (const auto& body_path : bodies) {
    const std::string file = body_path.filename().string();
    PolicyDocument doc;
    doc.doc_id = file.substr(0, file.size() - 4);
    doc.body = read_text(body_path);

    const fs::path meta_path = directory / (doc.doc_id + ".meta.json");
    if (fs::exists(meta_path)) {
      json sidecar;
      bool parsed = true;
      try {
        sidecar = json::parse(read_text(meta_path));
      } catch (const json::exception& e) {
        parsed = false;
        result.warnings.push_back(doc.doc_id + ": malformed sidecar (" +
                                  e.what() + "), metadata unknown");
      }
      if (parsed) {
        if (sidecar.is_object() && sidecar.contains("doc_id") &&
            sidecar["doc_id"].is_string()) {
          doc.doc_id = std::string(text::trim(sidecar["doc_id"].get<std::string>()));
        }
        apply_sidecar(sidecar, doc, result.warnings);
      }
    } else {
      result.warnings.push_back(doc.doc_id +
                                ": no metadata sidecar, metadata unknown");
    }
    if (doc.title.empty()) doc.title = doc.doc_id;

    auto [it, inserted] = seen.emplace(doc.doc_id, body_path);
    if (!inserted) {
      throw Error(ErrorCode::kDuplicateDocId,
                  "doc_id '" + doc.doc_id + "' declared by " +
                      it->second.string() + " and " + body_path.string());
    }
    if (text::trim(doc.body).empty()) {
      result.warnings.push_back(doc.doc_id + ": empty body, skipped");
      continue;
    }
    result.documents.push_back(std::move(doc));
  }
  std::sort(result.documents.begin(), result.documents.end(),
            [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
  return result;
}

namespace {

graph::Provenance document_provenance(const PolicyDocument& doc) {
  return {doc.doc_id, 0, std::nullopt, graph::Stage::kDocumentLevel, 1.0, ""};
}

graph::EntityId upsert_document(const PolicyDocument& doc,
                                graph::GraphStore& store) {
  const auto id = store.upsert_entity("DOC", doc.title, document_provenance(doc));
  const auto existing = store.find_entity(id);
  std::set<std::string> doc_ids{doc.doc_id};
  if (existing && existing->attributes.contains("doc_ids")) {
    for (const auto& d : existing->attributes["doc_ids"]) {
      doc_ids.insert(d.get<std::string>());
    }
  }
  store.set_attribute(id, "doc_ids", doc_ids);
  return id;
}

}  // namespace

graph::EntityId document_entity(const PolicyDocument& doc) {
  return graph::make_entity_id("DOC", doc.title);
}

IngestResult metadata_to_triples(const PolicyDocument& doc,
                                 graph::GraphStore& store) {
  IngestResult result;
  const auto prov = document_provenance(doc);
  const auto doc_entity = upsert_document(doc, store);
  const auto& meta = doc.metadata;
  if (meta.release_date) {
    store.set_attribute(doc_entity, "release_date",
                        format_date(*meta.release_date));
  }
  if (meta.implementation_date) {
    store.set_attribute(doc_entity, "implementation_date",
                        format_date(*meta.implementation_date));
  }
  if (!meta.keywords.empty()) {
    store.set_attribute(doc_entity, "keywords", meta.keywords);
  }
  store.set_attribute(doc_entity, "timeliness",
                      std::string(timeliness_name(meta.timeliness)));

  if (text::trim(meta.issuing_org).empty()) {
    result.warnings.push_back(doc.doc_id +
                              ": no issuing organization, no publish edge");
  } else {
    const auto org = store.upsert_entity("ORG", meta.issuing_org, prov);
    result.triples.push_back(store.insert_triple(org, "publish", doc_entity, prov).id);
  }
  if (meta.category) {
    const auto cls = store.upsert_entity("CLS", *meta.category, prov);
    result.triples.push_back(
        store.insert_triple(doc_entity, "classifyTo", cls, prov).id);
  }
  return result;
}

std::vector<graph::TripleId> detect_citations(
    const std::vector<PolicyDocument>& corpus, graph::GraphStore& store,
    std::size_t min_title_chars) {
  std::vector<graph::TripleId> out;
  std::set<std::pair<graph::EntityId, graph::EntityId>> emitted;
  for (const auto& a : corpus) {
    for (const auto& b : corpus) {
      if (a.doc_id == b.doc_id) continue;
      if (text::code_point_count(b.title) < min_title_chars) continue;
      const auto pos = a.body.find(b.title);
      if (pos == std::string::npos) continue;
      const auto citing = document_entity(a);
      const auto cited = document_entity(b);
      if (citing == cited || !emitted.emplace(citing, cited).second) continue;
      upsert_document(a, store);
      upsert_document(b, store);
      graph::Provenance prov{a.doc_id, 0,
                             graph::CharSpan{pos, pos + b.title.size()},
                             graph::Stage::kDocumentLevel, 1.0, ""};
      out.push_back(store.insert_triple(citing, "cite", cited, prov).id);
    }
  }
  return out;
}

}  // namespace forpkg::corpus
