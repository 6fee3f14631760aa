#include "support/fixtures.h"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace forpkg::testing {

namespace fs = std::filesystem;

fs::path fixture_dir() { return FORPKG_FIXTURE_DIR; }
fs::path data_dir() { return FORPKG_DATA_DIR; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

// relation | domain | range, slash separated as printed in the table. DOC is
// added to `relevant` because document similarity links DOC nodes.
constexpr const char* kRelationTable = R"(
publish      | ORG                          | DOC
locate       | ORG/LOC                      | LOC
belongTo     | ORG                          | ORG
workFor      | PER                          | ORG
duty         | PER/ORG/OBJ                  | ACT/STATE
isProhibited | PER/ORG/OBJ                  | ACT/STATE
hasRight     | PER/ORG/OBJ                  | ACT/STATE
define       | CONC/OBJ                     | EXP_DEF
relevant     | CONC/OBJ/EXP_DEF/ACT/STATE/DOC | CONC/OBJ/EXP_DEF/ACT/STATE/DOC
classifyTo   | DOC                          | CLS
cite         | DOC                          | DOC
contain      | DOC/LOC/ORG/STATE/ACT/CLS    | DOC/LOC/ORG/CONC/OBJ
)";

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::set<std::string> split_types(const std::string& s) {
  std::set<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, '/')) out.insert(strip(item));
  return out;
}

}  // namespace

const std::map<std::string, OracleRow>& relation_table_oracle() {
  static const auto table = [] {
    std::map<std::string, OracleRow> out;
    std::stringstream lines(kRelationTable);
    std::string line;
    while (std::getline(lines, line)) {
      if (strip(line).empty()) continue;
      std::stringstream cols(line);
      std::string rel, dom, ran;
      std::getline(cols, rel, '|');
      std::getline(cols, dom, '|');
      std::getline(cols, ran, '|');
      out[strip(rel)] = {split_types(dom), split_types(ran)};
    }
    return out;
  }();
  return table;
}

const std::vector<std::string>& entity_type_oracle() {
  static const std::vector<std::string> types{
      "ORG", "PER", "LOC", "DOC", "CLS", "CONC", "OBJ", "EXP_DEF", "ACT",
      "STATE"};
  return types;
}

bool oracle_allows(const std::string& head, const std::string& relation,
                   const std::string& tail) {
  const auto& row = relation_table_oracle().at(relation);
  return row.domain.count(head) && row.range.count(tail);
}

TempDir::TempDir() {
  static std::mt19937_64 rng{std::random_device{}()};
  path_ = fs::temp_directory_path() /
          ("forpkg-test-" + std::to_string(rng()));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::unique_ptr<graph::GraphStore> random_graph(std::uint64_t seed,
                                                std::size_t entities,
                                                std::size_t triples) {
  const auto& schema = ontology::builtin_schema();
  auto store = std::make_unique<graph::GraphStore>(ontology::builtin_schema_ptr());
  std::mt19937_64 rng(seed);
  const auto& types = entity_type_oracle();

  std::map<std::string, std::vector<graph::EntityId>> by_type;
  for (std::size_t i = 0; i < entities; ++i) {
    const std::string& type = types[i % types.size()];
    graph::Provenance p{"doc" + std::to_string(i % 50), i % 7, std::nullopt,
                        graph::Stage::kManual, 1.0, ""};
    by_type[type].push_back(
        store->upsert_entity(type, type + "实体" + std::to_string(i), p));
  }

  std::vector<std::string> relations;
  for (const auto& [code, rel] : schema.relation_types) relations.push_back(code);
  std::size_t attempts = 0;
  while (store->triple_count() < triples) {
    if (++attempts > triples * 1000) {
      throw std::runtime_error("random_graph: cannot reach triple count");
    }
    const auto& rel = schema.relation(relations[rng() % relations.size()]);
    std::vector<std::string> dom(rel.domain.begin(), rel.domain.end());
    std::vector<std::string> ran(rel.range.begin(), rel.range.end());
    const auto& heads = by_type[dom[rng() % dom.size()]];
    const auto& tails = by_type[ran[rng() % ran.size()]];
    if (heads.empty() || tails.empty()) continue;
    const auto& h = heads[rng() % heads.size()];
    const auto& t = tails[rng() % tails.size()];
    if (rel.is_symmetric && h == t) continue;
    const double confidence =
        static_cast<double>(rng() % 1000 + 1) / 1000.0;
    graph::Provenance p{"doc" + std::to_string(rng() % 50), rng() % 20,
                        std::nullopt, graph::Stage::kTailExtract, confidence,
                        ""};
    store->insert_triple(h, rel.code, t, p);
  }
  return store;
}

}  // namespace forpkg::testing

namespace forpkg::testing {

namespace {

std::string field(const std::string& text, const std::string& key) {
  const auto at = text.find("\n" + key);
  if (at == std::string::npos) return "";
  const auto start = at + 1 + key.size();
  return text.substr(start, text.find('\n', start) - start);
}

// Cue words per relation display name, longest first.
const std::map<std::string, std::vector<std::string>>& cues() {
  static const std::map<std::string, std::vector<std::string>> table = {
      {"Publish", {"发布了", "发布"}},
      {"Locate", {"位于"}},
      {"Prohibit", {"禁止"}},
      {"Have the Right", {"有权"}},
      {"Have the Duty", {"应当", "负责"}},
      {"Define", {"一般系指", "是指", "系指"}},
      {"Cite", {"引用"}},
      {"Take Office", {"任职于", "任职"}},
      {"Belong to", {"属于"}},
      {"Contain", {"包括", "包含"}},
      {"Be Classified into", {"分类"}},
  };
  return table;
}

}  // namespace

void ScriptedLlmClient::add_head_answer(std::string body_marker,
                                        std::string response) {
  heads_.emplace_back(std::move(body_marker), std::move(response));
}

std::string ScriptedLlmClient::complete(const llm::Prompt& prompt) {
  ++calls_;
  const std::string& text = prompt.text;
  if (prompt.template_name == "head_entities") {
    for (const auto& [marker, response] : heads_) {
      if (text.find(marker) != std::string::npos) return response;
    }
    return "无";
  }
  const std::string sentence = field(text, "句子：");
  const std::string head = field(text, "头实体：");
  const std::string relation = field(text, "关系类型：");
  if (prompt.template_name == "relation_word") {
    auto it = cues().find(relation);
    if (it == cues().end()) return "无";
    const auto head_end = sentence.find(head) == std::string::npos
                              ? 0
                              : sentence.find(head) + head.size();
    std::string best;
    std::size_t best_pos = std::string::npos;
    for (bool after_head : {true, false}) {
      for (const auto& cue : it->second) {
        const auto pos = sentence.find(cue, after_head ? head_end : 0);
        if (pos < best_pos) {
          best_pos = pos;
          best = cue;
        }
      }
      if (!best.empty()) return "关系词：" + best;
    }
    return "无";
  }
  if (prompt.template_name == "tail_type") {
    const auto list = text.substr(text.find("候选类型："));
    if (list.find("\nACT：") != std::string::npos) return "ACT";
    const auto line = list.find('\n');
    return list.substr(line + 1, list.find("：", line) - line - 1);
  }
  return "";
}

std::filesystem::path corpus3_dir() { return fixture_dir() / "corpus3"; }

void add_corpus3_answers(ScriptedLlmClient& client) {
  client.add_head_answer("标准化技术委员会秘书处",
                         "国家林业局\tORG\n"
                         "标准化技术委员会秘书处\tORG\n"
                         "北京市\tLOC\n"
                         "各级林业主管部门\tORG\n"
                         "任何单位\tORG\n"
                         "林业标准\tCONC\n");
  client.add_head_answer("国家林木种苗总站",
                         "| 实体 | 类型 |\n"
                         "| --- | --- |\n"
                         "| 林木种子 | OBJ |\n"
                         "| 种子生产者 | ORG |\n"
                         "| 张明 | PER |\n"
                         "| 国家林木种苗总站 | ORG |\n"
                         "| 国家林业局 | ORG |\n");
  client.add_head_answer("大兴安岭林区",
                         "以下是识别出的头实体：\n"
                         "1. 天然林（OBJ）\n"
                         "2. 大兴安岭林区（LOC）\n"
                         "3. 黑龙江省（LOC）\n"
                         "4. 张明（PER）\n"
                         "5. 国有林场（ORG）\n"
                         "6. 各级林业和草原主管部门（ORG）\n"
                         "7. 国家公园管理局（ORG）\n"
                         "8. 2019年（TIME）\n");
}

}  // namespace forpkg::testing
