#include <gtest/gtest.h>
#include <httplib.h>

#include <fstream>
#include <thread>

#include "forpkg/classifier.h"
#include "forpkg/error.h"
#include "forpkg/llm_client.h"
#include "forpkg/net.h"
#include "support/fixtures.h"

namespace forpkg {
namespace {

using nlohmann::json;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected forpkg::Error";
  return ErrorCode::kInvalidConfig;
}

class LocalServer {
 public:
  LocalServer() = default;
  ~LocalServer() { stop(); }
  httplib::Server& server() { return server_; }
  std::string start() {
    const int port = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return "http://127.0.0.1:" + std::to_string(port);
  }
  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

 private:
  httplib::Server server_;
  std::thread thread_;
};

int unused_port() {
  httplib::Server s;
  return s.bind_to_any_port("127.0.0.1");
}

// Prompt templates and transcripts

TEST(PromptTemplate, RenderAndDigest) {
  llm::PromptTemplate t("demo", "v1", "句子：{{segment}}\n头实体：{{head}}");
  const auto p = t.render({{"segment", "禁止砍伐天然林。"}, {"head", "天然林"}});
  EXPECT_EQ(p.text, "句子：禁止砍伐天然林。\n头实体：天然林");
  EXPECT_EQ(p.template_version, "v1");
  EXPECT_EQ(p.digest().size(), 64u);
  llm::PromptTemplate t2("demo", "v2", "句子：{{segment}}\n头实体：{{head}}");
  EXPECT_NE(t2.render({{"segment", "禁止砍伐天然林。"}, {"head", "天然林"}}).digest(),
            p.digest());
  EXPECT_EQ(code_of([&] { t.render({{"segment", "x"}}); }), ErrorCode::kInvalidConfig);
}

TEST(PromptTemplate, LoadShippedSet) {
  const auto set = llm::PromptSet::load(llm::default_prompt_dir());
  EXPECT_EQ(set.head_entities.name(), "head_entities");
  EXPECT_FALSE(set.relation_word.version().empty());
  EXPECT_FALSE(set.tail_type.version().empty());
}

TEST(PromptTemplate, LoadErrors) {
  testing::TempDir dir;
  std::ofstream(dir.path() / "bad.txt") << "no header here\n---\nbody";
  EXPECT_EQ(code_of([&] { llm::PromptTemplate::load(dir.path() / "bad.txt"); }),
            ErrorCode::kParseError);
  EXPECT_EQ(code_of([&] { llm::PromptTemplate::load(dir.path() / "missing.txt"); }),
            ErrorCode::kUnreadableFile);
}

TEST(Replay, RecordThenReplay) {
  testing::TempDir dir;
  const auto path = dir.path() / "t.jsonl";
  testing::ScriptedLlmClient scripted;
  scripted.add_head_answer("", "国家林业局\tORG");
  llm::PromptTemplate t("head_entities", "v1", "文本：{{document}}");
  const auto p1 = t.render({{"document", "国家林业局负责。"}});
  const auto p2 = t.render({{"document", "另一份文件。"}});
  {
    llm::RecordingLlmClient rec(scripted, path);
    rec.complete(p1);
    rec.complete(p1);
    rec.complete(p2);
  }
  auto replay = llm::ReplayLlmClient::from_file(path);
  EXPECT_EQ(replay->size(), 2u);
  EXPECT_EQ(replay->complete(p1), "国家林业局\tORG");
  const auto p3 = t.render({{"document", "没录过的文件。"}});
  EXPECT_EQ(code_of([&] { replay->complete(p3); }), ErrorCode::kUnrecordedPrompt);
}

TEST(Replay, RejectsTamperedRecords) {
  testing::TempDir dir;
  const auto path = dir.path() / "t.jsonl";
  auto r = llm::make_record({"head_entities", "v1", "文本"}, "无");
  r.prompt = "改过的文本";
  std::ofstream(path) << "\n" << llm::transcript_line(r) << "\n";
  try {
    llm::ReplayLlmClient::from_file(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_EQ(e.line(), 2u);
  }
  std::ofstream(path) << "{\"digest\": 1}\n";
  EXPECT_EQ(code_of([&] { llm::ReplayLlmClient::from_file(path); }),
            ErrorCode::kParseError);
}

TEST(HttpLlm, ChatCompletionsRoundTrip) {
  LocalServer local;
  json seen;
  std::string auth;
  local.server().Post("/v1/chat/completions",
                      [&](const httplib::Request& req, httplib::Response& res) {
                        seen = json::parse(req.body);
                        auth = req.get_header_value("Authorization");
                        res.set_content(
                            json{{"choices",
                                  {{{"message", {{"role", "assistant"}, {"content", "ORG"}}}}}}}
                                .dump(),
                            "application/json");
                      });
  const auto url = local.start();
  llm::HttpLlmConfig config;
  config.endpoint = url + "/v1";
  config.api_key = "k";
  config.model = "m";
  config.requests_per_second = 0;
  llm::HttpLlmClient client(config);
  EXPECT_EQ(client.complete({"tail_type", "v1", "选择类型"}), "ORG");
  EXPECT_EQ(seen["model"], "m");
  EXPECT_EQ(seen["messages"][0]["content"], "选择类型");
  EXPECT_EQ(auth, "Bearer k");
}

TEST(HttpLlm, RetriesThenFails) {
  LocalServer local;
  std::atomic<int> hits{0};
  local.server().Post("/chat/completions", [&](const httplib::Request&,
                                               httplib::Response& res) {
    ++hits;
    res.status = 503;
  });
  const auto url = local.start();
  llm::HttpLlmConfig config;
  config.endpoint = url;
  config.requests_per_second = 0;
  config.retry = {3, std::chrono::milliseconds(1), 2.0, std::chrono::milliseconds(4)};
  llm::HttpLlmClient client(config);
  EXPECT_EQ(code_of([&] { client.complete({"x", "v", "p"}); }), ErrorCode::kClientError);
  EXPECT_EQ(hits.load(), 3);
}

TEST(HttpLlm, ConfigFromEnvNamesMissingVariable) {
  unsetenv("FORPKG_LLM_ENDPOINT");
  try {
    llm::HttpLlmConfig::from_env();
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("FORPKG_LLM_ENDPOINT"), std::string::npos);
  }
}

// Classifier wire contract, shared with the classifier service.

json contract() {
  return json::parse(testing::read_file(testing::data_dir() / "contracts" /
                                        "classify_contract.json"));
}

TEST(ClassifyContract, LabelsMatchSchema) {
  const auto labels = contract()["labels"].get<std::vector<std::string>>();
  EXPECT_EQ(labels, ontology::builtin_schema().relation_labels());
}

TEST(ClassifyContract, ClientSpeaksTheContract) {
  const auto c = contract();
  LocalServer local;
  std::vector<json> requests;
  std::mutex mu;
  local.server().Post("/classify", [&](const httplib::Request& req,
                                       httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      res.status = 400;
      return;
    }
    if (!body.contains("text") || !body.contains("head")) {
      res.status = 400;
      return;
    }
    std::lock_guard lock(mu);
    requests.push_back(body);
    for (const auto& k : c["cases"]) {
      if (k["request"] == body) {
        res.set_content(k["response"].dump(), "application/json");
        return;
      }
    }
    res.status = 404;
  });
  local.server().Get("/health", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(c["health"]["response"].dump(), "application/json");
  });
  const auto url = local.start();

  classifier::HttpClassifierConfig config;
  config.endpoint = url;
  classifier::HttpClassifierClient client(
      config, c["labels"].get<std::vector<std::string>>());
  EXPECT_TRUE(client.healthy());
  for (const auto& k : c["cases"]) {
    const auto v = client.classify(k["request"]["text"].get<std::string>(),
                                   k["request"]["head"].get<std::string>());
    EXPECT_EQ(v.label, k["expect_label"]);
    EXPECT_EQ(v.scores.size(), 15u);
    double sum = 0;
    for (const auto& [l, s] : v.scores) sum += s;
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
  ASSERT_EQ(requests.size(), c["cases"].size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    EXPECT_EQ(requests[i], c["cases"][i]["request"]);
  }
  for (const auto& k : c["cases"]) {
    const auto body = json::parse(classifier::classify_request_body(
        k["request"]["text"].get<std::string>(), k["request"]["head"].get<std::string>()));
    EXPECT_EQ(body, k["request"]);
  }
}

TEST(ClassifyContract, MalformedRequestsAreRejectedByAConformingServer) {
  // The stub above follows the contract; this pins the expected statuses so
  // the fixture stays self-consistent.
  for (const auto& k : contract()["malformed_requests"]) {
    EXPECT_EQ(k["expect_status"], 400);
    if (k.contains("body")) {
      EXPECT_FALSE(k["body"].contains("text") && k["body"].contains("head"));
    }
  }
}

TEST(ClassifyContract, InvalidResponsesRejected) {
  const auto c = contract();
  const auto labels = c["labels"].get<std::vector<std::string>>();
  for (const auto& k : c["invalid_responses"]) {
    EXPECT_EQ(code_of([&] { classifier::parse_classify_response(k["body"].dump(), labels); }),
              ErrorCode::kClientError)
        << k["name"];
  }
  EXPECT_EQ(code_of([&] { classifier::parse_classify_response("<html>", labels); }),
            ErrorCode::kClientError);
}

TEST(HttpClassifier, UnreachableServiceIsUnavailableAndFailsFast) {
  classifier::HttpClassifierConfig config;
  config.endpoint = "http://127.0.0.1:" + std::to_string(unused_port());
  config.retry = {2, std::chrono::milliseconds(1), 2.0, std::chrono::milliseconds(2)};
  config.timeout = std::chrono::milliseconds(500);
  classifier::HttpClassifierClient client(config,
                                          ontology::builtin_schema().relation_labels());
  EXPECT_EQ(code_of([&] { client.classify("禁止砍伐天然林", "天然林"); }),
            ErrorCode::kClassifierUnavailable);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(code_of([&] { client.classify("禁止砍伐天然林", "天然林"); }),
            ErrorCode::kClassifierUnavailable);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::milliseconds(50));
  EXPECT_FALSE(client.healthy());
}

TEST(HttpClassifier, ServerErrorIsUnavailableClientErrorIsNot) {
  LocalServer local;
  local.server().Post("/classify", [](const httplib::Request& req,
                                      httplib::Response& res) {
    res.status = req.body.find("503") != std::string::npos ? 503 : 400;
  });
  const auto url = local.start();
  classifier::HttpClassifierConfig config;
  config.endpoint = url;
  config.retry = {1, std::chrono::milliseconds(1), 2.0, std::chrono::milliseconds(1)};
  {
    classifier::HttpClassifierClient client(
        config, ontology::builtin_schema().relation_labels());
    EXPECT_EQ(code_of([&] { client.classify("400", "4"); }), ErrorCode::kClientError);
    EXPECT_EQ(code_of([&] { client.classify("503", "5"); }),
              ErrorCode::kClassifierUnavailable);
  }
}

TEST(HttpClassifier, ForbiddenNetworkNeverConnects) {
  net::NetworkGuard guard;
  classifier::HttpClassifierConfig config;
  config.endpoint = "http://127.0.0.1:9";
  classifier::HttpClassifierClient client(config,
                                          ontology::builtin_schema().relation_labels());
  EXPECT_EQ(code_of([&] { client.classify("a", "a"); }), ErrorCode::kNetworkForbidden);
}

TEST(Net, LoopbackOrigins) {
  EXPECT_TRUE(net::is_loopback_origin("http://127.0.0.1:8080"));
  EXPECT_TRUE(net::is_loopback_origin("http://localhost"));
  EXPECT_TRUE(net::is_loopback_origin("http://[::1]:9000"));
  EXPECT_FALSE(net::is_loopback_origin("https://api.example.com"));
  EXPECT_FALSE(net::is_loopback_origin("http://10.0.0.1:80"));
  EXPECT_FALSE(net::is_loopback_origin("http://localhost.example.com"));
}

}  // namespace
}  // namespace forpkg
