#include "forpkg/llm_client.h"

#include <cstdlib>
#include <sstream>

#include "forpkg/error.h"
#include "forpkg/text.h"

namespace forpkg::llm {

using nlohmann::json;

std::string Prompt::digest() const {
  return text::sha256_hex(template_name + "\n" + template_version + "\n" + text);
}

PromptTemplate::PromptTemplate(std::string name, std::string version,
                               std::string body)
    : name_(std::move(name)), version_(std::move(version)), body_(std::move(body)) {}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, path.string());
  std::string line;
  std::string version;
  std::size_t line_no = 0;
  bool separated = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line == "---") {
      separated = true;
      break;
    }
    constexpr std::string_view kKey = "version:";
    if (line.rfind(kKey, 0) == 0) {
      version = std::string(text::trim(std::string_view(line).substr(kKey.size())));
    } else if (!text::trim(line).empty()) {
      throw Error(ErrorCode::kParseError,
                  path.string() + ": unexpected header line", line_no);
    }
  }
  if (!separated || version.empty()) {
    throw Error(ErrorCode::kParseError,
                path.string() + ": template needs 'version:' and '---'");
  }
  std::ostringstream body;
  body << in.rdbuf();
  return {path.stem().string(), version, body.str()};
}

Prompt PromptTemplate::render(
    const std::map<std::string, std::string>& values) const {
  std::string out;
  out.reserve(body_.size());
  std::size_t pos = 0;
  while (pos < body_.size()) {
    const auto open = body_.find("{{", pos);
    if (open == std::string::npos) {
      out.append(body_, pos);
      break;
    }
    const auto close = body_.find("}}", open + 2);
    if (close == std::string::npos) {
      out.append(body_, pos);
      break;
    }
    out.append(body_, pos, open - pos);
    const std::string key = body_.substr(open + 2, close - open - 2);
    auto it = values.find(key);
    if (it == values.end()) {
      throw Error(ErrorCode::kInvalidConfig,
                  "template " + name_ + " has no value for {{" + key + "}}");
    }
    out += it->second;
    pos = close + 2;
  }
  return {name_, version_, std::move(out)};
}

PromptSet PromptSet::load(const std::filesystem::path& directory) {
  return {PromptTemplate::load(directory / "head_entities.txt"),
          PromptTemplate::load(directory / "relation_word.txt"),
          PromptTemplate::load(directory / "tail_type.txt")};
}

std::filesystem::path default_prompt_dir() {
  if (const char* dir = std::getenv("FORPKG_PROMPT_DIR"); dir && *dir) {
    return dir;
  }
  return std::filesystem::path(FORPKG_DATA_DIR) / "prompts";
}

TranscriptRecord make_record(const Prompt& prompt, std::string response) {
  return {prompt.digest(), prompt.template_name, prompt.template_version,
          prompt.text, std::move(response)};
}

std::string transcript_line(const TranscriptRecord& r) {
  return json{{"digest", r.digest},
              {"template", r.template_name},
              {"template_version", r.template_version},
              {"prompt", r.prompt},
              {"response", r.response}}
      .dump();
}

std::unique_ptr<ReplayLlmClient> ReplayLlmClient::from_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kUnreadableFile, path.string());
  std::vector<TranscriptRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    TranscriptRecord r;
    try {
      const json j = json::parse(line);
      r = {j.at("digest").get<std::string>(), j.at("template").get<std::string>(),
           j.at("template_version").get<std::string>(),
           j.at("prompt").get<std::string>(), j.at("response").get<std::string>()};
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParseError, path.string() + ": " + e.what(),
                  line_no);
    }
    const Prompt p{r.template_name, r.template_version, r.prompt};
    if (p.digest() != r.digest) {
      throw Error(ErrorCode::kParseError,
                  path.string() + ": digest does not match prompt", line_no);
    }
    records.push_back(std::move(r));
  }
  return std::make_unique<ReplayLlmClient>(std::move(records));
}

ReplayLlmClient::ReplayLlmClient(std::vector<TranscriptRecord> records) {
  for (auto& r : records) responses_[r.digest] = std::move(r.response);
}

std::string ReplayLlmClient::complete(const Prompt& prompt) {
  const auto digest = prompt.digest();
  auto it = responses_.find(digest);
  if (it == responses_.end()) {
    throw Error(ErrorCode::kUnrecordedPrompt,
                "no recorded response for " + prompt.template_name + "@" +
                    prompt.template_version + " prompt " + digest.substr(0, 12));
  }
  return it->second;
}

RecordingLlmClient::RecordingLlmClient(LlmClient& inner,
                                       const std::filesystem::path& path)
    : inner_(inner), out_(path, std::ios::binary | std::ios::app) {
  if (!out_) throw Error(ErrorCode::kUnreadableFile, "cannot write " + path.string());
}

std::string RecordingLlmClient::complete(const Prompt& prompt) {
  std::string response = inner_.complete(prompt);
  std::lock_guard lock(mutex_);
  const auto record = make_record(prompt, response);
  if (written_.emplace(record.digest, true).second) {
    out_ << transcript_line(record) << '\n';
    out_.flush();
  }
  return response;
}

HttpLlmConfig HttpLlmConfig::from_env() {
  auto need = [](const char* name) -> std::string {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') {
      throw Error(ErrorCode::kInvalidConfig,
                  std::string("llm: environment variable ") + name +
                      " is not set");
    }
    return v;
  };
  HttpLlmConfig c;
  c.endpoint = need("FORPKG_LLM_ENDPOINT");
  c.api_key = need("FORPKG_LLM_KEY");
  c.model = need("FORPKG_LLM_MODEL");
  return c;
}

HttpLlmClient::HttpLlmClient(HttpLlmConfig config)
    : config_(std::move(config)),
      endpoint_(net::parse_endpoint(config_.endpoint)),
      limiter_(config_.requests_per_second) {}

std::string HttpLlmClient::complete(const Prompt& prompt) {
  net::HttpOptions opts;
  opts.timeout = config_.timeout;
  opts.retry = config_.retry;
  opts.limiter = &limiter_;
  opts.failure_code = ErrorCode::kClientError;
  if (!config_.api_key.empty()) {
    opts.headers["Authorization"] = "Bearer " + config_.api_key;
  }
  const json body = {
      {"model", config_.model},
      {"temperature", config_.temperature},
      {"messages", json::array({{{"role", "user"}, {"content", prompt.text}}})}};
  const auto resp = net::post_json(endpoint_, "/chat/completions", body, opts);
  if (resp.status != 200) {
    throw Error(ErrorCode::kClientError,
                "chat completion returned HTTP " + std::to_string(resp.status));
  }
  try {
    return json::parse(resp.body)
        .at("choices")
        .at(0)
        .at("message")
        .at("content")
        .get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kClientError,
                std::string("malformed chat completion: ") + e.what());
  }
}

}  // namespace forpkg::llm
