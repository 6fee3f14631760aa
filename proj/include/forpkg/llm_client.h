#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "forpkg/net.h"

namespace forpkg::llm {

// A rendered prompt. The digest covers template name, template version and
// the full text, so editing a template invalidates recorded transcripts
// only when its version changes the text.
struct Prompt {
  std::string template_name;
  std::string template_version;
  std::string text;

  std::string digest() const;
};

// Template file layout:
//   version: <text>
//   ---
//   body with {{placeholders}}
class PromptTemplate {
 public:
  PromptTemplate(std::string name, std::string version, std::string body);

  // Throws UnreadableFile / ParseError.
  static PromptTemplate load(const std::filesystem::path& path);

  const std::string& name() const { return name_; }
  const std::string& version() const { return version_; }

  // Throws InvalidConfig for a placeholder without a value.
  Prompt render(const std::map<std::string, std::string>& values) const;

 private:
  std::string name_;
  std::string version_;
  std::string body_;
};

// The three templates the extraction stages use.
struct PromptSet {
  PromptTemplate head_entities;
  PromptTemplate relation_word;
  PromptTemplate tail_type;

  // Loads head_entities.txt, relation_word.txt and tail_type.txt.
  static PromptSet load(const std::filesystem::path& directory);
};

std::filesystem::path default_prompt_dir();

// complete() may be called from several threads at once.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const Prompt& prompt) = 0;
};

struct TranscriptRecord {
  std::string digest;
  std::string template_name;
  std::string template_version;
  std::string prompt;
  std::string response;
};

// Answers from a line-delimited transcript file. Unrecorded prompts fail
// with UnrecordedPrompt.
class ReplayLlmClient final : public LlmClient {
 public:
  // Throws UnreadableFile, or ParseError(line) for malformed records and
  // digests that do not match their prompt.
  static std::unique_ptr<ReplayLlmClient> from_file(
      const std::filesystem::path& path);
  explicit ReplayLlmClient(std::vector<TranscriptRecord> records);

  std::string complete(const Prompt& prompt) override;
  std::size_t size() const { return responses_.size(); }

 private:
  std::unordered_map<std::string, std::string> responses_;
};

// Forwards to `inner` and appends every new interaction to `path`.
class RecordingLlmClient final : public LlmClient {
 public:
  RecordingLlmClient(LlmClient& inner, const std::filesystem::path& path);
  std::string complete(const Prompt& prompt) override;

 private:
  LlmClient& inner_;
  std::mutex mutex_;
  std::ofstream out_;
  std::map<std::string, bool> written_;
};

struct HttpLlmConfig {
  std::string endpoint;  // OpenAI-compatible base URL, e.g. https://host/v1
  std::string api_key;
  std::string model;
  double temperature = 0.0;
  double requests_per_second = 1.0;
  net::RetryPolicy retry;
  std::chrono::milliseconds timeout{120000};

  // FORPKG_LLM_ENDPOINT, FORPKG_LLM_KEY, FORPKG_LLM_MODEL. Throws
  // InvalidConfig naming the missing variable.
  static HttpLlmConfig from_env();
};

// Chat-completions client: POST {endpoint}/chat/completions.
class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(HttpLlmConfig config);
  std::string complete(const Prompt& prompt) override;

 private:
  HttpLlmConfig config_;
  net::Endpoint endpoint_;
  net::RateLimiter limiter_;
};

TranscriptRecord make_record(const Prompt& prompt, std::string response);
std::string transcript_line(const TranscriptRecord& record);

}  // namespace forpkg::llm
