#include "forpkg/classifier.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "forpkg/error.h"

namespace forpkg::classifier {

using nlohmann::json;

const std::vector<TriggerRule>& rule_table() {
  static const std::vector<TriggerRule> table = {
      {"发布", "publish"},      {"位于", "locate"},     {"禁止", "isProhibited"},
      {"有权", "hasRight"},     {"应当", "duty"},       {"负责", "duty"},
      {"是指", "define"},       {"系指", "define"},     {"引用", "cite"},
      {"任职", "workFor"},      {"属于", "belongTo"},   {"包括", "contain"},
      {"包含", "contain"},      {"分类", "classifyTo"},
  };
  return table;
}

namespace {

class RuleClassifier final : public ClassifierClient {
 public:
  explicit RuleClassifier(std::vector<std::string> labels)
      : labels_(std::move(labels)) {}

  std::string id() const override { return "rule-v1"; }

  Verdict classify(std::string_view text, std::string_view) const override {
    const TriggerRule* best = nullptr;
    std::size_t best_pos = std::string_view::npos;
    for (const auto& rule : rule_table()) {
      const auto pos = text.find(rule.cue);
      if (pos == std::string_view::npos) continue;
      if (best == nullptr || pos < best_pos ||
          (pos == best_pos && rule.cue.size() > best->cue.size())) {
        best = &rule;
        best_pos = pos;
      }
    }
    const std::string winner = best ? best->label : "relevant";
    const double top = best ? 0.9 : 0.1;
    const double rest = (1.0 - top) / static_cast<double>(labels_.size() - 1);
    Verdict v{winner, {}};
    for (const auto& l : labels_) v.scores[l] = l == winner ? top : rest;
    return v;
  }

 private:
  std::vector<std::string> labels_;
};

}  // namespace

std::unique_ptr<ClassifierClient> rule_fallback_classifier(
    const ontology::OntologySchema& schema) {
  auto labels = schema.relation_labels();
  for (const auto& rule : rule_table()) {
    if (std::find(labels.begin(), labels.end(), rule.label) == labels.end()) {
      throw Error(ErrorCode::kInvalidSchema,
                  "rule table label '" + rule.label + "' not in schema");
    }
  }
  return std::make_unique<RuleClassifier>(std::move(labels));
}

HttpClassifierConfig HttpClassifierConfig::from_env() {
  const char* url = std::getenv("FORPKG_CLASSIFIER_ENDPOINT");
  if (url == nullptr || *url == '\0') {
    throw Error(ErrorCode::kInvalidConfig,
                "classifier: FORPKG_CLASSIFIER_ENDPOINT is not set");
  }
  HttpClassifierConfig c;
  c.endpoint = url;
  return c;
}

std::string classify_request_body(std::string_view text, std::string_view head) {
  return json{{"text", text}, {"head", head}}.dump();
}

Verdict parse_classify_response(std::string_view body,
                                const std::vector<std::string>& labels) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kClientError,
                std::string("classifier reply is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("scores") || !j["scores"].is_object()) {
    throw Error(ErrorCode::kClientError, "classifier reply lacks 'scores'");
  }
  const json& scores = j["scores"];
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kClientError,
                "classifier reply has " + std::to_string(scores.size()) +
                    " scores, expected " + std::to_string(labels.size()));
  }
  Verdict v;
  double sum = 0.0;
  for (const auto& label : labels) {
    if (!scores.contains(label) || !scores[label].is_number()) {
      throw Error(ErrorCode::kClientError,
                  "classifier reply lacks a score for '" + label + "'");
    }
    const double s = scores[label].get<double>();
    if (!std::isfinite(s) || s < 0.0) {
      throw Error(ErrorCode::kClientError,
                  "classifier score for '" + label + "' is invalid");
    }
    v.scores[label] = s;
    sum += s;
  }
  if (!(sum > 0.0)) {
    throw Error(ErrorCode::kClientError, "classifier scores sum to zero");
  }
  for (auto& [label, s] : v.scores) s /= sum;
  if (j.contains("label") && j["label"].is_string()) {
    v.label = j["label"].get<std::string>();
    if (!v.scores.contains(v.label)) {
      throw Error(ErrorCode::kClientError,
                  "classifier label '" + v.label + "' is unknown");
    }
  }
  return v;
}

HttpClassifierClient::HttpClassifierClient(HttpClassifierConfig config,
                                           std::vector<std::string> labels)
    : config_(std::move(config)),
      endpoint_(net::parse_endpoint(config_.endpoint)),
      labels_(std::move(labels)),
      limiter_(config_.requests_per_second) {}

std::string HttpClassifierClient::id() const {
  return "http:" + endpoint_.origin + endpoint_.base_path;
}

Verdict HttpClassifierClient::classify(std::string_view text,
                                       std::string_view head) const {
  {
    std::lock_guard lock(mutex_);
    if (std::chrono::steady_clock::now() < down_until_) {
      throw Error(ErrorCode::kClassifierUnavailable,
                  "classifier marked unavailable after an earlier failure");
    }
  }
  net::HttpOptions opts;
  opts.timeout = config_.timeout;
  opts.retry = config_.retry;
  opts.limiter = &limiter_;
  opts.failure_code = ErrorCode::kClassifierUnavailable;
  net::HttpResponse resp;
  try {
    resp = net::post_json(endpoint_, "/classify",
                          json{{"text", text}, {"head", head}}, opts);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kClassifierUnavailable) {
      std::lock_guard lock(mutex_);
      down_until_ = std::chrono::steady_clock::now() + config_.cooldown;
    }
    throw;
  }
  if (resp.status != 200) {
    throw Error(ErrorCode::kClientError,
                "classifier returned HTTP " + std::to_string(resp.status));
  }
  return parse_classify_response(resp.body, labels_);
}

bool HttpClassifierClient::healthy() const {
  net::HttpOptions opts;
  opts.timeout = config_.timeout;
  opts.retry.max_attempts = 1;
  opts.failure_code = ErrorCode::kClassifierUnavailable;
  try {
    return net::get(endpoint_, "/health", opts).status == 200;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNetworkForbidden) throw;
    return false;
  }
}

}  // namespace forpkg::classifier
