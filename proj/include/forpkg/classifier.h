#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "forpkg/net.h"
#include "forpkg/ontology.h"

namespace forpkg::classifier {

// Distribution over the 15 relation labels.
struct Verdict {
  std::string label;
  std::map<std::string, double> scores;
};

// classify() may be called from several threads at once.
class ClassifierClient {
 public:
  virtual ~ClassifierClient() = default;
  virtual std::string id() const = 0;
  // text = segment, head = head entity surface.
  virtual Verdict classify(std::string_view text, std::string_view head) const = 0;
};

struct TriggerRule {
  std::string cue;
  std::string label;
};

// Cue words in lookup order. Documented in docs/rule_table.md.
const std::vector<TriggerRule>& rule_table();

// Offline classifier: the trigger occurring earliest in the segment (longer
// cue first on a tie) gets 0.9 and the other labels share 0.1. Without a
// trigger `relevant` gets 0.1 and the rest share 0.9, so the maximum stays
// below any sensible abstention threshold.
std::unique_ptr<ClassifierClient> rule_fallback_classifier(
    const ontology::OntologySchema& schema);

struct HttpClassifierConfig {
  std::string endpoint;  // base URL; the client calls /classify and /health
  std::chrono::milliseconds timeout{10000};
  net::RetryPolicy retry;
  double requests_per_second = 0.0;
  // After the service is found unavailable, calls fail fast for this long.
  std::chrono::milliseconds cooldown{30000};

  // FORPKG_CLASSIFIER_ENDPOINT. Throws InvalidConfig when unset.
  static HttpClassifierConfig from_env();
};

// POST /classify {"text", "head"} -> {"label", "scores"}. Connection
// failures and 5xx raise ClassifierUnavailable; malformed replies and 4xx
// raise ClientError.
class HttpClassifierClient final : public ClassifierClient {
 public:
  HttpClassifierClient(HttpClassifierConfig config,
                       std::vector<std::string> labels);
  std::string id() const override;
  Verdict classify(std::string_view text, std::string_view head) const override;
  // GET /health; true on HTTP 200.
  bool healthy() const;

 private:
  HttpClassifierConfig config_;
  net::Endpoint endpoint_;
  std::vector<std::string> labels_;
  mutable net::RateLimiter limiter_;
  mutable std::mutex mutex_;
  mutable std::chrono::steady_clock::time_point down_until_{};
};

// Parses and checks a /classify response body against the label set:
// exactly the known labels, finite non-negative scores with positive sum.
// Scores are renormalized to sum to 1. Throws ClientError.
Verdict parse_classify_response(std::string_view body,
                                const std::vector<std::string>& labels);
std::string classify_request_body(std::string_view text, std::string_view head);

}  // namespace forpkg::classifier
