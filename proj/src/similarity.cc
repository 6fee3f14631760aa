#include "forpkg/similarity.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "forpkg/error.h"
#include "forpkg/text.h"

namespace forpkg::similarity {

using nlohmann::json;

bool EmbeddingVector::is_zero() const {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return v == 0.0; });
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw Error(ErrorCode::kDimMismatch,
                "dims " + std::to_string(u.size()) + " and " +
                    std::to_string(v.size()));
  }
  double dot = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) {
    throw Error(ErrorCode::kZeroVector, "cosine of an all-zero vector");
  }
  // Product of the two norms in a fixed (sorted) order keeps cos(u, v) and
  // cos(v, u) bit-identical.
  const double nu = std::sqrt(uu);
  const double nv = std::sqrt(vv);
  const double denom = std::min(nu, nv) * std::max(nu, nv);
  return std::clamp(dot / denom, -1.0, 1.0);
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.provider_id != v.provider_id) {
    throw Error(ErrorCode::kDimMismatch, "vectors from providers '" +
                                             u.provider_id + "' and '" +
                                             v.provider_id + "'");
  }
  return cosine(std::span<const double>(u.values),
                std::span<const double>(v.values));
}

namespace {

class HashNgramProvider final : public EmbeddingProvider {
 public:
  HashNgramProvider(std::size_t dim, std::size_t n) : dim_(dim), n_(n) {}

  std::string id() const override {
    return "hash-ngram:" + std::to_string(dim_) + ":" + std::to_string(n_);
  }
  std::size_t dim() const override { return dim_; }

  std::vector<double> embed(std::string_view text) const override {
    std::vector<double> out(dim_, 0.0);
    if (text.empty()) return out;
    // Byte offsets of every code point boundary.
    std::vector<std::size_t> bounds;
    std::size_t pos = 0;
    while (pos < text.size()) {
      bounds.push_back(pos);
      text::next_code_point(text, pos);
    }
    bounds.push_back(text.size());
    const std::size_t count = bounds.size() - 1;
    if (count < n_) {
      out[bucket(text)] += 1.0;
      return out;
    }
    for (std::size_t i = 0; i + n_ <= count; ++i) {
      out[bucket(text.substr(bounds[i], bounds[i + n_] - bounds[i]))] += 1.0;
    }
    return out;
  }

 private:
  std::size_t bucket(std::string_view gram) const {
    constexpr std::uint64_t kSeed = 0x9E3779B97F4A7C15ull;
    std::uint64_t h = 0xcbf29ce484222325ull ^ kSeed;
    for (unsigned char c : gram) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return static_cast<std::size_t>(h % dim_);
  }

  std::size_t dim_;
  std::size_t n_;
};

class HttpProvider final : public EmbeddingProvider {
 public:
  HttpProvider(std::string url, std::size_t dim, net::HttpOptions options)
      : url_(std::move(url)),
        endpoint_(net::parse_endpoint(url_)),
        dim_(dim),
        options_(std::move(options)) {
    options_.failure_code = ErrorCode::kProviderError;
  }

  std::string id() const override {
    return "http:" + url_ + ":" + std::to_string(dim_);
  }
  std::size_t dim() const override { return dim_; }

  std::vector<double> embed(std::string_view text) const override {
    const auto resp =
        net::post_json(endpoint_, "/embed", {{"text", text}}, options_);
    if (resp.status != 200) {
      throw Error(ErrorCode::kProviderError,
                  "embedding service returned HTTP " +
                      std::to_string(resp.status));
    }
    try {
      auto values = json::parse(resp.body).at("vector").get<std::vector<double>>();
      if (values.size() != dim_) {
        throw Error(ErrorCode::kProviderError,
                    "embedding service returned dim " +
                        std::to_string(values.size()) + ", expected " +
                        std::to_string(dim_));
      }
      return values;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kProviderError,
                  std::string("malformed embedding response: ") + e.what());
    }
  }

 private:
  std::string url_;
  net::Endpoint endpoint_;
  std::size_t dim_;
  net::HttpOptions options_;
};

std::size_t parse_size(std::string_view s, const char* what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kInvalidConfig,
                std::string("provider ") + what + " '" + std::string(s) +
                    "' is not a positive integer");
  }
  return v;
}

}  // namespace

std::unique_ptr<EmbeddingProvider> hash_ngram_provider(std::size_t dim,
                                                       std::size_t n) {
  if (dim < 16) {
    throw Error(ErrorCode::kInvalidConfig, "hash-ngram dim must be >= 16");
  }
  if (n < 1) throw Error(ErrorCode::kInvalidConfig, "hash-ngram n must be >= 1");
  return std::make_unique<HashNgramProvider>(dim, n);
}

std::unique_ptr<EmbeddingProvider> http_provider(std::string endpoint,
                                                 std::size_t dim,
                                                 net::HttpOptions options) {
  if (dim == 0) {
    throw Error(ErrorCode::kInvalidConfig, "embedding dim must be positive");
  }
  return std::make_unique<HttpProvider>(std::move(endpoint), dim,
                                        std::move(options));
}

std::unique_ptr<EmbeddingProvider> make_provider(std::string_view spec) {
  if (spec == "http") {
    const char* url = std::getenv("FORPKG_EMBED_ENDPOINT");
    if (url == nullptr || *url == '\0') {
      throw Error(ErrorCode::kInvalidConfig,
                  "provider: FORPKG_EMBED_ENDPOINT is not set");
    }
    const char* dim = std::getenv("FORPKG_EMBED_DIM");
    return http_provider(url, dim ? parse_size(dim, "dim") : 768);
  }
  constexpr std::string_view kHash = "hash-ngram";
  if (spec.substr(0, kHash.size()) != kHash) {
    throw Error(ErrorCode::kInvalidConfig,
                "provider: unknown provider '" + std::string(spec) + "'");
  }
  std::string_view rest = spec.substr(kHash.size());
  if (rest.empty()) return hash_ngram_provider(256, 2);
  if (rest.front() != ':') {
    throw Error(ErrorCode::kInvalidConfig,
                "provider: expected hash-ngram:<dim>:<n>");
  }
  rest.remove_prefix(1);
  const auto colon = rest.find(':');
  const std::size_t dim = parse_size(rest.substr(0, colon), "dim");
  const std::size_t n = colon == std::string_view::npos
                            ? 2
                            : parse_size(rest.substr(colon + 1), "n");
  return hash_ngram_provider(dim, n);
}

void validate(const SimilarityConfig& config) {
  if (!(config.threshold > 0.0 && config.threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "lambda must lie in (0, 1)");
  }
  if (config.max_chars == 0) {
    throw Error(ErrorCode::kInvalidConfig, "max_chars must be positive");
  }
  if (config.parallelism == 0) {
    throw Error(ErrorCode::kInvalidConfig, "parallelism must be positive");
  }
}

EmbeddingCache::EmbeddingCache(std::string provider_id, std::size_t dim)
    : provider_id_(std::move(provider_id)), dim_(dim) {}

void EmbeddingCache::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return;
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    spdlog::warn("ignoring unreadable embedding cache {}: {}", path.string(),
                 e.what());
    return;
  }
  if (j.value("provider_id", "") != provider_id_ ||
      j.value("dim", std::size_t{0}) != dim_) {
    spdlog::info("embedding cache {} belongs to another provider, ignored",
                 path.string());
    return;
  }
  const json entries = j.value("entries", json::object());
  for (const auto& [doc_id, entry] : entries.items()) {
    auto values = entry.at("vector").get<std::vector<double>>();
    if (values.size() != dim_) continue;
    entries_[doc_id] = {entry.at("digest").get<std::string>(), std::move(values)};
  }
}

void EmbeddingCache::save(const std::filesystem::path& path) const {
  json entries = json::object();
  for (const auto& [doc_id, e] : entries_) {
    entries[doc_id] = {{"digest", e.digest}, {"vector", e.values}};
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kUnreadableFile, "cannot write " + path.string());
  out << json{{"provider_id", provider_id_}, {"dim", dim_}, {"entries", entries}}
             .dump()
      << "\n";
}

const std::vector<double>* EmbeddingCache::find(const std::string& doc_id,
                                                const std::string& digest) const {
  auto it = entries_.find(doc_id);
  if (it == entries_.end() || it->second.digest != digest) return nullptr;
  return &it->second.values;
}

void EmbeddingCache::put(const std::string& doc_id, const std::string& digest,
                         std::vector<double> values) {
  entries_[doc_id] = {digest, std::move(values)};
}

RelevanceResult build_relevance_edges(
    const std::vector<corpus::PolicyDocument>& corpus,
    const EmbeddingProvider& provider, const SimilarityConfig& config,
    graph::GraphStore& store) {
  validate(config);
  RelevanceResult result;

  // Canonical document order makes the result independent of input order.
  std::vector<const corpus::PolicyDocument*> docs;
  for (const auto& d : corpus) docs.push_back(&d);
  std::sort(docs.begin(), docs.end(),
            [](const auto* a, const auto* b) { return a->doc_id < b->doc_id; });

  const std::size_t n = docs.size();
  std::vector<std::string> inputs(n);
  std::vector<std::string> digests(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string& body = docs[i]->body;
    const std::size_t cut = text::byte_offset_of(body, config.max_chars);
    if (cut < body.size()) {
      spdlog::info("{}: truncated to {} characters before embedding",
                   docs[i]->doc_id, config.max_chars);
      result.warnings.push_back(docs[i]->doc_id + ": truncated to " +
                                std::to_string(config.max_chars) +
                                " characters for embedding");
    }
    inputs[i] = body.substr(0, cut);
    digests[i] = text::sha256_hex(inputs[i]);
  }

  EmbeddingCache cache(provider.id(), provider.dim());
  if (config.cache_path) cache.load(*config.cache_path);

  std::vector<std::vector<double>> vectors(n);
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < n; ++i) {
    if (const auto* hit = cache.find(docs[i]->doc_id, digests[i])) {
      vectors[i] = *hit;
      ++result.cache_hits;
    } else {
      pending.push_back(i);
    }
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::string> failures(n);
  auto worker = [&] {
    for (std::size_t k = next++; k < pending.size(); k = next++) {
      const std::size_t i = pending[k];
      try {
        vectors[i] = provider.embed(inputs[i]);
        if (vectors[i].size() != provider.dim()) {
          failures[i] = "provider returned wrong dimension";
        }
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  const std::size_t threads = std::min(config.parallelism, pending.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!failures[i].empty()) {
      throw Error(ErrorCode::kProviderError,
                  docs[i]->doc_id + ": " + failures[i]);
    }
  }
  for (std::size_t i : pending) cache.put(docs[i]->doc_id, digests[i], vectors[i]);
  if (config.cache_path) cache.save(*config.cache_path);

  std::vector<bool> zero(n);
  for (std::size_t i = 0; i < n; ++i) {
    zero[i] = std::all_of(vectors[i].begin(), vectors[i].end(),
                          [](double v) { return v == 0.0; });
    if (zero[i]) {
      result.warnings.push_back(docs[i]->doc_id +
                                ": zero embedding, no similarity edges");
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      ++result.evaluations;
      if (zero[i] || zero[j]) continue;
      const double sim = cosine(std::span<const double>(vectors[i]),
                                std::span<const double>(vectors[j]));
      if (!(sim > config.threshold)) continue;
      const auto a = corpus::document_entity(*docs[i]);
      const auto b = corpus::document_entity(*docs[j]);
      if (a == b) continue;
      graph::Provenance pa{docs[i]->doc_id, 0, std::nullopt,
                           graph::Stage::kSimilarity, sim,
                           "similar to " + docs[j]->doc_id};
      const graph::Provenance doc_prov{docs[i]->doc_id, 0, std::nullopt,
                                       graph::Stage::kDocumentLevel, 1.0, ""};
      const graph::Provenance doc_prov_b{docs[j]->doc_id, 0, std::nullopt,
                                         graph::Stage::kDocumentLevel, 1.0, ""};
      store.upsert_entity("DOC", docs[i]->title, doc_prov);
      store.upsert_entity("DOC", docs[j]->title, doc_prov_b);
      result.triples.push_back(store.insert_triple(a, "relevant", b, pa).id);
      result.linked.push_back({docs[i]->doc_id, docs[j]->doc_id, sim});
    }
  }
  return result;
}

}  // namespace forpkg::similarity
