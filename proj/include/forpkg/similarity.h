#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forpkg/corpus.h"
#include "forpkg/graph_store.h"
#include "forpkg/net.h"

namespace forpkg::similarity {

struct EmbeddingVector {
  std::string doc_id;
  std::vector<double> values;
  std::string provider_id;

  std::size_t dim() const { return values.size(); }
  bool is_zero() const;
};

// dot(u, v) / (|u| |v|), clamped to [-1, 1]. Throws DimMismatch, ZeroVector.
double cosine(std::span<const double> u, std::span<const double> v);
// Additionally refuses vectors from different providers (DimMismatch).
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

// Text in, fixed-length vector out. embed() must be deterministic for a
// fixed configuration and safe to call from several threads.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

// Character n-gram counts hashed into `dim` buckets (seeded FNV-1a).
// Texts shorter than n contribute themselves as a single gram; the empty
// text embeds to the zero vector. Throws InvalidConfig when dim < 16 or
// n < 1.
std::unique_ptr<EmbeddingProvider> hash_ngram_provider(std::size_t dim,
                                                       std::size_t n);

// POST {endpoint}/embed {"text": ...} -> {"vector": [...]}.
std::unique_ptr<EmbeddingProvider> http_provider(std::string endpoint,
                                                 std::size_t dim,
                                                 net::HttpOptions options = {});

// "hash-ngram" (256 buckets, bigrams), "hash-ngram:<dim>:<n>", or "http"
// (endpoint and dimension from FORPKG_EMBED_ENDPOINT / FORPKG_EMBED_DIM).
// Throws InvalidConfig.
std::unique_ptr<EmbeddingProvider> make_provider(std::string_view spec);

struct SimilarityConfig {
  double threshold = 0.85;  // edges need cosine strictly above this
  std::size_t max_chars = 24000;
  std::size_t parallelism = 1;
  std::optional<std::filesystem::path> cache_path;
};

// Throws InvalidConfig naming the offending field.
void validate(const SimilarityConfig& config);

// doc_id -> vector, keyed by provider id and a digest of the embedded text.
class EmbeddingCache {
 public:
  EmbeddingCache(std::string provider_id, std::size_t dim);

  // Entries written by another provider (or dim) are ignored.
  void load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::vector<double>* find(const std::string& doc_id,
                                  const std::string& digest) const;
  void put(const std::string& doc_id, const std::string& digest,
           std::vector<double> values);
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::string digest;
    std::vector<double> values;
  };
  std::string provider_id_;
  std::size_t dim_;
  std::map<std::string, Entry> entries_;
};

struct ScoredPair {
  std::string doc_a;
  std::string doc_b;
  double similarity = 0.0;
};

struct RelevanceResult {
  std::vector<graph::TripleId> triples;
  std::vector<ScoredPair> linked;  // pairs above the threshold, i < j
  std::size_t evaluations = 0;
  std::size_t cache_hits = 0;
  std::vector<std::string> warnings;
};

// Embeds every document (truncated to max_chars code points), scores all
// C(N, 2) pairs and stores one symmetric `relevant` edge per pair whose
// cosine exceeds the threshold, with the similarity as confidence.
// Throws ProviderError(doc_id).
RelevanceResult build_relevance_edges(
    const std::vector<corpus::PolicyDocument>& corpus,
    const EmbeddingProvider& provider, const SimilarityConfig& config,
    graph::GraphStore& store);

}  // namespace forpkg::similarity
