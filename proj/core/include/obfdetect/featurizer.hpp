#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "obfdetect/error.hpp"

namespace obfdetect::feat {

class EmptyCorpus : public DataError {
 public:
  using DataError::DataError;
};

// Maximal runs of [A-Za-z0-9]; everything else separates.
std::vector<std::string_view> tokenize(std::string_view text);

struct Vocabulary {
  std::vector<std::string> tokens;  // sorted
  std::unordered_map<std::string, std::size_t> index;
  std::uint64_t fingerprint = 0;  // FNV-1a over the token list

  std::size_t size() const { return tokens.size(); }
  std::ptrdiff_t find(std::string_view token) const;

  static Vocabulary from_tokens(std::vector<std::string> tokens);
  std::string serialize() const;  // one token per line
  static Vocabulary deserialize(std::string_view text);
};

Vocabulary fit_vocabulary(std::span<const std::string> docs);

struct FeatureVector {
  std::vector<double> weights;
  double oov_rate = 0.0;  // share of tokens missing from the vocabulary
};

FeatureVector transform(std::string_view doc, const Vocabulary& vocab);

// Row-major dense matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  FeatureMatrix select_rows(std::span<const std::size_t> idx) const;
};

struct TransformResult {
  FeatureMatrix X;
  double mean_oov_rate = 0.0;
};

TransformResult transform_all(std::span<const std::string> docs, const Vocabulary& vocab);

// CSV with a header of vocabulary tokens; values in shortest round-trip form.
// Pre-tokenized document: sorted (token, count) pairs and the token total.
struct TokenCounts {
  std::vector<std::pair<std::string, std::uint32_t>> counts;
  std::size_t total = 0;
};

TokenCounts count_tokens(std::string_view doc);
Vocabulary fit_vocabulary(std::span<const TokenCounts> docs);
FeatureVector transform(const TokenCounts& doc, const Vocabulary& vocab);
// Fills one row per document; returns the mean OOV rate.
double transform_into(const TokenCounts& doc, const Vocabulary& vocab, std::span<double> out);

std::string matrix_to_csv(const FeatureMatrix& X, const Vocabulary& vocab);

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace obfdetect::feat
