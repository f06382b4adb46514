#include "obfdetect/featurizer.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>

namespace obfdetect::feat {

namespace {

bool is_token_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

}  // namespace

std::uint64_t fnv1a(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<std::string_view> tokenize(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_token_char(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && is_token_char(text[i])) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::ptrdiff_t Vocabulary::find(std::string_view token) const {
  auto it = index.find(std::string(token));
  return it == index.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  Vocabulary v;
  v.tokens = std::move(tokens);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < v.tokens.size(); ++i) {
    v.index.emplace(v.tokens[i], i);
    h = fnv1a(v.tokens[i], h);
    h = fnv1a("\n", h);
  }
  v.fingerprint = h;
  return v;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens) out += t + "\n";
  return out;
}

Vocabulary Vocabulary::deserialize(std::string_view text) {
  std::vector<std::string> toks;
  for (auto t : tokenize(text)) toks.emplace_back(t);
  return from_tokens(std::move(toks));
}

Vocabulary fit_vocabulary(std::span<const std::string> docs) {
  std::set<std::string_view> seen;
  for (const auto& d : docs) {
    for (auto t : tokenize(d)) seen.insert(t);
  }
  if (seen.empty()) throw EmptyCorpus("cannot fit a vocabulary on an empty corpus");
  return Vocabulary::from_tokens({seen.begin(), seen.end()});
}

namespace {

double transform_into(std::string_view doc, const Vocabulary& vocab, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const auto toks = tokenize(doc);
  if (toks.empty()) return 0.0;
  std::size_t oov = 0;
  std::vector<std::size_t> counts(vocab.size(), 0);
  std::string key;
  for (auto t : toks) {
    key.assign(t);
    auto it = vocab.index.find(key);
    if (it == vocab.index.end()) {
      ++oov;
    } else {
      ++counts[it->second];
    }
  }
  const double total = static_cast<double>(toks.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i]) out[i] = static_cast<double>(counts[i]) / total;
  }
  return static_cast<double>(oov) / total;
}

}  // namespace

FeatureVector transform(std::string_view doc, const Vocabulary& vocab) {
  FeatureVector fv;
  fv.weights.assign(vocab.size(), 0.0);
  fv.oov_rate = transform_into(doc, vocab, fv.weights);
  return fv;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> idx) const {
  FeatureMatrix m(idx.size(), cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols), cols,
                m.data.begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  return m;
}

TransformResult transform_all(std::span<const std::string> docs, const Vocabulary& vocab) {
  TransformResult r;
  r.X = FeatureMatrix(docs.size(), vocab.size());
  double oov = 0.0;
  for (std::size_t i = 0; i < docs.size(); ++i) oov += transform_into(docs[i], vocab, r.X.row(i));
  r.mean_oov_rate = docs.empty() ? 0.0 : oov / static_cast<double>(docs.size());
  return r;
}

TokenCounts count_tokens(std::string_view doc) {
  std::map<std::string_view, std::uint32_t> m;
  TokenCounts tc;
  for (auto t : tokenize(doc)) {
    ++m[t];
    ++tc.total;
  }
  tc.counts.reserve(m.size());
  for (const auto& [k, v] : m) tc.counts.emplace_back(std::string(k), v);
  return tc;
}

Vocabulary fit_vocabulary(std::span<const TokenCounts> docs) {
  std::set<std::string_view> seen;
  for (const auto& d : docs) {
    for (const auto& [t, n] : d.counts) seen.insert(t);
  }
  if (seen.empty()) throw EmptyCorpus("cannot fit a vocabulary on an empty corpus");
  return Vocabulary::from_tokens({seen.begin(), seen.end()});
}

double transform_into(const TokenCounts& doc, const Vocabulary& vocab, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (doc.total == 0) return 0.0;
  const double total = static_cast<double>(doc.total);
  std::size_t oov = 0;
  for (const auto& [t, n] : doc.counts) {
    auto it = vocab.index.find(t);
    if (it == vocab.index.end()) {
      oov += n;
    } else {
      out[it->second] = static_cast<double>(n) / total;
    }
  }
  return static_cast<double>(oov) / total;
}

FeatureVector transform(const TokenCounts& doc, const Vocabulary& vocab) {
  FeatureVector fv;
  fv.weights.assign(vocab.size(), 0.0);
  fv.oov_rate = transform_into(doc, vocab, fv.weights);
  return fv;
}

std::string matrix_to_csv(const FeatureMatrix& X, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t j = 0; j < vocab.size(); ++j) {
    if (j) out += ',';
    out += vocab.tokens[j];
  }
  out += '\n';
  char buf[32];
  for (std::size_t i = 0; i < X.rows; ++i) {
    for (std::size_t j = 0; j < X.cols; ++j) {
      if (j) out += ',';
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, X(i, j));
      out.append(buf, p);
    }
    out += '\n';
  }
  return out;
}

}  // namespace obfdetect::feat
