#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "obfdetect/featurizer.hpp"

using namespace obfdetect;
using namespace obfdetect::feat;

namespace {

std::vector<std::string> strings(std::vector<std::string_view> v) { return {v.begin(), v.end()}; }

// Independent tf oracle: whitespace/punctuation split by hand, counts in a std::map.
std::map<std::string, double> tf_oracle(const std::string& doc) {
  std::map<std::string, double> counts;
  std::string cur;
  double total = 0;
  for (char ch : doc + " ") {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur += ch;
    } else if (!cur.empty()) {
      counts[cur] += 1;
      total += 1;
      cur.clear();
    }
  }
  for (auto& [k, v] : counts) v /= total;
  return counts;
}

}  // namespace

TEST(Tokenize, AlphanumericRuns) {
  EXPECT_EQ(strings(tokenize("REG3 = ExprOp(op+, REG0, v2)")),
            (std::vector<std::string>{"REG3", "ExprOp", "op", "REG0", "v2"}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_EQ(strings(tokenize("v2,v2")), (std::vector<std::string>{"v2", "v2"}));
  EXPECT_EQ(strings(tokenize("--a__b\n\tc9")), (std::vector<std::string>{"a", "b", "c9"}));
}

TEST(Vocabulary, SortedUnion) {
  const std::vector<std::string> docs = {"a b", "b c"};
  const auto v = fit_vocabulary(docs);
  EXPECT_EQ(v.tokens, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(v.find("b"), 1);
  EXPECT_EQ(v.find("zz"), -1);
  const std::vector<std::string> one = {"x x x"};
  EXPECT_EQ(fit_vocabulary(one).tokens, std::vector<std::string>{"x"});
  EXPECT_EQ(fit_vocabulary(docs).fingerprint, v.fingerprint);
  const std::vector<std::string> other = {"a b", "b d"};
  EXPECT_NE(fit_vocabulary(other).fingerprint, v.fingerprint);
}

TEST(Vocabulary, EmptyCorpusThrows) {
  const std::vector<std::string> none;
  EXPECT_THROW(fit_vocabulary(none), EmptyCorpus);
  const std::vector<std::string> blank = {"", " + "};
  EXPECT_THROW(fit_vocabulary(blank), EmptyCorpus);
}

TEST(Vocabulary, SerializeRoundTrip) {
  const std::vector<std::string> docs = {"REG0 = v1", "IRDst = ExprOp(opret, REG0)"};
  const auto v = fit_vocabulary(docs);
  const auto back = Vocabulary::deserialize(v.serialize());
  EXPECT_EQ(back.tokens, v.tokens);
  EXPECT_EQ(back.fingerprint, v.fingerprint);
}

TEST(Vocabulary, MonotoneUnderMoreDocuments) {
  std::vector<std::string> docs = {"a b c", "c d"};
  const auto small = fit_vocabulary(docs);
  docs.push_back("e a");
  const auto big = fit_vocabulary(docs);
  for (const auto& t : small.tokens) EXPECT_GE(big.find(t), 0);
}

TEST(Transform, TermFrequency) {
  const auto v = Vocabulary::from_tokens({"REG0", "op", "v1"});
  const auto fv = transform("REG0 op REG0 v1", v);
  ASSERT_EQ(fv.weights.size(), 3u);
  EXPECT_DOUBLE_EQ(fv.weights[0], 0.5);
  EXPECT_DOUBLE_EQ(fv.weights[1], 0.25);
  EXPECT_DOUBLE_EQ(fv.weights[2], 0.25);
  EXPECT_DOUBLE_EQ(fv.oov_rate, 0.0);
}

TEST(Transform, OutOfVocabulary) {
  const auto v = Vocabulary::from_tokens({"a", "b"});
  const auto all_oov = transform("x y z", v);
  EXPECT_EQ(all_oov.weights, (std::vector<double>{0.0, 0.0}));
  EXPECT_DOUBLE_EQ(all_oov.oov_rate, 1.0);
  const auto empty = transform("", v);
  EXPECT_EQ(empty.weights, (std::vector<double>{0.0, 0.0}));
  // OOV tokens still count towards the document length
  const auto half = transform("a x", v);
  EXPECT_DOUBLE_EQ(half.weights[0], 0.5);
  EXPECT_DOUBLE_EQ(half.oov_rate, 0.5);
}

TEST(Transform, MatchesOracleAndIsOrderInvariant) {
  std::mt19937_64 rng(17);
  const std::vector<std::string> words = {"REG0", "REG1", "v0", "opadd", "ExprOp", "IRDst", "blocksep", "v12"};
  std::vector<std::string> docs;
  for (int d = 0; d < 50; ++d) {
    std::string doc;
    const int lines = 1 + static_cast<int>(rng() % 20);
    for (int l = 0; l < lines; ++l) {
      doc += words[rng() % words.size()] + " = ExprOp(" + words[rng() % words.size()] + ", " +
             words[rng() % words.size()] + ")\n";
    }
    docs.push_back(doc);
  }
  const auto v = fit_vocabulary(docs);
  for (const auto& doc : docs) {
    const auto fv = transform(doc, v);
    const auto oracle = tf_oracle(doc);
    for (std::size_t j = 0; j < v.size(); ++j) {
      const auto it = oracle.find(v.tokens[j]);
      EXPECT_NEAR(fv.weights[j], it == oracle.end() ? 0.0 : it->second, 1e-12);
    }
    EXPECT_NEAR(std::accumulate(fv.weights.begin(), fv.weights.end(), 0.0), 1.0, 1e-12);

    std::vector<std::string> lines;
    std::string cur;
    for (char ch : doc) {
      if (ch == '\n') {
        lines.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    std::reverse(lines.begin(), lines.end());
    std::string shuffled;
    for (const auto& l : lines) shuffled += l + "\n";
    EXPECT_EQ(transform(shuffled, v).weights, fv.weights);
  }
}

TEST(FeatureMatrix, TransformAllAndCsv) {
  const std::vector<std::string> docs = {"a b b", "c", "a q"};
  const auto v = Vocabulary::from_tokens({"a", "b", "c"});
  const auto r = transform_all(docs, v);
  ASSERT_EQ(r.X.rows, 3u);
  ASSERT_EQ(r.X.cols, 3u);
  EXPECT_NEAR(r.X(0, 1), 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(r.X(1, 2), 1.0);
  EXPECT_NEAR(r.mean_oov_rate, 0.5 / 3.0, 1e-15);
  const std::size_t pick[] = {2, 0};
  const auto sub = r.X.select_rows(pick);
  EXPECT_EQ(sub.rows, 2u);
  EXPECT_DOUBLE_EQ(sub(0, 0), 0.5);
  EXPECT_EQ(matrix_to_csv(sub, v), "a,b,c\n0.5,0,0\n0.3333333333333333,0.6666666666666666,0\n");
}

TEST(Fnv1a, KnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ull);
}

TEST(TokenCounts, AgreesWithTextTransform) {
  const std::vector<std::string> docs = {"REG0 = ExprOp(opadd, REG0, v1)\nIRDst = v2", "REG0 = v1 v1 v9", ""};
  std::vector<TokenCounts> counts;
  for (const auto& d : docs) counts.push_back(count_tokens(d));
  const auto v = fit_vocabulary(std::span<const std::string>(docs.data(), 2));
  EXPECT_EQ(fit_vocabulary(std::span<const TokenCounts>(counts.data(), 2)).tokens, v.tokens);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto a = transform(docs[i], v), b = transform(counts[i], v);
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(a.oov_rate, b.oov_rate);
  }
  EXPECT_EQ(counts[1].total, 4u);
}
