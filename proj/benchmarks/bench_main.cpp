#include <benchmark/benchmark.h>

#include <numeric>

#include "obfdetect/corpus.hpp"
#include "obfdetect/featurizer.hpp"
#include "obfdetect/learner.hpp"
#include "obfdetect/normalizer.hpp"
#include "obfdetect/rawdata.hpp"
#include "obfdetect/symexec.hpp"

using namespace obfdetect;

namespace {

const std::vector<corpus::Sample>& samples() {
  static const auto s = [] {
    corpus::CorpusConfig cfg;
    cfg.recipes = corpus::stock_recipes(corpus::Profile::TigressLike);
    cfg.per_cell = 1;
    return corpus::generate_corpus(cfg);
  }();
  return s;
}

const std::vector<std::string>& texts() {
  static const auto t = [] {
    std::vector<std::string> out;
    for (const auto& d : norm::to_raw_documents(samples())) out.push_back(d.text);
    return out;
  }();
  return t;
}

void BM_GenerateCell(benchmark::State& state) {
  corpus::CorpusConfig cfg;
  cfg.families = {"crc_mix", "gcd"};
  cfg.recipes = {corpus::StackRecipe::parse("Flat,AddO,EncD,EncA,EncL")};
  cfg.per_cell = 1;
  for (auto _ : state) {
    cfg.master_seed++;
    benchmark::DoNotOptimize(corpus::generate_corpus(cfg));
  }
}
BENCHMARK(BM_GenerateCell)->Unit(benchmark::kMillisecond);

void BM_SymexecNormalize(benchmark::State& state) {
  const auto& s = samples();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(norm::normalize(sym::exec_function(s[i++ % s.size()].function)));
  }
}
BENCHMARK(BM_SymexecNormalize)->Unit(benchmark::kMicrosecond);

void BM_CountTokens(benchmark::State& state) {
  const auto& t = texts();
  std::size_t i = 0, bytes = 0;
  for (auto _ : state) {
    const auto& doc = t[i++ % t.size()];
    bytes += doc.size();
    benchmark::DoNotOptimize(feat::count_tokens(doc));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(bytes));
}
BENCHMARK(BM_CountTokens)->Unit(benchmark::kMicrosecond);

void BM_TrainForest(benchmark::State& state) {
  const auto& t = texts();
  const auto vocab = feat::fit_vocabulary(t);
  const auto X = feat::transform_all(t, vocab).X;
  std::vector<int> y;
  for (const auto& s : samples()) y.push_back(s.labels.contains(TransformLabel::Flat) ? 1 : 0);
  std::vector<std::size_t> rows(X.rows);
  std::iota(rows.begin(), rows.end(), 0);
  learn::ForestParams p;
  p.n_trees = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(learn::train_forest(X, learn::Targets::single(y, 2), rows, p));
  }
}
BENCHMARK(BM_TrainForest)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
