#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "obfdetect/learner.hpp"

using namespace obfdetect;
using namespace obfdetect::learn;
using feat::FeatureMatrix;

namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> r(n);
  std::iota(r.begin(), r.end(), 0);
  return r;
}

FeatureMatrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, int levels) {
  FeatureMatrix X(rows, cols);
  for (auto& v : X.data) v = static_cast<double>(rng() % levels) / levels;
  return X;
}

// Brute force over every (feature, midpoint): weighted Gini summed over outputs.
Split oracle_split(const FeatureMatrix& X, const Targets& t, int min_leaf) {
  Split best;
  double best_imp = 1e300;
  const auto rows = all_rows(X.rows);
  for (std::size_t f = 0; f < X.cols; ++f) {
    std::vector<double> vals;
    for (auto r : rows) vals.push_back(X(r, f));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
      const double thr = vals[i] + (vals[i + 1] - vals[i]) / 2;
      std::vector<std::size_t> l, r;
      for (auto row : rows) (X(row, f) <= thr ? l : r).push_back(row);
      if (static_cast<int>(l.size()) < min_leaf || static_cast<int>(r.size()) < min_leaf) continue;
      const double imp = (l.size() * gini(t, l) + r.size() * gini(t, r)) / rows.size();
      if (imp < best_imp - 1e-9) {
        best_imp = imp;
        best = {static_cast<int>(f), thr, imp};
      }
    }
  }
  return best;
}

// Two Gaussian-free blobs: class = x0 > 0.5, with a second noisy feature.
std::pair<FeatureMatrix, std::vector<int>> blobs(std::mt19937_64& rng, std::size_t n) {
  FeatureMatrix X(n, 4);
  std::vector<int> y(n);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    X.data[i * 4 + 0] = y[i] ? 0.6 + 0.4 * u(rng) : 0.4 * u(rng);
    X.data[i * 4 + 1] = u(rng);
    X.data[i * 4 + 2] = y[i] ? 0.55 + 0.45 * u(rng) : 0.45 * u(rng);
    X.data[i * 4 + 3] = u(rng);
  }
  return {X, y};
}

TreeModel leaf_tree(std::vector<std::uint32_t> counts) {
  TreeModel t;
  t.n_classes = {static_cast<int>(counts.size())};
  t.n_features = 1;
  t.nodes.push_back(TreeNode{});
  t.hist = std::move(counts);
  return t;
}

ForestModel forest_of(std::vector<TreeModel> trees) {
  ForestModel f;
  f.n_classes = trees.at(0).n_classes;
  f.n_features = 1;
  f.trees = std::move(trees);
  return f;
}

double f1(int tp, int fp, int fn) { return tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn); }

}  // namespace

TEST(Tree, PerfectOneDimensionalSplit) {
  FeatureMatrix X(4, 1);
  X.data = {0, 0, 1, 1};
  const Targets t = Targets::single({0, 0, 1, 1}, 2);
  const auto rows = all_rows(4);
  const TreeModel m = train_tree(X, t, rows, {});
  ASSERT_EQ(m.nodes.size(), 3u);
  EXPECT_EQ(m.nodes[0].feature, 0);
  EXPECT_DOUBLE_EQ(m.nodes[0].threshold, 0.5);
  const std::size_t l[] = {0, 1}, r[] = {2, 3};
  EXPECT_EQ(gini(t, l), 0.0);
  EXPECT_EQ(gini(t, r), 0.0);
  const double x0[] = {0.2}, x1[] = {0.9};
  EXPECT_EQ(m.predict(x0)[0], 0);
  EXPECT_EQ(m.predict(x1)[0], 1);
}

TEST(Tree, SingleClassIsLeaf) {
  std::mt19937_64 rng(1);
  const auto X = random_matrix(rng, 10, 3, 5);
  const Targets t = Targets::single(std::vector<int>(10, 2), 3);
  const auto rows = all_rows(10);
  const TreeModel m = train_tree(X, t, rows, {});
  ASSERT_EQ(m.nodes.size(), 1u);
  EXPECT_EQ(m.hist, (std::vector<std::uint32_t>{0, 0, 10}));
  EXPECT_THROW(train_tree(X, t, std::span<const std::size_t>{}, {}), EmptyDataset);
}

TEST(Tree, RootSplitMatchesBruteForce) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = trial < 30 ? 20 : 20 + rng() % 181;
    const std::size_t d = 1 + rng() % 20;
    const auto X = random_matrix(rng, n, d, 2 + static_cast<int>(rng() % 12));
    Targets t;
    if (trial % 3 == 2) {  // multi-output
      t.n_outputs = 3;
      t.n_classes = {2, 2, 2};
      for (std::size_t i = 0; i < n * 3; ++i) t.y.push_back(static_cast<int>(rng() % 2));
    } else {
      const int k = 2 + static_cast<int>(rng() % 4);
      std::vector<int> y(n);
      for (auto& v : y) v = static_cast<int>(rng() % k);
      t = Targets::single(y, k);
    }
    TreeParams p;
    p.seed = rng();
    p.min_leaf = 1 + static_cast<int>(trial % 3);
    const auto rows = all_rows(n);
    const Split got = best_root_split(X, t, rows, p);
    const Split want = oracle_split(X, t, p.min_leaf);
    ASSERT_EQ(got.feature, want.feature) << "trial " << trial;
    EXPECT_DOUBLE_EQ(got.threshold, want.threshold);
    EXPECT_NEAR(got.impurity, want.impurity, 1e-12);
  }
}

TEST(Tree, ChildImpurityNeverExceedsParent) {
  std::mt19937_64 rng(3);
  const auto X = random_matrix(rng, 150, 6, 7);
  std::vector<int> y(150);
  for (auto& v : y) v = static_cast<int>(rng() % 3);
  const Targets t = Targets::single(y, 3);
  const auto rows = all_rows(150);
  for (auto mode : {ThresholdMode::Exhaustive, ThresholdMode::Random}) {
    TreeParams p;
    p.threshold_mode = mode;
    p.seed = 4;
    p.feature_subsample = 2;
    const TreeModel m = train_tree(X, t, rows, p);
    std::vector<std::vector<std::size_t>> at(m.nodes.size());
    at[0] = rows;
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
      const auto& nd = m.nodes[i];
      if (nd.feature < 0) {
        EXPECT_FALSE(at[i].empty());
        std::uint32_t sum = 0;
        for (int c = 0; c < 3; ++c) sum += m.hist[nd.hist + c];
        EXPECT_EQ(sum, at[i].size());
        continue;
      }
      EXPECT_TRUE(std::isfinite(nd.threshold));
      for (auto r : at[i]) at[X(r, nd.feature) <= nd.threshold ? nd.left : nd.right].push_back(r);
      const auto& L = at[nd.left];
      const auto& R = at[nd.right];
      const double child = (L.size() * gini(t, L) + R.size() * gini(t, R)) / at[i].size();
      EXPECT_LE(child, gini(t, at[i]) + 1e-12);
    }
    // fully grown on distinct rows: training data is fit exactly unless duplicates conflict
    int errors = 0;
    for (auto r : rows) errors += m.predict(X.row(r))[0] != y[r];
    EXPECT_LT(errors, 10);
  }
}

TEST(Tree, DepthCapAndDimensionCheck) {
  std::mt19937_64 rng(5);
  const auto X = random_matrix(rng, 80, 5, 9);
  std::vector<int> y(80);
  for (auto& v : y) v = static_cast<int>(rng() % 2);
  TreeParams p;
  p.max_depth = 3;
  const auto rows = all_rows(80);
  const TreeModel m = train_tree(X, Targets::single(y, 2), rows, p);
  EXPECT_LE(m.depth(), 3);
  const double bad[] = {1, 2};
  EXPECT_THROW(m.predict(bad), DimensionMismatch);
}

TEST(Forest, SingleTreeEqualsTreeOnBootstrap) {
  std::mt19937_64 rng(6);
  const auto X = random_matrix(rng, 60, 9, 5);
  std::vector<int> y(60);
  for (auto& v : y) v = static_cast<int>(rng() % 3);
  const Targets t = Targets::single(y, 3);
  const auto rows = all_rows(60);
  ForestParams fp;
  fp.n_trees = 1;
  fp.seed = 77;
  const ForestModel f = train_forest(X, t, rows, fp);
  const TreeJob job = forest_tree_job(fp, rows, X.cols, 0);
  EXPECT_EQ(job.params.feature_subsample, 3u);
  EXPECT_EQ(job.params.threshold_mode, ThresholdMode::Exhaustive);
  const TreeModel tree = train_tree(X, t, job.rows, job.params);
  EXPECT_EQ(f.trees[0].hist, tree.hist);
  ASSERT_EQ(f.trees[0].nodes.size(), tree.nodes.size());
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    EXPECT_EQ(f.trees[0].nodes[i].feature, tree.nodes[i].feature);
    EXPECT_EQ(f.trees[0].nodes[i].threshold, tree.nodes[i].threshold);
  }
  // bootstrap has replacement
  std::set<std::size_t> distinct(job.rows.begin(), job.rows.end());
  EXPECT_LT(distinct.size(), job.rows.size());
}

TEST(Forest, ExtraTreesUseAllRowsAndRandomThresholds) {
  ForestParams fp;
  fp.kind = ForestKind::ExtraTrees;
  const auto rows = all_rows(30);
  const TreeJob job = forest_tree_job(fp, rows, 16, 0);
  EXPECT_EQ(job.rows, rows);
  EXPECT_EQ(job.params.threshold_mode, ThresholdMode::Random);
  EXPECT_EQ(job.params.feature_subsample, 4u);
}

TEST(Forest, DeterministicAndSeparable) {
  std::mt19937_64 rng(8);
  auto [X, y] = blobs(rng, 120);
  const Targets t = Targets::single(y, 2);
  const auto rows = all_rows(X.rows);
  for (auto kind : {ForestKind::RandomForest, ForestKind::ExtraTrees}) {
    ForestParams fp;
    fp.kind = kind;
    fp.n_trees = 50;
    fp.seed = 3;
    const ForestModel a = train_forest(X, t, rows, fp);
    const ForestModel b = train_forest(X, t, rows, fp);
    int correct = 0;
    auto [P, py] = blobs(rng, 40);
    for (std::size_t i = 0; i < P.rows; ++i) {
      EXPECT_EQ(predict_forest(a, P.row(i)).shares, predict_forest(b, P.row(i)).shares);
    }
    for (std::size_t i = 0; i < X.rows; ++i) correct += predict_forest(a, X.row(i)).classes[0] == y[i];
    EXPECT_EQ(correct, static_cast<int>(X.rows)) << forest_kind_name(kind);
  }
}

TEST(Forest, MajorityAndTieRule) {
  const auto A = leaf_tree({3, 0}), B = leaf_tree({0, 3});
  const double x[] = {0.0};
  auto p = predict_forest(forest_of({A, A, B}), x);
  EXPECT_EQ(p.classes[0], 0);
  EXPECT_NEAR(p.shares[0][0], 2.0 / 3.0, 1e-15);
  EXPECT_EQ(predict_forest(forest_of({A, B}), x).classes[0], 0);
  EXPECT_EQ(predict_forest(forest_of({B, A}), x).classes[0], 0);
  EXPECT_EQ(predict_forest(forest_of({B}), x).classes[0], 1);
  const double bad[] = {0.0, 1.0};
  EXPECT_THROW(predict_forest(forest_of({A}), bad), DimensionMismatch);
}

TEST(Voting, HardVoteWithLowestIndexTies) {
  const auto A = forest_of({leaf_tree({1, 0, 0})});
  const auto B = forest_of({leaf_tree({0, 1, 0})});
  const auto C = forest_of({leaf_tree({0, 0, 1})});
  const double x[] = {0.0};
  EXPECT_EQ(predict_vote({{A, A}}, x)[0], 0);
  EXPECT_EQ(predict_vote({{B, A}}, x)[0], 0);
  EXPECT_EQ(predict_vote({{C, B}}, x)[0], 1);
  EXPECT_EQ(predict_vote({{A, B, B}}, x)[0], 1);
  EXPECT_EQ(majority_vote(std::vector<int>{2, 1, 2, 1}, 3), 1);
}

TEST(Voting, OutputIsAlwaysAMemberPrediction) {
  std::mt19937_64 rng(9);
  const auto X = random_matrix(rng, 90, 8, 6);
  std::vector<int> y(90);
  for (auto& v : y) v = static_cast<int>(rng() % 4);
  EnsembleParams ep;
  ep.n_trees = 5;
  ep.seed = 1;
  const auto rows = all_rows(90);
  const VotingEnsemble e = train_ensemble(X, Targets::single(y, 4), rows, ep);
  ASSERT_EQ(e.members.size(), 2u);
  EXPECT_EQ(e.members[0].kind, ForestKind::RandomForest);
  EXPECT_EQ(e.members[1].kind, ForestKind::ExtraTrees);
  const auto P = random_matrix(rng, 50, 8, 6);
  for (std::size_t i = 0; i < P.rows; ++i) {
    const int v = predict_vote(e, P.row(i))[0];
    EXPECT_TRUE(v == predict_forest(e.members[0], P.row(i)).classes[0] ||
                v == predict_forest(e.members[1], P.row(i)).classes[0]);
  }
}

namespace {

using TL = TransformLabel;

// Three independent labels, each decided by its own feature.
struct MultiData {
  FeatureMatrix X;
  std::vector<LabelSet> sets;
};

MultiData independent_labels(std::mt19937_64& rng, std::size_t n) {
  const TL labels[] = {TL::Flat, TL::Virt, TL::EncA};
  MultiData d{FeatureMatrix(n, 6), {}};
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    LabelSet s;
    for (int k = 0; k < 3; ++k) {
      const bool on = u(rng) < 0.5;
      if (on) s.insert(labels[k]);
      d.X.data[i * 6 + k] = on ? 0.5 + 0.5 * u(rng) : 0.55 * u(rng);
      d.X.data[i * 6 + 3 + k] = u(rng);
    }
    d.sets.push_back(s.with_clean_rule());
  }
  return d;
}

}  // namespace

TEST(Chain, ShapeOrderAndCleanMapping) {
  std::mt19937_64 rng(10);
  auto d = independent_labels(rng, 80);
  const TL labels[] = {TL::Flat, TL::Virt, TL::EncA};
  MultiLabelParams p;
  p.ensemble.n_trees = 25;
  p.ensemble.seed = 21;
  const auto rows = all_rows(80);
  const auto m = train_multilabel(d.X, d.sets, labels, rows, p);
  ASSERT_EQ(m.links.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(m.links[i].members[0].n_features, 6 + i);
  const auto again = train_multilabel(d.X, d.sets, labels, rows, p);
  EXPECT_EQ(again.order, m.order);
  std::vector<TL> sorted = m.order;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<TL>{TL::EncA, TL::Flat, TL::Virt}));

  const double none[] = {0.01, 0.01, 0.01, 0.5, 0.5, 0.5};
  EXPECT_EQ(predict_multilabel(m, none), LabelSet{TL::Clean});
  const double both[] = {0.95, 0.95, 0.01, 0.5, 0.5, 0.5};
  EXPECT_EQ(predict_multilabel(m, both), (LabelSet{TL::Flat, TL::Virt}));
  const double bad[] = {0.5};
  EXPECT_THROW(predict_multilabel(m, bad), DimensionMismatch);
}

TEST(Chain, RestrictedChainEqualsBinaryRelevance) {
  std::mt19937_64 rng(11);
  auto d = independent_labels(rng, 100);
  const TL labels[] = {TL::Flat, TL::Virt, TL::EncA};
  MultiLabelParams chain;
  chain.ensemble.n_trees = 7;
  chain.ensemble.seed = 5;
  chain.restrict_to_base = true;
  MultiLabelParams br = chain;
  br.kind = MultiLabelKind::BinaryRelevance;
  const auto rows = all_rows(100);
  const auto mc = train_multilabel(d.X, d.sets, labels, rows, chain);
  const auto mb = train_multilabel(d.X, d.sets, labels, rows, br);
  auto probe = independent_labels(rng, 60);
  for (std::size_t i = 0; i < probe.X.rows; ++i) {
    EXPECT_EQ(predict_multilabel(mc, probe.X.row(i)), predict_multilabel(mb, probe.X.row(i)));
  }
}

TEST(Chain, PerLabelF1NotWorseThanBinaryRelevance) {
  std::mt19937_64 rng(12);
  auto train = independent_labels(rng, 200);
  auto test = independent_labels(rng, 200);
  const TL labels[] = {TL::Flat, TL::Virt, TL::EncA};
  MultiLabelParams chain;
  chain.ensemble.n_trees = 25;
  chain.ensemble.seed = 8;
  MultiLabelParams br = chain;
  br.kind = MultiLabelKind::BinaryRelevance;
  const auto rows = all_rows(200);
  const auto mc = train_multilabel(train.X, train.sets, labels, rows, chain);
  const auto mb = train_multilabel(train.X, train.sets, labels, rows, br);
  for (auto l : labels) {
    int tp[2] = {}, fp[2] = {}, fn[2] = {};
    for (std::size_t i = 0; i < test.X.rows; ++i) {
      const bool truth = test.sets[i].contains(l);
      const bool pred[2] = {predict_multilabel(mc, test.X.row(i)).contains(l),
                            predict_multilabel(mb, test.X.row(i)).contains(l)};
      for (int m = 0; m < 2; ++m) {
        tp[m] += truth && pred[m];
        fp[m] += !truth && pred[m];
        fn[m] += truth && !pred[m];
      }
    }
    EXPECT_GE(f1(tp[0], fp[0], fn[0]), f1(tp[1], fp[1], fn[1]) - 0.02) << label_name(l);
    EXPECT_GT(f1(tp[0], fp[0], fn[0]), 0.9) << label_name(l);
  }
}

TEST(Chain, SingleLabelDegenerate) {
  std::mt19937_64 rng(13);
  auto d = independent_labels(rng, 60);
  const TL one[] = {TL::Flat};
  MultiLabelParams p;
  p.ensemble.n_trees = 5;
  const auto rows = all_rows(60);
  const auto m = train_multilabel(d.X, d.sets, one, rows, p);
  ASSERT_EQ(m.links.size(), 1u);
  for (std::size_t i = 0; i < d.X.rows; ++i) {
    const bool flat = predict_multilabel(m, d.X.row(i)).contains(TL::Flat);
    EXPECT_EQ(flat, predict_vote(m.links[0], d.X.row(i))[0] == 1);
  }
}

TEST(MultiOutput, LearnsIndependentLabels) {
  std::mt19937_64 rng(14);
  auto train = independent_labels(rng, 150);
  auto test = independent_labels(rng, 100);
  const TL labels[] = {TL::Flat, TL::Virt, TL::EncA};
  MultiLabelParams p;
  p.kind = MultiLabelKind::MultiOutput;
  p.ensemble.n_trees = 25;
  const auto rows = all_rows(150);
  const auto m = train_multilabel(train.X, train.sets, labels, rows, p);
  ASSERT_EQ(m.links.size(), 1u);
  EXPECT_EQ(m.links[0].members[0].n_classes.size(), 3u);
  int exact = 0;
  for (std::size_t i = 0; i < test.X.rows; ++i) exact += predict_multilabel(m, test.X.row(i)) == test.sets[i];
  EXPECT_GT(exact, 80);
}

TEST(Multiclass, RejectsSingleClass) {
  std::mt19937_64 rng(15);
  const auto X = random_matrix(rng, 20, 3, 4);
  const std::vector<int> y(20, 1);
  const auto rows = all_rows(20);
  EXPECT_THROW(train_multiclass(X, y, {"a", "b"}, rows, {}), DataError);
}

TEST(ModelIo, RoundTripAndFingerprint) {
  std::mt19937_64 rng(16);
  auto d = independent_labels(rng, 70);
  const TL labels[] = {TL::Flat, TL::Virt, TL::EncA};
  MultiLabelParams p;
  p.ensemble.n_trees = 4;
  const auto rows = all_rows(70);
  ModelFile mf;
  mf.task = "multilabel";
  mf.vocab_fingerprint = 0xabcdef0123456789ull;
  mf.multilabel = train_multilabel(d.X, d.sets, labels, rows, p);
  const std::string text = serialize_model(mf);
  const ModelFile back = deserialize_model(text, mf.vocab_fingerprint);
  EXPECT_EQ(serialize_model(back), text);
  auto probe = independent_labels(rng, 30);
  for (std::size_t i = 0; i < probe.X.rows; ++i) {
    EXPECT_EQ(predict_multilabel(back.multilabel, probe.X.row(i)),
              predict_multilabel(mf.multilabel, probe.X.row(i)));
  }
  EXPECT_THROW(deserialize_model(text, 1), ModelFormatError);
  EXPECT_THROW(deserialize_model(text.substr(0, text.size() / 2)), ModelFormatError);
  std::string bad = text;
  bad.replace(0, 17, "obfdetect-model 9");
  EXPECT_THROW(deserialize_model(bad), ModelFormatError);

  ModelFile mc;
  mc.task = "multiclass";
  std::vector<int> y(70);
  for (std::size_t i = 0; i < 70; ++i) y[i] = d.sets[i].contains(TL::Flat) ? 1 : 0;
  mc.multiclass = train_multiclass(d.X, y, {"switch_based", "ifnest_based"}, rows, p.ensemble);
  const ModelFile mc2 = deserialize_model(serialize_model(mc));
  EXPECT_EQ(mc2.multiclass.classes, mc.multiclass.classes);
  for (std::size_t i = 0; i < probe.X.rows; ++i) {
    EXPECT_EQ(predict_multiclass(mc2.multiclass, probe.X.row(i)), predict_multiclass(mc.multiclass, probe.X.row(i)));
  }
}
