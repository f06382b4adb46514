#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "obfdetect/eval.hpp"

using namespace obfdetect;
using namespace obfdetect::eval;

namespace {

ModelSpec small_spec(std::vector<learn::ForestKind> members, learn::MultiLabelKind kind = learn::MultiLabelKind::Chain) {
  ModelSpec s;
  s.name = "m";
  s.kind = kind;
  s.ensemble.members = std::move(members);
  s.ensemble.n_trees = 15;
  s.ensemble.seed = 3;
  return s;
}

norm::RawDocument doc(std::string id, std::string text, LabelSet labels, std::string tag) {
  norm::RawDocument d;
  d.id = std::move(id);
  d.text = std::move(text);
  d.labels = labels;
  d.functionality_tag = std::move(tag);
  return d;
}

// Two labels; each one is announced by a dedicated token, plus shared noise.
std::vector<norm::RawDocument> multilabel_docs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<norm::RawDocument> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool a = rng() & 1, f = rng() & 1;
    std::string text = "ret ( v" + std::to_string(rng() % 5) + " )";
    LabelSet s;
    if (a) {
      text += " enc enc";
      s.insert(TransformLabel::EncA);
    }
    if (f) {
      text += " state";
      s.insert(TransformLabel::Flat);
    }
    out.push_back(doc("d" + std::to_string(i), text, s.with_clean_rule(), "tag" + std::to_string(i % 12)));
  }
  return out;
}

}  // namespace

TEST(Folds, StandardSizesAndStratification) {
  std::vector<std::string> strata, groups;
  for (int i = 0; i < 20; ++i) {
    strata.push_back(i % 2 ? "A" : "B");
    groups.push_back("g");
  }
  const auto plan = make_folds(strata, groups, FoldMode::Standard, 10, 7);
  for (int f = 0; f < 10; ++f) {
    const auto test = plan.test_rows(f);
    ASSERT_EQ(test.size(), 2u);
    EXPECT_NE(strata[test[0]], strata[test[1]]);
    EXPECT_EQ(plan.train_rows(f).size(), 18u);
  }
}

TEST(Folds, GroupedKeepsTagsTogether) {
  std::vector<std::string> strata, groups;
  for (int i = 0; i < 60; ++i) {
    strata.push_back("s");
    groups.push_back("t" + std::to_string((i * 7) % 13));
  }
  const auto plan = make_folds(strata, groups, FoldMode::Grouped, 10, 1);
  std::map<std::string, std::set<int>> folds_of;
  for (std::size_t i = 0; i < groups.size(); ++i) folds_of[groups[i]].insert(plan.assignment[i]);
  for (const auto& [tag, fs] : folds_of) EXPECT_EQ(fs.size(), 1u) << tag;
  for (int f = 0; f < 10; ++f) EXPECT_FALSE(plan.test_rows(f).empty());
}

TEST(Folds, Errors) {
  std::vector<std::string> strata(20, "s"), groups;
  for (int i = 0; i < 20; ++i) groups.push_back("t" + std::to_string(i % 5));
  EXPECT_THROW(make_folds(strata, groups, FoldMode::Grouped, 10, 1), TooFewGroups);
  EXPECT_THROW(make_folds(strata, groups, FoldMode::Standard, 1, 1), DataError);
  EXPECT_THROW(make_folds(std::vector<std::string>(3, "s"), groups, FoldMode::Standard, 10, 1), DataError);
}

TEST(Folds, Deterministic) {
  std::vector<std::string> strata;
  for (int i = 0; i < 100; ++i) strata.push_back(std::to_string(i % 3));
  const auto a = make_folds(strata, strata, FoldMode::Standard, 10, 5);
  const auto b = make_folds(strata, strata, FoldMode::Standard, 10, 5);
  const auto c = make_folds(strata, strata, FoldMode::Standard, 10, 6);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_NE(a.assignment, c.assignment);
}

TEST(Metrics, F1Fixtures) {
  EXPECT_NEAR(compute_f1({2, 1, 1, 0}).f1, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(compute_f1({2, 1, 1, 0}).precision, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(compute_f1({0, 0, 0, 9}).f1, 0.0);
  EXPECT_EQ(compute_f1({5, 0, 0, 0}).f1, 1.0);
  EXPECT_NEAR(compute_f1({1, 0, 3, 0}).recall, 0.25, 1e-12);
}

TEST(CrossValidate, SeparableMulticlassIsPerfect) {
  std::vector<norm::RawDocument> docs;
  for (int i = 0; i < 40; ++i) {
    const bool a = i % 2;
    docs.push_back(doc("d" + std::to_string(i), a ? "alpha alpha x" : "beta x x",
                       a ? LabelSet{TransformLabel::EncA} : LabelSet{TransformLabel::Flat}, "t" + std::to_string(i)));
  }
  const auto data = single_label_data(docs);
  ASSERT_EQ(data.classes, (std::vector<std::string>{"EncA", "Flat"}));
  const auto plan = make_folds(data.strata, data.groups, FoldMode::Standard, 10, 1);
  const auto rep = cross_validate(data, small_spec({learn::ForestKind::RandomForest}), plan, "t");
  EXPECT_EQ(rep.folds.size(), 10u);
  EXPECT_DOUBLE_EQ(rep.accuracy(), 1.0);
  for (const auto& p : rep.per_class()) EXPECT_DOUBLE_EQ(p.f1, 1.0);
}

TEST(CrossValidate, RandomLabelsNearChance) {
  std::mt19937_64 rng(11);
  std::vector<norm::RawDocument> docs;
  for (int i = 0; i < 400; ++i) {
    std::string text;
    for (int t = 0; t < 8; ++t) text += "w" + std::to_string(rng() % 6) + " ";
    docs.push_back(doc("d" + std::to_string(i), text,
                       rng() & 1 ? LabelSet{TransformLabel::EncA} : LabelSet{TransformLabel::Flat}, "t"));
  }
  const auto data = single_label_data(docs);
  const auto plan = make_folds(data.strata, data.groups, FoldMode::Standard, 10, 2);
  const auto rep = cross_validate(data, small_spec({learn::ForestKind::RandomForest, learn::ForestKind::ExtraTrees}),
                                  plan, "t");
  EXPECT_GE(rep.accuracy(), 0.35);
  EXPECT_LE(rep.accuracy(), 0.65);
}

TEST(CrossValidate, MultilabelMeansFromConfusionCounts) {
  const auto docs = multilabel_docs(120, 4);
  const auto data = multilabel_data(docs);
  ASSERT_EQ(data.labels, (std::vector<TransformLabel>{TransformLabel::EncA, TransformLabel::Flat}));
  for (auto kind : {learn::MultiLabelKind::Chain, learn::MultiLabelKind::BinaryRelevance,
                    learn::MultiLabelKind::MultiOutput}) {
    const auto plan = make_folds(data.strata, data.groups, FoldMode::Grouped, 4, 9);
    const auto rep = cross_validate(data, small_spec({learn::ForestKind::RandomForest}, kind), plan, "t");
    double f1_sum = 0.0, exact_sum = 0.0, label_sum = 0.0;
    for (const auto& f : rep.folds) {
      for (const auto& c : f.per_class) EXPECT_EQ(static_cast<std::size_t>(c.tp + c.fp + c.fn + c.tn), f.n_test);
      f1_sum += compute_f1(f.per_class[0]).f1;
      exact_sum += static_cast<double>(f.exact) / f.n_test;
      std::int64_t hits = 0;
      for (const auto& c : f.per_class) hits += c.tp + c.tn;
      EXPECT_EQ(hits, f.label_hits);
      label_sum += static_cast<double>(hits) / (2.0 * f.n_test);
    }
    const double n = static_cast<double>(rep.folds.size());
    EXPECT_NEAR(rep.per_class()[0].f1, f1_sum / n, 1e-12);
    EXPECT_NEAR(rep.accuracy(), exact_sum / n, 1e-12);
    EXPECT_NEAR(rep.label_mean_accuracy(), label_sum / n, 1e-12);
    EXPECT_LE(rep.accuracy(), rep.label_mean_accuracy() + 1e-12);
    EXPECT_GT(rep.accuracy(), 0.95);
  }
}

TEST(CrossValidate, VocabularyFitOnTrainingRowsOnly) {
  auto docs = multilabel_docs(40, 5);
  docs[0].text += " unique_token";
  const auto data = multilabel_data(docs);
  const auto plan = make_folds(data.strata, data.groups, FoldMode::Standard, 4, 1);
  const auto rep = cross_validate(data, small_spec({learn::ForestKind::RandomForest}), plan, "t");
  const int holdout = plan.assignment[0];
  for (const auto& f : rep.folds) {
    if (f.fold == holdout) {
      EXPECT_GT(f.oov_rate, 0.0);
    } else {
      EXPECT_EQ(f.oov_rate, 0.0);
    }
  }
}

TEST(Study, JsonDeterministicWithoutTimings) {
  const auto docs = multilabel_docs(60, 6);
  StudyConfig cfg;
  cfg.k = 3;
  cfg.ensemble.n_trees = 5;
  const auto a = run_study(StudyId::S3, docs, cfg);
  const auto b = run_study(StudyId::S3, docs, cfg);
  ASSERT_EQ(a.reports.size(), 4u);
  ASSERT_NE(a.find("chain_voting", "func"), nullptr);
  EXPECT_EQ(bundle_to_json(a), bundle_to_json(b));
  EXPECT_EQ(bundle_to_json(a).find("seconds"), std::string::npos);
  EXPECT_NE(timings_to_json(a).find("seconds"), std::string::npos);
  const auto table = render_table(a);
  EXPECT_NE(table.find("EncA"), std::string::npos);
  EXPECT_NE(table.find("exact-match accuracy"), std::string::npos);
}

TEST(Study, ParseNames) {
  EXPECT_EQ(parse_study("S4"), StudyId::S4);
  EXPECT_EQ(parse_study("E_crossobf"), StudyId::E_crossobf);
  EXPECT_FALSE(parse_study("S9").has_value());
}

TEST(Study, CrossObfuscatorTrainTest) {
  const auto train = multilabel_docs(60, 7);
  const auto test = multilabel_docs(30, 8);
  StudyConfig cfg;
  cfg.ensemble.n_trees = 10;
  const auto b = run_study(StudyId::E_crossobf, train, cfg, test);
  ASSERT_EQ(b.reports.size(), 1u);
  EXPECT_EQ(b.reports[0].regime, "cross");
  EXPECT_EQ(b.reports[0].folds[0].n_test, 30u);
  EXPECT_GT(b.reports[0].accuracy(), 0.9);
  EXPECT_THROW(run_study(StudyId::E_crossobf, train, cfg), DataError);
}

TEST(Study, ConstructionDataRequiresLabel) {
  std::vector<norm::RawDocument> docs = {doc("a", "x", LabelSet{TransformLabel::Virt}, "t")};
  EXPECT_THROW(construction_data(docs, TransformLabel::Virt), DataError);
  docs[0].constructions[TransformLabel::Virt] = Construction::LinearDispatch;
  const auto d = construction_data(docs, TransformLabel::Virt);
  EXPECT_EQ(d.classes, (std::vector<std::string>{"linear_dispatch"}));
}
