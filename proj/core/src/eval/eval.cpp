#include "obfdetect/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "obfdetect/seed.hpp"

namespace obfdetect::eval {

std::string_view fold_mode_name(FoldMode m) { return m == FoldMode::Standard ? "std" : "func"; }

std::vector<std::size_t> FoldPlan::train_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::test_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold) out.push_back(i);
  }
  return out;
}

FoldPlan make_folds(std::span<const std::string> strata, std::span<const std::string> groups, FoldMode mode,
                    int k, std::uint64_t seed) {
  if (k < 2) throw DataError("fold count must be at least 2");
  const std::size_t n = mode == FoldMode::Standard ? strata.size() : groups.size();
  if (n < static_cast<std::size_t>(k)) throw DataError("fewer rows than folds");
  FoldPlan plan;
  plan.k = k;
  plan.mode = mode;
  plan.seed = seed;
  plan.assignment.assign(n, -1);
  std::mt19937_64 rng(seed);
  auto shuffle = [&](auto& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
  };

  if (mode == FoldMode::Standard) {
    // deal each signature's shuffled rows round-robin, continuing the count across signatures
    std::map<std::string, std::vector<std::size_t>> by_sig;
    for (std::size_t i = 0; i < n; ++i) by_sig[strata[i]].push_back(i);
    std::size_t next = 0;
    for (auto& [sig, rows] : by_sig) {
      shuffle(rows);
      for (auto r : rows) plan.assignment[r] = static_cast<int>(next++ % k);
    }
    return plan;
  }

  std::map<std::string, std::vector<std::size_t>> by_tag;
  for (std::size_t i = 0; i < n; ++i) by_tag[groups[i]].push_back(i);
  if (by_tag.size() < static_cast<std::size_t>(k)) {
    throw TooFewGroups("grouped folding needs at least " + std::to_string(k) + " functionality tags, got " +
                       std::to_string(by_tag.size()));
  }
  std::vector<std::pair<std::string, std::size_t>> tags;
  for (const auto& [t, rows] : by_tag) tags.emplace_back(t, rows.size());
  shuffle(tags);
  std::stable_sort(tags.begin(), tags.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::size_t> load(k, 0);
  for (const auto& [t, count] : tags) {
    const int f = static_cast<int>(std::min_element(load.begin(), load.end()) - load.begin());
    load[f] += count;
    for (auto r : by_tag[t]) plan.assignment[r] = f;
  }
  return plan;
}

Prf compute_f1(const Confusion& c) {
  Prf p;
  auto ratio = [](std::int64_t a, std::int64_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / b; };
  p.precision = ratio(c.tp, c.tp + c.fp);
  p.recall = ratio(c.tp, c.tp + c.fn);
  p.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return p;
}

double FoldResult::accuracy() const { return n_test ? static_cast<double>(exact) / n_test : 0.0; }

double FoldResult::label_mean_accuracy() const {
  if (matrix.size() || per_class.empty()) return accuracy();
  return n_test ? static_cast<double>(label_hits) / (static_cast<double>(n_test) * per_class.size()) : 0.0;
}

namespace {

template <typename F>
double fold_mean(const std::vector<FoldResult>& folds, F f) {
  if (folds.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : folds) s += f(r);
  return s / static_cast<double>(folds.size());
}

}  // namespace

double MetricsReport::accuracy() const {
  return fold_mean(folds, [](const FoldResult& r) { return r.accuracy(); });
}
double MetricsReport::label_mean_accuracy() const {
  return fold_mean(folds, [](const FoldResult& r) { return r.label_mean_accuracy(); });
}
double MetricsReport::oov_rate() const {
  return fold_mean(folds, [](const FoldResult& r) { return r.oov_rate; });
}
double MetricsReport::seconds() const {
  double s = 0.0;
  for (const auto& r : folds) s += r.seconds;
  return s;
}

std::vector<Prf> MetricsReport::per_class() const {
  std::vector<Prf> out(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    out[c].precision = fold_mean(folds, [&](const FoldResult& r) { return compute_f1(r.per_class[c]).precision; });
    out[c].recall = fold_mean(folds, [&](const FoldResult& r) { return compute_f1(r.per_class[c]).recall; });
    out[c].f1 = fold_mean(folds, [&](const FoldResult& r) { return compute_f1(r.per_class[c]).f1; });
  }
  return out;
}

namespace {

void add_common(EvalData& d, const norm::RawDocument& doc) {
  d.docs.push_back(feat::count_tokens(doc.text));
  d.groups.push_back(doc.functionality_tag);
}

}  // namespace

EvalData single_label_data(std::span<const norm::RawDocument> docs) {
  EvalData d;
  d.task = Task::Multiclass;
  std::set<TransformLabel> present;
  for (const auto& doc : docs) {
    if (doc.labels.size() != 1) throw DataError("document " + doc.id + " is not single-label");
    present.insert(doc.labels.labels()[0]);
  }
  std::map<TransformLabel, int> index;
  for (auto l : present) {
    index[l] = static_cast<int>(d.classes.size());
    d.classes.emplace_back(label_name(l));
  }
  for (const auto& doc : docs) {
    add_common(d, doc);
    const auto l = doc.labels.labels()[0];
    d.y.push_back(index.at(l));
    d.strata.emplace_back(label_name(l));
  }
  return d;
}

EvalData construction_data(std::span<const norm::RawDocument> docs, TransformLabel label) {
  EvalData d;
  d.task = Task::Multiclass;
  std::set<Construction> present;
  for (const auto& doc : docs) {
    auto it = doc.constructions.find(label);
    if (it == doc.constructions.end()) {
      throw DataError("document " + doc.id + " has no " + std::string(label_name(label)) + " construction");
    }
    present.insert(it->second);
  }
  std::map<Construction, int> index;
  for (auto c : present) {
    index[c] = static_cast<int>(d.classes.size());
    d.classes.emplace_back(construction_name(c));
  }
  for (const auto& doc : docs) {
    add_common(d, doc);
    const auto c = doc.constructions.at(label);
    d.y.push_back(index.at(c));
    d.strata.emplace_back(construction_name(c));
  }
  return d;
}

EvalData multilabel_data(std::span<const norm::RawDocument> docs, std::vector<TransformLabel> labels) {
  EvalData d;
  d.task = Task::Multilabel;
  if (labels.empty()) {
    LabelSet all;
    for (const auto& doc : docs) {
      for (auto l : doc.labels.labels()) {
        if (l != TransformLabel::Clean) all.insert(l);
      }
    }
    labels = all.labels();
  }
  d.labels = std::move(labels);
  for (auto l : d.labels) d.classes.emplace_back(label_name(l));
  for (const auto& doc : docs) {
    add_common(d, doc);
    d.sets.push_back(doc.labels.with_clean_rule());
    d.strata.push_back(doc.labels.to_string());
  }
  return d;
}

namespace {

FoldResult run_fold(const EvalData& train, const EvalData& test, std::span<const std::size_t> train_rows,
                    std::span<const std::size_t> test_rows, const ModelSpec& spec, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  FoldResult r;
  r.n_train = train_rows.size();
  r.n_test = test_rows.size();
  if (train_rows.empty() || test_rows.empty()) throw DataError("empty train or test split");

  std::vector<feat::TokenCounts> train_docs;
  train_docs.reserve(train_rows.size());
  for (auto i : train_rows) train_docs.push_back(train.docs[i]);
  const feat::Vocabulary vocab = feat::fit_vocabulary(std::span<const feat::TokenCounts>(train_docs));
  r.vocab_size = vocab.size();
  feat::FeatureMatrix X(train_rows.size(), vocab.size());
  for (std::size_t i = 0; i < train_rows.size(); ++i) feat::transform_into(train_docs[i], vocab, X.row(i));
  std::vector<std::size_t> rows(train_rows.size());
  std::iota(rows.begin(), rows.end(), 0);

  learn::EnsembleParams ep = spec.ensemble;
  ep.seed = seed;
  std::vector<double> x(vocab.size());
  double oov = 0.0;

  if (train.task == Task::Multiclass) {
    const std::size_t nc = train.classes.size();
    r.matrix.assign(nc, std::vector<std::int64_t>(nc, 0));
    r.per_class.assign(nc, {});
    std::vector<int> y;
    for (auto i : train_rows) y.push_back(train.y[i]);
    const auto model = learn::train_multiclass(X, y, train.classes, rows, ep);
    for (auto i : test_rows) {
      oov += feat::transform_into(test.docs[i], vocab, x);
      const int pred = learn::predict_multiclass(model, x);
      const int truth = test.y[i];
      ++r.matrix[truth][pred];
      r.exact += pred == truth;
      for (std::size_t c = 0; c < nc; ++c) {
        const bool t = truth == static_cast<int>(c), p = pred == static_cast<int>(c);
        auto& cf = r.per_class[c];
        cf.tp += t && p;
        cf.fp += !t && p;
        cf.fn += t && !p;
        cf.tn += !t && !p;
      }
    }
  } else {
    std::vector<LabelSet> sets;
    for (auto i : train_rows) sets.push_back(train.sets[i]);
    learn::MultiLabelParams mp;
    mp.kind = spec.kind;
    mp.ensemble = ep;
    mp.always_label_features = spec.always_label_features;
    const auto model = learn::train_multilabel(X, sets, train.labels, rows, mp);
    r.per_class.assign(train.labels.size(), {});
    for (auto i : test_rows) {
      oov += feat::transform_into(test.docs[i], vocab, x);
      const LabelSet pred = learn::predict_multilabel(model, x);
      const LabelSet& truth = test.sets[i];
      r.exact += pred == truth;
      for (std::size_t c = 0; c < train.labels.size(); ++c) {
        const bool t = truth.contains(train.labels[c]), p = pred.contains(train.labels[c]);
        auto& cf = r.per_class[c];
        cf.tp += t && p;
        cf.fp += !t && p;
        cf.fn += t && !p;
        cf.tn += !t && !p;
        r.label_hits += t == p;
      }
    }
  }
  r.oov_rate = oov / static_cast<double>(test_rows.size());
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

MetricsReport empty_report(const EvalData& d, const ModelSpec& spec, std::string_view study) {
  MetricsReport rep;
  rep.study = study;
  rep.model = spec.name;
  rep.task = d.task;
  rep.classes = d.classes;
  return rep;
}

}  // namespace

MetricsReport cross_validate(const EvalData& data, const ModelSpec& spec, const FoldPlan& plan,
                             std::string_view study) {
  if (plan.assignment.size() != data.size()) throw DataError("fold plan does not cover the dataset");
  MetricsReport rep = empty_report(data, spec, study);
  rep.regime = fold_mode_name(plan.mode);
  for (int f = 0; f < plan.k; ++f) {
    const auto train = plan.train_rows(f), test = plan.test_rows(f);
    try {
      FoldResult r = run_fold(data, data, train, test, spec, derive_seed(plan.seed, "fold", f));
      r.fold = f;
      rep.folds.push_back(std::move(r));
    } catch (const Error& e) {
      throw Error("fold " + std::to_string(f) + ": " + e.what());
    }
  }
  return rep;
}

MetricsReport train_test(const EvalData& train, const EvalData& test, const ModelSpec& spec,
                         std::string_view study) {
  if (train.task != test.task) throw DataError("train and test data have different tasks");
  MetricsReport rep = empty_report(train, spec, study);
  rep.regime = "cross";
  std::vector<std::size_t> tr(train.size()), te(test.size());
  std::iota(tr.begin(), tr.end(), 0);
  std::iota(te.begin(), te.end(), 0);
  EvalData test_view = test;
  if (test.task == Task::Multiclass) {
    // map test classes onto the training class list by name
    for (auto& y : test_view.y) {
      const auto it = std::find(train.classes.begin(), train.classes.end(), test.classes[y]);
      if (it == train.classes.end()) throw DataError("test class '" + test.classes[y] + "' unseen in training");
      y = static_cast<int>(it - train.classes.begin());
    }
  }
  rep.folds.push_back(run_fold(train, test_view, tr, te, spec, derive_seed(spec.ensemble.seed, "cross")));
  return rep;
}

std::string_view study_name(StudyId s) {
  switch (s) {
    case StudyId::S1: return "S1";
    case StudyId::S2: return "S2";
    case StudyId::S3: return "S3";
    case StudyId::S4: return "S4";
    case StudyId::E_ollvm: return "E_ollvm";
    case StudyId::E_tigress: return "E_tigress";
    case StudyId::E_mixed: return "E_mixed";
    case StudyId::E_crossobf: return "E_crossobf";
  }
  return "?";
}

std::optional<StudyId> parse_study(std::string_view s) {
  for (auto id : {StudyId::S1, StudyId::S2, StudyId::S3, StudyId::S4, StudyId::E_ollvm, StudyId::E_tigress,
                  StudyId::E_mixed, StudyId::E_crossobf}) {
    if (study_name(id) == s) return id;
  }
  return std::nullopt;
}

const MetricsReport* StudyBundle::find(std::string_view model, std::string_view regime) const {
  for (const auto& r : reports) {
    if (r.model == model && r.regime == regime) return &r;
  }
  return nullptr;
}

StudyBundle run_study(StudyId id, std::span<const norm::RawDocument> docs, const StudyConfig& config,
                      std::span<const norm::RawDocument> test_docs) {
  using learn::ForestKind;
  using learn::MultiLabelKind;
  StudyBundle b;
  b.study = study_name(id);
  auto spec = [&](std::string name, std::vector<ForestKind> members, MultiLabelKind kind = MultiLabelKind::Chain) {
    ModelSpec s;
    s.name = std::move(name);
    s.kind = kind;
    s.ensemble = config.ensemble;
    s.ensemble.members = std::move(members);
    s.ensemble.seed = config.seed;
    return s;
  };
  const std::vector<ForestKind> mono = {ForestKind::RandomForest};
  const std::vector<ForestKind> both = {ForestKind::RandomForest, ForestKind::ExtraTrees};

  EvalData data;
  std::vector<ModelSpec> models;
  switch (id) {
    case StudyId::S1:
      data = single_label_data(docs);
      models = {spec("random_forest", mono), spec("voting", both)};
      break;
    case StudyId::S2:
      data = multilabel_data(docs);
      models = {spec("multi_output_rf", mono, MultiLabelKind::MultiOutput),
                spec("multi_output_voting", both, MultiLabelKind::MultiOutput)};
      break;
    case StudyId::S3:
      data = multilabel_data(docs);
      models = {spec("chain_rf", mono), spec("chain_voting", both)};
      break;
    case StudyId::S4:
      data = construction_data(docs, config.construction_label);
      b.study += std::string(":") + std::string(label_name(config.construction_label));
      models = {spec("random_forest", mono), spec("voting", both)};
      break;
    case StudyId::E_ollvm:
    case StudyId::E_tigress:
    case StudyId::E_mixed:
      data = multilabel_data(docs);
      models = {spec("chain_voting", both)};
      break;
    case StudyId::E_crossobf: {
      if (test_docs.empty()) throw DataError("E_crossobf needs test documents");
      const EvalData train = multilabel_data(docs);
      const EvalData test = multilabel_data(test_docs, train.labels);
      b.reports.push_back(train_test(train, test, spec("chain_voting", both), b.study));
      return b;
    }
  }
  for (auto mode : config.modes) {
    const FoldPlan plan =
        make_folds(data.strata, data.groups, mode, config.k, derive_seed(config.seed, "folds", static_cast<int>(mode)));
    for (const auto& m : models) b.reports.push_back(cross_validate(data, m, plan, b.study));
  }
  return b;
}

}  // namespace obfdetect::eval
