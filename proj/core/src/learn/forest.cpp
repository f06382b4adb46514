#include <algorithm>
#include <cmath>
#include <random>

#include "obfdetect/learner.hpp"
#include "obfdetect/seed.hpp"

namespace obfdetect::learn {

std::string_view forest_kind_name(ForestKind k) {
  return k == ForestKind::RandomForest ? "random_forest" : "extra_trees";
}

std::string_view multilabel_kind_name(MultiLabelKind k) {
  switch (k) {
    case MultiLabelKind::Chain: return "chain";
    case MultiLabelKind::BinaryRelevance: return "binary_relevance";
    case MultiLabelKind::MultiOutput: return "multi_output";
  }
  return "?";
}

namespace {

std::size_t default_subsample(std::size_t n_features) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_features)))));
}

void check_dims(std::size_t want, std::size_t got) {
  if (want != got) {
    throw DimensionMismatch("expected " + std::to_string(want) + " features, got " + std::to_string(got));
  }
}

}  // namespace

TreeJob forest_tree_job(const ForestParams& p, std::span<const std::size_t> rows, std::size_t n_features, int i) {
  std::mt19937_64 rng(derive_seed(p.seed, forest_kind_name(p.kind), 0, static_cast<std::uint64_t>(i)));
  TreeJob job;
  if (p.kind == ForestKind::RandomForest) {
    job.rows.resize(rows.size());
    for (auto& r : job.rows) r = rows[rng() % rows.size()];
  } else {
    job.rows.assign(rows.begin(), rows.end());
  }
  job.params.max_depth = p.max_depth;
  job.params.min_leaf = p.min_leaf;
  job.params.n_features = n_features;
  job.params.feature_subsample = p.max_features ? p.max_features : default_subsample(n_features);
  job.params.threshold_mode =
      p.kind == ForestKind::RandomForest ? ThresholdMode::Exhaustive : ThresholdMode::Random;
  job.params.seed = rng();
  job.params.always_from = p.always_from;
  return job;
}

ForestModel train_forest(const feat::FeatureMatrix& X, const Targets& t, std::span<const std::size_t> rows,
                         const ForestParams& params) {
  if (params.n_trees < 1) throw DataError("a forest needs at least one tree");
  if (rows.empty()) throw EmptyDataset("cannot train a forest on zero rows");
  ForestModel m;
  m.kind = params.kind;
  m.bootstrap = params.kind == ForestKind::RandomForest;
  m.seed = params.seed;
  m.n_classes = t.n_classes;
  m.n_features = params.n_features ? std::min(params.n_features, X.cols) : X.cols;
  m.feature_subsample = params.max_features ? params.max_features : default_subsample(m.n_features);
  m.trees.reserve(params.n_trees);
  for (int i = 0; i < params.n_trees; ++i) {
    const TreeJob job = forest_tree_job(params, rows, m.n_features, i);
    m.trees.push_back(train_tree(X, t, job.rows, job.params));
  }
  return m;
}

ForestPrediction predict_forest(const ForestModel& m, std::span<const double> x) {
  check_dims(m.n_features, x.size());
  ForestPrediction p;
  for (int nc : m.n_classes) p.shares.emplace_back(nc, 0.0);
  for (const auto& tree : m.trees) {
    const auto cls = tree.predict(x);
    for (std::size_t k = 0; k < cls.size(); ++k) p.shares[k][cls[k]] += 1.0;
  }
  for (auto& s : p.shares) {
    p.classes.push_back(argmax_lowest(s));
    for (auto& v : s) v /= static_cast<double>(m.trees.size());
  }
  return p;
}

VotingEnsemble train_ensemble(const feat::FeatureMatrix& X, const Targets& t, std::span<const std::size_t> rows,
                              const EnsembleParams& params, std::size_t n_features, std::size_t always_from) {
  if (params.members.empty()) throw DataError("an ensemble needs at least one member");
  VotingEnsemble e;
  for (std::size_t i = 0; i < params.members.size(); ++i) {
    ForestParams fp;
    fp.kind = params.members[i];
    fp.n_trees = params.n_trees;
    fp.max_depth = params.max_depth;
    fp.min_leaf = params.min_leaf;
    fp.max_features = params.max_features;
    fp.n_features = n_features;
    fp.always_from = always_from;
    fp.seed = derive_seed(params.seed, "member", i);
    e.members.push_back(train_forest(X, t, rows, fp));
  }
  return e;
}

std::vector<int> predict_vote(const VotingEnsemble& e, std::span<const double> x) {
  const auto& first = e.members.at(0);
  std::vector<std::vector<int>> votes(first.n_classes.size());
  for (const auto& m : e.members) {
    const auto p = predict_forest(m, x);
    for (std::size_t k = 0; k < p.classes.size(); ++k) votes[k].push_back(p.classes[k]);
  }
  std::vector<int> out;
  for (std::size_t k = 0; k < votes.size(); ++k) out.push_back(majority_vote(votes[k], first.n_classes[k]));
  return out;
}

MultiLabelModel train_multilabel(const feat::FeatureMatrix& X, std::span<const LabelSet> sets,
                                 std::span<const TransformLabel> labels, std::span<const std::size_t> rows,
                                 const MultiLabelParams& params) {
  if (labels.empty()) throw DataError("no labels to learn");
  if (sets.size() != X.rows) throw DataError("label sets and features disagree on row count");
  MultiLabelModel m;
  m.kind = params.kind;
  m.base_dim = X.cols;
  m.order.assign(labels.begin(), labels.end());
  auto link_params = [&](TransformLabel l) {
    EnsembleParams p = params.ensemble;
    p.seed = derive_seed(params.ensemble.seed, "link", static_cast<std::uint64_t>(l));
    return p;
  };

  if (params.kind == MultiLabelKind::MultiOutput) {
    const Targets t = Targets::multilabel(sets, labels);
    m.links.push_back(train_ensemble(X, t, rows, params.ensemble));
    return m;
  }
  if (params.kind == MultiLabelKind::BinaryRelevance) {
    for (auto l : m.order) {
      const TransformLabel one[] = {l};
      m.links.push_back(train_ensemble(X, Targets::multilabel(sets, one), rows, link_params(l)));
    }
    return m;
  }

  std::mt19937_64 rng(derive_seed(params.ensemble.seed, "order"));
  for (std::size_t i = m.order.size(); i > 1; --i) std::swap(m.order[i - 1], m.order[rng() % i]);
  // teacher forcing: column d+i holds the true bit of order[i]
  const std::size_t d = X.cols, L = m.order.size();
  feat::FeatureMatrix A(X.rows, d + L);
  for (std::size_t r = 0; r < X.rows; ++r) {
    std::copy(X.row(r).begin(), X.row(r).end(), A.row(r).begin());
    for (std::size_t i = 0; i < L; ++i) A.data[r * (d + L) + d + i] = sets[r].contains(m.order[i]) ? 1.0 : 0.0;
  }
  for (std::size_t i = 0; i < L; ++i) {
    const TransformLabel one[] = {m.order[i]};
    m.links.push_back(train_ensemble(A, Targets::multilabel(sets, one), rows, link_params(m.order[i]),
                                     params.restrict_to_base ? d : d + i,
                                     params.restrict_to_base || !params.always_label_features ? SIZE_MAX : d));
  }
  return m;
}

LabelSet predict_multilabel(const MultiLabelModel& m, std::span<const double> x) {
  check_dims(m.base_dim, x.size());
  LabelSet out;
  if (m.kind == MultiLabelKind::MultiOutput) {
    const auto bits = predict_vote(m.links.at(0), x);
    for (std::size_t k = 0; k < bits.size(); ++k) {
      if (bits[k]) out.insert(m.order[k]);
    }
  } else if (m.kind == MultiLabelKind::BinaryRelevance) {
    for (std::size_t i = 0; i < m.links.size(); ++i) {
      if (predict_vote(m.links[i], x)[0]) out.insert(m.order[i]);
    }
  } else {
    std::vector<double> xa(x.begin(), x.end());
    xa.resize(m.base_dim + m.links.size(), 0.0);
    for (std::size_t i = 0; i < m.links.size(); ++i) {
      const std::size_t used = m.links[i].members.at(0).n_features;
      const int bit = predict_vote(m.links[i], std::span<const double>(xa.data(), used))[0];
      xa[m.base_dim + i] = bit;
      if (bit) out.insert(m.order[i]);
    }
  }
  return out.with_clean_rule();
}

MulticlassModel train_multiclass(const feat::FeatureMatrix& X, std::span<const int> y,
                                 std::vector<std::string> classes, std::span<const std::size_t> rows,
                                 const EnsembleParams& params) {
  if (y.size() != X.rows) throw DataError("classes and features disagree on row count");
  std::vector<bool> present(classes.size(), false);
  std::size_t distinct = 0;
  for (auto r : rows) {
    const int c = y[r];
    if (c < 0 || static_cast<std::size_t>(c) >= classes.size()) throw DataError("class index out of range");
    if (!present[c]) ++distinct;
    present[c] = true;
  }
  if (distinct < 2) throw DataError("multi-class training needs at least two classes");
  MulticlassModel m;
  m.ensemble = train_ensemble(X, Targets::single({y.begin(), y.end()}, static_cast<int>(classes.size())), rows, params);
  m.classes = std::move(classes);
  return m;
}

int predict_multiclass(const MulticlassModel& m, std::span<const double> x) {
  return predict_vote(m.ensemble, x)[0];
}

}  // namespace obfdetect::learn
