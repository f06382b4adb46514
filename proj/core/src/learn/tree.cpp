#include <algorithm>
#include <cmath>
#include <random>

#include "obfdetect/learner.hpp"

namespace obfdetect::learn {

Targets Targets::single(std::vector<int> y, int n_classes) {
  Targets t;
  t.n_outputs = 1;
  t.n_classes = {n_classes};
  for (int v : y) {
    if (v < 0 || v >= n_classes) throw DataError("class index out of range");
  }
  t.y = std::move(y);
  return t;
}

Targets Targets::multilabel(std::span<const LabelSet> sets, std::span<const TransformLabel> labels) {
  Targets t;
  t.n_outputs = labels.size();
  t.n_classes.assign(labels.size(), 2);
  t.y.reserve(sets.size() * labels.size());
  for (const auto& s : sets) {
    for (auto l : labels) t.y.push_back(s.contains(l) ? 1 : 0);
  }
  return t;
}

Targets Targets::output(std::size_t k) const {
  Targets t;
  t.n_outputs = 1;
  t.n_classes = {n_classes.at(k)};
  t.y.reserve(rows());
  for (std::size_t r = 0; r < rows(); ++r) t.y.push_back(at(r, k));
  return t;
}

const TreeNode& TreeModel::leaf_for(std::span<const double> x) const {
  const TreeNode* n = &nodes.at(0);
  while (n->feature >= 0) n = &nodes[x[n->feature] <= n->threshold ? n->left : n->right];
  return *n;
}

std::vector<int> TreeModel::predict(std::span<const double> x) const {
  if (x.size() != n_features) {
    throw DimensionMismatch("expected " + std::to_string(n_features) + " features, got " + std::to_string(x.size()));
  }
  const TreeNode& leaf = leaf_for(x);
  std::vector<int> out;
  std::size_t off = leaf.hist;
  std::vector<double> counts;
  for (int nc : n_classes) {
    counts.assign(hist.begin() + off, hist.begin() + off + nc);
    out.push_back(argmax_lowest(counts));
    off += nc;
  }
  return out;
}

int TreeModel::depth() const {
  int best = 0;
  std::vector<std::pair<int, int>> stack = {{0, 0}};
  while (!stack.empty()) {
    const auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes[i].feature >= 0) {
      stack.emplace_back(nodes[i].left, d + 1);
      stack.emplace_back(nodes[i].right, d + 1);
    }
  }
  return best;
}

int argmax_lowest(std::span<const double> counts) {
  int best = 0;
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] > counts[best]) best = static_cast<int>(i);
  }
  return best;
}

int majority_vote(std::span<const int> votes, int n_classes) {
  std::vector<double> counts(n_classes, 0.0);
  for (int v : votes) counts.at(v) += 1;
  return argmax_lowest(counts);
}

double gini(const Targets& t, std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < t.n_outputs; ++k) {
    std::vector<double> c(t.n_classes[k], 0.0);
    for (auto r : rows) c[t.at(r, k)] += 1;
    double g = 1.0;
    for (double v : c) g -= (v / rows.size()) * (v / rows.size());
    total += g;
  }
  return total;
}

namespace {

class Builder {
 public:
  Builder(const feat::FeatureMatrix& X, const Targets& t, const TreeParams& p)
      : X_(X), t_(t), p_(p), rng_(p.seed) {
    n_feat_ = p.n_features ? std::min(p.n_features, X.cols) : X.cols;
    per_split_ = p.feature_subsample ? std::min(p.feature_subsample, n_feat_) : n_feat_;
    for (std::size_t k = 0; k < t.n_outputs; ++k) {
      offset_.push_back(total_classes_);
      total_classes_ += static_cast<std::size_t>(t.n_classes[k]);
    }
    feats_.resize(n_feat_);
    for (std::size_t f = 0; f < n_feat_; ++f) feats_[f] = f;
    seen_.assign(n_feat_, 0);
    model_.n_classes = t.n_classes;
    model_.n_features = n_feat_;
    model_.seed = p.seed;
    model_.max_depth = p.max_depth;
  }

  TreeModel build(std::span<const std::size_t> rows) {
    if (rows.empty()) throw EmptyDataset("cannot train a tree on zero rows");
    rows_.assign(rows.begin(), rows.end());
    node(0, rows_.size(), 0);
    return std::move(model_);
  }

  Split root_split(std::span<const std::size_t> rows) {
    if (rows.empty()) throw EmptyDataset("cannot split zero rows");
    rows_.assign(rows.begin(), rows.end());
    counts(0, rows_.size(), node_counts_);
    return find_split(0, rows_.size());
  }

 private:
  void counts(std::size_t lo, std::size_t hi, std::vector<std::int64_t>& out) const {
    out.assign(total_classes_, 0);
    for (std::size_t i = lo; i < hi; ++i) {
      for (std::size_t k = 0; k < t_.n_outputs; ++k) ++out[offset_[k] + t_.at(rows_[i], k)];
    }
  }

  bool pure(const std::vector<std::int64_t>& c, std::size_t n) const {
    for (std::size_t k = 0; k < t_.n_outputs; ++k) {
      for (int j = 0; j < t_.n_classes[k]; ++j) {
        const auto v = c[offset_[k] + j];
        if (v != 0 && static_cast<std::size_t>(v) != n) return false;
      }
    }
    return true;
  }

  std::int64_t sum_sq(const std::vector<std::int64_t>& c) const {
    std::int64_t s = 0;
    for (auto v : c) s += v * v;
    return s;
  }

  // Candidate comparison: larger gain wins; near-ties go to the lower (feature, threshold).
  static bool better(double gain, int f, double thr, const Split& best, double best_gain) {
    if (best.feature < 0) return true;
    const double tol = 1e-9 * std::max(1.0, std::abs(best_gain));
    if (gain > best_gain + tol) return true;
    if (gain < best_gain - tol) return false;
    return f < best.feature || (f == best.feature && thr < best.threshold);
  }

  Split find_split(std::size_t lo, std::size_t hi) {
    const std::size_t n = hi - lo;
    const auto min_leaf = static_cast<std::size_t>(std::max(1, p_.min_leaf));
    Split best;
    double best_gain = 0.0;
    std::size_t visited = 0;
    const std::int64_t total_sq = sum_sq(node_counts_);
    // false when f is constant over the node
    auto consider = [&](std::size_t f) {
      double mn = X_(rows_[lo], f), mx = mn;
      for (std::size_t r = lo + 1; r < hi; ++r) {
        const double v = X_(rows_[r], f);
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      if (!(mx > mn)) return false;

      if (p_.threshold_mode == ThresholdMode::Random) {
        double thr = mn + std::uniform_real_distribution<double>(0.0, 1.0)(rng_) * (mx - mn);
        if (thr >= mx) thr = mn;
        left_.assign(total_classes_, 0);
        std::size_t nl = 0;
        for (std::size_t r = lo; r < hi; ++r) {
          if (X_(rows_[r], f) <= thr) {
            ++nl;
            for (std::size_t k = 0; k < t_.n_outputs; ++k) ++left_[offset_[k] + t_.at(rows_[r], k)];
          }
        }
        const std::size_t nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) return true;
        std::int64_t sl = 0, sr = 0;
        for (std::size_t c = 0; c < total_classes_; ++c) {
          sl += left_[c] * left_[c];
          const auto rc = node_counts_[c] - left_[c];
          sr += rc * rc;
        }
        const double gain = static_cast<double>(sl) / nl + static_cast<double>(sr) / nr;
        if (better(gain, static_cast<int>(f), thr, best, best_gain)) {
          best = {static_cast<int>(f), thr, impurity(gain, n)};
          best_gain = gain;
        }
        return true;
      }

      vals_.clear();
      for (std::size_t r = lo; r < hi; ++r) vals_.emplace_back(X_(rows_[r], f), rows_[r]);
      std::sort(vals_.begin(), vals_.end());
      left_.assign(total_classes_, 0);
      right_ = node_counts_;
      std::int64_t sl = 0, sr = total_sq;
      for (std::size_t i2 = 0; i2 + 1 < n; ++i2) {
        const std::size_t row = vals_[i2].second;
        for (std::size_t k = 0; k < t_.n_outputs; ++k) {
          const std::size_t c = offset_[k] + t_.at(row, k);
          sl += 2 * left_[c] + 1;
          ++left_[c];
          sr -= 2 * right_[c] - 1;
          --right_[c];
        }
        const std::size_t nl = i2 + 1, nr = n - nl;
        if (!(vals_[i2].first < vals_[i2 + 1].first) || nl < min_leaf || nr < min_leaf) continue;
        const double gain = static_cast<double>(sl) / nl + static_cast<double>(sr) / nr;
        const double a = vals_[i2].first, b = vals_[i2 + 1].first;
        double thr = a + (b - a) / 2;
        if (!(thr < b)) thr = a;
        if (better(gain, static_cast<int>(f), thr, best, best_gain)) {
          best = {static_cast<int>(f), thr, impurity(gain, n)};
          best_gain = gain;
        }
      }
      return true;
    };
    std::size_t i = 0;
    for (; i < n_feat_ && visited < per_split_; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng_() % (n_feat_ - i));
      std::swap(feats_[i], feats_[j]);
      if (consider(feats_[i])) ++visited;
    }
    // columns from always_from on join every candidate set
    if (p_.always_from < n_feat_) {
      for (std::size_t k = 0; k < i; ++k) {
        if (feats_[k] >= p_.always_from) seen_[feats_[k]] = 1;
      }
      for (std::size_t f = p_.always_from; f < n_feat_; ++f) {
        if (!seen_[f]) consider(f);
        seen_[f] = 0;
      }
    }
    return best;
  }

  double impurity(double gain, std::size_t n) const {
    return (static_cast<double>(t_.n_outputs) * n - gain) / n;
  }

  int leaf(const std::vector<std::int64_t>& c) {
    TreeNode node;
    node.hist = static_cast<std::uint32_t>(model_.hist.size());
    for (auto v : c) model_.hist.push_back(static_cast<std::uint32_t>(v));
    model_.nodes.push_back(node);
    return static_cast<int>(model_.nodes.size() - 1);
  }

  int node(std::size_t lo, std::size_t hi, int depth) {
    const std::size_t n = hi - lo;
    counts(lo, hi, node_counts_);
    const bool stop = pure(node_counts_, n) || n < 2 * static_cast<std::size_t>(std::max(1, p_.min_leaf)) ||
                      (p_.max_depth > 0 && depth >= p_.max_depth);
    if (stop) return leaf(node_counts_);
    const Split s = find_split(lo, hi);
    if (s.feature < 0) return leaf(node_counts_);

    auto mid_it = std::partition(rows_.begin() + lo, rows_.begin() + hi,
                                 [&](std::size_t r) { return X_(r, s.feature) <= s.threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());
    model_.nodes.emplace_back();
    const int id = static_cast<int>(model_.nodes.size() - 1);
    model_.nodes[id].feature = s.feature;
    model_.nodes[id].threshold = s.threshold;
    const int l = node(lo, mid, depth + 1);
    const int r = node(mid, hi, depth + 1);
    model_.nodes[id].left = l;
    model_.nodes[id].right = r;
    return id;
  }

  const feat::FeatureMatrix& X_;
  const Targets& t_;
  TreeParams p_;
  std::mt19937_64 rng_;
  std::size_t n_feat_ = 0, per_split_ = 0, total_classes_ = 0;
  std::vector<std::size_t> offset_, feats_, rows_;
  std::vector<std::int64_t> node_counts_, left_, right_;
  std::vector<std::pair<double, std::size_t>> vals_;
  std::vector<std::uint8_t> seen_;
  TreeModel model_;
};

}  // namespace

TreeModel train_tree(const feat::FeatureMatrix& X, const Targets& t, std::span<const std::size_t> rows,
                     const TreeParams& params) {
  if (t.rows() != X.rows) throw DataError("targets and features disagree on row count");
  return Builder(X, t, params).build(rows);
}

Split best_root_split(const feat::FeatureMatrix& X, const Targets& t, std::span<const std::size_t> rows,
                      const TreeParams& params) {
  if (t.rows() != X.rows) throw DataError("targets and features disagree on row count");
  return Builder(X, t, params).root_split(rows);
}

}  // namespace obfdetect::learn
