#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "obfdetect/error.hpp"
#include "obfdetect/featurizer.hpp"
#include "obfdetect/labels.hpp"

namespace obfdetect::learn {

class EmptyDataset : public DataError {
 public:
  using DataError::DataError;
};
class DimensionMismatch : public DataError {
 public:
  using DataError::DataError;
};
class ModelFormatError : public DataError {
 public:
  using DataError::DataError;
};

// One or more categorical outputs per row; single-label data has one output,
// multi-label data one binary output per label.
struct Targets {
  std::size_t n_outputs = 1;
  std::vector<int> n_classes;  // per output
  std::vector<int> y;          // rows x n_outputs, row-major

  std::size_t rows() const { return n_outputs ? y.size() / n_outputs : 0; }
  int at(std::size_t row, std::size_t k) const { return y[row * n_outputs + k]; }

  static Targets single(std::vector<int> y, int n_classes);
  static Targets multilabel(std::span<const LabelSet> sets, std::span<const TransformLabel> labels);
  Targets output(std::size_t k) const;
};

enum class ThresholdMode : std::uint8_t { Exhaustive, Random };
enum class ForestKind : std::uint8_t { RandomForest, ExtraTrees };

std::string_view forest_kind_name(ForestKind k);

struct TreeParams {
  int max_depth = 0;  // 0: unbounded
  int min_leaf = 1;
  std::size_t feature_subsample = 0;  // features tried per split; 0: all
  std::size_t n_features = 0;         // leading columns the tree may use; 0: all
  ThresholdMode threshold_mode = ThresholdMode::Exhaustive;
  std::uint64_t seed = 0;
  std::size_t always_from = SIZE_MAX;  // columns from here on are candidates at every split
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::uint32_t hist = 0;  // leaf: offset into TreeModel::hist
};

struct TreeModel {
  std::vector<TreeNode> nodes;      // nodes[0] is the root
  std::vector<std::uint32_t> hist;  // per leaf, class counts of every output back to back
  std::vector<int> n_classes;
  std::size_t n_features = 0;
  std::uint64_t seed = 0;
  int max_depth = 0;

  const TreeNode& leaf_for(std::span<const double> x) const;
  std::vector<int> predict(std::span<const double> x) const;  // per output argmax, lowest index on ties
  int depth() const;
};

// Split chosen at a node: feature, threshold and weighted Gini of the children.
struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

// Weighted Gini impurity of rows, summed over outputs.
double gini(const Targets& t, std::span<const std::size_t> rows);

TreeModel train_tree(const feat::FeatureMatrix& X, const Targets& t, std::span<const std::size_t> rows,
                     const TreeParams& params);
// Best split at the root under params (no recursion); feature == -1 when none exists.
Split best_root_split(const feat::FeatureMatrix& X, const Targets& t, std::span<const std::size_t> rows,
                      const TreeParams& params);

struct ForestParams {
  ForestKind kind = ForestKind::RandomForest;
  int n_trees = 100;
  int max_depth = 0;
  int min_leaf = 1;
  std::size_t max_features = 0;  // 0: floor(sqrt(n_features))
  std::size_t n_features = 0;    // 0: all columns
  std::uint64_t seed = 0;
  std::size_t always_from = SIZE_MAX;
};

struct ForestModel {
  ForestKind kind = ForestKind::RandomForest;
  std::vector<TreeModel> trees;
  std::size_t feature_subsample = 0;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::vector<int> n_classes;
  std::size_t n_features = 0;
};

struct ForestPrediction {
  std::vector<int> classes;                // per output
  std::vector<std::vector<double>> shares;  // per output, vote share per class
};

// Rows and tree parameters of tree i of a forest (bootstrap sample for random forests).
struct TreeJob {
  std::vector<std::size_t> rows;
  TreeParams params;
};
TreeJob forest_tree_job(const ForestParams& p, std::span<const std::size_t> rows, std::size_t n_features, int i);

ForestModel train_forest(const feat::FeatureMatrix& X, const Targets& t, std::span<const std::size_t> rows,
                         const ForestParams& params);
ForestPrediction predict_forest(const ForestModel& m, std::span<const double> x);

// Majority over counts; ties go to the lowest index.
int argmax_lowest(std::span<const double> counts);
int majority_vote(std::span<const int> votes, int n_classes);

struct EnsembleParams {
  std::vector<ForestKind> members = {ForestKind::RandomForest, ForestKind::ExtraTrees};
  int n_trees = 100;
  int max_depth = 0;
  int min_leaf = 1;
  std::size_t max_features = 0;
  std::uint64_t seed = 0;
};

// Hard vote over member forests, per output.
struct VotingEnsemble {
  std::vector<ForestModel> members;
};

VotingEnsemble train_ensemble(const feat::FeatureMatrix& X, const Targets& t, std::span<const std::size_t> rows,
                              const EnsembleParams& params, std::size_t n_features = 0,
                              std::size_t always_from = SIZE_MAX);
std::vector<int> predict_vote(const VotingEnsemble& e, std::span<const double> x);

enum class MultiLabelKind : std::uint8_t { Chain, BinaryRelevance, MultiOutput };

std::string_view multilabel_kind_name(MultiLabelKind k);

struct MultiLabelParams {
  MultiLabelKind kind = MultiLabelKind::Chain;
  EnsembleParams ensemble;
  bool restrict_to_base = false;  // chain links ignore the appended label columns
  bool always_label_features = true;  // appended label columns join every split's candidates
};

struct MultiLabelModel {
  MultiLabelKind kind = MultiLabelKind::Chain;
  std::vector<TransformLabel> order;  // chain order, or label order for the other kinds
  std::vector<VotingEnsemble> links;  // one per label; MultiOutput keeps a single entry
  std::size_t base_dim = 0;
};

MultiLabelModel train_multilabel(const feat::FeatureMatrix& X, std::span<const LabelSet> sets,
                                 std::span<const TransformLabel> labels, std::span<const std::size_t> rows,
                                 const MultiLabelParams& params);
// Positive labels; an empty prediction becomes {Clean}.
LabelSet predict_multilabel(const MultiLabelModel& m, std::span<const double> x);

struct MulticlassModel {
  std::vector<std::string> classes;
  VotingEnsemble ensemble;
};

MulticlassModel train_multiclass(const feat::FeatureMatrix& X, std::span<const int> y,
                                 std::vector<std::string> classes, std::span<const std::size_t> rows,
                                 const EnsembleParams& params);
int predict_multiclass(const MulticlassModel& m, std::span<const double> x);

// Text model files: a header with format version, task and vocabulary
// fingerprint, then flattened trees.
inline constexpr int kModelFormatVersion = 1;

struct ModelFile {
  std::string task;  // "multilabel" or "multiclass"
  std::uint64_t vocab_fingerprint = 0;
  MultiLabelModel multilabel;
  MulticlassModel multiclass;
};

std::string serialize_model(const ModelFile& m);
// Throws ModelFormatError, including on a fingerprint other than `expected_fingerprint`.
ModelFile deserialize_model(std::string_view text, std::uint64_t expected_fingerprint);
ModelFile deserialize_model(std::string_view text);

}  // namespace obfdetect::learn
