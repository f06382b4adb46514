#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "obfdetect/error.hpp"
#include "obfdetect/featurizer.hpp"
#include "obfdetect/labels.hpp"
#include "obfdetect/learner.hpp"
#include "obfdetect/normalizer.hpp"

namespace obfdetect::eval {

class TooFewGroups : public DataError {
 public:
  using DataError::DataError;
};

enum class FoldMode : std::uint8_t { Standard, Grouped };

// "std" and "func", the two regimes of every study table.
std::string_view fold_mode_name(FoldMode m);

struct FoldPlan {
  int k = 10;
  FoldMode mode = FoldMode::Standard;
  std::uint64_t seed = 0;
  std::vector<int> assignment;  // row -> fold

  std::vector<std::size_t> train_rows(int fold) const;
  std::vector<std::size_t> test_rows(int fold) const;
};

// Standard mode stratifies on `strata` (label signatures); grouped mode keeps
// every `groups` value (functionality tag) inside a single fold.
FoldPlan make_folds(std::span<const std::string> strata, std::span<const std::string> groups, FoldMode mode,
                    int k, std::uint64_t seed);

struct Confusion {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// 0/0 is taken as 0 for each ratio.
Prf compute_f1(const Confusion& c);

enum class Task : std::uint8_t { Multiclass, Multilabel };

struct FoldResult {
  int fold = 0;
  std::size_t n_train = 0, n_test = 0;
  std::vector<Confusion> per_class;               // one-vs-rest per class, or per label
  std::vector<std::vector<std::int64_t>> matrix;  // multiclass: [truth][prediction]
  std::int64_t exact = 0;                         // rows predicted exactly
  std::int64_t label_hits = 0;                    // multilabel: correct (row, label) bits
  std::size_t vocab_size = 0;
  double oov_rate = 0.0;  // mean over test rows
  double seconds = 0.0;

  double accuracy() const;
  double label_mean_accuracy() const;  // equals accuracy() for multiclass
};

struct MetricsReport {
  std::string study;
  std::string model;
  std::string regime;  // "std", "func" or "cross"
  Task task = Task::Multiclass;
  std::vector<std::string> classes;  // class or label names
  std::vector<FoldResult> folds;

  // Means over folds.
  double accuracy() const;
  double label_mean_accuracy() const;
  std::vector<Prf> per_class() const;
  double oov_rate() const;
  double seconds() const;
};

// Model under evaluation.
struct ModelSpec {
  std::string name;
  learn::MultiLabelKind kind = learn::MultiLabelKind::Chain;  // multilabel only
  learn::EnsembleParams ensemble;
  bool always_label_features = true;  // chain only
};

// Documents with targets and grouping keys, pre-tokenized.
struct EvalData {
  Task task = Task::Multiclass;
  std::vector<feat::TokenCounts> docs;
  std::vector<std::string> groups;
  std::vector<std::string> strata;
  std::vector<int> y;  // multiclass
  std::vector<std::string> classes;
  std::vector<LabelSet> sets;  // multilabel
  std::vector<TransformLabel> labels;

  std::size_t size() const { return docs.size(); }
};

// One class per document: its single transformation label.
EvalData single_label_data(std::span<const norm::RawDocument> docs);
// Construction of `label` as the class; every document must carry the label.
EvalData construction_data(std::span<const norm::RawDocument> docs, TransformLabel label);
// Full label sets; `labels` empty means every non-Clean label present.
EvalData multilabel_data(std::span<const norm::RawDocument> docs, std::vector<TransformLabel> labels = {});

MetricsReport cross_validate(const EvalData& data, const ModelSpec& spec, const FoldPlan& plan,
                             std::string_view study = "");
// Train on all of `train`, test on all of `test` (no folding).
MetricsReport train_test(const EvalData& train, const EvalData& test, const ModelSpec& spec,
                         std::string_view study = "");

enum class StudyId : std::uint8_t { S1, S2, S3, S4, E_ollvm, E_tigress, E_mixed, E_crossobf };

std::string_view study_name(StudyId s);
std::optional<StudyId> parse_study(std::string_view s);

struct StudyConfig {
  int k = 10;
  std::uint64_t seed = 1;
  std::vector<FoldMode> modes = {FoldMode::Standard, FoldMode::Grouped};
  learn::EnsembleParams ensemble;               // member list is set per model
  TransformLabel construction_label = TransformLabel::Virt;  // S4
};

struct StudyBundle {
  std::string study;
  std::vector<MetricsReport> reports;

  const MetricsReport* find(std::string_view model, std::string_view regime) const;
};

// E_crossobf reads `test_docs`; the other studies ignore it.
StudyBundle run_study(StudyId id, std::span<const norm::RawDocument> docs, const StudyConfig& config,
                      std::span<const norm::RawDocument> test_docs = {});

// Human-readable table: one row per class/label (F1) plus overall rows,
// one column per regime.
std::string render_table(const StudyBundle& b);
// Machine-readable record without timings (deterministic under the seed).
std::string bundle_to_json(const StudyBundle& b);
// Per-fold wall-clock seconds, kept apart from the deterministic record.
std::string timings_to_json(const StudyBundle& b);

}  // namespace obfdetect::eval
