#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "obfdetect/corpus.hpp"
#include "obfdetect/error.hpp"
#include "obfdetect/eval.hpp"
#include "obfdetect/featurizer.hpp"
#include "obfdetect/labels.hpp"
#include "obfdetect/learner.hpp"

namespace obfdetect::pipeline {

namespace fs = std::filesystem;

inline constexpr std::string_view kToolVersion = "0.1.0";

// Bad command line or configuration (exit code 1).
class UsageError : public Error {
 public:
  using Error::Error;
};

struct CorpusSettings {
  std::vector<std::string> families;  // empty: all
  std::string profile = "tigress_like";
  // "stock" (profile recipes), "single" (one layer each plus clean), "clean",
  // or explicit recipe names such as "Flat,AddO".
  std::vector<std::string> recipes = {"stock"};
  int per_cell = 4;
  std::uint64_t seed = 1;
  int semantic_inputs = 32;
  int max_retries = 16;
  int opaque_min = 4;
  int opaque_max = 16;
  double density = 1.0;
  std::map<TransformLabel, std::vector<Construction>> pools;  // construction pool overrides
};

struct LearnerSettings {
  int n_trees = 100;
  int max_depth = 0;
  int min_leaf = 1;
  int max_features = 0;  // 0: sqrt of the vocabulary size
  std::vector<learn::ForestKind> members = {learn::ForestKind::RandomForest, learn::ForestKind::ExtraTrees};
  learn::MultiLabelKind multilabel = learn::MultiLabelKind::Chain;
  std::uint64_t seed = 1;

  learn::EnsembleParams ensemble() const;
};

struct EvalSettings {
  int k = 10;
  std::vector<eval::FoldMode> modes = {eval::FoldMode::Standard, eval::FoldMode::Grouped};
  std::vector<eval::StudyId> studies = {eval::StudyId::S3};
  TransformLabel construction_label = TransformLabel::Virt;
  std::uint64_t seed = 1;
};

struct PipelineConfig {
  CorpusSettings corpus;
  LearnerSettings learner;
  EvalSettings eval;
  std::string output_dir = "out";

  // Throws UsageError on unknown keys, bad values or failed validation.
  static PipelineConfig from_json(std::string_view text);
  static PipelineConfig load(const fs::path& file);
  std::string to_json() const;
  void validate() const;
  std::uint64_t digest() const;  // FNV-1a over the canonical JSON
  corpus::CorpusConfig corpus_config() const;
};

std::string hex64(std::uint64_t v);
std::uint64_t file_digest(const fs::path& file);
// Combined digest of every regular file below `dir`, in path order.
std::uint64_t tree_digest(const fs::path& dir);

struct ManifestEntry {
  std::string stage;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
  std::vector<std::pair<std::string, std::string>> outputs;  // path, digest
  double seconds = 0.0;
};

// Provenance record kept next to every stage output.
struct RunManifest {
  std::string tool_version{kToolVersion};
  std::string config_digest;
  std::vector<ManifestEntry> entries;

  std::string to_json() const;
  static RunManifest from_json(std::string_view text);
  // Reads <dir>/run_manifest.json when present, else an empty manifest.
  static RunManifest load(const fs::path& dir);
  void save(const fs::path& dir) const;
};

// OBFDETECT_WORKSPACE when set, the current directory otherwise.
fs::path workspace_root();
fs::path resolve(const fs::path& p);

struct GenPlan {
  std::size_t cells = 0;
  std::size_t samples = 0;
  std::vector<std::string> cell_names;  // "<family>/<recipe>"
};

GenPlan plan_gen(const PipelineConfig& cfg);
// Writes the corpus, a copy of the config and the run manifest into `out`.
std::size_t cmd_gen(const PipelineConfig& cfg, const fs::path& out);
std::size_t cmd_rawdata(const fs::path& corpus_dir, const fs::path& out);

enum class TrainTask : std::uint8_t { Multilabel, Construction };

struct TrainOptions {
  TrainTask task = TrainTask::Multilabel;
  TransformLabel construction_label = TransformLabel::Virt;
  LearnerSettings learner;
  std::string config_digest = "-";
};

// Model bundle: header, vocabulary, serialized model.
struct ModelBundle {
  std::string config_digest;
  std::optional<TransformLabel> construction_label;  // set for construction models
  feat::Vocabulary vocab;
  learn::ModelFile model;

  std::string serialize() const;
  static ModelBundle deserialize(std::string_view text);
};

ModelBundle train_bundle(const std::vector<norm::RawDocument>& docs, const TrainOptions& opts);
void cmd_train(const fs::path& rawdata_dir, const TrainOptions& opts, const fs::path& out);

struct Prediction {
  LabelSet labels;
  ConstructionMap constructions;

  std::string to_string() const;  // "EncA;Flat" plus " Flat=switch_based" per construction
};

// Normalized document text for a .mir function file or a raw-data .txt file.
std::string document_for_input(const fs::path& input);
Prediction predict_text(const ModelBundle& model, const std::vector<ModelBundle>& construction_models,
                        std::string_view document);
Prediction cmd_predict(const fs::path& model, const std::vector<fs::path>& construction_models,
                       const fs::path& input);

// Writes <out>/<study>.json, .txt and .timings.json per study.
void cmd_evaluate(const fs::path& rawdata_dir, const PipelineConfig& cfg, const fs::path& out,
                  const std::optional<fs::path>& test_rawdata = std::nullopt);
// Concatenated study tables found in an evaluation directory.
std::string cmd_report(const fs::path& eval_dir);

}  // namespace obfdetect::pipeline
