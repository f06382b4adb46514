#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "obfdetect/error.hpp"
#include "obfdetect/labels.hpp"
#include "obfdetect/mir.hpp"

namespace obfdetect::corpus {

// A pass kept rejecting a cell, or an obfuscated sample changed behaviour.
class RecipeFailure : public Error {
 public:
  using Error::Error;
};

enum class Profile : std::uint8_t { TigressLike, OllvmLike, Mixed };

std::string_view profile_name(Profile p);
std::optional<Profile> parse_profile(std::string_view s);

struct RecipeStep {
  TransformLabel label = TransformLabel::Clean;
  Construction construction = Construction::Default;  // Default: drawn from the pool

  friend bool operator==(const RecipeStep&, const RecipeStep&) = default;
};

struct StackRecipe {
  std::vector<RecipeStep> steps;  // application order
  std::string profile = "tigress_like";

  // "AddO,EncL", "Flat:ifnest_based", "clean" for the empty stack.
  std::string name() const;
  static StackRecipe parse(std::string_view name, std::string profile = "tigress_like");
  LabelSet labels() const;

  friend bool operator==(const StackRecipe&, const StackRecipe&) = default;
};

std::vector<StackRecipe> stock_recipes(Profile p);
// One recipe per transformation label plus the empty one.
std::vector<StackRecipe> single_layer_recipes();

using ConstructionPools = std::map<TransformLabel, std::vector<Construction>>;
ConstructionPools default_pools(std::string_view profile);

struct CorpusConfig {
  std::vector<std::string> families;  // empty: all twelve
  std::vector<StackRecipe> recipes;
  int per_cell = 10;
  std::uint64_t master_seed = 1;
  int semantic_inputs = 32;
  int max_retries = 16;
  int opaque_min = 4;
  int opaque_max = 16;
  double density = 1.0;
  std::uint64_t fuel = 20'000'000;
  ConstructionPools pool_overrides;  // replaces the profile pool for a label
};

struct Sample {
  std::string id;
  mir::Function function;
  LabelSet labels;
  ConstructionMap constructions;
  std::string functionality_tag;
  std::uint64_t seed = 0;
  std::string recipe;
  std::string profile;
};

// Deterministic under the master seed; cells are (family, recipe) pairs.
std::vector<Sample> generate_corpus(const CorpusConfig& config);

Sample generate_sample(const CorpusConfig& config, std::string_view family_name,
                       const StackRecipe& recipe, std::uint64_t cell, std::uint64_t index);

// Runs both functions on `count` random argument tuples; false on the first difference.
bool same_behaviour(const mir::Function& a, const mir::Function& b, int count, std::uint64_t seed,
                    std::uint64_t fuel);

// <dir>/samples/<id>.mir plus <dir>/manifest.tsv.
void write_corpus(const std::filesystem::path& dir, const std::vector<Sample>& samples);
std::vector<Sample> read_corpus(const std::filesystem::path& dir);

std::string manifest_header();
std::string manifest_line(const Sample& s);

}  // namespace obfdetect::corpus
