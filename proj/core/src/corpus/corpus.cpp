#include "obfdetect/corpus.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "obfdetect/families.hpp"
#include "obfdetect/interp.hpp"
#include "obfdetect/mir_text.hpp"
#include "obfdetect/obfuscator.hpp"
#include "obfdetect/seed.hpp"

namespace obfdetect::corpus {

namespace {

using TL = TransformLabel;

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<StackRecipe> from_lists(std::initializer_list<std::initializer_list<TL>> lists,
                                    const std::string& profile) {
  std::vector<StackRecipe> out;
  for (const auto& l : lists) {
    StackRecipe r;
    r.profile = profile;
    for (auto t : l) r.steps.push_back({t, Construction::Default});
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::vector<mir::Instruction>> donors_excluding(std::string_view family_name) {
  std::vector<std::vector<mir::Instruction>> out;
  for (const auto& fam : families()) {
    if (fam.name == family_name) continue;
    for (const auto& b : fam.base.blocks) {
      if (b.instrs.size() >= 2) out.push_back(b.instrs);
    }
  }
  return out;
}

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw DataError("bad integer '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

std::string_view profile_name(Profile p) {
  switch (p) {
    case Profile::TigressLike: return "tigress_like";
    case Profile::OllvmLike: return "ollvm_like";
    case Profile::Mixed: return "mixed";
  }
  return "?";
}

std::optional<Profile> parse_profile(std::string_view s) {
  for (auto p : {Profile::TigressLike, Profile::OllvmLike, Profile::Mixed}) {
    if (profile_name(p) == s) return p;
  }
  return std::nullopt;
}

std::string StackRecipe::name() const {
  if (steps.empty()) return "clean";
  std::string out;
  for (const auto& s : steps) {
    if (!out.empty()) out += ',';
    out += label_name(s.label);
    if (s.construction != Construction::Default) {
      out += ':';
      out += construction_name(s.construction);
    }
  }
  return out;
}

StackRecipe StackRecipe::parse(std::string_view name, std::string profile) {
  StackRecipe r;
  r.profile = std::move(profile);
  if (name == "clean" || name.empty()) return r;
  for (auto part : split(name, ',')) {
    const auto colon = part.find(':');
    const auto l = parse_label(part.substr(0, colon));
    if (!l || *l == TL::Clean) throw DataError("bad recipe step '" + std::string(part) + "'");
    RecipeStep step{*l, Construction::Default};
    if (colon != std::string_view::npos) {
      const auto c = parse_construction(part.substr(colon + 1));
      if (!c || !construction_valid_for(*l, *c)) {
        throw DataError("bad construction in '" + std::string(part) + "'");
      }
      step.construction = *c;
    }
    for (const auto& s : r.steps) {
      if (s.label == step.label) throw DataError("label repeated in recipe '" + std::string(name) + "'");
    }
    r.steps.push_back(step);
  }
  return r;
}

LabelSet StackRecipe::labels() const {
  LabelSet s;
  for (const auto& st : steps) s.insert(st.label);
  return s.with_clean_rule();
}

std::vector<StackRecipe> stock_recipes(Profile p) {
  if (p == Profile::TigressLike) {
    return from_lists({{TL::AddO},
                       {TL::AddO, TL::EncL},
                       {TL::EncL},
                       {TL::AddO, TL::EncA},
                       {TL::EncA, TL::AddO},
                       {TL::EncA},
                       {TL::AddO, TL::EncD},
                       {TL::EncD, TL::AddO},
                       {TL::EncD},
                       {TL::AddO, TL::EncA, TL::EncL, TL::EncD},
                       {TL::EncD, TL::EncA, TL::EncL, TL::AddO},
                       {TL::AddO, TL::Flat},
                       {TL::Flat, TL::AddO},
                       {TL::Flat},
                       {TL::Flat, TL::EncD, TL::EncA, TL::EncL},
                       {TL::Virt, TL::AddO},
                       {TL::Virt},
                       {TL::Virt, TL::EncD, TL::EncA, TL::EncL},
                       {TL::Virt, TL::Flat},
                       {TL::Flat, TL::AddO, TL::EncD, TL::EncA, TL::EncL},
                       {TL::Virt, TL::AddO, TL::EncD, TL::EncA, TL::EncL},
                       {TL::Virt, TL::Flat, TL::AddO, TL::EncD, TL::EncA, TL::EncL}},
                      "tigress_like");
  }
  if (p == Profile::OllvmLike) {
    return from_lists({{TL::AddO},
                       {TL::AddO, TL::Sub},
                       {TL::AddO, TL::Sub, TL::Flat},
                       {TL::AddO, TL::Flat, TL::Sub},
                       {TL::Sub},
                       {TL::Sub, TL::AddO},
                       {TL::Sub, TL::AddO, TL::Flat},
                       {TL::Flat},
                       {TL::Flat, TL::AddO},
                       {TL::Flat, TL::Sub, TL::AddO},
                       {TL::Flat, TL::AddO, TL::Sub}},
                      "ollvm_like");
  }
  auto out = stock_recipes(Profile::TigressLike);
  for (auto& r : stock_recipes(Profile::OllvmLike)) out.push_back(std::move(r));
  return out;
}

std::vector<StackRecipe> single_layer_recipes() {
  std::vector<StackRecipe> out;
  for (auto l : kAllTransformLabels) {
    StackRecipe r;
    if (l != TL::Clean) r.steps.push_back({l, Construction::Default});
    out.push_back(std::move(r));
  }
  return out;
}

ConstructionPools default_pools(std::string_view profile) {
  if (profile == "ollvm_like") {
    return {{TL::AddO, {Construction::Arithmetic}}, {TL::Flat, {Construction::SwitchBased}}};
  }
  return {{TL::AddO, constructions_for(TL::AddO)},
          {TL::Flat, {Construction::SwitchBased}},
          {TL::Virt, constructions_for(TL::Virt)},
          {TL::EncD, constructions_for(TL::EncD)}};
}

bool same_behaviour(const mir::Function& a, const mir::Function& b, int count, std::uint64_t seed,
                    std::uint64_t fuel) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> args(a.params.size());
  for (int i = 0; i < count; ++i) {
    for (auto& x : args) x = (i % 4 == 0) ? rng() % 64 : rng();
    if (mir::run_function(a, args, fuel).value != mir::run_function(b, args, fuel).value) return false;
  }
  return true;
}

Sample generate_sample(const CorpusConfig& config, std::string_view family_name,
                       const StackRecipe& recipe, std::uint64_t cell, std::uint64_t index) {
  const Family& fam = family(family_name);
  auto pools = default_pools(recipe.profile);
  for (const auto& [l, cs] : config.pool_overrides) pools[l] = cs;
  const auto donors = donors_excluding(fam.name);

  std::string last_error;
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    const std::uint64_t seed = derive_seed(config.master_seed, "sample", cell, index + (std::uint64_t(attempt) << 32));
    std::mt19937_64 rng(seed);
    const mir::Function original = make_variant(fam, rng);
    mir::Function f = original;
    Sample s;
    s.functionality_tag = fam.name;
    s.seed = seed;
    s.recipe = recipe.name();
    s.profile = recipe.profile;
    try {
      for (std::size_t k = 0; k < recipe.steps.size(); ++k) {
        const auto& step = recipe.steps[k];
        Construction c = step.construction;
        if (c == Construction::Default && pools.contains(step.label) && !pools.at(step.label).empty()) {
          const auto& pool = pools.at(step.label);
          c = pool[index % pool.size()];
        }
        obf::PassParams params;
        params.density = config.density;
        params.opaque_count =
            config.opaque_min + static_cast<int>(rng() % (config.opaque_max - config.opaque_min + 1));
        obf::PassContext ctx(rng(), params);
        ctx.donor_fragments = donors;
        mir::Function next = obf::apply_pass(step.label, c, f, ctx);
        if (next == f) throw obf::PassError(std::string(label_name(step.label)) + " left the function unchanged");
        f = std::move(next);
        s.labels.insert(step.label);
        const auto& valid = constructions_for(step.label);
        if (valid.front() != Construction::Default) {
          s.constructions[step.label] = c == Construction::Default ? valid.front() : c;
        }
      }
      mir::require_valid(f);
      if (!same_behaviour(original, f, config.semantic_inputs, seed ^ 0x5eed, config.fuel)) {
        throw RecipeFailure("sample " + fam.name + " / " + recipe.name() + " changed behaviour (seed " +
                            std::to_string(seed) + ")");
      }
    } catch (const obf::PassError& e) {
      last_error = e.what();
      continue;
    } catch (const mir::FuelExhausted& e) {
      last_error = e.what();
      continue;
    }
    s.labels = s.labels.with_clean_rule();
    f.functionality_tag = fam.name;
    s.function = std::move(f);
    return s;
  }
  throw RecipeFailure("cell " + fam.name + " / " + recipe.name() + " failed after " +
                      std::to_string(config.max_retries) + " attempts: " + last_error);
}

std::vector<Sample> generate_corpus(const CorpusConfig& config) {
  if (config.per_cell < 1) throw DataError("per-cell count must be at least 1");
  std::vector<std::string> names = config.families;
  if (names.empty()) {
    for (const auto& f : families()) names.push_back(f.name);
  }
  if (names.size() < 2) throw DataError("at least two families are required");
  if (config.recipes.empty()) throw DataError("no recipes");

  std::vector<Sample> out;
  out.reserve(names.size() * config.recipes.size() * config.per_cell);
  for (std::size_t r = 0; r < config.recipes.size(); ++r) {
    for (std::size_t fi = 0; fi < names.size(); ++fi) {
      const std::uint64_t cell = r * names.size() + fi;
      for (int i = 0; i < config.per_cell; ++i) {
        Sample s = generate_sample(config, names[fi], config.recipes[r], cell, static_cast<std::uint64_t>(i));
        char id[64];
        std::snprintf(id, sizeof id, "r%02zu_%s_%03d", r, names[fi].c_str(), i);
        s.id = id;
        s.function.name = s.id;
        out.push_back(std::move(s));
      }
    }
  }
  return out;
}

std::string manifest_header() { return "file\tlabels\tconstructions\ttag\tseed\trecipe\tprofile"; }

std::string manifest_line(const Sample& s) {
  std::string cons = constructions_to_string(s.constructions);
  if (cons.empty()) cons = "-";
  return "samples/" + s.id + ".mir\t" + s.labels.to_string() + "\t" + cons + "\t" + s.functionality_tag +
         "\t" + std::to_string(s.seed) + "\t" + s.recipe + "\t" + s.profile;
}

void write_corpus(const std::filesystem::path& dir, const std::vector<Sample>& samples) {
  std::filesystem::create_directories(dir / "samples");
  std::ofstream manifest(dir / "manifest.tsv", std::ios::binary);
  if (!manifest) throw Error("cannot write " + (dir / "manifest.tsv").string());
  manifest << manifest_header() << '\n';
  for (const auto& s : samples) {
    std::ofstream out(dir / "samples" / (s.id + ".mir"), std::ios::binary);
    if (!out) throw Error("cannot write sample " + s.id);
    out << mir::print_function(s.function);
    manifest << manifest_line(s) << '\n';
  }
}

std::vector<Sample> read_corpus(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.tsv", std::ios::binary);
  if (!manifest) throw DataError("missing manifest in " + dir.string());
  std::string line;
  std::getline(manifest, line);
  if (line != manifest_header()) throw DataError("unexpected manifest header");
  std::vector<Sample> out;
  int lineno = 1;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 7) throw DataError("manifest line " + std::to_string(lineno) + ": expected 7 fields");
    Sample s;
    const std::string file(f[0]);
    s.id = std::filesystem::path(file).stem().string();
    s.labels = LabelSet::parse(f[1]);
    if (f[2] != "-") s.constructions = parse_constructions(f[2]);
    s.functionality_tag = f[3];
    s.seed = parse_u64(f[4]);
    s.recipe = f[5];
    s.profile = f[6];
    std::ifstream in(dir / file, std::ios::binary);
    if (!in) throw DataError("missing sample file " + file);
    std::stringstream ss;
    ss << in.rdbuf();
    s.function = mir::parse_function(ss.str());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace obfdetect::corpus
