#include "obfdetect/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "obfdetect/families.hpp"
#include "obfdetect/mir_text.hpp"
#include "obfdetect/normalizer.hpp"
#include "obfdetect/rawdata.hpp"
#include "obfdetect/symexec.hpp"

namespace obfdetect::pipeline {

using nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, std::string_view text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

TransformLabel label_of(const std::string& s) {
  const auto l = parse_label(s);
  if (!l) throw UsageError("unknown transformation label '" + s + "'");
  return *l;
}

Construction construction_of(const std::string& s) {
  const auto c = parse_construction(s);
  if (!c) throw UsageError("unknown construction '" + s + "'");
  return *c;
}

learn::ForestKind forest_of(const std::string& s) {
  if (s == "random_forest") return learn::ForestKind::RandomForest;
  if (s == "extra_trees") return learn::ForestKind::ExtraTrees;
  throw UsageError("unknown forest kind '" + s + "'");
}

learn::MultiLabelKind multilabel_of(const std::string& s) {
  for (auto k : {learn::MultiLabelKind::Chain, learn::MultiLabelKind::BinaryRelevance,
                 learn::MultiLabelKind::MultiOutput}) {
    if (learn::multilabel_kind_name(k) == s) return k;
  }
  throw UsageError("unknown multi-label kind '" + s + "'");
}

eval::FoldMode mode_of(const std::string& s) {
  if (s == "std") return eval::FoldMode::Standard;
  if (s == "func") return eval::FoldMode::Grouped;
  throw UsageError("unknown fold mode '" + s + "'");
}

eval::StudyId study_of(const std::string& s) {
  const auto id = eval::parse_study(s);
  if (!id) throw UsageError("unknown study '" + s + "'");
  return *id;
}

// Reads `key` into `out` when present; any other key in `j` is rejected by check_keys.
template <typename T>
void get(const ordered_json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config key '") + key + "': " + e.what());
  }
}

void check_keys(const ordered_json& j, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw UsageError("config section '" + std::string(where) + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw UsageError("unknown config key '" + std::string(where) + "." + k + "'");
    }
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::pair<std::string, std::string> digest_entry(const fs::path& p) {
  const auto d = fs::is_directory(p) ? tree_digest(p) : file_digest(p);
  return {p.filename().string(), hex64(d)};
}

void record(const fs::path& out, const std::string& config_digest, ManifestEntry e) {
  RunManifest m = RunManifest::load(out);
  if (m.config_digest.empty() || m.config_digest == "-") m.config_digest = config_digest;
  std::erase_if(m.entries, [&](const ManifestEntry& old) { return old.stage == e.stage; });
  m.entries.push_back(std::move(e));
  m.save(out);
}

std::string upstream_config_digest(const fs::path& dir) {
  const RunManifest m = RunManifest::load(dir);
  return m.config_digest.empty() ? "-" : m.config_digest;
}

}  // namespace

learn::EnsembleParams LearnerSettings::ensemble() const {
  learn::EnsembleParams p;
  p.members = members;
  p.n_trees = n_trees;
  p.max_depth = max_depth;
  p.min_leaf = min_leaf;
  p.max_features = static_cast<std::size_t>(max_features);
  p.seed = seed;
  return p;
}

PipelineConfig PipelineConfig::from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config", {"output_dir", "corpus", "learner", "eval"});
  PipelineConfig c;
  get(j, "output_dir", c.output_dir);

  if (j.contains("corpus")) {
    const auto& s = j["corpus"];
    check_keys(s, "corpus",
               {"families", "profile", "recipes", "per_cell", "seed", "semantic_inputs", "max_retries",
                "opaque_min", "opaque_max", "density", "pools"});
    auto& cs = c.corpus;
    get(s, "families", cs.families);
    get(s, "profile", cs.profile);
    get(s, "recipes", cs.recipes);
    get(s, "per_cell", cs.per_cell);
    get(s, "seed", cs.seed);
    get(s, "semantic_inputs", cs.semantic_inputs);
    get(s, "max_retries", cs.max_retries);
    get(s, "opaque_min", cs.opaque_min);
    get(s, "opaque_max", cs.opaque_max);
    get(s, "density", cs.density);
    if (s.contains("pools")) {
      std::map<std::string, std::vector<std::string>> pools;
      get(s, "pools", pools);
      for (const auto& [l, names] : pools) {
        auto& v = cs.pools[label_of(l)];
        for (const auto& n : names) v.push_back(construction_of(n));
      }
    }
  }

  if (j.contains("learner")) {
    const auto& s = j["learner"];
    check_keys(s, "learner", {"n_trees", "max_depth", "min_leaf", "max_features", "members", "multilabel", "seed"});
    auto& ls = c.learner;
    get(s, "n_trees", ls.n_trees);
    get(s, "max_depth", ls.max_depth);
    get(s, "min_leaf", ls.min_leaf);
    get(s, "max_features", ls.max_features);
    get(s, "seed", ls.seed);
    if (s.contains("members")) {
      std::vector<std::string> names;
      get(s, "members", names);
      ls.members.clear();
      for (const auto& n : names) ls.members.push_back(forest_of(n));
    }
    if (s.contains("multilabel")) {
      std::string k;
      get(s, "multilabel", k);
      ls.multilabel = multilabel_of(k);
    }
  }

  if (j.contains("eval")) {
    const auto& s = j["eval"];
    check_keys(s, "eval", {"k", "modes", "studies", "construction_label", "seed"});
    auto& es = c.eval;
    get(s, "k", es.k);
    get(s, "seed", es.seed);
    if (s.contains("modes")) {
      std::vector<std::string> names;
      get(s, "modes", names);
      es.modes.clear();
      for (const auto& n : names) es.modes.push_back(mode_of(n));
    }
    if (s.contains("studies")) {
      std::vector<std::string> names;
      get(s, "studies", names);
      es.studies.clear();
      for (const auto& n : names) es.studies.push_back(study_of(n));
    }
    if (s.contains("construction_label")) {
      std::string l;
      get(s, "construction_label", l);
      es.construction_label = label_of(l);
    }
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw UsageError("cannot read config " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string PipelineConfig::to_json() const {
  ordered_json j;
  j["output_dir"] = output_dir;
  ordered_json cj;
  cj["families"] = corpus.families;
  cj["profile"] = corpus.profile;
  cj["recipes"] = corpus.recipes;
  cj["per_cell"] = corpus.per_cell;
  cj["seed"] = corpus.seed;
  cj["semantic_inputs"] = corpus.semantic_inputs;
  cj["max_retries"] = corpus.max_retries;
  cj["opaque_min"] = corpus.opaque_min;
  cj["opaque_max"] = corpus.opaque_max;
  cj["density"] = corpus.density;
  ordered_json pools = ordered_json::object();
  for (const auto& [l, cs] : corpus.pools) {
    ordered_json names = ordered_json::array();
    for (auto c : cs) names.push_back(std::string(construction_name(c)));
    pools[std::string(label_name(l))] = names;
  }
  cj["pools"] = pools;
  j["corpus"] = cj;

  ordered_json lj;
  lj["n_trees"] = learner.n_trees;
  lj["max_depth"] = learner.max_depth;
  lj["min_leaf"] = learner.min_leaf;
  lj["max_features"] = learner.max_features;
  ordered_json members = ordered_json::array();
  for (auto k : learner.members) members.push_back(std::string(learn::forest_kind_name(k)));
  lj["members"] = members;
  lj["multilabel"] = std::string(learn::multilabel_kind_name(learner.multilabel));
  lj["seed"] = learner.seed;
  j["learner"] = lj;

  ordered_json ej;
  ej["k"] = eval.k;
  ordered_json modes = ordered_json::array();
  for (auto m : eval.modes) modes.push_back(std::string(eval::fold_mode_name(m)));
  ej["modes"] = modes;
  ordered_json studies = ordered_json::array();
  for (auto s : eval.studies) studies.push_back(std::string(eval::study_name(s)));
  ej["studies"] = studies;
  ej["construction_label"] = std::string(label_name(eval.construction_label));
  ej["seed"] = eval.seed;
  j["eval"] = ej;
  return j.dump(2) + "\n";
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& m) { throw UsageError("invalid config: " + m); };
  if (!corpus::parse_profile(corpus.profile)) fail("unknown profile '" + corpus.profile + "'");
  if (!corpus.families.empty() && corpus.families.size() < 2) fail("at least two families are required");
  for (const auto& f : corpus.families) {
    try {
      (void)corpus::family(f);
    } catch (const DataError&) {
      fail("unknown family '" + f + "'");
    }
  }
  if (corpus.recipes.empty()) fail("recipe list is empty");
  try {
    (void)corpus_config();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    fail(e.what());
  }
  if (corpus.per_cell < 1) fail("per_cell must be at least 1");
  if (corpus.semantic_inputs < 1) fail("semantic_inputs must be at least 1");
  if (corpus.max_retries < 0) fail("max_retries must be non-negative");
  if (corpus.opaque_min < 1 || corpus.opaque_max < corpus.opaque_min) fail("opaque count range is empty");
  if (!(corpus.density > 0.0 && corpus.density <= 1.0)) fail("density must lie in (0, 1]");
  for (const auto& [l, cs] : corpus.pools) {
    if (cs.empty()) fail("empty construction pool for " + std::string(label_name(l)));
    for (auto c : cs) {
      if (!construction_valid_for(l, c)) {
        fail(std::string(construction_name(c)) + " is not a construction of " + std::string(label_name(l)));
      }
    }
  }
  if (learner.n_trees < 1) fail("n_trees must be at least 1");
  if (learner.max_depth < 0) fail("max_depth must be non-negative");
  if (learner.min_leaf < 1) fail("min_leaf must be at least 1");
  if (learner.max_features < 0) fail("max_features must be non-negative");
  if (learner.members.empty()) fail("ensemble needs at least one member");
  if (eval.k < 2) fail("k must be at least 2");
  if (eval.modes.empty()) fail("no fold modes");
  if (constructions_for(eval.construction_label).front() == Construction::Default) {
    fail(std::string(label_name(eval.construction_label)) + " has no constructions");
  }
  if (output_dir.empty()) fail("output_dir is empty");
}

std::uint64_t PipelineConfig::digest() const { return feat::fnv1a(to_json()); }

corpus::CorpusConfig PipelineConfig::corpus_config() const {
  const auto profile = corpus::parse_profile(corpus.profile);
  if (!profile) throw UsageError("unknown profile '" + corpus.profile + "'");
  corpus::CorpusConfig c;
  c.families = corpus.families;
  for (const auto& r : corpus.recipes) {
    if (r == "stock") {
      for (auto& s : corpus::stock_recipes(*profile)) c.recipes.push_back(std::move(s));
    } else if (r == "single") {
      for (auto& s : corpus::single_layer_recipes()) c.recipes.push_back(std::move(s));
    } else {
      c.recipes.push_back(corpus::StackRecipe::parse(r, corpus.profile));
    }
  }
  c.per_cell = corpus.per_cell;
  c.master_seed = corpus.seed;
  c.semantic_inputs = corpus.semantic_inputs;
  c.max_retries = corpus.max_retries;
  c.opaque_min = corpus.opaque_min;
  c.opaque_max = corpus.opaque_max;
  c.density = corpus.density;
  c.pool_overrides = corpus.pools;
  return c;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t file_digest(const fs::path& file) { return feat::fnv1a(read_file(file)); }

std::uint64_t tree_digest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::uint64_t h = feat::fnv1a("");
  for (const auto& f : files) {
    h = feat::fnv1a(fs::relative(f, dir).generic_string(), h);
    h = feat::fnv1a(hex64(file_digest(f)), h);
  }
  return h;
}

std::string RunManifest::to_json() const {
  ordered_json j;
  j["tool_version"] = tool_version;
  j["config_digest"] = config_digest;
  ordered_json entries_j = ordered_json::array();
  for (const auto& e : entries) {
    ordered_json ej;
    ej["stage"] = e.stage;
    auto pairs = [](const auto& v) {
      ordered_json a = ordered_json::array();
      for (const auto& [p, d] : v) a.push_back({{"path", p}, {"digest", d}});
      return a;
    };
    ej["inputs"] = pairs(e.inputs);
    ej["outputs"] = pairs(e.outputs);
    ej["seconds"] = e.seconds;
    entries_j.push_back(ej);
  }
  j["entries"] = entries_j;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(std::string_view text) {
  RunManifest m;
  try {
    const auto j = ordered_json::parse(text);
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config_digest = j.at("config_digest").get<std::string>();
    for (const auto& ej : j.at("entries")) {
      ManifestEntry e;
      e.stage = ej.at("stage").get<std::string>();
      for (const auto& p : ej.at("inputs")) e.inputs.emplace_back(p.at("path"), p.at("digest"));
      for (const auto& p : ej.at("outputs")) e.outputs.emplace_back(p.at("path"), p.at("digest"));
      e.seconds = ej.at("seconds").get<double>();
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed run manifest: ") + e.what());
  }
  return m;
}

RunManifest RunManifest::load(const fs::path& dir) {
  const fs::path p = dir / "run_manifest.json";
  if (!fs::exists(p)) return {};
  return from_json(read_file(p));
}

void RunManifest::save(const fs::path& dir) const { write_file(dir / "run_manifest.json", to_json()); }

fs::path workspace_root() {
  if (const char* w = std::getenv("OBFDETECT_WORKSPACE"); w && *w) return fs::path(w);
  return fs::current_path();
}

fs::path resolve(const fs::path& p) { return p.is_absolute() ? p : workspace_root() / p; }

GenPlan plan_gen(const PipelineConfig& cfg) {
  const auto cc = cfg.corpus_config();
  std::vector<std::string> fams = cc.families;
  if (fams.empty()) {
    for (const auto& f : corpus::families()) fams.push_back(f.name);
  }
  GenPlan plan;
  for (std::size_t r = 0; r < cc.recipes.size(); ++r) {
    for (const auto& f : fams) plan.cell_names.push_back(f + "/" + cc.recipes[r].name());
  }
  plan.cells = plan.cell_names.size();
  plan.samples = plan.cells * static_cast<std::size_t>(cc.per_cell);
  return plan;
}

std::size_t cmd_gen(const PipelineConfig& cfg, const fs::path& out) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto samples = corpus::generate_corpus(cfg.corpus_config());
  corpus::write_corpus(out, samples);
  write_file(out / "config.json", cfg.to_json());
  ManifestEntry e;
  e.stage = "gen";
  e.outputs = {digest_entry(out / "samples"), digest_entry(out / "manifest.tsv"), digest_entry(out / "config.json")};
  e.seconds = seconds_since(t0);
  record(out, hex64(cfg.digest()), std::move(e));
  return samples.size();
}

std::size_t cmd_rawdata(const fs::path& corpus_dir, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto samples = corpus::read_corpus(corpus_dir);
  if (samples.empty()) throw feat::EmptyCorpus("corpus " + corpus_dir.string() + " has no samples");
  std::vector<norm::RawDocument> docs;
  docs.reserve(samples.size());
  for (const auto& s : samples) {
    try {
      docs.push_back(norm::to_raw_document(s));
    } catch (const MalformedIR& e) {
      throw MalformedIR("sample " + s.id + ": " + e.what());
    }
    if (!norm::renumber_scope_check(docs.back().text).empty()) {
      throw Error("normalized document " + s.id + " fails the renumbering scope check");
    }
  }
  norm::write_rawdata(out, docs);
  ManifestEntry e;
  e.stage = "rawdata";
  e.inputs = {digest_entry(corpus_dir / "samples"), digest_entry(corpus_dir / "manifest.tsv")};
  e.outputs = {digest_entry(out / "docs"), digest_entry(out / "index.tsv")};
  e.seconds = seconds_since(t0);
  record(out, upstream_config_digest(corpus_dir), std::move(e));
  return docs.size();
}

std::string ModelBundle::serialize() const {
  std::string s = "obfdetect-bundle 1\n";
  s += "config_digest " + config_digest + "\n";
  s += "construction_label " +
       (construction_label ? std::string(label_name(*construction_label)) : std::string("-")) + "\n";
  s += "vocabulary " + std::to_string(vocab.size()) + "\n";
  for (const auto& t : vocab.tokens) s += t + "\n";
  s += learn::serialize_model(model);
  return s;
}

ModelBundle ModelBundle::deserialize(std::string_view text) {
  std::size_t pos = 0;
  auto line = [&]() {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) throw learn::ModelFormatError("truncated model bundle");
    std::string_view l = text.substr(pos, nl - pos);
    pos = nl + 1;
    return l;
  };
  auto field = [&](std::string_view key) {
    const std::string_view l = line();
    if (l.substr(0, key.size() + 1) != std::string(key) + " ") {
      throw learn::ModelFormatError("model bundle: expected '" + std::string(key) + "'");
    }
    return std::string(l.substr(key.size() + 1));
  };
  if (line() != "obfdetect-bundle 1") throw learn::ModelFormatError("not an obfdetect model bundle");
  ModelBundle b;
  b.config_digest = field("config_digest");
  const std::string label = field("construction_label");
  if (label != "-") {
    const auto l = parse_label(label);
    if (!l) throw learn::ModelFormatError("model bundle: unknown label '" + label + "'");
    b.construction_label = *l;
  }
  std::size_t n = 0;
  try {
    n = std::stoul(field("vocabulary"));
  } catch (const std::logic_error&) {
    throw learn::ModelFormatError("model bundle: bad vocabulary size");
  }
  std::vector<std::string> tokens;
  tokens.reserve(n);
  for (std::size_t i = 0; i < n; ++i) tokens.emplace_back(line());
  b.vocab = feat::Vocabulary::from_tokens(std::move(tokens));
  b.model = learn::deserialize_model(text.substr(pos), b.vocab.fingerprint);
  if (b.construction_label.has_value() != (b.model.task == "multiclass")) {
    throw learn::ModelFormatError("model bundle: task does not match the construction label");
  }
  return b;
}

ModelBundle train_bundle(const std::vector<norm::RawDocument>& docs, const TrainOptions& opts) {
  std::vector<norm::RawDocument> used;
  if (opts.task == TrainTask::Construction) {
    for (const auto& d : docs) {
      if (d.constructions.contains(opts.construction_label)) used.push_back(d);
    }
  } else {
    used = docs;
  }
  if (used.empty()) throw feat::EmptyCorpus("no documents to train on");
  const eval::EvalData data = opts.task == TrainTask::Construction
                                  ? eval::construction_data(used, opts.construction_label)
                                  : eval::multilabel_data(used);
  ModelBundle b;
  b.config_digest = opts.config_digest;
  b.vocab = feat::fit_vocabulary(std::span<const feat::TokenCounts>(data.docs));
  feat::FeatureMatrix X(data.size(), b.vocab.size());
  for (std::size_t i = 0; i < data.size(); ++i) feat::transform_into(data.docs[i], b.vocab, X.row(i));
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  b.model.vocab_fingerprint = b.vocab.fingerprint;
  if (opts.task == TrainTask::Construction) {
    if (data.classes.size() < 2) throw DataError("construction model needs at least two constructions");
    b.construction_label = opts.construction_label;
    b.model.task = "multiclass";
    b.model.multiclass = learn::train_multiclass(X, data.y, data.classes, rows, opts.learner.ensemble());
  } else {
    if (data.labels.empty()) throw DataError("training documents carry no transformation labels");
    learn::MultiLabelParams mp;
    mp.kind = opts.learner.multilabel;
    mp.ensemble = opts.learner.ensemble();
    b.model.task = "multilabel";
    b.model.multilabel = learn::train_multilabel(X, data.sets, data.labels, rows, mp);
  }
  return b;
}

void cmd_train(const fs::path& rawdata_dir, const TrainOptions& opts, const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto docs = norm::read_rawdata(rawdata_dir);
  TrainOptions o = opts;
  if (o.config_digest == "-") o.config_digest = upstream_config_digest(rawdata_dir);
  const ModelBundle b = train_bundle(docs, o);
  write_file(out, b.serialize());
  ManifestEntry e;
  e.stage = "train:" + out.filename().string();
  e.inputs = {digest_entry(rawdata_dir / "docs"), digest_entry(rawdata_dir / "index.tsv")};
  e.outputs = {digest_entry(out)};
  e.seconds = seconds_since(t0);
  record(out.has_parent_path() ? out.parent_path() : fs::path("."), o.config_digest, std::move(e));
}

std::string Prediction::to_string() const {
  std::string s = labels.to_string();
  for (const auto& [l, c] : constructions) {
    s += " " + std::string(label_name(l)) + "=" + std::string(construction_name(c));
  }
  return s;
}

std::string document_for_input(const fs::path& input) {
  const std::string text = read_file(input);
  if (input.extension() == ".mir") {
    const mir::Function f = mir::parse_function(text);
    return norm::normalize(sym::exec_function(f));
  }
  return text;
}

Prediction predict_text(const ModelBundle& model, const std::vector<ModelBundle>& construction_models,
                        std::string_view document) {
  if (model.model.task != "multilabel") throw UsageError("the main model must be a multi-label model");
  const feat::TokenCounts tc = feat::count_tokens(document);
  std::vector<double> x(model.vocab.size());
  feat::transform_into(tc, model.vocab, x);
  Prediction p;
  p.labels = learn::predict_multilabel(model.model.multilabel, x);
  for (const auto& cm : construction_models) {
    if (!cm.construction_label) throw UsageError("construction model expected, got a multi-label model");
    if (!p.labels.contains(*cm.construction_label)) continue;
    std::vector<double> xc(cm.vocab.size());
    feat::transform_into(tc, cm.vocab, xc);
    const int k = learn::predict_multiclass(cm.model.multiclass, xc);
    const auto c = parse_construction(cm.model.multiclass.classes.at(static_cast<std::size_t>(k)));
    if (!c) throw learn::ModelFormatError("construction model has an unknown class");
    p.constructions[*cm.construction_label] = *c;
  }
  return p;
}

Prediction cmd_predict(const fs::path& model, const std::vector<fs::path>& construction_models,
                       const fs::path& input) {
  const ModelBundle m = ModelBundle::deserialize(read_file(model));
  std::vector<ModelBundle> cms;
  for (const auto& p : construction_models) cms.push_back(ModelBundle::deserialize(read_file(p)));
  return predict_text(m, cms, document_for_input(input));
}

void cmd_evaluate(const fs::path& rawdata_dir, const PipelineConfig& cfg, const fs::path& out,
                  const std::optional<fs::path>& test_rawdata) {
  cfg.validate();
  if (cfg.eval.studies.empty()) throw UsageError("no studies selected");
  const auto docs = norm::read_rawdata(rawdata_dir);
  std::vector<norm::RawDocument> test_docs;
  for (auto id : cfg.eval.studies) {
    if (id == eval::StudyId::E_crossobf) {
      if (!test_rawdata) throw UsageError("E_crossobf needs a test raw-data directory");
      test_docs = norm::read_rawdata(*test_rawdata);
    }
  }
  eval::StudyConfig sc;
  sc.k = cfg.eval.k;
  sc.seed = cfg.eval.seed;
  sc.modes = cfg.eval.modes;
  sc.ensemble = cfg.learner.ensemble();
  sc.construction_label = cfg.eval.construction_label;

  fs::create_directories(out);
  write_file(out / "config.json", cfg.to_json());
  for (auto id : cfg.eval.studies) {
    const auto t0 = std::chrono::steady_clock::now();
    const eval::StudyBundle b = eval::run_study(id, docs, sc, test_docs);
    std::string stem(eval::study_name(id));
    if (id == eval::StudyId::S4) stem += "_" + std::string(label_name(sc.construction_label));
    ordered_json j = ordered_json::parse(eval::bundle_to_json(b));
    j["config_digest"] = hex64(cfg.digest());
    j["seed"] = sc.seed;
    write_file(out / (stem + ".json"), j.dump(2) + "\n");
    write_file(out / (stem + ".txt"), eval::render_table(b));
    write_file(out / (stem + ".timings.json"), eval::timings_to_json(b));
    ManifestEntry e;
    e.stage = "evaluate:" + stem;
    e.inputs = {digest_entry(rawdata_dir / "docs"), digest_entry(rawdata_dir / "index.tsv")};
    if (id == eval::StudyId::E_crossobf) e.inputs.push_back(digest_entry(*test_rawdata / "index.tsv"));
    e.outputs = {digest_entry(out / (stem + ".json")), digest_entry(out / (stem + ".txt")),
                 digest_entry(out / (stem + ".timings.json"))};
    e.seconds = seconds_since(t0);
    record(out, hex64(cfg.digest()), std::move(e));
  }
}

std::string cmd_report(const fs::path& eval_dir) {
  if (!fs::is_directory(eval_dir)) throw DataError("no evaluation directory " + eval_dir.string());
  std::vector<fs::path> tables;
  for (const auto& e : fs::directory_iterator(eval_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") tables.push_back(e.path());
  }
  if (tables.empty()) throw DataError("no study tables in " + eval_dir.string());
  std::sort(tables.begin(), tables.end());
  std::string out;
  for (const auto& t : tables) {
    fs::path json = t;
    json.replace_extension(".json");
    if (fs::exists(json)) {
      const auto j = ordered_json::parse(read_file(json));
      out += "# " + j.value("study", t.stem().string()) + " (config " + j.value("config_digest", "-") + ", seed " +
             std::to_string(j.value("seed", 0ull)) + ")\n";
    }
    out += read_file(t);
  }
  return out;
}

}  // namespace obfdetect::pipeline
