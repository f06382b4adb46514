#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "obfdetect/corpus.hpp"
#include "obfdetect/mir.hpp"
#include "obfdetect/pipeline.hpp"

using namespace obfdetect;
using namespace obfdetect::pipeline;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

PipelineConfig load_config(const std::string& path) {
  return path.empty() ? PipelineConfig{} : PipelineConfig::load(resolve(path));
}

fs::path out_or(const std::string& out, const PipelineConfig& cfg, const char* stage) {
  return resolve(out.empty() ? fs::path(cfg.output_dir) / stage : fs::path(out));
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t c = s.find(',', start);
    const std::string part = s.substr(start, c == std::string::npos ? std::string::npos : c - start);
    if (!part.empty()) out.push_back(part);
    if (c == std::string::npos) break;
    start = c + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Static detection of code obfuscation transformations and their constructions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  std::string config, out;

  auto* gen = app.add_subcommand("gen", "Generate the labeled sample corpus");
  bool dry_run = false;
  gen->add_option("-c,--config", config, "Pipeline config (JSON)");
  gen->add_option("-o,--out", out, "Corpus directory (default <output_dir>/corpus)");
  gen->add_flag("--dry-run", dry_run, "Print the planned cells and write nothing");

  auto* raw = app.add_subcommand("rawdata", "Symbolize and normalize a corpus into raw documents");
  std::string corpus_dir;
  raw->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  raw->add_option("-o,--out", out, "Raw-data directory")->required();

  auto* train = app.add_subcommand("train", "Train a detection or construction model");
  std::string rawdata_dir, task = "multilabel", label = "Virt";
  int trees = 0;
  train->add_option("--rawdata", rawdata_dir, "Raw-data directory")->required();
  train->add_option("-o,--out", out, "Model file")->required();
  train->add_option("-c,--config", config, "Pipeline config supplying learner parameters");
  train->add_option("--task", task, "multilabel or construction")->check(CLI::IsMember({"multilabel", "construction"}));
  train->add_option("--label", label, "Transformation whose constructions are learned (construction task)");
  train->add_option("--trees", trees, "Trees per forest (overrides the config)");

  auto* predict = app.add_subcommand("predict", "Predict transformations of a MIR function or raw document");
  std::string model, input;
  std::vector<std::string> construction_models;
  predict->add_option("-m,--model", model, "Multi-label model file")->required();
  predict->add_option("--construction-model", construction_models, "Construction model file (repeatable)");
  predict->add_option("input", input, "MIR function (.mir) or raw document (.txt)")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Run cross-validation studies");
  std::string studies, test_rawdata;
  evaluate->add_option("--rawdata", rawdata_dir, "Raw-data directory")->required();
  evaluate->add_option("-c,--config", config, "Pipeline config");
  evaluate->add_option("-o,--out", out, "Report directory (default <output_dir>/eval)");
  evaluate->add_option("--studies", studies, "Comma-separated study ids (overrides the config)");
  evaluate->add_option("--test-rawdata", test_rawdata, "Test raw-data directory for E_crossobf");
  evaluate->add_option("--trees", trees, "Trees per forest (overrides the config)");

  auto* report = app.add_subcommand("report", "Print the study tables of an evaluation directory");
  std::string eval_dir;
  report->add_option("eval_dir", eval_dir, "Evaluation directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      const PipelineConfig cfg = load_config(config);
      if (dry_run) {
        const GenPlan plan = plan_gen(cfg);
        for (const auto& c : plan.cell_names) std::cout << c << '\n';
        std::cout << plan.cells << " cells, " << plan.samples << " samples\n";
        return kOk;
      }
      const fs::path dir = out_or(out, cfg, "corpus");
      const std::size_t n = cmd_gen(cfg, dir);
      std::cout << "wrote " << n << " samples to " << dir.string() << '\n';
    } else if (*raw) {
      const std::size_t n = cmd_rawdata(resolve(corpus_dir), resolve(out));
      std::cout << "wrote " << n << " raw documents to " << resolve(out).string() << '\n';
    } else if (*train) {
      const PipelineConfig cfg = load_config(config);
      TrainOptions opts;
      opts.learner = cfg.learner;
      if (trees > 0) opts.learner.n_trees = trees;
      if (!config.empty()) opts.config_digest = hex64(cfg.digest());
      if (task == "construction") {
        opts.task = TrainTask::Construction;
        const auto l = parse_label(label);
        if (!l) throw UsageError("unknown transformation label '" + label + "'");
        opts.construction_label = *l;
      }
      cmd_train(resolve(rawdata_dir), opts, resolve(out));
      std::cout << "wrote model " << resolve(out).string() << '\n';
    } else if (*predict) {
      std::vector<fs::path> cms;
      for (const auto& c : construction_models) cms.push_back(resolve(c));
      std::cout << cmd_predict(resolve(model), cms, resolve(input)).to_string() << '\n';
    } else if (*evaluate) {
      PipelineConfig cfg = load_config(config);
      if (!studies.empty()) {
        cfg.eval.studies.clear();
        for (const auto& s : split_commas(studies)) {
          const auto id = eval::parse_study(s);
          if (!id) throw UsageError("unknown study '" + s + "'");
          cfg.eval.studies.push_back(*id);
        }
      }
      if (trees > 0) cfg.learner.n_trees = trees;
      const fs::path dir = out_or(out, cfg, "eval");
      std::optional<fs::path> test;
      if (!test_rawdata.empty()) test = resolve(test_rawdata);
      cmd_evaluate(resolve(rawdata_dir), cfg, dir, test);
      std::cout << cmd_report(dir);
    } else if (*report) {
      std::cout << cmd_report(resolve(eval_dir));
    }
    return kOk;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const MalformedIR& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const corpus::RecipeFailure& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}
