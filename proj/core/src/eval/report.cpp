#include <algorithm>
#include <cstdio>
#include <set>

#include "json.hpp"
#include "obfdetect/eval.hpp"

namespace obfdetect::eval {

namespace {

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

}  // namespace

std::string render_table(const StudyBundle& b) {
  std::vector<std::string> models, regimes;
  for (const auto& r : b.reports) {
    if (std::find(models.begin(), models.end(), r.model) == models.end()) models.push_back(r.model);
    if (std::find(regimes.begin(), regimes.end(), r.regime) == regimes.end()) regimes.push_back(r.regime);
  }
  std::string out;
  for (const auto& m : models) {
    const MetricsReport* first = nullptr;
    for (const auto& reg : regimes) {
      if (!first) first = b.find(m, reg);
    }
    if (!first) continue;
    out += b.study + " / " + m + " (F1 per class)\n";
    out += pad("class", 22);
    for (const auto& reg : regimes) out += pad(reg, 10);
    out += '\n';
    std::vector<std::vector<Prf>> prf;
    for (const auto& reg : regimes) {
      const auto* r = b.find(m, reg);
      prf.push_back(r ? r->per_class() : std::vector<Prf>{});
    }
    for (std::size_t c = 0; c < first->classes.size(); ++c) {
      out += pad(first->classes[c], 22);
      for (const auto& p : prf) out += pad(c < p.size() ? fmt3(p[c].f1) : "-", 10);
      out += '\n';
    }
    auto overall = [&](const std::string& name, auto f) {
      out += pad(name, 22);
      for (const auto& reg : regimes) {
        const auto* r = b.find(m, reg);
        out += pad(r ? fmt3(f(*r)) : "-", 10);
      }
      out += '\n';
    };
    if (first->task == Task::Multilabel) {
      overall("exact-match accuracy", [](const MetricsReport& r) { return r.accuracy(); });
      overall("label-mean accuracy", [](const MetricsReport& r) { return r.label_mean_accuracy(); });
    } else {
      overall("accuracy", [](const MetricsReport& r) { return r.accuracy(); });
    }
    overall("oov rate", [](const MetricsReport& r) { return r.oov_rate(); });
    out += '\n';
  }
  return out;
}

std::string bundle_to_json(const StudyBundle& b) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["study"] = b.study;
  ordered_json reports = ordered_json::array();
  for (const auto& r : b.reports) {
    ordered_json jr;
    jr["model"] = r.model;
    jr["regime"] = r.regime;
    jr["task"] = r.task == Task::Multilabel ? "multilabel" : "multiclass";
    jr["classes"] = r.classes;
    jr["accuracy"] = r.accuracy();
    jr["label_mean_accuracy"] = r.label_mean_accuracy();
    jr["oov_rate"] = r.oov_rate();
    ordered_json pc = ordered_json::object();
    const auto prf = r.per_class();
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
      pc[r.classes[c]] = {{"precision", prf[c].precision}, {"recall", prf[c].recall}, {"f1", prf[c].f1}};
    }
    jr["per_class"] = pc;
    ordered_json folds = ordered_json::array();
    for (const auto& f : r.folds) {
      ordered_json jf;
      jf["fold"] = f.fold;
      jf["n_train"] = f.n_train;
      jf["n_test"] = f.n_test;
      jf["exact"] = f.exact;
      jf["label_hits"] = f.label_hits;
      jf["vocab_size"] = f.vocab_size;
      jf["oov_rate"] = f.oov_rate;
      ordered_json conf = ordered_json::array();
      for (const auto& c : f.per_class) conf.push_back({c.tp, c.fp, c.fn, c.tn});
      jf["confusion"] = conf;
      if (!f.matrix.empty()) jf["matrix"] = f.matrix;
      folds.push_back(jf);
    }
    jr["folds"] = folds;
    reports.push_back(jr);
  }
  j["reports"] = reports;
  return j.dump(2) + "\n";
}

std::string timings_to_json(const StudyBundle& b) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["study"] = b.study;
  ordered_json reports = ordered_json::array();
  for (const auto& r : b.reports) {
    ordered_json secs = ordered_json::array();
    for (const auto& f : r.folds) secs.push_back(f.seconds);
    reports.push_back({{"model", r.model}, {"regime", r.regime}, {"total_seconds", r.seconds()}, {"fold_seconds", secs}});
  }
  j["reports"] = reports;
  return j.dump(2) + "\n";
}

}  // namespace obfdetect::eval
