#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "obfdetect/learner.hpp"

namespace obfdetect::learn {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, r.ptr};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_forest(std::ostringstream& out, const ForestModel& f) {
  out << "forest " << forest_kind_name(f.kind) << ' ' << f.seed << ' ' << f.n_features << ' '
      << f.feature_subsample << ' ' << (f.bootstrap ? 1 : 0) << ' ' << f.n_classes.size();
  for (int c : f.n_classes) out << ' ' << c;
  out << ' ' << f.trees.size() << '\n';
  for (const auto& t : f.trees) {
    out << "tree " << t.nodes.size() << ' ' << t.max_depth << ' ' << t.seed << '\n';
    std::size_t width = 0;
    for (int c : t.n_classes) width += static_cast<std::size_t>(c);
    for (const auto& n : t.nodes) {
      if (n.feature >= 0) {
        out << "s " << n.feature << ' ' << fmt_double(n.threshold) << ' ' << n.left << ' ' << n.right << '\n';
      } else {
        out << 'l';
        for (std::size_t i = 0; i < width; ++i) out << ' ' << t.hist[n.hist + i];
        out << '\n';
      }
    }
  }
}

void write_ensemble(std::ostringstream& out, const VotingEnsemble& e) {
  out << "ensemble " << e.members.size() << '\n';
  for (const auto& m : e.members) write_forest(out, m);
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  std::string_view word() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) throw ModelFormatError("unexpected end of model file");
    return text_.substr(start, pos_ - start);
  }

  void expect(std::string_view w) {
    const auto got = word();
    if (got != w) throw ModelFormatError("expected '" + std::string(w) + "', got '" + std::string(got) + "'");
  }

  template <typename T>
  T number() {
    const auto w = word();
    T v{};
    const auto r = std::from_chars(w.data(), w.data() + w.size(), v);
    if (r.ec != std::errc() || r.ptr != w.data() + w.size()) {
      throw ModelFormatError("bad number '" + std::string(w) + "'");
    }
    return v;
  }

  std::uint64_t hex() {
    const auto w = word();
    std::uint64_t v = 0;
    const auto r = std::from_chars(w.data(), w.data() + w.size(), v, 16);
    if (r.ec != std::errc() || r.ptr != w.data() + w.size()) throw ModelFormatError("bad fingerprint");
    return v;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

ForestModel read_forest(Reader& in) {
  in.expect("forest");
  ForestModel f;
  const auto kind = in.word();
  if (kind == "random_forest") {
    f.kind = ForestKind::RandomForest;
  } else if (kind == "extra_trees") {
    f.kind = ForestKind::ExtraTrees;
  } else {
    throw ModelFormatError("unknown forest kind '" + std::string(kind) + "'");
  }
  f.seed = in.number<std::uint64_t>();
  f.n_features = in.number<std::size_t>();
  f.feature_subsample = in.number<std::size_t>();
  f.bootstrap = in.number<int>() != 0;
  const auto outputs = in.number<std::size_t>();
  std::size_t width = 0;
  for (std::size_t k = 0; k < outputs; ++k) {
    f.n_classes.push_back(in.number<int>());
    if (f.n_classes.back() < 1) throw ModelFormatError("bad class count");
    width += static_cast<std::size_t>(f.n_classes.back());
  }
  const auto n_trees = in.number<std::size_t>();
  if (n_trees == 0) throw ModelFormatError("forest without trees");
  for (std::size_t i = 0; i < n_trees; ++i) {
    in.expect("tree");
    TreeModel t;
    t.n_classes = f.n_classes;
    t.n_features = f.n_features;
    const auto n_nodes = in.number<std::size_t>();
    t.max_depth = in.number<int>();
    t.seed = in.number<std::uint64_t>();
    for (std::size_t j = 0; j < n_nodes; ++j) {
      TreeNode n;
      const auto tag = in.word();
      if (tag == "s") {
        n.feature = in.number<int>();
        n.threshold = in.number<double>();
        n.left = in.number<int>();
        n.right = in.number<int>();
        const auto lim = static_cast<int>(n_nodes);
        if (n.feature < 0 || static_cast<std::size_t>(n.feature) >= f.n_features || n.left <= 0 ||
            n.right <= 0 || n.left >= lim || n.right >= lim) {
          throw ModelFormatError("bad split node");
        }
      } else if (tag == "l") {
        n.hist = static_cast<std::uint32_t>(t.hist.size());
        for (std::size_t c = 0; c < width; ++c) t.hist.push_back(in.number<std::uint32_t>());
      } else {
        throw ModelFormatError("bad node tag '" + std::string(tag) + "'");
      }
      t.nodes.push_back(n);
    }
    if (t.nodes.empty()) throw ModelFormatError("empty tree");
    f.trees.push_back(std::move(t));
  }
  return f;
}

VotingEnsemble read_ensemble(Reader& in) {
  in.expect("ensemble");
  VotingEnsemble e;
  const auto n = in.number<std::size_t>();
  if (n == 0) throw ModelFormatError("ensemble without members");
  for (std::size_t i = 0; i < n; ++i) e.members.push_back(read_forest(in));
  return e;
}

}  // namespace

std::string serialize_model(const ModelFile& m) {
  std::ostringstream out;
  out << "obfdetect-model " << kModelFormatVersion << '\n';
  out << "task " << m.task << '\n';
  out << "fingerprint " << hex64(m.vocab_fingerprint) << '\n';
  if (m.task == "multilabel") {
    const auto& ml = m.multilabel;
    out << "kind " << multilabel_kind_name(ml.kind) << '\n';
    out << "base_dim " << ml.base_dim << '\n';
    out << "order " << ml.order.size();
    for (auto l : ml.order) out << ' ' << label_name(l);
    out << '\n';
    out << "links " << ml.links.size() << '\n';
    for (const auto& e : ml.links) write_ensemble(out, e);
  } else if (m.task == "multiclass") {
    out << "classes " << m.multiclass.classes.size();
    for (const auto& c : m.multiclass.classes) out << ' ' << c;
    out << '\n';
    write_ensemble(out, m.multiclass.ensemble);
  } else {
    throw ModelFormatError("unknown task '" + m.task + "'");
  }
  out << "end\n";
  return out.str();
}

ModelFile deserialize_model(std::string_view text) {
  Reader in(text);
  in.expect("obfdetect-model");
  const int version = in.number<int>();
  if (version != kModelFormatVersion) throw ModelFormatError("unsupported model format " + std::to_string(version));
  ModelFile m;
  in.expect("task");
  m.task = in.word();
  in.expect("fingerprint");
  m.vocab_fingerprint = in.hex();
  if (m.task == "multilabel") {
    auto& ml = m.multilabel;
    in.expect("kind");
    const auto kind = in.word();
    if (kind == "chain") {
      ml.kind = MultiLabelKind::Chain;
    } else if (kind == "binary_relevance") {
      ml.kind = MultiLabelKind::BinaryRelevance;
    } else if (kind == "multi_output") {
      ml.kind = MultiLabelKind::MultiOutput;
    } else {
      throw ModelFormatError("unknown multi-label kind '" + std::string(kind) + "'");
    }
    in.expect("base_dim");
    ml.base_dim = in.number<std::size_t>();
    in.expect("order");
    const auto n = in.number<std::size_t>();
    for (std::size_t i = 0; i < n; ++i) {
      const auto l = parse_label(in.word());
      if (!l) throw ModelFormatError("unknown label in chain order");
      ml.order.push_back(*l);
    }
    in.expect("links");
    const auto links = in.number<std::size_t>();
    const std::size_t want = ml.kind == MultiLabelKind::MultiOutput ? 1 : ml.order.size();
    if (links != want) throw ModelFormatError("link count does not match the label order");
    for (std::size_t i = 0; i < links; ++i) ml.links.push_back(read_ensemble(in));
  } else if (m.task == "multiclass") {
    in.expect("classes");
    const auto n = in.number<std::size_t>();
    for (std::size_t i = 0; i < n; ++i) m.multiclass.classes.emplace_back(in.word());
    m.multiclass.ensemble = read_ensemble(in);
  } else {
    throw ModelFormatError("unknown task '" + m.task + "'");
  }
  in.expect("end");
  return m;
}

ModelFile deserialize_model(std::string_view text, std::uint64_t expected_fingerprint) {
  ModelFile m = deserialize_model(text);
  if (m.vocab_fingerprint != expected_fingerprint) {
    throw ModelFormatError("model was trained on vocabulary " + hex64(m.vocab_fingerprint) + ", not " +
                           hex64(expected_fingerprint));
  }
  return m;
}

}  // namespace obfdetect::learn
