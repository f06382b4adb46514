#include "obfdetect/labels.hpp"

#include <array>
#include <bit>

#include "obfdetect/error.hpp"

namespace obfdetect {

namespace {

constexpr std::array<std::string_view, kNumTransformLabels> kLabelNames = {
    "EncA", "EncL", "EncD", "Sub", "AddO", "Flat", "Virt", "Clean"};

constexpr std::array<std::string_view, 14> kConstructionNames = {
    "default",      "arithmetic",     "mba",           "aliasing",
    "symbolic_memory", "floats",      "switch_based",  "ifnest_based",
    "switch_dispatch", "linear_dispatch", "ifnest_dispatch", "poly",
    "xor",          "add"};

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find(sep, start);
    if (end == std::string_view::npos) end = s.size();
    if (end > start) out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

}  // namespace

std::string_view label_name(TransformLabel l) { return kLabelNames[static_cast<int>(l)]; }

std::optional<TransformLabel> parse_label(std::string_view s) {
  for (int i = 0; i < kNumTransformLabels; ++i) {
    if (kLabelNames[i] == s) return static_cast<TransformLabel>(i);
  }
  return std::nullopt;
}

std::string_view construction_name(Construction c) {
  return kConstructionNames[static_cast<int>(c)];
}

std::optional<Construction> parse_construction(std::string_view s) {
  for (std::size_t i = 0; i < kConstructionNames.size(); ++i) {
    if (kConstructionNames[i] == s) return static_cast<Construction>(i);
  }
  return std::nullopt;
}

const std::vector<Construction>& constructions_for(TransformLabel l) {
  static const std::vector<Construction> addo = {Construction::Arithmetic, Construction::Mba,
                                                 Construction::Aliasing, Construction::SymbolicMemory,
                                                 Construction::Floats};
  static const std::vector<Construction> flat = {Construction::SwitchBased, Construction::IfnestBased};
  static const std::vector<Construction> virt = {Construction::SwitchDispatch,
                                                 Construction::LinearDispatch,
                                                 Construction::IfnestDispatch};
  static const std::vector<Construction> encd = {Construction::Poly, Construction::Xor,
                                                 Construction::Add};
  static const std::vector<Construction> other = {Construction::Default};
  switch (l) {
    case TransformLabel::AddO: return addo;
    case TransformLabel::Flat: return flat;
    case TransformLabel::Virt: return virt;
    case TransformLabel::EncD: return encd;
    default: return other;
  }
}

bool construction_valid_for(TransformLabel l, Construction c) {
  for (auto x : constructions_for(l)) {
    if (x == c) return true;
  }
  return false;
}

int LabelSet::size() const { return std::popcount(bits_); }

std::vector<TransformLabel> LabelSet::labels() const {
  std::vector<TransformLabel> out;
  for (auto l : kAllTransformLabels) {
    if (contains(l)) out.push_back(l);
  }
  return out;
}

LabelSet LabelSet::with_clean_rule() const {
  LabelSet s = *this;
  s.erase(TransformLabel::Clean);
  if (s.empty()) s.insert(TransformLabel::Clean);
  return s;
}

std::string LabelSet::to_string() const {
  std::string out;
  for (auto l : labels()) {
    if (!out.empty()) out += ';';
    out += label_name(l);
  }
  return out;
}

LabelSet LabelSet::parse(std::string_view s) {
  LabelSet set;
  for (auto part : split(s, ';')) {
    auto l = parse_label(part);
    if (!l) throw DataError("unknown label '" + std::string(part) + "'");
    set.insert(*l);
  }
  return set;
}

std::string constructions_to_string(const ConstructionMap& m) {
  std::string out;
  for (const auto& [l, c] : m) {
    if (!out.empty()) out += ';';
    out += std::string(label_name(l)) + "=" + std::string(construction_name(c));
  }
  return out;
}

ConstructionMap parse_constructions(std::string_view s) {
  ConstructionMap m;
  for (auto part : split(s, ';')) {
    auto eq = part.find('=');
    if (eq == std::string_view::npos) throw DataError("bad construction entry '" + std::string(part) + "'");
    auto l = parse_label(part.substr(0, eq));
    auto c = parse_construction(part.substr(eq + 1));
    if (!l || !c || !construction_valid_for(*l, *c)) {
      throw DataError("bad construction entry '" + std::string(part) + "'");
    }
    m[*l] = *c;
  }
  return m;
}

}  // namespace obfdetect
