#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace obfdetect {

enum class TransformLabel : std::uint8_t { EncA, EncL, EncD, Sub, AddO, Flat, Virt, Clean };

inline constexpr int kNumTransformLabels = 8;
inline constexpr TransformLabel kAllTransformLabels[kNumTransformLabels] = {
    TransformLabel::EncA, TransformLabel::EncL, TransformLabel::EncD, TransformLabel::Sub,
    TransformLabel::AddO, TransformLabel::Flat, TransformLabel::Virt, TransformLabel::Clean};

std::string_view label_name(TransformLabel l);
std::optional<TransformLabel> parse_label(std::string_view s);

enum class Construction : std::uint8_t {
  Default,
  Arithmetic, Mba, Aliasing, SymbolicMemory, Floats,   // AddO
  SwitchBased, IfnestBased,                            // Flat
  SwitchDispatch, LinearDispatch, IfnestDispatch,      // Virt
  Poly, Xor, Add,                                      // EncD
};

std::string_view construction_name(Construction c);
std::optional<Construction> parse_construction(std::string_view s);
const std::vector<Construction>& constructions_for(TransformLabel l);
bool construction_valid_for(TransformLabel l, Construction c);

// Set of transformation labels; Clean is kept explicitly.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::initializer_list<TransformLabel> labels) {
    for (auto l : labels) insert(l);
  }

  void insert(TransformLabel l) { bits_ |= bit(l); }
  void erase(TransformLabel l) { bits_ &= static_cast<std::uint8_t>(~bit(l)); }
  bool contains(TransformLabel l) const { return (bits_ & bit(l)) != 0; }
  bool empty() const { return bits_ == 0; }
  int size() const;
  std::uint8_t bits() const { return bits_; }
  std::vector<TransformLabel> labels() const;

  // Adds Clean when nothing else is present, drops it otherwise.
  LabelSet with_clean_rule() const;

  // "EncA;Flat" (label order), "Clean".
  std::string to_string() const;
  static LabelSet parse(std::string_view s);

  friend bool operator==(const LabelSet&, const LabelSet&) = default;
  friend auto operator<=>(const LabelSet&, const LabelSet&) = default;

 private:
  static std::uint8_t bit(TransformLabel l) { return static_cast<std::uint8_t>(1u << static_cast<int>(l)); }
  std::uint8_t bits_ = 0;
};

using ConstructionMap = std::map<TransformLabel, Construction>;

// "AddO=mba;Flat=switch_based"
std::string constructions_to_string(const ConstructionMap& m);
ConstructionMap parse_constructions(std::string_view s);

}  // namespace obfdetect
