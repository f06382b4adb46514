#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "obfdetect/error.hpp"
#include "obfdetect/labels.hpp"
#include "obfdetect/symexec.hpp"

namespace obfdetect::norm {

enum class Style {
  Alnum,    // raw data: operators spelled opadd, opxor, ...
  Listing,  // debug: operators spelled op+, op^, ...
};

inline constexpr std::string_view kBlockSeparator = "blocksep";
inline constexpr std::string_view kIrDst = "IRDst";

// Identifier and constant numbering shared across one document, assigned in
// order of first appearance (left-hand side before right-hand side).
class RenameTable {
 public:
  std::string id(const std::string& name);
  std::string constant(std::uint64_t value, unsigned size);

  std::size_t id_count() const { return ids_.size(); }
  std::size_t constant_count() const { return consts_.size(); }

 private:
  std::map<std::string, std::size_t> ids_;
  std::map<std::pair<std::uint64_t, unsigned>, std::size_t> consts_;
};

class Normalizer {
 public:
  explicit Normalizer(Style style = Style::Alnum) : style_(style) {}

  // One normalized `lhs = rhs` line. A left-hand Id named "IRDst" is kept verbatim.
  std::string line(const sym::Expr& lhs, const sym::Expr& rhs);
  std::string expr(const sym::Expr& e);

  const RenameTable& table() const { return table_; }

 private:
  Style style_;
  RenameTable table_;
};

std::string normalize(const sym::FunctionSemantics& sem, Style style = Style::Alnum);

// Parses normalized text back into expression lines (REGn become Ids, vn
// become Int(n)); blocks are separated by empty entries in the result.
struct ParsedLine {
  sym::Expr lhs;  // Id("IRDst") for destination lines
  sym::Expr rhs;
};
std::vector<std::vector<ParsedLine>> parse_normalized(std::string_view text);

// Re-normalizes parsed lines with a fresh rename table.
std::string renormalize(std::string_view text);

enum class ScopeViolation {
  RawConstantLeak,
  RawRegisterLeak,
  ForbiddenCharacter,
  NonDenseNumbering,
  OutOfOrderNumbering,
};

std::string_view scope_violation_name(ScopeViolation v);

// Checks the rename-table invariants on emitted text.
std::vector<ScopeViolation> renumber_scope_check(std::string_view text);

struct RawDocument {
  std::string id;  // sample file stem
  std::string text;
  LabelSet labels;
  ConstructionMap constructions;
  std::string functionality_tag;
  std::uint64_t seed = 0;
  std::string profile;
  std::string recipe;
};

}  // namespace obfdetect::norm
