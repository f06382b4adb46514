#include "obfdetect/normalizer.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

namespace obfdetect::norm {

using sym::Expr;
using sym::Node;

std::string RenameTable::id(const std::string& name) {
  auto [it, inserted] = ids_.try_emplace(name, ids_.size());
  return "REG" + std::to_string(it->second);
}

std::string RenameTable::constant(std::uint64_t value, unsigned size) {
  auto [it, inserted] = consts_.try_emplace({value, size}, consts_.size());
  return "v" + std::to_string(it->second);
}

std::string Normalizer::expr(const Expr& e) {
  switch (e->kind) {
    case Node::Kind::Id:
      return table_.id(e->name);
    case Node::Kind::Int:
      return table_.constant(e->value, e->size);
    case Node::Kind::Op: {
      std::string s = "ExprOp(";
      s += style_ == Style::Alnum ? sym::op_word(e->op) : sym::op_listing_word(e->op);
      for (const auto& a : e->args) s += ", " + expr(a);
      return s + ")";
    }
    case Node::Kind::Mem: {
      std::string inner = expr(e->args[0]);
      return "ExprMem(" + inner + ", size=" + std::to_string(e->size) + ")";
    }
    case Node::Kind::Slice: {
      std::string inner = expr(e->args[0]);
      return "ExprSlice(" + inner + ", " + std::to_string(e->lo) + ", " + std::to_string(e->hi) + ")";
    }
    case Node::Kind::Cond: {
      std::string c = expr(e->args[0]);
      std::string a = expr(e->args[1]);
      std::string b = expr(e->args[2]);
      return "ExprCond(" + c + ", " + a + ", " + b + ")";
    }
  }
  return {};
}

std::string Normalizer::line(const Expr& lhs, const Expr& rhs) {
  std::string left = (lhs->kind == Node::Kind::Id && lhs->name == kIrDst) ? std::string(kIrDst)
                                                                          : expr(lhs);
  std::string right = expr(rhs);
  return left + " = " + right;
}

std::string normalize(const sym::FunctionSemantics& sem, Style style) {
  Normalizer n(style);
  const Expr irdst = sym::make_id(std::string(kIrDst), 64);
  std::string out;
  bool first = true;
  for (const auto& [id, st] : sem.blocks) {
    if (!first) {
      out += kBlockSeparator;
      out += '\n';
    }
    first = false;
    for (const auto& [k, v] : st.assignments) out += n.line(k, v) + "\n";
    out += n.line(irdst, st.irdst) + "\n";
  }
  return out;
}

namespace {

sym::OpKind op_from_word(std::string_view w) {
  for (int i = 0; i < sym::kNumOpKinds; ++i) {
    auto op = static_cast<sym::OpKind>(i);
    if (sym::op_word(op) == w || sym::op_listing_word(op) == w) return op;
  }
  throw DataError("unknown operator word '" + std::string(w) + "'");
}

class ExprParser {
 public:
  explicit ExprParser(std::string_view s) : s_(s) {}

  void ws() {
    while (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
  }
  bool accept(std::string_view lit) {
    ws();
    if (s_.substr(pos_, lit.size()) == lit) {
      pos_ += lit.size();
      return true;
    }
    return false;
  }
  void expect(std::string_view lit) {
    if (!accept(lit)) fail("expected '" + std::string(lit) + "'");
  }
  std::string_view token() {
    ws();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ')' && s_[pos_] != ' ' &&
           s_[pos_] != '(') {
      ++pos_;
    }
    if (start == pos_) fail("expected token");
    return s_.substr(start, pos_ - start);
  }
  unsigned number() {
    auto t = token();
    unsigned v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) fail("bad number");
    return v;
  }
  Expr expr() {
    if (accept("ExprOp(")) {
      auto op = op_from_word(token());
      std::vector<Expr> args;
      while (accept(",")) args.push_back(expr());
      expect(")");
      unsigned size = 64;
      if (op == sym::OpKind::Eq || op == sym::OpKind::LtU || op == sym::OpKind::Parity ||
          op == sym::OpKind::UMulOvf || op == sym::OpKind::FLt) {
        size = 1;
      }
      return sym::make_op(op, std::move(args), size);
    }
    if (accept("ExprMem(")) {
      Expr a = expr();
      expect(",");
      expect("size=");
      unsigned size = number();
      expect(")");
      return sym::make_mem(a, size);
    }
    if (accept("ExprSlice(")) {
      Expr a = expr();
      expect(",");
      unsigned lo = number();
      expect(",");
      unsigned hi = number();
      expect(")");
      return sym::make_slice(a, lo, hi);
    }
    if (accept("ExprCond(")) {
      Expr c = expr();
      expect(",");
      Expr a = expr();
      expect(",");
      Expr b = expr();
      expect(")");
      return sym::make_cond(c, a, b);
    }
    auto t = token();
    if (t.starts_with("REG")) return sym::make_id(std::string(t), 64);
    if (t.size() > 1 && t[0] == 'v') {
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(t.data() + 1, t.data() + t.size(), v);
      if (ec == std::errc() && p == t.data() + t.size()) return sym::make_int(v, 64);
    }
    fail("unexpected token '" + std::string(t) + "'");
  }
  bool done() {
    ws();
    return pos_ >= s_.size();
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw DataError("normalized text: " + msg + " in '" + std::string(s_) + "'");
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

bool is_allowed_word(std::string_view tok) {
  static constexpr std::string_view kKeywords[] = {"ExprMem", "ExprOp",  "ExprSlice", "ExprCond",
                                                   "IRDst",   "size",    "blocksep"};
  for (auto k : kKeywords) {
    if (tok == k) return true;
  }
  if (std::all_of(tok.begin(), tok.end(), [](char c) { return c >= '0' && c <= '9'; })) return true;
  for (int i = 0; i < sym::kNumOpKinds; ++i) {
    if (sym::op_word(static_cast<sym::OpKind>(i)) == tok) return true;
  }
  // listing-style words keep their alphanumeric prefix ("op" of "op+")
  return tok == "op";
}

}  // namespace

std::vector<std::vector<ParsedLine>> parse_normalized(std::string_view text) {
  std::vector<std::vector<ParsedLine>> blocks(1);
  for (auto line : lines_of(text)) {
    if (line.empty()) continue;
    if (line == kBlockSeparator) {
      blocks.emplace_back();
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string_view::npos) throw DataError("normalized line without '=': " + std::string(line));
    auto lhs_text = line.substr(0, eq);
    ParsedLine pl;
    if (lhs_text == kIrDst) {
      pl.lhs = sym::make_id(std::string(kIrDst), 64);
    } else {
      ExprParser p(lhs_text);
      pl.lhs = p.expr();
      if (!p.done()) p.fail("trailing text");
    }
    ExprParser p(line.substr(eq + 3));
    pl.rhs = p.expr();
    if (!p.done()) p.fail("trailing text");
    blocks.back().push_back(std::move(pl));
  }
  return blocks;
}

std::string renormalize(std::string_view text) {
  Normalizer n(Style::Alnum);
  std::string out;
  auto blocks = parse_normalized(text);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) {
      out += kBlockSeparator;
      out += '\n';
    }
    for (const auto& pl : blocks[i]) out += n.line(pl.lhs, pl.rhs) + "\n";
  }
  return out;
}

std::string_view scope_violation_name(ScopeViolation v) {
  switch (v) {
    case ScopeViolation::RawConstantLeak: return "RawConstantLeak";
    case ScopeViolation::RawRegisterLeak: return "RawRegisterLeak";
    case ScopeViolation::ForbiddenCharacter: return "ForbiddenCharacter";
    case ScopeViolation::NonDenseNumbering: return "NonDenseNumbering";
    case ScopeViolation::OutOfOrderNumbering: return "OutOfOrderNumbering";
  }
  return "Unknown";
}

std::vector<ScopeViolation> renumber_scope_check(std::string_view text) {
  std::set<ScopeViolation> found;
  // first-appearance sequences of REGn and vn indices
  std::vector<std::size_t> reg_order, const_order;
  std::set<std::size_t> reg_seen, const_seen;

  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isalnum(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < text.size() && std::isalnum(static_cast<unsigned char>(text[j]))) ++j;
      std::string_view tok = text.substr(i, j - i);
      i = j;
      auto numbered = [&](std::string_view prefix, std::vector<std::size_t>& order,
                          std::set<std::size_t>& seen) {
        if (!tok.starts_with(prefix) || tok.size() == prefix.size()) return false;
        std::size_t v = 0;
        auto [p, ec] = std::from_chars(tok.data() + prefix.size(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size()) return false;
        if (seen.insert(v).second) order.push_back(v);
        return true;
      };
      if (numbered("REG", reg_order, reg_seen) || numbered("v", const_order, const_seen)) continue;
      if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
        found.insert(ScopeViolation::RawConstantLeak);
      } else if (!is_allowed_word(tok)) {
        found.insert(ScopeViolation::RawRegisterLeak);
      }
      continue;
    }
    if (!(c == '(' || c == ')' || c == ',' || c == '=' || c == ' ' || c == '\n')) {
      found.insert(ScopeViolation::ForbiddenCharacter);
    }
    ++i;
  }
  for (const auto* order : {&reg_order, &const_order}) {
    std::vector<std::size_t> sorted = *order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      if (sorted[k] != k) {
        found.insert(ScopeViolation::NonDenseNumbering);
        break;
      }
    }
    if (!std::is_sorted(order->begin(), order->end())) {
      found.insert(ScopeViolation::OutOfOrderNumbering);
    }
  }
  return {found.begin(), found.end()};
}

}  // namespace obfdetect::norm
