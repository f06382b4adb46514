#include "obfdetect/symexpr.hpp"

#include <array>
#include <cstdio>
#include <functional>

namespace obfdetect::sym {

namespace {

struct OpNames {
  std::string_view symbol, word, listing;
};

constexpr std::array<OpNames, kNumOpKinds> kOpNames = {{
    {"+", "opadd", "op+"},
    {"-", "opsub", "op-"},
    {"*", "opmul", "op*"},
    {"udiv", "opudiv", "opudiv"},
    {"umod", "opumod", "opumod"},
    {"&", "opand", "op&"},
    {"|", "opor", "op|"},
    {"^", "opxor", "op^"},
    {"~", "opnot", "op~"},
    {"<<", "opshl", "op<<"},
    {">>", "opshr", "op>>"},
    {"==", "opeq", "op=="},
    {"<u", "opltu", "op<u"},
    {"parity", "opparity", "opparity"},
    {"umul_ovf", "opumulovf", "opumulovf"},
    {"fadd", "opfadd", "opfadd"},
    {"fmul", "opfmul", "opfmul"},
    {"flt", "opflt", "opflt"},
    {"ret", "opret", "opret"},
}};

std::size_t mix(std::size_t h, std::size_t v) {
  return h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
}

Expr finish(Node n) {
  std::size_t h = mix(static_cast<std::size_t>(n.kind), n.size);
  h = mix(h, std::hash<std::string>{}(n.name));
  h = mix(h, n.value);
  h = mix(h, static_cast<std::size_t>(n.op));
  h = mix(h, (std::size_t{n.lo} << 16) | n.hi);
  for (const auto& a : n.args) h = mix(h, a->hash);
  n.hash = h;
  return std::make_shared<const Node>(std::move(n));
}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string_view op_symbol(OpKind op) { return kOpNames[static_cast<int>(op)].symbol; }
std::string_view op_word(OpKind op) { return kOpNames[static_cast<int>(op)].word; }
std::string_view op_listing_word(OpKind op) { return kOpNames[static_cast<int>(op)].listing; }

Expr make_id(std::string name, unsigned size) {
  Node n;
  n.kind = Node::Kind::Id;
  n.size = size;
  n.name = std::move(name);
  return finish(std::move(n));
}

Expr make_int(std::uint64_t value, unsigned size) {
  Node n;
  n.kind = Node::Kind::Int;
  n.size = size;
  n.value = size >= 64 ? value : value & ((std::uint64_t{1} << size) - 1);
  return finish(std::move(n));
}

Expr make_op(OpKind op, std::vector<Expr> args, unsigned size) {
  Node n;
  n.kind = Node::Kind::Op;
  n.size = size;
  n.op = op;
  n.args = std::move(args);
  return finish(std::move(n));
}

Expr make_mem(Expr address, unsigned size) {
  Node n;
  n.kind = Node::Kind::Mem;
  n.size = size;
  n.args = {std::move(address)};
  return finish(std::move(n));
}

Expr make_slice(Expr source, unsigned lo, unsigned hi) {
  Node n;
  n.kind = Node::Kind::Slice;
  n.size = hi - lo;
  n.args = {std::move(source)};
  n.lo = lo;
  n.hi = hi;
  return finish(std::move(n));
}

Expr make_cond(Expr cond, Expr then_expr, Expr else_expr) {
  Node n;
  n.kind = Node::Kind::Cond;
  n.size = then_expr->size;
  n.args = {std::move(cond), std::move(then_expr), std::move(else_expr)};
  return finish(std::move(n));
}

bool equal(const Expr& a, const Expr& b) {
  if (a == b) return true;
  if (a->hash != b->hash || a->kind != b->kind || a->size != b->size) return false;
  if (a->name != b->name || a->value != b->value || a->op != b->op || a->lo != b->lo ||
      a->hi != b->hi || a->args.size() != b->args.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a->args.size(); ++i) {
    if (!equal(a->args[i], b->args[i])) return false;
  }
  return true;
}

std::size_t node_count(const Expr& e) {
  std::size_t n = 1;
  for (const auto& a : e->args) n += node_count(a);
  return n;
}

std::string to_string(const Expr& e) {
  switch (e->kind) {
    case Node::Kind::Id:
      return "ExprId('" + e->name + "', size=" + std::to_string(e->size) + ")";
    case Node::Kind::Int:
      return "ExprInt(" + hex(e->value) + ", " + std::to_string(e->size) + ")";
    case Node::Kind::Op: {
      std::string s = "ExprOp('" + std::string(op_symbol(e->op)) + "'";
      for (const auto& a : e->args) s += ", " + to_string(a);
      return s + ")";
    }
    case Node::Kind::Mem:
      return "ExprMem(" + to_string(e->args[0]) + ", size=" + std::to_string(e->size) + ")";
    case Node::Kind::Slice:
      return "ExprSlice(" + to_string(e->args[0]) + ", " + std::to_string(e->lo) + ", " +
             std::to_string(e->hi) + ")";
    case Node::Kind::Cond:
      return "ExprCond(" + to_string(e->args[0]) + ", " + to_string(e->args[1]) + ", " +
             to_string(e->args[2]) + ")";
  }
  return {};
}

}  // namespace obfdetect::sym
