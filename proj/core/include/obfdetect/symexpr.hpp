#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace obfdetect::sym {

enum class OpKind : std::uint8_t {
  Add, Sub, Mul, UDiv, UMod, And, Or, Xor, Not, Shl, Shr,
  Eq, LtU, Parity, UMulOvf, FAdd, FMul, FLt, Ret,
};

inline constexpr int kNumOpKinds = static_cast<int>(OpKind::Ret) + 1;

// Miasm-like spelling used by the debug printer ("+", "^", "parity", ...).
std::string_view op_symbol(OpKind op);
// Purely alphanumeric spelling used in raw data ("opadd", "opxor", ...).
std::string_view op_word(OpKind op);
std::string_view op_listing_word(OpKind op);  // "op+", "op^", ...

struct Node;
using Expr = std::shared_ptr<const Node>;

struct Node {
  enum class Kind : std::uint8_t { Id, Int, Op, Mem, Slice, Cond };

  Kind kind;
  unsigned size;             // bit width of the value
  std::string name;          // Id
  std::uint64_t value = 0;   // Int
  OpKind op = OpKind::Add;   // Op
  std::vector<Expr> args;    // Op operands, Mem address, Slice source, Cond (c, then, else)
  unsigned lo = 0, hi = 0;   // Slice bit range [lo, hi)
  std::size_t hash = 0;
};

Expr make_id(std::string name, unsigned size);
Expr make_int(std::uint64_t value, unsigned size);
Expr make_op(OpKind op, std::vector<Expr> args, unsigned size);
Expr make_mem(Expr address, unsigned size);
Expr make_slice(Expr source, unsigned lo, unsigned hi);
Expr make_cond(Expr cond, Expr then_expr, Expr else_expr);

bool equal(const Expr& a, const Expr& b);
std::size_t node_count(const Expr& e);

struct ExprHash {
  std::size_t operator()(const Expr& e) const { return e->hash; }
};
struct ExprEqual {
  bool operator()(const Expr& a, const Expr& b) const { return equal(a, b); }
};

// Listing-style rendering: ExprOp('+', ExprId('R0_init', size=64), ExprInt(0x2, 64))
std::string to_string(const Expr& e);

}  // namespace obfdetect::sym
