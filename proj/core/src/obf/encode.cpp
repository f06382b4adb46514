#include <map>
#include <utility>

#include "obfdetect/interp.hpp"
#include "pass_util.hpp"

namespace obfdetect::obf {

using namespace mir;
using detail::imm;

std::uint64_t inverse_mod64(std::uint64_t a) {
  if ((a & 1) == 0) throw PassError("even value has no inverse modulo 2^64");
  // extended Euclid on (2^64, a); Bezout coefficients stay below 2^64 in magnitude
  __int128 old_r = static_cast<__int128>(1) << 64, r = a;
  __int128 old_t = 0, t = 1;
  while (r != 0) {
    const __int128 q = old_r / r;
    old_r = std::exchange(r, old_r - q * r);
    old_t = std::exchange(t, old_t - q * t);
  }
  return static_cast<std::uint64_t>(old_t);
}

Function encode_arithmetic(const Function& f, PassContext& ctx) {
  Function out = f;
  const Liveness lv(f);
  const RegSet refs = referenced_registers(f);
  const double density = ctx.params().density;
  for (auto& b : out.blocks) {
    const BasicBlock& orig = *f.find_block(b.id);
    std::vector<Instruction> code;
    for (std::size_t i = 0; i < orig.instrs.size(); ++i) {
      const Instruction& in = orig.instrs[i];
      const bool candidate = in.op == Opcode::Add || in.op == Opcode::Sub || in.op == Opcode::Xor ||
                             in.op == Opcode::And || in.op == Opcode::Or;
      if (!candidate || !ctx.chance(density)) {
        code.push_back(in);
        continue;
      }
      auto pool = detail::free_around(lv, orig, i, refs, ctx);
      if (pool.size() < 2) {
        code.push_back(in);
        continue;
      }
      const Reg d = in.dst.reg, t1 = pool[0], t2 = pool[1];
      const Operand x = in.srcs[0], y = in.srcs[1];
      const bool alt = ctx.chance(0.5);
      switch (in.op) {
        case Opcode::Add:
          if (alt) {  // x + y == (x | y) + (x & y)
            code.push_back(make_binary(Opcode::Or, t1, x, y));
            code.push_back(make_binary(Opcode::And, t2, x, y));
          } else {  // x + y == (x ^ y) + ((x & y) << 1)
            code.push_back(make_binary(Opcode::Xor, t1, x, y));
            code.push_back(make_binary(Opcode::And, t2, x, y));
            code.push_back(make_binary(Opcode::Shl, t2, t2, imm(1)));
          }
          code.push_back(make_binary(Opcode::Add, d, t1, t2));
          break;
        case Opcode::Sub:
          if (alt) {  // x - y == (x ^ y) - ((~x & y) << 1)
            code.push_back(make_binary(Opcode::Xor, t1, x, y));
            code.push_back(make_not(t2, x));
            code.push_back(make_binary(Opcode::And, t2, t2, y));
            code.push_back(make_binary(Opcode::Shl, t2, t2, imm(1)));
            code.push_back(make_binary(Opcode::Sub, d, t1, t2));
          } else {  // x - y == x + ~y + 1
            code.push_back(make_not(t1, y));
            code.push_back(make_binary(Opcode::Add, t1, t1, imm(1)));
            code.push_back(make_binary(Opcode::Add, d, x, t1));
          }
          break;
        case Opcode::And:
          if (alt) {  // x & y == (x | y) ^ (x ^ y)
            code.push_back(make_binary(Opcode::Or, t1, x, y));
            code.push_back(make_binary(Opcode::Xor, t2, x, y));
            code.push_back(make_binary(Opcode::Xor, d, t1, t2));
          } else {  // x & y == (x + y) - (x | y)
            code.push_back(make_binary(Opcode::Add, t1, x, y));
            code.push_back(make_binary(Opcode::Or, t2, x, y));
            code.push_back(make_binary(Opcode::Sub, d, t1, t2));
          }
          break;
        case Opcode::Or:
          if (alt) {  // x | y == (x & ~y) + y
            code.push_back(make_not(t1, y));
            code.push_back(make_binary(Opcode::And, t1, x, t1));
            code.push_back(make_binary(Opcode::Add, d, t1, y));
          } else {  // x | y == (x ^ y) + (x & y)
            code.push_back(make_binary(Opcode::Xor, t1, x, y));
            code.push_back(make_binary(Opcode::And, t2, x, y));
            code.push_back(make_binary(Opcode::Add, d, t1, t2));
          }
          break;
        default:
          code.push_back(make_binary(Opcode::Or, t1, x, y));
          code.push_back(make_binary(Opcode::And, t2, x, y));
          if (alt) {  // x ^ y == (x | y) & ~(x & y)
            code.push_back(make_not(t2, t2));
            code.push_back(make_binary(Opcode::And, d, t1, t2));
          } else {  // x ^ y == (x | y) - (x & y)
            code.push_back(make_binary(Opcode::Sub, d, t1, t2));
          }
          break;
      }
    }
    b.instrs = std::move(code);
  }
  return out;
}

namespace {

// Appends a computation of `value` into `r` through two constants.
void emit_literal(std::vector<Instruction>& code, Reg r, Reg t, std::uint64_t value, PassContext& ctx) {
  const std::uint64_t a = ctx.next();
  if (ctx.chance(0.5)) {
    code.push_back(make_const(r, a));
    code.push_back(make_const(t, a ^ value));
    code.push_back(make_binary(Opcode::Xor, r, r, t));
  } else {
    code.push_back(make_const(r, a));
    code.push_back(make_const(t, value - a));
    code.push_back(make_binary(Opcode::Add, r, r, t));
  }
}

bool has_immediate(const Instruction& in) {
  if (in.op == Opcode::FConst || in.op == Opcode::Const) return false;
  for (const auto& s : in.srcs) {
    if (s.is_imm()) return true;
  }
  return false;
}

}  // namespace

Function encode_literals(const Function& f, PassContext& ctx) {
  bool any = false;
  for (const auto& b : f.blocks) {
    for (const auto& in : b.instrs) any = any || in.op == Opcode::Const || has_immediate(in);
  }
  if (!any) throw NoLiterals("function '" + f.name + "' has no integer literals");

  Function out = f;
  const Liveness lv(f);
  const RegSet refs = referenced_registers(f);
  const double density = ctx.params().density;
  for (auto& b : out.blocks) {
    const BasicBlock& orig = *f.find_block(b.id);
    std::vector<Instruction> code;
    for (std::size_t i = 0; i < orig.instrs.size(); ++i) {
      const Instruction& in = orig.instrs[i];
      if (in.op == Opcode::Const && ctx.chance(density)) {
        auto pool = detail::free_around(lv, orig, i, refs, ctx);
        if (!pool.empty()) {
          emit_literal(code, in.dst.reg, pool[0], in.srcs[0].imm, ctx);
          continue;
        }
      } else if (has_immediate(in) && ctx.chance(density)) {
        auto pool = detail::free_around(lv, orig, i, refs, ctx);
        Instruction rewritten = in;
        std::vector<Instruction> prefix;
        std::size_t next = 0;
        for (auto& s : rewritten.srcs) {
          if (!s.is_imm()) continue;
          if (next + 2 > pool.size()) break;
          const Reg r = pool[next], t = pool[next + 1];
          next += 2;
          emit_literal(prefix, r, t, s.imm, ctx);
          s = r;
        }
        if (next > 0) {
          code.insert(code.end(), prefix.begin(), prefix.end());
          code.push_back(rewritten);
          continue;
        }
      }
      code.push_back(in);
    }
    b.instrs = std::move(code);
  }
  return out;
}

namespace {

struct Codec {
  Construction kind;
  std::uint64_t k = 0;  // xor/add key; poly multiplier
  std::uint64_t b = 0;  // poly offset
  std::uint64_t k_inv = 0;

  std::uint64_t encode(std::uint64_t v) const {
    switch (kind) {
      case Construction::Xor: return v ^ k;
      case Construction::Add: return v + k;
      default: return k * v + b;
    }
  }
  void emit_encode(std::vector<Instruction>& code, Reg t, Operand v) const {
    switch (kind) {
      case Construction::Xor: code.push_back(make_binary(Opcode::Xor, t, v, imm(k))); break;
      case Construction::Add: code.push_back(make_binary(Opcode::Add, t, v, imm(k))); break;
      default:
        code.push_back(make_binary(Opcode::Mul, t, v, imm(k)));
        code.push_back(make_binary(Opcode::Add, t, t, imm(b)));
        break;
    }
  }
  void emit_decode(std::vector<Instruction>& code, Reg d) const {
    switch (kind) {
      case Construction::Xor: code.push_back(make_binary(Opcode::Xor, d, d, imm(k))); break;
      case Construction::Add: code.push_back(make_binary(Opcode::Sub, d, d, imm(k))); break;
      default:
        code.push_back(make_binary(Opcode::Sub, d, d, imm(b)));
        code.push_back(make_binary(Opcode::Mul, d, d, imm(k_inv)));
        break;
    }
  }
};

bool is_scalar_slot(Reg base, std::int64_t off) {
  return base == Reg::BP && off >= kScalarSlotsLo && off <= -8 && off % 8 == 0;
}

}  // namespace

Function encode_data(const Function& f, PassContext& ctx, Construction codec_kind) {
  if (codec_kind == Construction::Default) codec_kind = Construction::Poly;
  if (!construction_valid_for(TransformLabel::EncD, codec_kind)) {
    throw UnsupportedConstruction("EncD codec '" + std::string(construction_name(codec_kind)) + "'");
  }
  const Liveness lv(f);
  const RegSet refs = referenced_registers(f);

  struct SlotInfo {
    bool stored = false, loaded = false, encodable = true;
  };
  std::map<std::int64_t, SlotInfo> slots;
  for (const auto& b : f.blocks) {
    for (std::size_t i = 0; i < b.instrs.size(); ++i) {
      const auto& in = b.instrs[i];
      if (in.op == Opcode::Load && is_scalar_slot(in.srcs[0].reg, in.srcs[0].offset)) {
        slots[in.srcs[0].offset].loaded = true;
      } else if (in.op == Opcode::Store && is_scalar_slot(in.dst.reg, in.dst.offset)) {
        auto& s = slots[in.dst.offset];
        s.stored = true;
        if (detail::free_around(lv, b, i, refs, ctx).empty()) s.encodable = false;
      }
    }
  }
  std::map<std::int64_t, Codec> chosen;
  for (const auto& [off, s] : slots) {
    if (!(s.stored && s.loaded && s.encodable)) continue;
    Codec c{codec_kind};
    c.k = ctx.next();
    if (codec_kind == Construction::Poly) {
      c.k |= 1;
      c.b = ctx.next();
      c.k_inv = inverse_mod64(c.k);
    }
    chosen.emplace(off, c);
  }
  if (chosen.empty()) throw NoEligibleSlot("function '" + f.name + "' has no encodable local slot");

  Function out = f;
  for (auto& b : out.blocks) {
    const BasicBlock& orig = *f.find_block(b.id);
    std::vector<Instruction> code;
    for (std::size_t i = 0; i < orig.instrs.size(); ++i) {
      const auto& in = orig.instrs[i];
      if (in.op == Opcode::Load && chosen.contains(in.srcs[0].offset) && in.srcs[0].reg == Reg::BP) {
        code.push_back(in);
        chosen.at(in.srcs[0].offset).emit_decode(code, in.dst.reg);
      } else if (in.op == Opcode::Store && in.dst.reg == Reg::BP && chosen.contains(in.dst.offset)) {
        const Reg t = detail::free_around(lv, orig, i, refs, ctx).front();
        const Codec& c = chosen.at(in.dst.offset);
        Operand v = in.srcs[0];
        if (v.is_imm()) {
          code.push_back(make_const(t, v.imm));
          v = t;
        }
        c.emit_encode(code, t, v);
        code.push_back(make_store(Reg::BP, in.dst.offset, t));
      } else {
        code.push_back(in);
      }
    }
    b.instrs = std::move(code);
  }

  // Fresh entry block giving every encoded slot the encoding of zero.
  auto free_at_entry = detail::to_regs(detail::general_mask() & ~lv.live_in(f.entry_block));
  if (free_at_entry.empty()) throw NoEligibleSlot("no scratch register at function entry");
  detail::order_pool(free_at_entry, refs, ctx);
  const Reg t = free_at_entry.front();
  BasicBlock pro;
  pro.id = out.fresh_block_id();
  for (const auto& [off, c] : chosen) {
    pro.instrs.push_back(make_const(t, c.encode(0)));
    pro.instrs.push_back(make_store(Reg::BP, off, t));
  }
  pro.term = Terminator::jump(f.entry_block);
  out.blocks.insert(out.blocks.begin(), pro);
  out.entry_block = pro.id;
  return out;
}

Function substitute_instructions(const Function& f, PassContext& ctx) {
  Function out = f;
  const Liveness lv(f);
  const RegSet refs = referenced_registers(f);
  const double density = ctx.params().density;
  for (auto& b : out.blocks) {
    const BasicBlock& orig = *f.find_block(b.id);
    std::vector<Instruction> code;
    for (std::size_t i = 0; i < orig.instrs.size(); ++i) {
      const Instruction& in = orig.instrs[i];
      if (!is_binary_alu(in.op) || !ctx.chance(density)) {
        code.push_back(in);
        continue;
      }
      const Reg d = in.dst.reg;
      const Operand x = in.srcs[0], y = in.srcs[1];
      if (in.op == Opcode::Xor && x == y && x.is_reg()) {
        code.push_back(make_const(d, 0));
        continue;
      }
      if (in.op == Opcode::Mul && y.is_imm() && y.imm == 2) {
        code.push_back(make_binary(Opcode::Add, d, x, x));
        continue;
      }
      auto pool = detail::free_around(lv, orig, i, refs, ctx);
      if (pool.size() < 2) {
        code.push_back(in);
        continue;
      }
      const Reg t1 = pool[0], t2 = pool[1];
      switch (in.op) {
        case Opcode::Add:  // a + b == a - (0 - b)
          code.push_back(make_binary(Opcode::Sub, t1, imm(0), y));
          code.push_back(make_binary(Opcode::Sub, d, x, t1));
          break;
        case Opcode::Sub:  // a - b == a + (0 - b)
          code.push_back(make_binary(Opcode::Sub, t1, imm(0), y));
          code.push_back(make_binary(Opcode::Add, d, x, t1));
          break;
        case Opcode::And:  // a & b == (a ^ ~b) & a
          code.push_back(make_not(t1, y));
          code.push_back(make_binary(Opcode::Xor, t1, x, t1));
          code.push_back(make_binary(Opcode::And, d, t1, x));
          break;
        case Opcode::Or:  // a | b == (a & b) | (a ^ b)
          code.push_back(make_binary(Opcode::And, t1, x, y));
          code.push_back(make_binary(Opcode::Xor, t2, x, y));
          code.push_back(make_binary(Opcode::Or, d, t1, t2));
          break;
        case Opcode::Xor:  // a ^ b == (~a & b) | (a & ~b)
          code.push_back(make_not(t1, x));
          code.push_back(make_binary(Opcode::And, t1, t1, y));
          code.push_back(make_not(t2, y));
          code.push_back(make_binary(Opcode::And, t2, x, t2));
          code.push_back(make_binary(Opcode::Or, d, t1, t2));
          break;
        default:
          code.push_back(in);
          break;
      }
    }
    b.instrs = std::move(code);
  }
  return out;
}

}  // namespace obfdetect::obf
