#include <bit>
#include <optional>
#include <set>

#include "pass_util.hpp"

namespace obfdetect::obf {

using namespace mir;
using detail::imm;

namespace {

struct Predicate {
  std::vector<Instruction> code;
  Reg result;
  bool value;  // constant outcome
};

class PredicateBuilder {
 public:
  PredicateBuilder(PassContext& ctx, std::vector<Reg> temps, std::vector<Reg> inputs)
      : ctx_(ctx), temps_(std::move(temps)), inputs_(std::move(inputs)) {}

  std::optional<Predicate> build(Construction c) {
    switch (c) {
      case Construction::Arithmetic: return arithmetic();
      case Construction::Mba: return mba();
      case Construction::Aliasing: return aliasing();
      case Construction::SymbolicMemory: return symbolic_memory();
      case Construction::Floats: return floats();
      default: return std::nullopt;
    }
  }

 private:
  Reg input() { return inputs_[ctx_.below(inputs_.size())]; }

  std::optional<Predicate> arithmetic() {
    if (temps_.size() < 2) return std::nullopt;
    const Reg t1 = temps_[0], t2 = temps_[1], x = input(), y = input();
    Predicate p{{}, t1, true};
    auto& c = p.code;
    switch (ctx_.below(4)) {
      case 0:  // x * (x + 1) is even
        c.push_back(make_binary(Opcode::Add, t1, x, imm(1)));
        c.push_back(make_binary(Opcode::Mul, t1, x, t1));
        c.push_back(make_binary(Opcode::And, t1, t1, imm(1)));
        c.push_back(make_binary(Opcode::CmpEq, t1, t1, imm(0)));
        break;
      case 1:  // x*x + x is even
        c.push_back(make_binary(Opcode::Mul, t1, x, x));
        c.push_back(make_binary(Opcode::Add, t1, t1, x));
        c.push_back(make_binary(Opcode::And, t1, t1, imm(1)));
        c.push_back(make_binary(Opcode::CmpEq, t1, t1, imm(0)));
        break;
      case 2:  // squares are 0 or 1 mod 4
        c.push_back(make_binary(Opcode::Mul, t1, x, x));
        c.push_back(make_binary(Opcode::And, t1, t1, imm(3)));
        c.push_back(make_binary(Opcode::CmpLt, t1, t1, imm(2)));
        break;
      default:  // x*x != 7*y*y - 1 (residues mod 8 are disjoint)
        c.push_back(make_binary(Opcode::Mul, t1, x, x));
        c.push_back(make_binary(Opcode::Mul, t2, y, y));
        c.push_back(make_binary(Opcode::Mul, t2, t2, imm(7)));
        c.push_back(make_binary(Opcode::Sub, t2, t2, imm(1)));
        c.push_back(make_binary(Opcode::CmpEq, t1, t1, t2));
        p.value = false;
        break;
    }
    return p;
  }

  std::optional<Predicate> mba() {
    if (temps_.size() < 2) return std::nullopt;
    const Reg t1 = temps_[0], t2 = temps_[1], x = input(), y = input();
    Predicate p{{}, t1, true};
    auto& c = p.code;
    switch (ctx_.below(3)) {
      case 0:  // (x ^ y) + 2*(x & y) == x + y
        c.push_back(make_binary(Opcode::Xor, t1, x, y));
        c.push_back(make_binary(Opcode::And, t2, x, y));
        c.push_back(make_binary(Opcode::Mul, t2, t2, imm(2)));
        c.push_back(make_binary(Opcode::Add, t1, t1, t2));
        c.push_back(make_binary(Opcode::Add, t2, x, y));
        break;
      case 1:  // (x & ~y) + y == x | y
        c.push_back(make_not(t1, y));
        c.push_back(make_binary(Opcode::And, t1, x, t1));
        c.push_back(make_binary(Opcode::Add, t1, t1, y));
        c.push_back(make_binary(Opcode::Or, t2, x, y));
        break;
      default:  // 2*(x | y) - (x ^ y) == x + y
        c.push_back(make_binary(Opcode::Or, t1, x, y));
        c.push_back(make_binary(Opcode::Mul, t1, t1, imm(2)));
        c.push_back(make_binary(Opcode::Xor, t2, x, y));
        c.push_back(make_binary(Opcode::Sub, t1, t1, t2));
        c.push_back(make_binary(Opcode::Add, t2, x, y));
        break;
    }
    c.push_back(make_binary(Opcode::CmpEq, t1, t1, t2));
    return p;
  }

  std::optional<Predicate> aliasing() {
    if (temps_.size() < 3) return std::nullopt;
    const Reg p0 = temps_[0], p1 = temps_[1], t = temps_[2], x = input(), y = input();
    const std::int64_t span = (kAliasRegionHi - kAliasRegionLo) / 16;
    const std::int64_t o = kAliasRegionLo + 16 * static_cast<std::int64_t>(ctx_.below(span));
    Predicate p{{}, t, true};
    auto& c = p.code;
    c.push_back(make_binary(Opcode::Add, p0, Reg::BP, imm(static_cast<std::uint64_t>(o))));
    c.push_back(make_binary(Opcode::Add, p1, p0, imm(8)));
    c.push_back(make_store(p0, 0, x));
    c.push_back(make_store(p1, 0, y));
    if (ctx_.chance(0.5)) {  // *p0 still holds x
      c.push_back(make_load(t, p0, 0));
      c.push_back(make_binary(Opcode::CmpEq, t, t, x));
    } else {  // *p1 holds y
      c.push_back(make_load(t, p1, 0));
      c.push_back(make_binary(Opcode::Sub, t, t, y));
      c.push_back(make_binary(Opcode::CmpEq, t, t, imm(0)));
    }
    return p;
  }

  std::optional<Predicate> symbolic_memory() {
    if (temps_.size() < 2) return std::nullopt;
    const Reg t1 = temps_[0], t2 = temps_[1], x = input();
    Predicate p{{}, t2, true};
    auto& c = p.code;
    c.push_back(make_binary(Opcode::And, t1, x, imm(7)));
    c.push_back(make_binary(Opcode::Shl, t1, t1, imm(3)));
    c.push_back(make_binary(Opcode::Add, t1, t1, Reg::BP));
    c.push_back(make_load(t2, t1, kOpaqueTable));
    c.push_back(make_binary(Opcode::And, t2, t2, imm(1)));
    if (ctx_.chance(0.5)) {
      c.push_back(make_binary(Opcode::CmpEq, t2, t2, imm(1)));
    } else {
      c.push_back(make_binary(Opcode::CmpEq, t2, t2, imm(0)));
      p.value = false;
    }
    return p;
  }

  std::optional<Predicate> floats() {
    if (temps_.empty()) return std::nullopt;
    const Reg t = temps_[0];
    // dyadic rationals: every sum below is exact
    const double a = static_cast<double>(ctx_.below(1 << 20)) / 16.0;
    const double b = static_cast<double>(ctx_.below(1 << 20)) / 16.0;
    Predicate p{{}, t, true};
    auto& c = p.code;
    c.push_back(make_fconst(Reg::F0, a));
    c.push_back(make_fconst(Reg::F1, b));
    c.push_back(make_fbinary(Opcode::FAdd, Reg::F2, Reg::F0, Reg::F1));
    c.push_back(make_fconst(Reg::F3, 0.25));
    c.push_back(make_fbinary(Opcode::FAdd, Reg::F3, Reg::F2, Reg::F3));
    if (ctx_.chance(0.5)) {
      c.push_back(make_fbinary(Opcode::FCmpLt, t, Reg::F2, Reg::F3));
    } else {
      c.push_back(make_fbinary(Opcode::FCmpLt, t, Reg::F3, Reg::F2));
      p.value = false;
    }
    return p;
  }

  PassContext& ctx_;
  std::vector<Reg> temps_;
  std::vector<Reg> inputs_;
};

bool is_float_op(Opcode op) {
  return op == Opcode::FConst || op == Opcode::FAdd || op == Opcode::FMul || op == Opcode::FCmpLt;
}

// Dead code: a window of donor instructions with registers and immediates
// redrawn from what the function already uses.
std::vector<Instruction> dead_code(const std::vector<std::vector<Instruction>>& donors,
                                   const std::vector<Reg>& regs, PassContext& ctx) {
  std::vector<Instruction> out;
  if (donors.empty()) return out;
  const auto& frag = donors[ctx.below(donors.size())];
  const std::size_t len = std::min<std::size_t>(frag.size(), 3 + ctx.below(6));
  const std::size_t start = ctx.below(frag.size() - len + 1);
  auto redraw = [&](Reg r) { return is_general(r) ? regs[ctx.below(regs.size())] : r; };
  for (std::size_t i = start; i < start + len; ++i) {
    Instruction in = frag[i];
    if (is_float_op(in.op)) continue;
    if (in.dst.is_reg() && in.op != Opcode::Push) in.dst.reg = redraw(in.dst.reg);
    for (auto& s : in.srcs) {
      if (s.is_reg()) {
        s.reg = redraw(s.reg);
      } else if (s.is_imm() && ctx.chance(0.5)) {
        s.imm = in.op == Opcode::Const ? ctx.next() : ctx.below(256);
      }
    }
    out.push_back(in);
  }
  return out;
}

}  // namespace

Function add_opaque(const Function& f, PassContext& ctx, Construction construction, int count) {
  if (count < 1) throw PassError("opaque predicate count must be at least 1");
  if (construction == Construction::Default) construction = Construction::Arithmetic;
  if (!construction_valid_for(TransformLabel::AddO, construction)) {
    throw UnsupportedConstruction("AddO construction '" +
                                  std::string(construction_name(construction)) + "'");
  }
  const auto donors = ctx.donor_fragments.empty() ? detail::own_fragments(f) : ctx.donor_fragments;

  Function out = f;
  std::set<BlockId> dead_ids;
  int inserted = 0;
  for (int attempt = 0; inserted < count && attempt < 20 * count; ++attempt) {
    const Liveness lv(out);
    const RegSet refs = referenced_registers(out);
    std::vector<std::size_t> real;
    for (std::size_t k = 0; k < out.blocks.size(); ++k) {
      if (!dead_ids.contains(out.blocks[k].id)) real.push_back(k);
    }
    const std::size_t bi = real[ctx.below(real.size())];
    const BasicBlock& b = out.blocks[bi];
    const std::size_t split = ctx.below(b.instrs.size() + 1);

    auto temps = detail::free_before(lv, b, split, refs, ctx);
    auto inputs = detail::to_regs(detail::live_before(lv, b, split) & detail::general_mask());
    if (inputs.empty()) {
      // nothing live: any register the predicate does not overwrite will do
      for (Reg r : detail::to_regs(refs & detail::general_mask())) {
        if (std::find(temps.begin(), temps.begin() + std::min<std::ptrdiff_t>(3, std::ssize(temps)), r) ==
            temps.begin() + std::min<std::ptrdiff_t>(3, std::ssize(temps))) {
          inputs.push_back(r);
        }
      }
    }
    if (inputs.empty()) inputs = {Reg::SP};
    auto pred = PredicateBuilder(ctx, temps, inputs).build(construction);
    if (!pred) continue;

    std::vector<Reg> dead_regs = detail::to_regs(refs & detail::general_mask());
    for (Reg t : temps) {
      if (refs.test(index_of(t))) continue;
      dead_regs.push_back(t);
      break;
    }
    if (dead_regs.empty()) dead_regs = {pred->result};

    const BlockId tail_id = out.fresh_block_id();
    const BlockId dead_id = tail_id + 1;
    BasicBlock tail;
    tail.id = tail_id;
    tail.instrs.assign(b.instrs.begin() + static_cast<std::ptrdiff_t>(split), b.instrs.end());
    tail.term = b.term;

    BasicBlock dead;
    dead.id = dead_id;
    dead.instrs = dead_code(donors, dead_regs, ctx);
    dead.term = Terminator::jump(tail_id);

    BasicBlock& head = out.blocks[bi];
    head.instrs.resize(split);
    head.instrs.insert(head.instrs.end(), pred->code.begin(), pred->code.end());
    head.term = pred->value ? Terminator::branch(pred->result, tail_id, dead_id)
                            : Terminator::branch(pred->result, dead_id, tail_id);
    out.blocks.insert(out.blocks.begin() + static_cast<std::ptrdiff_t>(bi) + 1, std::move(tail));
    out.blocks.push_back(std::move(dead));
    dead_ids.insert(dead_id);
    ++inserted;
  }
  if (inserted == 0) throw PassError("no site for an opaque predicate in '" + f.name + "'");

  if (construction == Construction::SymbolicMemory) {
    // table of odd words, filled before the original entry runs
    const Liveness lv(out);
    const RegSet refs = referenced_registers(out);
    auto pool = detail::to_regs(detail::general_mask() & ~lv.live_in(out.entry_block));
    if (pool.empty()) throw PassError("no scratch register at function entry");
    detail::order_pool(pool, refs, ctx);
    BasicBlock pro;
    pro.id = out.fresh_block_id();
    for (int j = 0; j < 8; ++j) {
      pro.instrs.push_back(make_const(pool.front(), ctx.next() | 1));
      pro.instrs.push_back(make_store(Reg::BP, kOpaqueTable + 8 * j, pool.front()));
    }
    pro.term = Terminator::jump(out.entry_block);
    out.blocks.insert(out.blocks.begin(), std::move(pro));
    out.entry_block = out.blocks.front().id;
  }
  return out;
}

}  // namespace obfdetect::obf
