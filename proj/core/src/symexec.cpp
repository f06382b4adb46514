#include "obfdetect/symexec.hpp"

#include <array>
#include <bit>

namespace obfdetect::sym {

using mir::Opcode;
using mir::Reg;

std::string init_name(Reg r) { return std::string(mir::reg_name(r)) + "_init"; }

unsigned reg_size(Reg r) { return mir::is_flag(r) ? 1 : 64; }

const Expr* SymbolicState::find(const Expr& key) const {
  for (const auto& [k, v] : assignments) {
    if (equal(k, key)) return &v;
  }
  return nullptr;
}

namespace {

Expr int64(std::uint64_t v) { return make_int(v, 64); }
Expr bit(std::uint64_t v) { return make_int(v, 1); }

// Splits base + c1 + c2 + ... into (root, sum of constants).
std::pair<Expr, std::uint64_t> split_offset(const Expr& e) {
  if (e->kind == Node::Kind::Op && e->op == OpKind::Add && e->args.size() == 2 &&
      e->args[1]->kind == Node::Kind::Int) {
    auto [root, sum] = split_offset(e->args[0]);
    return {root, sum + e->args[1]->value};
  }
  return {e, 0};
}

// Canonical address form root + constant, so implicit stack arithmetic and
// base+offset addressing produce structurally comparable addresses.
Expr address_of(const Expr& base, std::int64_t offset) {
  auto [root, sum] = split_offset(base);
  const std::uint64_t total = sum + static_cast<std::uint64_t>(offset);
  if (root->kind == Node::Kind::Int) return int64(root->value + total);
  if (total == 0) return root;
  return make_op(OpKind::Add, {root, int64(total)}, 64);
}

OpKind alu_kind(Opcode op) {
  switch (op) {
    case Opcode::Add: return OpKind::Add;
    case Opcode::Sub: return OpKind::Sub;
    case Opcode::Mul: return OpKind::Mul;
    case Opcode::UDiv: return OpKind::UDiv;
    case Opcode::UMod: return OpKind::UMod;
    case Opcode::And: return OpKind::And;
    case Opcode::Or: return OpKind::Or;
    case Opcode::Xor: return OpKind::Xor;
    case Opcode::Shl: return OpKind::Shl;
    case Opcode::Shr: return OpKind::Shr;
    default: throw MalformedIR("not an ALU opcode");
  }
}

class BlockExecutor {
 public:
  SymbolicState run(const mir::BasicBlock& b) {
    for (const auto& in : b.instrs) {
      if (static_cast<int>(in.srcs.size()) != mir::opcode_arity(in.op)) {
        throw MalformedIR("arity mismatch in block " + std::to_string(b.id));
      }
      exec(in);
    }
    state_.irdst = terminator(b.term);
    return std::move(state_);
  }

 private:
  std::array<Expr, mir::kNumRegs> regs_{};
  std::vector<std::pair<Expr, Expr>> mem_;  // address -> value, first-write order
  SymbolicState state_;

  Expr reg(Reg r) {
    auto& slot = regs_[mir::index_of(r)];
    if (!slot) slot = make_id(init_name(r), reg_size(r));
    return slot;
  }

  void assign(const Expr& key, const Expr& value) {
    for (auto& [k, v] : state_.assignments) {
      if (equal(k, key)) {
        v = value;
        return;
      }
    }
    state_.assignments.emplace_back(key, value);
  }

  void write_reg(Reg r, const Expr& value) {
    regs_[mir::index_of(r)] = value;
    assign(make_id(std::string(mir::reg_name(r)), reg_size(r)), value);
  }

  Expr read_mem(const Expr& addr) {
    for (auto it = mem_.rbegin(); it != mem_.rend(); ++it) {
      if (equal(it->first, addr)) return it->second;
    }
    return make_mem(addr, 64);
  }

  void write_mem(const Expr& addr, const Expr& value) {
    bool found = false;
    for (auto& [a, v] : mem_) {
      if (equal(a, addr)) {
        v = value;
        found = true;
      }
    }
    if (!found) mem_.emplace_back(addr, value);
    assign(make_mem(addr, 64), value);
  }

  Expr operand(const mir::Operand& o) {
    switch (o.kind) {
      case mir::Operand::Kind::Imm: return int64(o.imm);
      case mir::Operand::Kind::Reg: return reg(o.reg);
      case mir::Operand::Kind::Mem: return read_mem(address_of(reg(o.reg), o.offset));
    }
    return nullptr;
  }

  void result_flags(const Expr& r) {
    write_reg(Reg::ZF, make_cond(r, bit(0), bit(1)));
    write_reg(Reg::NF, make_slice(r, 63, 64));
    write_reg(Reg::PF, make_op(OpKind::Parity, {make_op(OpKind::And, {r, int64(0xff)}, 64)}, 1));
  }

  void arith_flags(Opcode op, const Expr& a, const Expr& b, const Expr& r) {
    Expr cf, of, af;
    switch (op) {
      case Opcode::Add:
        cf = make_op(OpKind::LtU, {r, a}, 1);
        of = make_slice(make_op(OpKind::And, {make_op(OpKind::Xor, {a, r}, 64),
                                              make_op(OpKind::Xor, {b, r}, 64)}, 64), 63, 64);
        af = make_slice(make_op(OpKind::Xor, {a, b, r}, 64), 4, 5);
        break;
      case Opcode::Sub:
      case Opcode::CmpEq:
      case Opcode::CmpLt:
        cf = make_op(OpKind::LtU, {a, b}, 1);
        of = make_slice(make_op(OpKind::And, {make_op(OpKind::Xor, {a, b}, 64),
                                              make_op(OpKind::Xor, {a, r}, 64)}, 64), 63, 64);
        af = make_slice(make_op(OpKind::Xor, {a, b, r}, 64), 4, 5);
        break;
      case Opcode::Mul:
        cf = make_op(OpKind::UMulOvf, {a, b}, 1);
        of = cf;
        af = bit(0);
        break;
      default:
        cf = bit(0);
        of = bit(0);
        af = bit(0);
        break;
    }
    result_flags(r);
    write_reg(Reg::CF, cf);
    write_reg(Reg::OF, of);
    write_reg(Reg::AF, af);
  }

  void exec(const mir::Instruction& in) {
    const auto& s = in.srcs;
    switch (in.op) {
      case Opcode::Const:
      case Opcode::FConst:
      case Opcode::Mov:
      case Opcode::Load:
        write_reg(in.dst.reg, operand(s[0]));
        return;
      case Opcode::Store: {
        Expr v = operand(s[0]);
        write_mem(address_of(reg(in.dst.reg), in.dst.offset), v);
        return;
      }
      case Opcode::Push: {
        Expr v = operand(s[0]);
        Expr sp = address_of(reg(Reg::SP), -8);
        write_reg(Reg::SP, sp);
        write_mem(sp, v);
        return;
      }
      case Opcode::Pop: {
        Expr sp = reg(Reg::SP);
        Expr v = read_mem(address_of(sp, 0));
        write_reg(Reg::SP, address_of(sp, 8));
        write_reg(in.dst.reg, v);
        return;
      }
      case Opcode::FAdd:
      case Opcode::FMul:
        write_reg(in.dst.reg, make_op(in.op == Opcode::FAdd ? OpKind::FAdd : OpKind::FMul,
                                      {reg(s[0].reg), reg(s[1].reg)}, 64));
        return;
      case Opcode::FCmpLt:
        write_reg(in.dst.reg, make_op(OpKind::FLt, {reg(s[0].reg), reg(s[1].reg)}, 1));
        return;
      case Opcode::Not: {
        Expr a = operand(s[0]);
        Expr r = make_op(OpKind::Not, {a}, 64);
        arith_flags(in.op, a, a, r);
        write_reg(in.dst.reg, r);
        return;
      }
      case Opcode::CmpEq:
      case Opcode::CmpLt: {
        Expr a = operand(s[0]);
        Expr b = operand(s[1]);
        Expr r = make_op(OpKind::Sub, {a, b}, 64);
        arith_flags(in.op, a, b, r);
        write_reg(in.dst.reg, make_op(in.op == Opcode::CmpEq ? OpKind::Eq : OpKind::LtU, {a, b}, 1));
        return;
      }
      default: {
        Expr a = operand(s[0]);
        Expr b = operand(s[1]);
        Expr r = make_op(alu_kind(in.op), {a, b}, 64);
        arith_flags(in.op, a, b, r);
        write_reg(in.dst.reg, r);
        return;
      }
    }
  }

  Expr terminator(const mir::Terminator& t) {
    switch (t.kind) {
      case mir::Terminator::Kind::Jump:
        return int64(t.targets[0]);
      case mir::Terminator::Kind::Branch:
        return make_cond(reg(t.reg), int64(t.targets[0]), int64(t.targets[1]));
      case mir::Terminator::Kind::Switch: {
        Expr scrutinee = reg(t.reg);
        Expr e = int64(t.default_target());
        for (std::size_t i = t.case_values.size(); i-- > 0;) {
          e = make_cond(make_op(OpKind::Eq, {scrutinee, int64(t.case_values[i])}, 1),
                        int64(t.targets[i]), e);
        }
        return e;
      }
      case mir::Terminator::Kind::Ret:
        return make_op(OpKind::Ret, {reg(t.reg)}, 64);
    }
    throw MalformedIR("bad terminator");
  }
};

std::uint64_t mask(std::uint64_t v, unsigned size) {
  return size >= 64 ? v : v & ((std::uint64_t{1} << size) - 1);
}

std::optional<Reg> reg_of_init(const std::string& name) {
  constexpr std::string_view suffix = "_init";
  if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
    return std::nullopt;
  }
  return mir::parse_reg(std::string_view(name).substr(0, name.size() - suffix.size()));
}

}  // namespace

SymbolicState exec_block(const mir::BasicBlock& block) { return BlockExecutor{}.run(block); }

FunctionSemantics exec_function(const mir::Function& f) {
  FunctionSemantics sem;
  sem.blocks.reserve(f.blocks.size());
  for (const auto& b : f.blocks) sem.blocks.emplace_back(b.id, exec_block(b));
  return sem;
}

std::uint64_t evaluate(const Expr& e, const mir::MachineState& init) {
  switch (e->kind) {
    case Node::Kind::Id: {
      auto r = reg_of_init(e->name);
      if (!r) throw UnboundSymbol("unbound symbol " + e->name);
      return mask(init.get(*r), e->size);
    }
    case Node::Kind::Int:
      return e->value;
    case Node::Kind::Mem:
      return init.load(evaluate(e->args[0], init));
    case Node::Kind::Slice:
      return mask(evaluate(e->args[0], init) >> e->lo, e->hi - e->lo);
    case Node::Kind::Cond:
      return evaluate(e->args[0], init) != 0 ? evaluate(e->args[1], init)
                                             : evaluate(e->args[2], init);
    case Node::Kind::Op:
      break;
  }
  std::vector<std::uint64_t> v;
  v.reserve(e->args.size());
  for (const auto& a : e->args) v.push_back(evaluate(a, init));
  mir::Flags ignored;
  std::uint64_t r = 0;
  switch (e->op) {
    case OpKind::Add: r = mir::alu(Opcode::Add, v[0], v[1], ignored); break;
    case OpKind::Sub: r = mir::alu(Opcode::Sub, v[0], v[1], ignored); break;
    case OpKind::Mul: r = mir::alu(Opcode::Mul, v[0], v[1], ignored); break;
    case OpKind::UDiv: r = mir::alu(Opcode::UDiv, v[0], v[1], ignored); break;
    case OpKind::UMod: r = mir::alu(Opcode::UMod, v[0], v[1], ignored); break;
    case OpKind::And: r = v[0] & v[1]; break;
    case OpKind::Or: r = v[0] | v[1]; break;
    case OpKind::Xor:
      for (auto x : v) r ^= x;
      break;
    case OpKind::Not: r = ~v[0]; break;
    case OpKind::Shl: r = v[0] << (v[1] & 63); break;
    case OpKind::Shr: r = v[0] >> (v[1] & 63); break;
    case OpKind::Eq: r = v[0] == v[1] ? 1 : 0; break;
    case OpKind::LtU: r = v[0] < v[1] ? 1 : 0; break;
    case OpKind::Parity: r = mir::parity_of_low_byte(v[0]); break;
    case OpKind::UMulOvf:
      r = ((static_cast<unsigned __int128>(v[0]) * v[1]) >> 64) != 0 ? 1 : 0;
      break;
    case OpKind::FAdd:
      r = std::bit_cast<std::uint64_t>(std::bit_cast<double>(v[0]) + std::bit_cast<double>(v[1]));
      break;
    case OpKind::FMul:
      r = std::bit_cast<std::uint64_t>(std::bit_cast<double>(v[0]) * std::bit_cast<double>(v[1]));
      break;
    case OpKind::FLt: r = std::bit_cast<double>(v[0]) < std::bit_cast<double>(v[1]) ? 1 : 0; break;
    case OpKind::Ret: r = v[0]; break;
  }
  return mask(r, e->size);
}

ConcreteDelta concretize(const SymbolicState& s, const mir::MachineState& init) {
  ConcreteDelta d;
  for (const auto& [key, value] : s.assignments) {
    const std::uint64_t v = evaluate(value, init);
    if (key->kind == Node::Kind::Mem) {
      d.mem[evaluate(key->args[0], init)] = v;
    } else {
      auto r = mir::parse_reg(key->name);
      if (!r) throw UnboundSymbol("unknown location " + key->name);
      d.regs[*r] = v;
    }
  }
  if (s.irdst->kind == Node::Kind::Op && s.irdst->op == OpKind::Ret) {
    d.exit = {mir::BlockExit::Kind::Return, 0, evaluate(s.irdst->args[0], init)};
  } else {
    d.exit = {mir::BlockExit::Kind::Goto, static_cast<mir::BlockId>(evaluate(s.irdst, init)), 0};
  }
  return d;
}

mir::MachineState ConcreteDelta::apply(const mir::MachineState& init) const {
  mir::MachineState out = init;
  for (const auto& [r, v] : regs) out.set(r, v);
  for (const auto& [a, v] : mem) out.mem[a] = v;
  if (exit.kind == mir::BlockExit::Kind::Return) out.output.push_back(exit.value);
  return out;
}

std::string print_state(const SymbolicState& s) {
  std::string out;
  for (const auto& [k, v] : s.assignments) out += to_string(k) + " = " + to_string(v) + "\n";
  out += "ExprId('IRDst', size=64) = " + to_string(s.irdst) + "\n";
  return out;
}

std::string print_semantics(const FunctionSemantics& sem) {
  std::string out;
  for (const auto& [id, st] : sem.blocks) {
    out += "block " + std::to_string(id) + ":\n";
    out += print_state(st);
  }
  return out;
}

}  // namespace obfdetect::sym
