#include "obfdetect/interp.hpp"

#include <bit>
#include <string>
#include <unordered_map>

namespace obfdetect::mir {

MachineState::MachineState() {
  regs[index_of(Reg::SP)] = kStackStart;
  regs[index_of(Reg::BP)] = kFrameBase;
}

std::uint64_t MachineState::get(Reg r) const {
  return is_float(r) ? fregs[index_of(r) - kNumIntRegs] : regs[index_of(r)];
}

void MachineState::set(Reg r, std::uint64_t v) {
  if (is_float(r)) {
    fregs[index_of(r) - kNumIntRegs] = v;
  } else {
    regs[index_of(r)] = v;
  }
}

std::uint64_t MachineState::load(std::uint64_t addr) const {
  auto it = mem.find(addr);
  return it == mem.end() ? 0 : it->second;
}

std::uint64_t parity_of_low_byte(std::uint64_t v) {
  return (std::popcount(v & 0xff) % 2 == 0) ? 1 : 0;
}

std::uint64_t alu(Opcode op, std::uint64_t a, std::uint64_t b, Flags& fl) {
  std::uint64_t r = 0;
  fl.cf = fl.of = fl.af = 0;
  switch (op) {
    case Opcode::Add:
      r = a + b;
      fl.cf = r < a ? 1 : 0;
      fl.of = ((a ^ r) & (b ^ r)) >> 63;
      fl.af = ((a ^ b ^ r) >> 4) & 1;
      break;
    case Opcode::Sub:
    case Opcode::CmpEq:
    case Opcode::CmpLt:
      r = a - b;
      fl.cf = a < b ? 1 : 0;
      fl.of = ((a ^ b) & (a ^ r)) >> 63;
      fl.af = ((a ^ b ^ r) >> 4) & 1;
      break;
    case Opcode::Mul: {
      const unsigned __int128 wide = static_cast<unsigned __int128>(a) * b;
      r = static_cast<std::uint64_t>(wide);
      fl.cf = fl.of = (wide >> 64) != 0 ? 1 : 0;
      break;
    }
    case Opcode::UDiv:
    case Opcode::UMod:
      if (b == 0) throw DivisionByZero("division by zero");
      r = op == Opcode::UDiv ? a / b : a % b;
      break;
    case Opcode::And: r = a & b; break;
    case Opcode::Or: r = a | b; break;
    case Opcode::Xor: r = a ^ b; break;
    case Opcode::Shl: r = a << (b & 63); break;
    case Opcode::Shr: r = a >> (b & 63); break;
    case Opcode::Not: r = ~a; break;
    default:
      throw MalformedIR("not an ALU opcode: " + std::string(opcode_name(op)));
  }
  fl.zf = r == 0 ? 1 : 0;
  fl.nf = r >> 63;
  fl.pf = parity_of_low_byte(r);
  if (op == Opcode::CmpEq) return a == b ? 1 : 0;
  if (op == Opcode::CmpLt) return a < b ? 1 : 0;
  return r;
}

namespace {

struct MapMemory {
  std::map<std::uint64_t, std::uint64_t>& words;
  std::uint64_t load(std::uint64_t addr) const {
    auto it = words.find(addr);
    return it == words.end() ? 0 : it->second;
  }
  void store(std::uint64_t addr, std::uint64_t v) { words[addr] = v; }
};

// Scratch array used by run_function.
struct FrameMemory {
  std::vector<std::uint64_t> words = std::vector<std::uint64_t>((kScratchHi - kScratchLo) / 8, 0);
  std::size_t index(std::uint64_t addr) const {
    if (addr < kScratchLo || addr >= kScratchHi || (addr & 7) != 0) {
      throw MalformedIR("memory access outside scratch array");
    }
    return (addr - kScratchLo) / 8;
  }
  std::uint64_t load(std::uint64_t addr) const { return words[index(addr)]; }
  void store(std::uint64_t addr, std::uint64_t v) { words[index(addr)] = v; }
};

template <class Memory>
struct Machine {
  std::array<std::uint64_t, kNumIntRegs>& regs;
  std::array<std::uint64_t, kNumFloatRegs>& fregs;
  Memory mem;

  std::uint64_t reg(Reg r) const {
    return is_float(r) ? fregs[index_of(r) - kNumIntRegs] : regs[index_of(r)];
  }
  void set(Reg r, std::uint64_t v) {
    if (is_float(r)) {
      fregs[index_of(r) - kNumIntRegs] = v;
    } else {
      regs[index_of(r)] = v;
    }
  }
  std::uint64_t address(Reg base, std::int64_t offset) const {
    return reg(base) + static_cast<std::uint64_t>(offset);
  }
  std::uint64_t value(const Operand& o) const {
    switch (o.kind) {
      case Operand::Kind::Imm: return o.imm;
      case Operand::Kind::Reg: return reg(o.reg);
      case Operand::Kind::Mem: return mem.load(address(o.reg, o.offset));
    }
    return 0;
  }
  void set_flags(const Flags& f) {
    regs[index_of(Reg::ZF)] = f.zf;
    regs[index_of(Reg::NF)] = f.nf;
    regs[index_of(Reg::CF)] = f.cf;
    regs[index_of(Reg::OF)] = f.of;
    regs[index_of(Reg::PF)] = f.pf;
    regs[index_of(Reg::AF)] = f.af;
  }

  void exec(const Instruction& in) {
    const auto& s = in.srcs;
    switch (in.op) {
      case Opcode::Const:
      case Opcode::Mov:
        set(in.dst.reg, value(s[0]));
        return;
      case Opcode::Load:
        set(in.dst.reg, value(s[0]));
        return;
      case Opcode::Store:
        mem.store(address(in.dst.reg, in.dst.offset), value(s[0]));
        return;
      case Opcode::Push: {
        const std::uint64_t v = value(s[0]);
        const std::uint64_t sp = regs[index_of(Reg::SP)] - 8;
        regs[index_of(Reg::SP)] = sp;
        mem.store(sp, v);
        return;
      }
      case Opcode::Pop: {
        const std::uint64_t sp = regs[index_of(Reg::SP)];
        const std::uint64_t v = mem.load(sp);
        regs[index_of(Reg::SP)] = sp + 8;
        set(in.dst.reg, v);
        return;
      }
      case Opcode::FConst:
        set(in.dst.reg, s[0].imm);
        return;
      case Opcode::FAdd:
      case Opcode::FMul: {
        const double a = std::bit_cast<double>(reg(s[0].reg));
        const double b = std::bit_cast<double>(reg(s[1].reg));
        set(in.dst.reg, std::bit_cast<std::uint64_t>(in.op == Opcode::FAdd ? a + b : a * b));
        return;
      }
      case Opcode::FCmpLt: {
        const double a = std::bit_cast<double>(reg(s[0].reg));
        const double b = std::bit_cast<double>(reg(s[1].reg));
        set(in.dst.reg, a < b ? 1 : 0);
        return;
      }
      case Opcode::Not: {
        Flags f;
        const std::uint64_t r = alu(Opcode::Not, value(s[0]), 0, f);
        set_flags(f);
        set(in.dst.reg, r);
        return;
      }
      default: {
        Flags f;
        const std::uint64_t r = alu(in.op, value(s[0]), value(s[1]), f);
        set_flags(f);
        set(in.dst.reg, r);
        return;
      }
    }
  }

  BlockExit exit(const Terminator& t) const {
    switch (t.kind) {
      case Terminator::Kind::Jump:
        return {BlockExit::Kind::Goto, t.targets[0], 0};
      case Terminator::Kind::Branch:
        return {BlockExit::Kind::Goto, reg(t.reg) != 0 ? t.targets[0] : t.targets[1], 0};
      case Terminator::Kind::Switch: {
        const std::uint64_t v = reg(t.reg);
        for (std::size_t i = 0; i < t.case_values.size(); ++i) {
          if (t.case_values[i] == v) return {BlockExit::Kind::Goto, t.targets[i], 0};
        }
        return {BlockExit::Kind::Goto, t.default_target(), 0};
      }
      case Terminator::Kind::Ret:
        return {BlockExit::Kind::Return, 0, reg(t.reg)};
    }
    throw MalformedIR("bad terminator");
  }
};

}  // namespace

std::pair<MachineState, BlockExit> run_block(const BasicBlock& block, const MachineState& state) {
  MachineState next = state;
  Machine<MapMemory> m{next.regs, next.fregs, MapMemory{next.mem}};
  for (const auto& in : block.instrs) {
    if (static_cast<int>(in.srcs.size()) != opcode_arity(in.op)) {
      throw MalformedIR("arity mismatch in block " + std::to_string(block.id));
    }
    m.exec(in);
  }
  BlockExit e = m.exit(block.term);
  if (e.kind == BlockExit::Kind::Return) next.output.push_back(e.value);
  return {std::move(next), e};
}

InterpResult run_function(const Function& f, std::span<const std::uint64_t> args,
                          std::uint64_t fuel) {
  if (args.size() != f.params.size()) {
    throw MalformedIR(f.name + ": expected " + std::to_string(f.params.size()) + " arguments");
  }
  if (fuel == 0) throw MalformedIR("fuel must be positive");
  require_valid(f);

  std::unordered_map<BlockId, std::size_t> index;
  index.reserve(f.blocks.size());
  for (std::size_t i = 0; i < f.blocks.size(); ++i) index[f.blocks[i].id] = i;
  // Resolve every terminator target to a block index once.
  std::vector<std::vector<std::size_t>> succ(f.blocks.size());
  for (std::size_t i = 0; i < f.blocks.size(); ++i) {
    for (BlockId t : f.blocks[i].term.targets) succ[i].push_back(index.at(t));
  }

  MachineState st;
  for (std::size_t i = 0; i < args.size(); ++i) st.set(f.params[i], args[i]);
  Machine<FrameMemory> m{st.regs, st.fregs, FrameMemory{}};

  std::uint64_t steps = 0;
  std::size_t cur = index.at(f.entry_block);
  for (;;) {
    const BasicBlock& b = f.blocks[cur];
    for (const auto& in : b.instrs) {
      if (++steps > fuel) throw FuelExhausted(f.name + ": fuel exhausted");
      m.exec(in);
    }
    if (++steps > fuel) throw FuelExhausted(f.name + ": fuel exhausted");
    const Terminator& t = b.term;
    switch (t.kind) {
      case Terminator::Kind::Ret:
        return {m.reg(t.reg), steps};
      case Terminator::Kind::Jump:
        cur = succ[cur][0];
        break;
      case Terminator::Kind::Branch:
        cur = succ[cur][m.reg(t.reg) != 0 ? 0 : 1];
        break;
      case Terminator::Kind::Switch: {
        const std::uint64_t v = m.reg(t.reg);
        std::size_t pick = t.case_values.size();
        for (std::size_t i = 0; i < t.case_values.size(); ++i) {
          if (t.case_values[i] == v) {
            pick = i;
            break;
          }
        }
        cur = succ[cur][pick];
        break;
      }
    }
  }
}

}  // namespace obfdetect::mir
