#include "obfdetect/mir.hpp"

#include <array>
#include <bit>
#include <set>
#include <unordered_set>

namespace obfdetect::mir {

namespace {

constexpr std::array<std::string_view, kNumRegs> kRegNames = {
    "R0", "R1", "R2",  "R3",  "R4",  "R5",  "R6",  "R7",  "R8", "R9",
    "R10", "R11", "R12", "R13", "R14", "R15", "SP", "BP", "zf", "nf",
    "cf", "of", "pf", "af", "F0", "F1", "F2", "F3"};

constexpr std::array<std::string_view, kNumOpcodes> kOpcodeNames = {
    "const", "mov", "add", "sub", "mul",   "udiv",  "umod",   "and",
    "or",    "xor", "not", "shl", "shr",   "cmp_eq", "cmp_lt", "load",
    "store", "push", "pop", "fconst", "fadd", "fmul", "fcmp_lt"};

}  // namespace

std::string_view reg_name(Reg r) { return kRegNames[index_of(r)]; }

std::optional<Reg> parse_reg(std::string_view name) {
  for (int i = 0; i < kNumRegs; ++i) {
    if (kRegNames[i] == name) return static_cast<Reg>(i);
  }
  return std::nullopt;
}

std::string_view opcode_name(Opcode op) { return kOpcodeNames[static_cast<int>(op)]; }

std::optional<Opcode> parse_opcode(std::string_view name) {
  for (int i = 0; i < kNumOpcodes; ++i) {
    if (kOpcodeNames[i] == name) return static_cast<Opcode>(i);
  }
  return std::nullopt;
}

int opcode_arity(Opcode op) {
  switch (op) {
    case Opcode::Pop:
      return 0;
    case Opcode::Const:
    case Opcode::Mov:
    case Opcode::Not:
    case Opcode::Load:
    case Opcode::Store:
    case Opcode::Push:
    case Opcode::FConst:
      return 1;
    default:
      return 2;
  }
}

bool is_binary_alu(Opcode op) {
  switch (op) {
    case Opcode::Add:
    case Opcode::Sub:
    case Opcode::Mul:
    case Opcode::UDiv:
    case Opcode::UMod:
    case Opcode::And:
    case Opcode::Or:
    case Opcode::Xor:
    case Opcode::Shl:
    case Opcode::Shr:
    case Opcode::CmpEq:
    case Opcode::CmpLt:
      return true;
    default:
      return false;
  }
}

Instruction make_const(Reg dst, std::uint64_t value) {
  return {Opcode::Const, Location::of(dst), {Operand::immediate(value)}};
}
Instruction make_mov(Reg dst, Operand src) { return {Opcode::Mov, Location::of(dst), {src}}; }
Instruction make_binary(Opcode op, Reg dst, Operand a, Operand b) {
  return {op, Location::of(dst), {a, b}};
}
Instruction make_not(Reg dst, Operand a) { return {Opcode::Not, Location::of(dst), {a}}; }
Instruction make_load(Reg dst, Reg base, std::int64_t offset) {
  return {Opcode::Load, Location::of(dst), {Operand(Location::mem(base, offset))}};
}
Instruction make_store(Reg base, std::int64_t offset, Operand src) {
  return {Opcode::Store, Location::mem(base, offset), {src}};
}
Instruction make_push(Operand src) { return {Opcode::Push, Location::of(Reg::SP), {src}}; }
Instruction make_pop(Reg dst) { return {Opcode::Pop, Location::of(dst), {}}; }
Instruction make_fconst(Reg dst, double value) {
  return {Opcode::FConst, Location::of(dst), {Operand::immediate(std::bit_cast<std::uint64_t>(value))}};
}
Instruction make_fbinary(Opcode op, Reg dst, Reg a, Reg b) {
  return {op, Location::of(dst), {Operand(a), Operand(b)}};
}

Terminator Terminator::jump(BlockId target) { return {Kind::Jump, Reg::R0, {target}, {}}; }
Terminator Terminator::branch(Reg cond, BlockId then_target, BlockId else_target) {
  return {Kind::Branch, cond, {then_target, else_target}, {}};
}
Terminator Terminator::switch_on(Reg scrutinee, std::vector<std::uint64_t> values,
                                 std::vector<BlockId> case_targets, BlockId default_target) {
  Terminator t{Kind::Switch, scrutinee, std::move(case_targets), std::move(values)};
  t.targets.push_back(default_target);
  return t;
}
Terminator Terminator::ret(Reg value) { return {Kind::Ret, value, {}, {}}; }

const BasicBlock* Function::find_block(BlockId id) const {
  for (const auto& b : blocks) {
    if (b.id == id) return &b;
  }
  return nullptr;
}

BasicBlock* Function::find_block(BlockId id) {
  for (auto& b : blocks) {
    if (b.id == id) return &b;
  }
  return nullptr;
}

BlockId Function::fresh_block_id() const {
  BlockId next = 0;
  for (const auto& b : blocks) next = std::max(next, b.id + 1);
  return next;
}

std::size_t Function::instruction_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.instrs.size() + 1;
  return n;
}

const Function* Program::find_function(std::string_view name) const {
  for (const auto& f : functions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

std::string_view violation_name(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::DuplicateFunctionName: return "DuplicateFunctionName";
    case ViolationKind::MissingEntryFunction: return "MissingEntryFunction";
    case ViolationKind::EmptyFunction: return "EmptyFunction";
    case ViolationKind::DuplicateBlockId: return "DuplicateBlockId";
    case ViolationKind::MissingEntryBlock: return "MissingEntryBlock";
    case ViolationKind::DanglingTarget: return "DanglingTarget";
    case ViolationKind::ArityMismatch: return "ArityMismatch";
    case ViolationKind::BadOperand: return "BadOperand";
    case ViolationKind::DuplicateSwitchCase: return "DuplicateSwitchCase";
    case ViolationKind::BadParam: return "BadParam";
  }
  return "Unknown";
}

namespace {

bool int_reg_or_imm(const Operand& o) {
  return o.is_imm() || (o.is_reg() && is_int(o.reg));
}

bool float_reg(const Operand& o) { return o.is_reg() && is_float(o.reg); }

// Empty string when the operands fit the opcode, else a description.
std::string check_operands(const Instruction& in) {
  const auto& s = in.srcs;
  const auto& d = in.dst;
  auto int_dst = [&] { return d.is_reg() && is_int(d.reg); };
  switch (in.op) {
    case Opcode::Const:
      if (!int_dst() || !s[0].is_imm()) return "const wants int register and immediate";
      break;
    case Opcode::Mov:
    case Opcode::Not:
      if (!int_dst() || !int_reg_or_imm(s[0])) return "wants int register operands";
      break;
    case Opcode::Load:
      if (!int_dst() || !s[0].is_mem() || !is_int(s[0].reg)) return "load wants register and memory";
      break;
    case Opcode::Store:
      if (!d.is_mem() || !is_int(d.reg) || !int_reg_or_imm(s[0])) return "store wants memory and value";
      break;
    case Opcode::Push:
      if (!(d.is_reg() && d.reg == Reg::SP) || !int_reg_or_imm(s[0])) return "push wants a value";
      break;
    case Opcode::Pop:
      if (!int_dst()) return "pop wants int register";
      break;
    case Opcode::FConst:
      if (!(d.is_reg() && is_float(d.reg)) || !s[0].is_imm()) return "fconst wants float register";
      break;
    case Opcode::FAdd:
    case Opcode::FMul:
      if (!(d.is_reg() && is_float(d.reg)) || !float_reg(s[0]) || !float_reg(s[1]))
        return "float op wants float registers";
      break;
    case Opcode::FCmpLt:
      if (!int_dst() || !float_reg(s[0]) || !float_reg(s[1])) return "fcmp_lt wants float sources";
      break;
    default:
      if (!int_dst() || !int_reg_or_imm(s[0]) || !int_reg_or_imm(s[1]))
        return "alu op wants int operands";
      break;
  }
  return {};
}

void validate_into(const Function& f, std::vector<Violation>& out) {
  auto add = [&](ViolationKind k, std::string detail) {
    out.push_back({k, f.name, std::move(detail)});
  };
  if (f.blocks.empty()) {
    add(ViolationKind::EmptyFunction, "function has no blocks");
    return;
  }
  std::unordered_set<BlockId> ids;
  for (const auto& b : f.blocks) {
    if (!ids.insert(b.id).second) {
      add(ViolationKind::DuplicateBlockId, "block " + std::to_string(b.id));
    }
  }
  if (!ids.contains(f.entry_block)) {
    add(ViolationKind::MissingEntryBlock, "entry " + std::to_string(f.entry_block));
  }
  std::set<Reg> seen_params;
  for (Reg p : f.params) {
    if (!is_general(p) || !seen_params.insert(p).second) {
      add(ViolationKind::BadParam, std::string(reg_name(p)));
    }
  }
  for (const auto& b : f.blocks) {
    const std::string where = "block " + std::to_string(b.id);
    for (std::size_t i = 0; i < b.instrs.size(); ++i) {
      const auto& in = b.instrs[i];
      if (static_cast<int>(in.srcs.size()) != opcode_arity(in.op)) {
        add(ViolationKind::ArityMismatch,
            where + " instr " + std::to_string(i) + " (" + std::string(opcode_name(in.op)) + ")");
        continue;
      }
      if (auto msg = check_operands(in); !msg.empty()) {
        add(ViolationKind::BadOperand, where + " instr " + std::to_string(i) + ": " + msg);
      }
    }
    const auto& t = b.term;
    std::size_t want_targets = 0;
    switch (t.kind) {
      case Terminator::Kind::Jump: want_targets = 1; break;
      case Terminator::Kind::Branch: want_targets = 2; break;
      case Terminator::Kind::Switch: want_targets = t.case_values.size() + 1; break;
      case Terminator::Kind::Ret: want_targets = 0; break;
    }
    if (t.targets.size() != want_targets) {
      add(ViolationKind::ArityMismatch, where + " terminator target count");
    }
    if (t.kind != Terminator::Kind::Jump && !is_int(t.reg)) {
      add(ViolationKind::BadOperand, where + " terminator register");
    }
    for (BlockId target : t.targets) {
      if (!ids.contains(target)) {
        add(ViolationKind::DanglingTarget, where + " -> " + std::to_string(target));
      }
    }
    std::unordered_set<std::uint64_t> values;
    for (auto v : t.case_values) {
      if (!values.insert(v).second) {
        add(ViolationKind::DuplicateSwitchCase, where + " case " + std::to_string(v));
      }
    }
  }
}

}  // namespace

std::vector<Violation> validate(const Function& function) {
  std::vector<Violation> out;
  validate_into(function, out);
  return out;
}

std::vector<Violation> validate(const Program& program) {
  std::vector<Violation> out;
  std::set<std::string> names;
  for (const auto& f : program.functions) {
    if (!names.insert(f.name).second) {
      out.push_back({ViolationKind::DuplicateFunctionName, f.name, "function " + f.name});
    }
    validate_into(f, out);
  }
  if (!names.contains(program.entry)) {
    out.push_back({ViolationKind::MissingEntryFunction, program.entry, "entry " + program.entry});
  }
  return out;
}

void require_valid(const Function& function) {
  auto v = validate(function);
  if (!v.empty()) {
    throw MalformedIR(function.name + ": " + std::string(violation_name(v.front().kind)) + " " +
                      v.front().detail);
  }
}

}  // namespace obfdetect::mir
