#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "obfdetect/error.hpp"

namespace obfdetect::mir {

// Register file. R0..R15 are general purpose, SP/BP address the frame,
// the six flags hold 0/1 and F0..F3 hold IEEE-754 doubles (as bit patterns).
enum class Reg : std::uint8_t {
  R0, R1, R2, R3, R4, R5, R6, R7, R8, R9, R10, R11, R12, R13, R14, R15,
  SP, BP,
  ZF, NF, CF, OF, PF, AF,
  F0, F1, F2, F3,
};

inline constexpr int kNumGeneralRegs = 16;
inline constexpr int kNumIntRegs = 24;  // general + SP/BP + flags
inline constexpr int kNumFloatRegs = 4;
inline constexpr int kNumRegs = kNumIntRegs + kNumFloatRegs;

constexpr int index_of(Reg r) { return static_cast<int>(r); }
constexpr Reg general_reg(int i) { return static_cast<Reg>(i); }
constexpr bool is_general(Reg r) { return index_of(r) < kNumGeneralRegs; }
constexpr bool is_flag(Reg r) { return r >= Reg::ZF && r <= Reg::AF; }
constexpr bool is_float(Reg r) { return r >= Reg::F0; }
constexpr bool is_int(Reg r) { return !is_float(r); }

std::string_view reg_name(Reg r);
std::optional<Reg> parse_reg(std::string_view name);

enum class Opcode : std::uint8_t {
  Const, Mov, Add, Sub, Mul, UDiv, UMod, And, Or, Xor, Not, Shl, Shr,
  CmpEq, CmpLt, Load, Store, Push, Pop, FConst, FAdd, FMul, FCmpLt,
};

inline constexpr int kNumOpcodes = static_cast<int>(Opcode::FCmpLt) + 1;

std::string_view opcode_name(Opcode op);
std::optional<Opcode> parse_opcode(std::string_view name);

// Number of source operands an opcode takes.
int opcode_arity(Opcode op);
// Binary integer ops that compute dst := a OP b and update the flags.
bool is_binary_alu(Opcode op);

using BlockId = std::uint32_t;

// A writable place: a register or a word at [base + offset].
struct Location {
  enum class Kind : std::uint8_t { Reg, Mem };
  Kind kind = Kind::Reg;
  Reg reg = Reg::R0;
  std::int64_t offset = 0;

  static Location of(Reg r) { return {Kind::Reg, r, 0}; }
  static Location mem(Reg base, std::int64_t offset) { return {Kind::Mem, base, offset}; }
  bool is_reg() const { return kind == Kind::Reg; }
  bool is_mem() const { return kind == Kind::Mem; }

  friend bool operator==(const Location&, const Location&) = default;
};

struct Operand {
  enum class Kind : std::uint8_t { Reg, Mem, Imm };
  Kind kind = Kind::Imm;
  Reg reg = Reg::R0;
  std::int64_t offset = 0;
  std::uint64_t imm = 0;

  Operand() = default;
  Operand(Location loc)  // NOLINT(google-explicit-constructor)
      : kind(loc.is_reg() ? Kind::Reg : Kind::Mem), reg(loc.reg), offset(loc.offset) {}
  Operand(Reg r) : kind(Kind::Reg), reg(r) {}  // NOLINT(google-explicit-constructor)

  static Operand immediate(std::uint64_t v) {
    Operand o;
    o.kind = Kind::Imm;
    o.imm = v;
    return o;
  }
  bool is_reg() const { return kind == Kind::Reg; }
  bool is_mem() const { return kind == Kind::Mem; }
  bool is_imm() const { return kind == Kind::Imm; }
  Location location() const {
    return is_mem() ? Location::mem(reg, offset) : Location::of(reg);
  }

  friend bool operator==(const Operand&, const Operand&) = default;
};

struct Instruction {
  Opcode op = Opcode::Mov;
  Location dst;  // SP for push (implicit)
  std::vector<Operand> srcs;

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

// Convenience constructors used by passes, families and tests.
Instruction make_const(Reg dst, std::uint64_t value);
Instruction make_mov(Reg dst, Operand src);
Instruction make_binary(Opcode op, Reg dst, Operand a, Operand b);
Instruction make_not(Reg dst, Operand a);
Instruction make_load(Reg dst, Reg base, std::int64_t offset);
Instruction make_store(Reg base, std::int64_t offset, Operand src);
Instruction make_push(Operand src);
Instruction make_pop(Reg dst);
Instruction make_fconst(Reg dst, double value);
Instruction make_fbinary(Opcode op, Reg dst, Reg a, Reg b);

struct Terminator {
  enum class Kind : std::uint8_t { Jump, Branch, Switch, Ret };
  Kind kind = Kind::Ret;
  Reg reg = Reg::R0;              // branch condition, switch scrutinee, ret value
  std::vector<BlockId> targets;   // jump: {t}; branch: {then, else}; switch: {cases..., default}
  std::vector<std::uint64_t> case_values;

  static Terminator jump(BlockId target);
  static Terminator branch(Reg cond, BlockId then_target, BlockId else_target);
  static Terminator switch_on(Reg scrutinee, std::vector<std::uint64_t> values,
                              std::vector<BlockId> case_targets, BlockId default_target);
  static Terminator ret(Reg value);

  BlockId default_target() const { return targets.back(); }

  friend bool operator==(const Terminator&, const Terminator&) = default;
};

struct BasicBlock {
  BlockId id = 0;
  std::vector<Instruction> instrs;
  Terminator term;

  friend bool operator==(const BasicBlock&, const BasicBlock&) = default;
};

struct Function {
  std::string name;
  std::vector<Reg> params;
  std::vector<BasicBlock> blocks;
  BlockId entry_block = 0;
  std::string functionality_tag;

  const BasicBlock* find_block(BlockId id) const;
  BasicBlock* find_block(BlockId id);
  BlockId fresh_block_id() const;
  std::size_t instruction_count() const;

  friend bool operator==(const Function&, const Function&) = default;
};

struct Program {
  std::vector<Function> functions;
  std::string entry;

  const Function* find_function(std::string_view name) const;
};

enum class ViolationKind {
  DuplicateFunctionName,
  MissingEntryFunction,
  EmptyFunction,
  DuplicateBlockId,
  MissingEntryBlock,
  DanglingTarget,
  ArityMismatch,
  BadOperand,
  DuplicateSwitchCase,
  BadParam,
};

std::string_view violation_name(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string function;
  std::string detail;
};

std::vector<Violation> validate(const Program& program);
std::vector<Violation> validate(const Function& function);

// Throws MalformedIR listing the first violation, if any.
void require_valid(const Function& function);

}  // namespace obfdetect::mir
