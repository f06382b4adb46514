#include <algorithm>
#include <map>
#include <set>

#include "pass_util.hpp"

namespace obfdetect::obf {

using namespace mir;
using detail::imm;

namespace {

enum class VOp : std::uint8_t {
  Ldi, Mov, Not, Load, Store, Jmp, Br, Beq, Ret,
  Add, Sub, Mul, UDiv, UMod, And, Or, Xor, Shl, Shr, CmpEq, CmpLt,
};
inline constexpr int kNumVOps = static_cast<int>(VOp::CmpLt) + 1;

std::optional<VOp> binary_vop(Opcode op) {
  switch (op) {
    case Opcode::Add: return VOp::Add;
    case Opcode::Sub: return VOp::Sub;
    case Opcode::Mul: return VOp::Mul;
    case Opcode::UDiv: return VOp::UDiv;
    case Opcode::UMod: return VOp::UMod;
    case Opcode::And: return VOp::And;
    case Opcode::Or: return VOp::Or;
    case Opcode::Xor: return VOp::Xor;
    case Opcode::Shl: return VOp::Shl;
    case Opcode::Shr: return VOp::Shr;
    case Opcode::CmpEq: return VOp::CmpEq;
    case Opcode::CmpLt: return VOp::CmpLt;
    default: return std::nullopt;
  }
}

Opcode alu_of(VOp v) {
  switch (v) {
    case VOp::Add: return Opcode::Add;
    case VOp::Sub: return Opcode::Sub;
    case VOp::Mul: return Opcode::Mul;
    case VOp::UDiv: return Opcode::UDiv;
    case VOp::UMod: return Opcode::UMod;
    case VOp::And: return Opcode::And;
    case VOp::Or: return Opcode::Or;
    case VOp::Xor: return Opcode::Xor;
    case VOp::Shl: return Opcode::Shl;
    case VOp::Shr: return Opcode::Shr;
    case VOp::CmpEq: return Opcode::CmpEq;
    default: return Opcode::CmpLt;
  }
}

// Virtual register file: one word per machine register plus scratch.
constexpr std::uint64_t kT0 = 24, kT1 = 25, kT2 = 26;
constexpr std::uint64_t vr(Reg r) { return static_cast<std::uint64_t>(index_of(r)); }

struct VInstr {
  VOp op;
  std::uint64_t a = 0, b = 0, c = 0;
};

class Compiler {
 public:
  explicit Compiler(const Function& f) : f_(f) {}

  std::vector<VInstr> compile() {
    for (const auto& b : f_.blocks) {
      start_[b.id] = code_.size();
      for (const auto& in : b.instrs) instruction(in);
      terminator(b.term);
    }
    for (auto [at, field, target] : fixups_) {
      const std::uint64_t pc = 4 * start_.at(target);
      if (field == 1) code_[at].a = pc;
      if (field == 2) code_[at].b = pc;
      if (field == 3) code_[at].c = pc;
    }
    return code_;
  }

  std::uint64_t entry_pc() const { return 4 * start_.at(f_.entry_block); }

 private:
  void emit(VOp op, std::uint64_t a = 0, std::uint64_t b = 0, std::uint64_t c = 0) {
    code_.push_back({op, a, b, c});
  }
  void fixup(int field, BlockId target) { fixups_.push_back({code_.size() - 1, field, target}); }

  // Virtual register holding an operand, materializing immediates into `scratch`.
  std::uint64_t operand(const Operand& o, std::uint64_t scratch) {
    if (o.is_imm()) {
      emit(VOp::Ldi, scratch, o.imm);
      return scratch;
    }
    return vr(o.reg);
  }

  void instruction(const Instruction& in) {
    const auto& s = in.srcs;
    if (auto v = binary_vop(in.op)) {
      const std::uint64_t a = operand(s[0], kT0), b = operand(s[1], kT1);
      emit(*v, vr(in.dst.reg), a, b);
      return;
    }
    switch (in.op) {
      case Opcode::Const: emit(VOp::Ldi, vr(in.dst.reg), s[0].imm); break;
      case Opcode::Mov:
        if (s[0].is_imm()) {
          emit(VOp::Ldi, vr(in.dst.reg), s[0].imm);
        } else {
          emit(VOp::Mov, vr(in.dst.reg), vr(s[0].reg));
        }
        break;
      case Opcode::Not: emit(VOp::Not, vr(in.dst.reg), operand(s[0], kT0)); break;
      case Opcode::Load:
        emit(VOp::Load, vr(in.dst.reg), vr(s[0].reg), static_cast<std::uint64_t>(s[0].offset));
        break;
      case Opcode::Store:
        emit(VOp::Store, vr(in.dst.reg), operand(s[0], kT0), static_cast<std::uint64_t>(in.dst.offset));
        break;
      case Opcode::Push:
        if (s[0].is_imm()) {
          emit(VOp::Ldi, kT2, s[0].imm);
        } else {
          emit(VOp::Mov, kT2, vr(s[0].reg));
        }
        emit(VOp::Ldi, kT0, 8);
        emit(VOp::Sub, vr(Reg::SP), vr(Reg::SP), kT0);
        emit(VOp::Store, vr(Reg::SP), kT2, 0);
        break;
      case Opcode::Pop:
        emit(VOp::Load, kT2, vr(Reg::SP), 0);
        emit(VOp::Ldi, kT0, 8);
        emit(VOp::Add, vr(Reg::SP), vr(Reg::SP), kT0);
        emit(VOp::Mov, vr(in.dst.reg), kT2);
        break;
      default:
        throw UnsupportedConstruction("cannot virtualize '" + std::string(opcode_name(in.op)) + "'");
    }
  }

  void terminator(const Terminator& t) {
    switch (t.kind) {
      case Terminator::Kind::Jump:
        emit(VOp::Jmp);
        fixup(1, t.targets[0]);
        break;
      case Terminator::Kind::Branch:
        emit(VOp::Br, vr(t.reg));
        fixup(2, t.targets[0]);
        fixup(3, t.targets[1]);
        break;
      case Terminator::Kind::Switch:
        for (std::size_t i = 0; i < t.case_values.size(); ++i) {
          emit(VOp::Ldi, kT0, t.case_values[i]);
          emit(VOp::Beq, vr(t.reg), kT0);
          fixup(3, t.targets[i]);
        }
        emit(VOp::Jmp);
        fixup(1, t.default_target());
        break;
      case Terminator::Kind::Ret:
        emit(VOp::Ret, vr(t.reg));
        break;
    }
  }

  struct Fixup {
    std::size_t at;
    int field;
    BlockId target;
  };
  const Function& f_;
  std::vector<VInstr> code_;
  std::map<BlockId, std::size_t> start_;
  std::vector<Fixup> fixups_;
};

// Interpreter registers.
constexpr Reg kPc = Reg::R0, kOp = Reg::R1, kF1 = Reg::R2, kF2 = Reg::R3, kF3 = Reg::R4,
              kA = Reg::R5, kB = Reg::R6;

class VmBuilder {
 public:
  VmBuilder(const Function& f, PassContext& ctx, Construction dispatch)
      : f_(f), ctx_(ctx), dispatch_(dispatch) {}

  Function build() {
    Compiler comp(f_);
    const auto code = comp.compile();
    if (static_cast<std::int64_t>(code.size()) * 32 > kVmBytecodeEnd - kVmBytecode) {
      throw PassError("bytecode of '" + f_.name + "' does not fit the VM region");
    }

    std::set<VOp> used;
    for (const auto& v : code) used.insert(v.op);
    std::set<std::uint64_t> taken;
    for (VOp v : used) {
      std::uint64_t n;
      do {
        n = ctx_.below(256);
      } while (!taken.insert(n).second);
      opcode_[v] = n;
    }

    const BlockId entry = fresh();
    fetch_ = fresh();

    BasicBlock e;
    e.id = entry;
    const Liveness lv(f_);
    RegSet saved = lv.live_in(f_.entry_block);
    for (Reg p : f_.params) saved.set(index_of(p));
    saved.set(index_of(Reg::SP));
    saved.set(index_of(Reg::BP));
    for (int i = 0; i < kNumIntRegs; ++i) {
      if (saved.test(i)) {
        const Reg r = static_cast<Reg>(i);
        e.instrs.push_back(make_store(Reg::BP, kVmRegisters + 8 * i, r));
      }
    }
    std::int64_t addr = kVmBytecode;
    for (const auto& v : code) {
      for (std::uint64_t w : {opcode_.at(v.op), v.a, v.b, v.c}) {
        e.instrs.push_back(make_const(kA, w));
        e.instrs.push_back(make_store(Reg::BP, addr, kA));
        addr += 8;
      }
    }
    e.instrs.push_back(make_const(kPc, comp.entry_pc()));
    e.instrs.push_back(make_store(Reg::BP, kVmPcSlot, kPc));
    e.term = Terminator::jump(fetch_);
    blocks_.push_back(std::move(e));

    std::map<std::uint64_t, BlockId> handlers;
    for (VOp v : used) handlers[opcode_.at(v)] = handler(v);

    BasicBlock fetch;
    fetch.id = fetch_;
    fetch.instrs = {
        make_load(kPc, Reg::BP, kVmPcSlot),
        make_binary(Opcode::Shl, kA, kPc, imm(3)),
        make_binary(Opcode::Add, kA, kA, Reg::BP),
        make_load(kOp, kA, kVmBytecode),
        make_load(kF1, kA, kVmBytecode + 8),
        make_load(kF2, kA, kVmBytecode + 16),
        make_load(kF3, kA, kVmBytecode + 24),
        make_binary(Opcode::Add, kPc, kPc, imm(4)),
        make_store(Reg::BP, kVmPcSlot, kPc),
    };
    fetch.term = decode(handlers);
    blocks_.push_back(std::move(fetch));

    Function out;
    out.name = f_.name;
    out.params = f_.params;
    out.functionality_tag = f_.functionality_tag;
    out.entry_block = entry;
    out.blocks = std::move(blocks_);
    return out;
  }

 private:
  BlockId fresh() { return next_id_++; }

  // dst := address of VR[field] minus the region offset
  void vr_base(std::vector<Instruction>& c, Reg dst, Reg field) {
    c.push_back(make_binary(Opcode::Shl, dst, field, imm(3)));
    c.push_back(make_binary(Opcode::Add, dst, dst, Reg::BP));
  }
  void read_vr(std::vector<Instruction>& c, Reg dst, Reg field) {
    vr_base(c, dst, field);
    c.push_back(make_load(dst, dst, kVmRegisters));
  }
  void write_vr(std::vector<Instruction>& c, Reg field, Reg value, Reg scratch) {
    vr_base(c, scratch, field);
    c.push_back(make_store(scratch, kVmRegisters, value));
  }

  BlockId set_pc_block(Reg from) {
    BasicBlock b;
    b.id = fresh();
    b.instrs.push_back(make_store(Reg::BP, kVmPcSlot, from));
    b.term = Terminator::jump(fetch_);
    blocks_.push_back(std::move(b));
    return blocks_.back().id;
  }

  BlockId handler(VOp v) {
    BasicBlock h;
    h.id = fresh();
    auto& c = h.instrs;
    h.term = Terminator::jump(fetch_);
    switch (v) {
      case VOp::Ldi:
        write_vr(c, kF1, kF2, kB);
        break;
      case VOp::Mov:
        read_vr(c, kA, kF2);
        write_vr(c, kF1, kA, kB);
        break;
      case VOp::Not:
        read_vr(c, kA, kF2);
        c.push_back(make_not(kA, kA));
        write_vr(c, kF1, kA, kB);
        break;
      case VOp::Load:
        read_vr(c, kA, kF2);
        c.push_back(make_binary(Opcode::Add, kA, kA, kF3));
        c.push_back(make_load(kA, kA, 0));
        write_vr(c, kF1, kA, kB);
        break;
      case VOp::Store:
        read_vr(c, kA, kF1);
        c.push_back(make_binary(Opcode::Add, kA, kA, kF3));
        read_vr(c, kB, kF2);
        c.push_back(make_store(kA, 0, kB));
        break;
      case VOp::Jmp:
        c.push_back(make_store(Reg::BP, kVmPcSlot, kF1));
        break;
      case VOp::Br: {
        read_vr(c, kA, kF1);
        const BlockId t = set_pc_block(kF2), e = set_pc_block(kF3);
        h.term = Terminator::branch(kA, t, e);
        break;
      }
      case VOp::Beq: {
        read_vr(c, kA, kF1);
        read_vr(c, kB, kF2);
        c.push_back(make_binary(Opcode::CmpEq, kA, kA, kB));
        h.term = Terminator::branch(kA, set_pc_block(kF3), fetch_);
        break;
      }
      case VOp::Ret:
        read_vr(c, kA, kF1);
        h.term = Terminator::ret(kA);
        break;
      default:
        read_vr(c, kA, kF2);
        read_vr(c, kB, kF3);
        c.push_back(make_binary(alu_of(v), kA, kA, kB));
        write_vr(c, kF1, kA, kB);
        break;
    }
    blocks_.push_back(std::move(h));
    return blocks_.back().id;
  }

  Terminator decode(const std::map<std::uint64_t, BlockId>& handlers) {
    std::vector<std::pair<std::uint64_t, BlockId>> order(handlers.begin(), handlers.end());
    switch (dispatch_) {
      case Construction::LinearDispatch: {
        auto shuffled = order;
        ctx_.shuffle(shuffled);
        BlockId next = fetch_;
        for (auto it = shuffled.rbegin(); it != shuffled.rend(); ++it) {
          BasicBlock t;
          t.id = fresh();
          t.instrs.push_back(make_binary(Opcode::CmpEq, kB, kOp, imm(it->first)));
          t.term = Terminator::branch(kB, it->second, next);
          next = t.id;
          blocks_.push_back(std::move(t));
        }
        return Terminator::jump(next);
      }
      case Construction::IfnestDispatch:
        if (order.size() == 1) return Terminator::jump(order[0].second);
        return Terminator::jump(nest(order, 0, order.size()));
      default: {
        std::vector<std::uint64_t> values;
        std::vector<BlockId> targets;
        for (const auto& [n, id] : order) {
          values.push_back(n);
          targets.push_back(id);
        }
        return Terminator::switch_on(kOp, values, targets, fetch_);
      }
    }
  }

  BlockId nest(const std::vector<std::pair<std::uint64_t, BlockId>>& order, std::size_t lo,
               std::size_t hi) {
    if (hi - lo == 1) return order[lo].second;
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    BasicBlock node;
    node.id = fresh();
    node.instrs.push_back(make_binary(Opcode::CmpLt, kB, kOp, imm(order[mid].first)));
    const BlockId left = nest(order, lo, mid);
    const BlockId right = nest(order, mid, hi);
    node.term = Terminator::branch(kB, left, right);
    blocks_.push_back(std::move(node));
    return blocks_.back().id;
  }

  const Function& f_;
  PassContext& ctx_;
  Construction dispatch_;
  BlockId next_id_ = 0;
  BlockId fetch_ = 0;
  std::map<VOp, std::uint64_t> opcode_;
  std::vector<BasicBlock> blocks_;
};

}  // namespace

Function virtualize(const Function& f, PassContext& ctx, Construction construction) {
  if (construction == Construction::Default) construction = Construction::SwitchDispatch;
  if (!construction_valid_for(TransformLabel::Virt, construction)) {
    throw UnsupportedConstruction("Virt construction '" + std::string(construction_name(construction)) +
                                  "'");
  }
  if (f.blocks.empty()) throw TooSmall("function '" + f.name + "' has no blocks");
  return VmBuilder(f, ctx, construction).build();
}

Function apply_pass(TransformLabel label, Construction c, const Function& f, PassContext& ctx) {
  switch (label) {
    case TransformLabel::EncA: return encode_arithmetic(f, ctx);
    case TransformLabel::EncL: return encode_literals(f, ctx);
    case TransformLabel::EncD: return encode_data(f, ctx, c);
    case TransformLabel::Sub: return substitute_instructions(f, ctx);
    case TransformLabel::AddO: return add_opaque(f, ctx, c, ctx.params().opaque_count);
    case TransformLabel::Flat: return flatten(f, ctx, c);
    case TransformLabel::Virt: return virtualize(f, ctx, c);
    case TransformLabel::Clean: break;
  }
  throw PassError("Clean is not a transformation");
}

}  // namespace obfdetect::obf
