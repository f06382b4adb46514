#include "obfdetect/mir_analysis.hpp"

#include <algorithm>

namespace obfdetect::mir {

namespace {

void add_operand(RegSet& s, const Operand& o) {
  if (!o.is_imm()) s.set(index_of(o.reg));
}

void set_flags(RegSet& s) {
  for (Reg r : {Reg::ZF, Reg::NF, Reg::CF, Reg::OF, Reg::PF, Reg::AF}) s.set(index_of(r));
}

}  // namespace

RegSet uses(const Instruction& in) {
  RegSet s;
  for (const auto& o : in.srcs) add_operand(s, o);
  if (in.dst.is_mem()) s.set(index_of(in.dst.reg));
  if (in.op == Opcode::Push || in.op == Opcode::Pop) s.set(index_of(Reg::SP));
  return s;
}

RegSet defs(const Instruction& in) {
  RegSet s;
  if (in.dst.is_reg()) s.set(index_of(in.dst.reg));
  if (in.op == Opcode::Pop) s.set(index_of(Reg::SP));
  if (is_binary_alu(in.op) || in.op == Opcode::Not) set_flags(s);
  return s;
}

RegSet uses(const Terminator& t) {
  RegSet s;
  if (t.kind != Terminator::Kind::Jump) s.set(index_of(t.reg));
  return s;
}

RegSet referenced_registers(const Function& f) {
  RegSet s;
  for (Reg p : f.params) s.set(index_of(p));
  for (const auto& b : f.blocks) {
    for (const auto& in : b.instrs) s |= uses(in) | defs(in);
    s |= uses(b.term);
  }
  return s;
}

std::vector<BlockId> successors(const BasicBlock& b) {
  std::vector<BlockId> out = b.term.targets;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Liveness::Liveness(const Function& f) {
  for (const auto& b : f.blocks) in_[b.id] = RegSet{};
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto it = f.blocks.rbegin(); it != f.blocks.rend(); ++it) {
      const BasicBlock& b = *it;
      RegSet live;
      for (BlockId s : b.term.targets) {
        if (auto found = in_.find(s); found != in_.end()) live |= found->second;
      }
      auto& after = after_[b.id];
      after.assign(b.instrs.size() + 1, RegSet{});
      live |= uses(b.term);
      after[b.instrs.size()] = live;
      for (std::size_t i = b.instrs.size(); i-- > 0;) {
        after[i] = live;
        live = (live & ~defs(b.instrs[i])) | uses(b.instrs[i]);
      }
      if (live != in_[b.id]) {
        in_[b.id] = live;
        changed = true;
      }
    }
  }
}

RegSet Liveness::live_in(BlockId b) const { return in_.at(b); }

RegSet Liveness::live_after(BlockId b, std::size_t instr_index) const {
  return after_.at(b).at(instr_index);
}

}  // namespace obfdetect::mir
