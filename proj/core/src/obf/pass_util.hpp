#pragma once

#include <algorithm>
#include <vector>

#include "obfdetect/mir.hpp"
#include "obfdetect/mir_analysis.hpp"
#include "obfdetect/obfuscator.hpp"

namespace obfdetect::obf::detail {

using mir::Reg;

inline mir::RegSet general_mask() {
  mir::RegSet s;
  for (int i = 0; i < mir::kNumGeneralRegs; ++i) s.set(i);
  return s;
}

inline std::vector<Reg> to_regs(const mir::RegSet& s) {
  std::vector<Reg> out;
  for (int i = 0; i < mir::kNumGeneralRegs; ++i) {
    if (s.test(i)) out.push_back(mir::general_reg(i));
  }
  return out;
}

inline mir::RegSet live_before(const mir::Liveness& lv, const mir::BasicBlock& b, std::size_t i) {
  return i == 0 ? lv.live_in(b.id) : lv.live_after(b.id, i - 1);
}

// Shuffles a register pool, keeping registers the function already uses in
// front so that later passes still find untouched registers.
inline void order_pool(std::vector<Reg>& regs, const mir::RegSet& referenced, PassContext& ctx) {
  ctx.shuffle(regs);
  std::stable_partition(regs.begin(), regs.end(),
                        [&](Reg r) { return referenced.test(mir::index_of(r)); });
}

// General registers that may be clobbered immediately before instruction i.
inline std::vector<Reg> free_before(const mir::Liveness& lv, const mir::BasicBlock& b, std::size_t i,
                                    const mir::RegSet& referenced, PassContext& ctx) {
  auto regs = to_regs(general_mask() & ~live_before(lv, b, i));
  order_pool(regs, referenced, ctx);
  return regs;
}

// General registers that may be clobbered by a sequence replacing instruction i:
// dead afterwards and not touched by the instruction itself.
inline std::vector<Reg> free_around(const mir::Liveness& lv, const mir::BasicBlock& b, std::size_t i,
                                    const mir::RegSet& referenced, PassContext& ctx) {
  const auto& in = b.instrs[i];
  auto busy = lv.live_after(b.id, i) | mir::uses(in) | mir::defs(in);
  auto regs = to_regs(general_mask() & ~busy);
  order_pool(regs, referenced, ctx);
  return regs;
}

inline std::vector<Reg> unreferenced_general(const mir::Function& f, PassContext& ctx) {
  auto regs = to_regs(general_mask() & ~mir::referenced_registers(f));
  ctx.shuffle(regs);
  return regs;
}

inline mir::Operand imm(std::uint64_t v) { return mir::Operand::immediate(v); }

// Instructions of every block, for dead-code donors.
inline std::vector<std::vector<mir::Instruction>> own_fragments(const mir::Function& f) {
  std::vector<std::vector<mir::Instruction>> out;
  for (const auto& b : f.blocks) {
    if (!b.instrs.empty()) out.push_back(b.instrs);
  }
  return out;
}

}  // namespace obfdetect::obf::detail
