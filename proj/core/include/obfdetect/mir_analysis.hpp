#pragma once

#include <bitset>
#include <unordered_map>
#include <vector>

#include "obfdetect/mir.hpp"

namespace obfdetect::mir {

using RegSet = std::bitset<kNumRegs>;

// Registers read by an instruction (including address bases and implicit SP).
RegSet uses(const Instruction& in);
// Registers written by an instruction (including flags and implicit SP).
RegSet defs(const Instruction& in);
RegSet uses(const Terminator& t);

// Every register that appears anywhere in the function, params included.
RegSet referenced_registers(const Function& f);

// Backward liveness over the CFG. live_after(b, i) is the set live after
// instruction i of block b; i == instrs.size() means before the terminator
// (i.e. the terminator's own uses plus live-out).
class Liveness {
 public:
  explicit Liveness(const Function& f);

  RegSet live_in(BlockId b) const;
  RegSet live_after(BlockId b, std::size_t instr_index) const;

 private:
  std::unordered_map<BlockId, std::vector<RegSet>> after_;  // per instr + one for terminator
  std::unordered_map<BlockId, RegSet> in_;
};

std::vector<BlockId> successors(const BasicBlock& b);

}  // namespace obfdetect::mir
