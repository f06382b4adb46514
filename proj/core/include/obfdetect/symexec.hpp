#pragma once

#include <map>
#include <utility>
#include <vector>

#include "obfdetect/interp.hpp"
#include "obfdetect/mir.hpp"
#include "obfdetect/symexpr.hpp"

namespace obfdetect::sym {

class UnboundSymbol : public Error {
 public:
  using Error::Error;
};

// Final expression of every location a block writes, in terms of the
// block's `<reg>_init` inputs and initial memory, plus the exit destination.
struct SymbolicState {
  // Keys are Id("<reg>") or Mem(address); ordered by first write.
  std::vector<std::pair<Expr, Expr>> assignments;
  Expr irdst;

  const Expr* find(const Expr& key) const;
};

struct FunctionSemantics {
  std::vector<std::pair<mir::BlockId, SymbolicState>> blocks;
};

SymbolicState exec_block(const mir::BasicBlock& block);
FunctionSemantics exec_function(const mir::Function& f);

// Name of the initial-value symbol of a register ("R0_init").
std::string init_name(mir::Reg r);
unsigned reg_size(mir::Reg r);

// Concrete effect of a symbolic state evaluated against an initial machine state.
struct ConcreteDelta {
  std::map<mir::Reg, std::uint64_t> regs;
  std::map<std::uint64_t, std::uint64_t> mem;
  mir::BlockExit exit;

  mir::MachineState apply(const mir::MachineState& init) const;
};

ConcreteDelta concretize(const SymbolicState& s, const mir::MachineState& init);
std::uint64_t evaluate(const Expr& e, const mir::MachineState& init);

// Debug/golden rendering: one `lhs = rhs` line per assignment, IRDst last,
// a `block <id>:` header before each block.
std::string print_state(const SymbolicState& s);
std::string print_semantics(const FunctionSemantics& sem);

}  // namespace obfdetect::sym
