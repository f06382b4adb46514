#include <gtest/gtest.h>

#include <random>

#include "../support/random_block.hpp"
#include "obfdetect/mir_text.hpp"
#include "obfdetect/symexec.hpp"

using namespace obfdetect;
using namespace obfdetect::mir;

namespace {

// Block semantics by symbolic evaluation against the interpreter.
void expect_sound(const BasicBlock& b, const MachineState& init) {
  auto [concrete, exit] = run_block(b, init);
  sym::SymbolicState s = sym::exec_block(b);
  sym::ConcreteDelta d = sym::concretize(s, init);
  MachineState via_sym = d.apply(init);
  via_sym.output = concrete.output;
  ASSERT_EQ(d.exit, exit) << print_terminator(b.term);
  ASSERT_EQ(via_sym.regs, concrete.regs);
  for (const auto& [addr, v] : concrete.mem) ASSERT_EQ(via_sym.load(addr), v) << std::hex << addr;
  for (const auto& [addr, v] : via_sym.mem) ASSERT_EQ(concrete.load(addr), v) << std::hex << addr;
}

}  // namespace

TEST(Symexec, SoundOnRandomBlocks) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    BasicBlock b = testsupport::random_block(rng, 1 + static_cast<int>(rng() % 20));
    MachineState init = testsupport::random_state(rng);
    SCOPED_TRACE(i);
    expect_sound(b, init);
    if (HasFatalFailure()) return;
  }
}

TEST(Symexec, CompareAndBranchShape) {
  Function f = parse_function(
      "func f(R0) tag=t entry=0\nblock 0:\n  cmp_eq R1, R0, 0x0\n  branch R1, 1, 2\n"
      "block 1:\n  ret R0\nblock 2:\n  ret R0\n");
  sym::SymbolicState s = sym::exec_block(f.blocks[0]);
  const sym::Expr* zf = s.find(sym::make_id("zf", 1));
  ASSERT_NE(zf, nullptr);
  EXPECT_EQ((*zf)->kind, sym::Node::Kind::Cond);
  EXPECT_EQ(s.irdst->kind, sym::Node::Kind::Cond);
  EXPECT_EQ(sym::to_string(s.irdst).rfind("ExprCond(", 0), 0u);
}

TEST(Symexec, NoFoldingOfExplicitResults) {
  Function f = parse_function(
      "func f(R0) tag=t entry=0\nblock 0:\n  const R1, 0x5\n  const R2, 0x3\n  xor R1, R1, R2\n"
      "  ret R1\n");
  sym::SymbolicState s = sym::exec_block(f.blocks[0]);
  const sym::Expr* r1 = s.find(sym::make_id("R1", 64));
  ASSERT_NE(r1, nullptr);
  EXPECT_EQ((*r1)->kind, sym::Node::Kind::Op);
  EXPECT_EQ((*r1)->op, sym::OpKind::Xor);
}

TEST(Symexec, StackAddressesCanonical) {
  Function f = parse_function(
      "func f(R0) tag=t entry=0\nblock 0:\n  push R0\n  push R0\n  pop R1\n  pop R2\n  ret R2\n");
  sym::SymbolicState s = sym::exec_block(f.blocks[0]);
  const sym::Expr* sp = s.find(sym::make_id("SP", 64));
  ASSERT_NE(sp, nullptr);
  // SP is restored to its initial value after balanced push/pop
  EXPECT_TRUE(sym::equal(*sp, sym::make_id("SP_init", 64)) ||
              sym::to_string(*sp).find("SP_init") != std::string::npos);
  const sym::Expr* r2 = s.find(sym::make_id("R2", 64));
  ASSERT_NE(r2, nullptr);
  EXPECT_TRUE(sym::equal(*r2, sym::make_id("R0_init", 64)));
}

TEST(Symexec, FunctionSemanticsOnePerBlock) {
  Function f = parse_function(
      "func f(R0) tag=t entry=0\nblock 0:\n  jump 1\nblock 1:\n  ret R0\n");
  auto sem = sym::exec_function(f);
  ASSERT_EQ(sem.blocks.size(), 2u);
  EXPECT_EQ(sym::to_string(sem.blocks[0].second.irdst), "ExprInt(0x1, 64)");
}
