#include <gtest/gtest.h>

#include <random>

#include "../support/random_block.hpp"
#include "obfdetect/interp.hpp"
#include "obfdetect/mir.hpp"
#include "obfdetect/mir_analysis.hpp"
#include "obfdetect/mir_text.hpp"

using namespace obfdetect;
using namespace obfdetect::mir;

namespace {

Function gcd_function() {
  return parse_function(R"(func gcd(R0, R1) tag=gcd entry=0
block 0:
  cmp_eq R2, R1, 0x0
  branch R2, 2, 1
block 1:
  umod R3, R0, R1
  mov R0, R1
  mov R1, R3
  jump 0
block 2:
  ret R0
)");
}

}  // namespace

TEST(Mir, ParsesAndRuns) {
  Function f = gcd_function();
  EXPECT_TRUE(validate(f).empty());
  std::uint64_t args[] = {84, 36};
  EXPECT_EQ(run_function(f, args).value, 12u);
}

TEST(Mir, TextRoundTrip) {
  Function f = gcd_function();
  EXPECT_EQ(parse_function(print_function(f)), f);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    Function g;
    g.name = "r";
    g.params = {Reg::R0};
    g.blocks.push_back(testsupport::random_block(rng, 12));
    for (BlockId id = 1; id <= 4; ++id) {
      BasicBlock b;
      b.id = id;
      b.term = Terminator::ret(Reg::R0);
      g.blocks.push_back(b);
    }
    auto v = validate(g);
    EXPECT_TRUE(v.empty()) << (v.empty() ? "" : v[0].detail);
    EXPECT_EQ(parse_function(print_function(g)), g);
  }
}

TEST(Mir, ValidateRejectsDanglingAndDuplicates) {
  Function f = gcd_function();
  f.blocks[2].term = Terminator::jump(9);
  auto v = validate(f);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].kind, ViolationKind::DanglingTarget);
  f = gcd_function();
  f.blocks[1].id = 0;
  EXPECT_EQ(validate(f)[0].kind, ViolationKind::DuplicateBlockId);
  EXPECT_THROW(require_valid(f), MalformedIR);

  Program p;
  p.functions = {gcd_function(), gcd_function()};
  p.entry = "gcd";
  EXPECT_EQ(validate(p)[0].kind, ViolationKind::DuplicateFunctionName);
}

TEST(Mir, ParseErrorsCarryLine) {
  try {
    parse_function("func f(R0) tag=x entry=0\nblock 0:\n  frob R1, R2\n  ret R0\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
}

TEST(Flags, AddSubRules) {
  Flags fl;
  EXPECT_EQ(alu(Opcode::Add, ~0ull, 1, fl), 0u);
  EXPECT_EQ(fl.zf, 1u);
  EXPECT_EQ(fl.cf, 1u);
  EXPECT_EQ(fl.of, 0u);
  EXPECT_EQ(fl.af, 1u);
  alu(Opcode::Add, 0x7fffffffffffffffull, 1, fl);
  EXPECT_EQ(fl.of, 1u);
  EXPECT_EQ(fl.nf, 1u);
  EXPECT_EQ(fl.cf, 0u);
  alu(Opcode::Sub, 1, 2, fl);
  EXPECT_EQ(fl.cf, 1u);
  EXPECT_EQ(fl.nf, 1u);
  alu(Opcode::Sub, 0x8000000000000000ull, 1, fl);
  EXPECT_EQ(fl.of, 1u);
  EXPECT_EQ(alu(Opcode::CmpLt, 3, 5, fl), 1u);
  EXPECT_EQ(fl.cf, 1u);
  EXPECT_EQ(alu(Opcode::CmpEq, 5, 5, fl), 1u);
  EXPECT_EQ(fl.zf, 1u);
}

TEST(Flags, ParityMulAndLogic) {
  Flags fl;
  alu(Opcode::Xor, 0x3, 0, fl);
  EXPECT_EQ(fl.pf, 1u);
  alu(Opcode::Xor, 0x7, 0, fl);
  EXPECT_EQ(fl.pf, 0u);
  alu(Opcode::Xor, 0x100, 0, fl);
  EXPECT_EQ(fl.pf, 1u);  // low byte zero has even parity
  alu(Opcode::Mul, 1ull << 40, 1ull << 40, fl);
  EXPECT_EQ(fl.cf, 1u);
  EXPECT_EQ(fl.of, 1u);
  alu(Opcode::Mul, 3, 5, fl);
  EXPECT_EQ(fl.cf, 0u);
  alu(Opcode::And, ~0ull, ~0ull, fl);
  EXPECT_EQ(fl.cf | fl.of | fl.af, 0u);
  EXPECT_EQ(alu(Opcode::Shl, 1, 65, fl), 2u);
  EXPECT_THROW(alu(Opcode::UDiv, 1, 0, fl), DivisionByZero);
}

TEST(Interp, FuelAndBounds) {
  Function loop = parse_function("func l(R0) tag=l entry=0\nblock 0:\n  jump 0\n");
  std::uint64_t a[] = {0};
  EXPECT_THROW(run_function(loop, a, 1000), FuelExhausted);
  Function oob = parse_function(
      "func o(R0) tag=o entry=0\nblock 0:\n  store [BP+0x10000], R0\n  ret R0\n");
  EXPECT_THROW(run_function(oob, a), MalformedIR);
}

TEST(Liveness, BackwardDataflow) {
  Function f = gcd_function();
  Liveness lv(f);
  RegSet in0 = lv.live_in(0);
  EXPECT_TRUE(in0.test(index_of(Reg::R0)));
  EXPECT_TRUE(in0.test(index_of(Reg::R1)));
  EXPECT_FALSE(in0.test(index_of(Reg::R3)));
  // after `umod R3` in block 1, R3 is live until `mov R1, R3`
  EXPECT_TRUE(lv.live_after(1, 0).test(index_of(Reg::R3)));
  EXPECT_FALSE(lv.live_after(1, 2).test(index_of(Reg::R3)));
}
