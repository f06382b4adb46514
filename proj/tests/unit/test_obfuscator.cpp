#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <set>

#include "obfdetect/families.hpp"
#include "obfdetect/interp.hpp"
#include "obfdetect/mir_text.hpp"
#include "obfdetect/obfuscator.hpp"

using namespace obfdetect;
using namespace obfdetect::mir;
using obf::PassContext;

namespace {

Function binary_function(Opcode op) {
  Function f;
  f.name = "bin";
  f.params = {Reg::R0, Reg::R1};
  BasicBlock b;
  b.id = 0;
  b.instrs.push_back(make_binary(op, Reg::R2, Reg::R0, Reg::R1));
  b.term = Terminator::ret(Reg::R2);
  f.blocks.push_back(b);
  return f;
}

std::uint64_t oracle(Opcode op, std::uint64_t x, std::uint64_t y) {
  switch (op) {
    case Opcode::Add: return x + y;
    case Opcode::Sub: return x - y;
    case Opcode::Xor: return x ^ y;
    case Opcode::And: return x & y;
    case Opcode::Or: return x | y;
    default: return 0;
  }
}

using Pass = std::function<Function(const Function&, PassContext&)>;

// Every distinct rewrite the pass produces over a few seeds, checked on all
// 8-bit operand pairs (with the top byte mirrored to exercise carries).
void check_exhaustive(const Pass& pass, Opcode op, std::size_t min_variants) {
  const Function f = binary_function(op);
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 16; ++seed) {
    PassContext ctx(seed);
    const Function g = pass(f, ctx);
    if (!seen.insert(print_function(g)).second) continue;
    EXPECT_NE(g, f);
    for (std::uint64_t x = 0; x < 256; ++x) {
      for (std::uint64_t y = 0; y < 256; ++y) {
        const std::uint64_t args[] = {x | (x << 56), y | ((255 - y) << 56)};
        ASSERT_EQ(run_function(g, args).value, oracle(op, args[0], args[1]))
            << opcode_name(op) << " x=" << x << " y=" << y << "\n" << print_function(g);
      }
    }
  }
  EXPECT_GE(seen.size(), min_variants) << opcode_name(op);
}

std::uint64_t newton_inverse(std::uint64_t a) {
  std::uint64_t x = a;  // correct to 3 bits for odd a
  for (int i = 0; i < 6; ++i) x *= 2 - a * x;
  return x;
}

struct PassCase {
  TransformLabel label;
  Construction construction;
};

std::vector<PassCase> all_pass_cases() {
  std::vector<PassCase> out;
  for (auto l : kAllTransformLabels) {
    if (l == TransformLabel::Clean) continue;
    for (auto c : constructions_for(l)) out.push_back({l, c});
  }
  return out;
}

int count_blocks(const Function& f, const std::function<bool(const BasicBlock&)>& pred) {
  int n = 0;
  for (const auto& b : f.blocks) n += pred(b) ? 1 : 0;
  return n;
}

bool is_decision_node(const BasicBlock& b, Opcode op) {
  return b.instrs.size() == 1 && b.instrs[0].op == op && b.instrs[0].srcs[1].is_imm() &&
         b.term.kind == Terminator::Kind::Branch && b.term.reg == b.instrs[0].dst.reg;
}

int nest_depth(const Function& f, BlockId id, Opcode op) {
  const BasicBlock* b = f.find_block(id);
  if (!b || !is_decision_node(*b, op)) return 0;
  return 1 + std::max(nest_depth(f, b->term.targets[0], op), nest_depth(f, b->term.targets[1], op));
}

int ceil_log2(std::size_t n) {
  int d = 0;
  while ((std::size_t{1} << d) < n) ++d;
  return d;
}

}  // namespace

TEST(EncodeArithmetic, ExhaustiveEightBitIdentities) {
  const Pass pass = [](const Function& f, PassContext& c) { return obf::encode_arithmetic(f, c); };
  for (auto op : {Opcode::Add, Opcode::Sub, Opcode::Xor, Opcode::And, Opcode::Or}) check_exhaustive(pass, op, 2);
}

TEST(Substitution, ExhaustiveEightBitIdentities) {
  const Pass pass = [](const Function& f, PassContext& c) { return obf::substitute_instructions(f, c); };
  for (auto op : {Opcode::Add, Opcode::Sub, Opcode::Xor, Opcode::And, Opcode::Or}) check_exhaustive(pass, op, 1);
}

TEST(EncodeData, InverseMatchesNewtonIteration) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) {
    const std::uint64_t a = rng() | 1;
    const std::uint64_t inv = obf::inverse_mod64(a);
    ASSERT_EQ(inv, newton_inverse(a));
    ASSERT_EQ(a * inv, 1u);
  }
  EXPECT_EQ(obf::inverse_mod64(1), 1u);
  EXPECT_THROW(obf::inverse_mod64(6), obf::PassError);
}

TEST(Passes, PreserveFamilySemantics) {
  std::mt19937_64 rng(5);
  for (const auto& pc : all_pass_cases()) {
    for (const auto& fam : corpus::families()) {
      PassContext ctx(rng());
      ctx.donor_fragments = {corpus::family("crc_mix").base.blocks[2].instrs};
      const Function g = obf::apply_pass(pc.label, pc.construction, fam.base, ctx);
      require_valid(g);
      ASSERT_NE(g, fam.base) << label_name(pc.label) << " " << fam.name;
      for (int i = 0; i < 32; ++i) {
        std::vector<std::uint64_t> args(fam.arity);
        for (auto& a : args) a = (i & 1) ? rng() : rng() % 50;
        ASSERT_EQ(run_function(g, args, 50'000'000).value, fam.reference(args))
            << label_name(pc.label) << "/" << construction_name(pc.construction) << " on " << fam.name;
      }
    }
  }
}

TEST(Passes, DeterministicUnderSeed) {
  const auto& base = corpus::family("bubble_sort").base;
  for (const auto& pc : all_pass_cases()) {
    PassContext a(42), b(42);
    EXPECT_EQ(obf::apply_pass(pc.label, pc.construction, base, a),
              obf::apply_pass(pc.label, pc.construction, base, b))
        << label_name(pc.label);
  }
}

TEST(Passes, StackedPassesPreserveSemantics) {
  using TL = TransformLabel;
  const std::vector<TL> stack = {TL::Virt, TL::Flat, TL::AddO, TL::EncD, TL::EncA, TL::EncL, TL::Sub};
  std::mt19937_64 rng(9);
  for (const auto& fam : corpus::families()) {
    Function g = fam.base;
    for (auto l : stack) {
      PassContext ctx(rng());
      g = obf::apply_pass(l, Construction::Default, g, ctx);
    }
    for (int i = 0; i < 8; ++i) {
      std::vector<std::uint64_t> args(fam.arity);
      for (auto& a : args) a = rng();
      ASSERT_EQ(run_function(g, args, 100'000'000).value, fam.reference(args)) << fam.name;
    }
  }
}

TEST(Flatten, SwitchDispatcherCoversEveryBlock) {
  const auto& base = corpus::family("gcd").base;
  PassContext ctx(1);
  const Function g = obf::flatten(base, ctx, Construction::SwitchBased);
  const int switches = count_blocks(g, [](const BasicBlock& b) { return b.term.kind == Terminator::Kind::Switch; });
  ASSERT_EQ(switches, 1);
  for (const auto& b : g.blocks) {
    if (b.term.kind == Terminator::Kind::Switch) EXPECT_EQ(b.term.case_values.size(), base.blocks.size());
  }
  const BasicBlock* entry = g.find_block(g.entry_block);
  ASSERT_EQ(entry->term.kind, Terminator::Kind::Jump);
  EXPECT_EQ(g.find_block(entry->term.targets[0])->term.kind, Terminator::Kind::Switch);
}

TEST(Flatten, IfnestIsBalanced) {
  for (const char* name : {"gcd", "bubble_sort", "matmul2"}) {
    const auto& base = corpus::family(name).base;
    PassContext ctx(2);
    const Function g = obf::flatten(base, ctx, Construction::IfnestBased);
    EXPECT_EQ(count_blocks(g, [](const BasicBlock& b) { return b.term.kind == Terminator::Kind::Switch; }), 0);
    EXPECT_EQ(count_blocks(g, [](const BasicBlock& b) { return is_decision_node(b, Opcode::CmpLt); }),
              static_cast<int>(base.blocks.size()) - 1)
        << name;
    const BlockId dispatcher = g.find_block(g.entry_block)->term.targets[0];
    EXPECT_EQ(nest_depth(g, dispatcher, Opcode::CmpLt), ceil_log2(base.blocks.size())) << name;
  }
}

TEST(Flatten, RejectsSmallFunctionsAndForeignConstructions) {
  PassContext ctx(1);
  EXPECT_THROW(obf::flatten(binary_function(Opcode::Add), ctx, Construction::SwitchBased), obf::TooSmall);
  EXPECT_THROW(obf::flatten(corpus::family("gcd").base, ctx, Construction::Poly), obf::UnsupportedConstruction);
}

TEST(Virtualize, DispatchShapes) {
  const auto& base = corpus::family("fnv_hash").base;
  PassContext c1(4), c2(4), c3(4);
  const Function sw = obf::virtualize(base, c1, Construction::SwitchDispatch);
  const Function lin = obf::virtualize(base, c2, Construction::LinearDispatch);
  const Function nest = obf::virtualize(base, c3, Construction::IfnestDispatch);

  std::size_t handlers = 0;
  for (const auto& b : sw.blocks) {
    if (b.term.kind == Terminator::Kind::Switch) handlers = b.term.case_values.size();
  }
  ASSERT_GT(handlers, 4u);
  auto no_switch = [](const Function& f) {
    return count_blocks(f, [](const BasicBlock& b) { return b.term.kind == Terminator::Kind::Switch; }) == 0;
  };
  EXPECT_TRUE(no_switch(lin));
  EXPECT_TRUE(no_switch(nest));
  EXPECT_EQ(count_blocks(lin, [](const BasicBlock& b) { return is_decision_node(b, Opcode::CmpEq); }),
            static_cast<int>(handlers));
  EXPECT_EQ(count_blocks(nest, [](const BasicBlock& b) { return is_decision_node(b, Opcode::CmpLt); }),
            static_cast<int>(handlers) - 1);

  // original memory traffic moved into bytecode: no BP-relative scalar access remains outside the VM slots
  for (const auto& b : sw.blocks) {
    for (const auto& in : b.instrs) {
      if (in.op == Opcode::Load && in.srcs[0].reg == Reg::BP) {
        EXPECT_TRUE(in.srcs[0].offset == obf::kVmPcSlot || in.srcs[0].offset >= obf::kVmRegisters);
      }
    }
  }
}

TEST(Virtualize, RejectsFloatCode) {
  Function f = binary_function(Opcode::Add);
  f.blocks[0].instrs.insert(f.blocks[0].instrs.begin(), make_fconst(Reg::F0, 1.5));
  PassContext ctx(1);
  EXPECT_THROW(obf::virtualize(f, ctx, Construction::SwitchDispatch), obf::UnsupportedConstruction);
}

TEST(EncodeLiterals, RequiresLiterals) {
  PassContext ctx(1);
  EXPECT_THROW(obf::encode_literals(binary_function(Opcode::Add), ctx), obf::NoLiterals);
  const Function g = obf::encode_literals(corpus::family("fnv_hash").base, ctx);
  // the FNV prime no longer appears as an immediate
  for (const auto& b : g.blocks) {
    for (const auto& in : b.instrs) {
      for (const auto& s : in.srcs) EXPECT_FALSE(s.is_imm() && s.imm == 0x100000001b3ull);
    }
  }
}

TEST(EncodeData, RequiresScalarSlot) {
  PassContext ctx(1);
  EXPECT_THROW(obf::encode_data(binary_function(Opcode::Add), ctx, Construction::Xor), obf::NoEligibleSlot);
}

TEST(EncodeData, StoredValuesAreEncoded) {
  // factorial keeps n in a slot; after encoding no plain copy of n reaches memory
  const auto& base = corpus::family("factorial").base;
  for (auto c : {Construction::Poly, Construction::Xor, Construction::Add}) {
    PassContext ctx(7);
    const Function g = obf::encode_data(base, ctx, c);
    const std::uint64_t args[] = {9};
    EXPECT_EQ(run_function(g, args).value, 362880u);
    MachineState s;
    s.set(Reg::R0, 9);
    BlockId cur = g.entry_block;
    bool plain_seen = false;
    for (int step = 0; step < 3; ++step) {
      auto [next, exit] = run_block(*g.find_block(cur), s);
      s = next;
      for (std::int64_t off = -8; off >= -0x100; off -= 8) {
        if (s.load(kFrameBase + off) == 9) plain_seen = true;
      }
      if (exit.kind == BlockExit::Kind::Return) break;
      cur = exit.target;
    }
    EXPECT_FALSE(plain_seen) << construction_name(c);
  }
}

TEST(AddOpaque, InsertsRequestedPredicates) {
  const auto& base = corpus::family("bubble_sort").base;
  for (auto c : constructions_for(TransformLabel::AddO)) {
    PassContext ctx(11);
    const Function g = obf::add_opaque(base, ctx, c, 6);
    EXPECT_GE(g.blocks.size(), base.blocks.size() + 12) << construction_name(c);
    EXPECT_GT(count_blocks(g, [](const BasicBlock& b) { return b.term.kind == Terminator::Kind::Branch; }),
              count_blocks(base, [](const BasicBlock& b) { return b.term.kind == Terminator::Kind::Branch; }) + 5);
  }
}
