#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "obfdetect/mir.hpp"

namespace obfdetect::mir {

// Frame layout shared by the interpreter and every pass that allocates
// scratch memory. Addresses are byte addresses; each address holds one
// 64-bit word and words do not overlap.
inline constexpr std::uint64_t kFrameBase = 0x100000;
inline constexpr std::uint64_t kStackStart = kFrameBase - 0x4000;
inline constexpr std::uint64_t kScratchLo = kFrameBase - 0x8000;
inline constexpr std::uint64_t kScratchHi = kFrameBase + 0x8000;
inline constexpr std::uint64_t kDefaultFuel = 1'000'000;

class FuelExhausted : public Error {
 public:
  using Error::Error;
};

class DivisionByZero : public MalformedIR {
 public:
  using MalformedIR::MalformedIR;
};

struct MachineState {
  std::array<std::uint64_t, kNumIntRegs> regs{};
  std::array<std::uint64_t, kNumFloatRegs> fregs{};  // IEEE-754 bit patterns
  std::map<std::uint64_t, std::uint64_t> mem;
  std::vector<std::uint64_t> output;

  // SP and BP start at the frame layout; everything else is zero.
  MachineState();

  std::uint64_t get(Reg r) const;
  void set(Reg r, std::uint64_t v);
  std::uint64_t load(std::uint64_t addr) const;

  friend bool operator==(const MachineState&, const MachineState&) = default;
};

struct BlockExit {
  enum class Kind { Goto, Return };
  Kind kind = Kind::Goto;
  BlockId target = 0;
  std::uint64_t value = 0;

  friend bool operator==(const BlockExit&, const BlockExit&) = default;
};

struct InterpResult {
  std::uint64_t value = 0;
  std::uint64_t steps = 0;
};

// Executes one block on a copy of `state`.
std::pair<MachineState, BlockExit> run_block(const BasicBlock& block, const MachineState& state);

// Runs a function from its entry block. Memory is confined to
// [kScratchLo, kScratchHi); leaving it is MalformedIR.
InterpResult run_function(const Function& f, std::span<const std::uint64_t> args,
                          std::uint64_t fuel = kDefaultFuel);

// Flag word produced by an ALU operation, in the order zf nf cf of pf af.
struct Flags {
  std::uint64_t zf = 0, nf = 0, cf = 0, of = 0, pf = 0, af = 0;
};

std::uint64_t parity_of_low_byte(std::uint64_t v);

// Computes an integer ALU result and its flags. Throws DivisionByZero.
std::uint64_t alu(Opcode op, std::uint64_t a, std::uint64_t b, Flags& flags);

}  // namespace obfdetect::mir
