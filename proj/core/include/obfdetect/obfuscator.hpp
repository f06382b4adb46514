#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "obfdetect/error.hpp"
#include "obfdetect/labels.hpp"
#include "obfdetect/mir.hpp"

namespace obfdetect::obf {

// A pass rejected its input; the caller may retry with another seed.
class PassError : public Error {
 public:
  using Error::Error;
};
class NoLiterals : public PassError {
 public:
  using PassError::PassError;
};
class NoEligibleSlot : public PassError {
 public:
  using PassError::PassError;
};
class UnsupportedConstruction : public PassError {
 public:
  using PassError::PassError;
};
class TooSmall : public PassError {
 public:
  using PassError::PassError;
};

// Memory regions reserved by the passes, as offsets from BP.
inline constexpr std::int64_t kScalarSlotsLo = -0x800;  // [lo, -8]: EncD candidates
inline constexpr std::int64_t kVmPcSlot = -0x7f8;
inline constexpr std::int64_t kAliasRegionLo = 0x100;
inline constexpr std::int64_t kAliasRegionHi = 0x400;
inline constexpr std::int64_t kOpaqueTable = 0x400;
inline constexpr std::int64_t kVmRegisters = 0x800;
inline constexpr std::int64_t kVmBytecode = 0x1000;
inline constexpr std::int64_t kVmBytecodeEnd = 0x8000;

struct PassParams {
  double density = 1.0;  // share of candidate sites rewritten (EncA, EncL, Sub)
  int opaque_count = 4;  // predicates inserted by AddO
};

class PassContext {
 public:
  explicit PassContext(std::uint64_t seed, PassParams params = {}) : rng_(seed), params_(params) {}

  std::uint64_t next() { return rng_(); }
  std::size_t below(std::size_t n) { return n ? static_cast<std::size_t>(rng_() % n) : 0; }
  bool chance(double p) { return p >= 1.0 || (p > 0.0 && std::uniform_real_distribution<>(0, 1)(rng_) < p); }
  std::mt19937_64& rng() { return rng_; }
  const PassParams& params() const { return params_; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

  // Straight-line code used to populate dead blocks; the function's own
  // instructions are used when empty.
  std::vector<std::vector<mir::Instruction>> donor_fragments;

 private:
  std::mt19937_64 rng_;
  PassParams params_;
};

mir::Function encode_arithmetic(const mir::Function& f, PassContext& ctx);
mir::Function encode_literals(const mir::Function& f, PassContext& ctx);
mir::Function encode_data(const mir::Function& f, PassContext& ctx, Construction codec);
mir::Function substitute_instructions(const mir::Function& f, PassContext& ctx);
mir::Function add_opaque(const mir::Function& f, PassContext& ctx, Construction construction,
                         int count);
mir::Function flatten(const mir::Function& f, PassContext& ctx, Construction construction);
mir::Function virtualize(const mir::Function& f, PassContext& ctx, Construction construction);

// Dispatches to the pass for `label`; Default picks the pass's first construction.
mir::Function apply_pass(TransformLabel label, Construction construction, const mir::Function& f,
                         PassContext& ctx);

// Multiplicative inverse of an odd value modulo 2^64.
std::uint64_t inverse_mod64(std::uint64_t a);

}  // namespace obfdetect::obf
