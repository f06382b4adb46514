#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "obfdetect/mir.hpp"

namespace obfdetect::corpus {

using Reference = std::function<std::uint64_t(std::span<const std::uint64_t>)>;

struct Family {
  std::string name;
  int arity = 1;
  mir::Function base;  // canonical variant
  Reference reference;
};

const std::vector<Family>& families();
const Family& family(std::string_view name);

// Semantics-preserving variant: registers permuted within R0..R7, local
// slots relocated, blocks renumbered and reordered, commutative operands swapped.
mir::Function make_variant(const Family& fam, std::mt19937_64& rng);

}  // namespace obfdetect::corpus
