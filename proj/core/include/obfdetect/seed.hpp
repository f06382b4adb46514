#pragma once

#include <cstdint>
#include <string_view>

namespace obfdetect {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seed for a named stage and a (cell, index) position under a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stage, std::uint64_t cell = 0,
                                 std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(master);
  for (unsigned char c : stage) h = splitmix64(h ^ c);
  h = splitmix64(h ^ cell);
  return splitmix64(h ^ (index * 0x2545f4914f6cdd1dull));
}

}  // namespace obfdetect
