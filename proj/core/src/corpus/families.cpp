#include "obfdetect/families.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "obfdetect/mir_text.hpp"

namespace obfdetect::corpus {

namespace {

constexpr std::uint64_t kLcgMul = 0x5851f42d4c957f2dull;
constexpr std::uint64_t kLcgAdd = 0x14057b7ef767814full;

using Args = std::span<const std::uint64_t>;

std::uint64_t ref_factorial(Args a) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= (a[0] & 0xf); ++i) r *= i;
  return r;
}

std::uint64_t ref_fibonacci(Args a) {
  std::uint64_t x = 0, y = 1;
  for (std::uint64_t i = 0; i < (a[0] & 0x1f); ++i) {
    const std::uint64_t t = x + y;
    x = y;
    y = t;
  }
  return x;
}

std::uint64_t ref_gcd(Args a) {
  std::uint64_t x = a[0] & 0xffff, y = a[1] & 0xffff;
  while (y) {
    const std::uint64_t t = x % y;
    x = y;
    y = t;
  }
  return x;
}

std::uint64_t ref_bubble_sort(Args a) {
  std::uint64_t v[6], x = a[0];
  for (auto& e : v) {
    x = x * kLcgMul + kLcgAdd;
    e = x >> 56;
  }
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5 - i; ++j) {
      if (v[j + 1] < v[j]) std::swap(v[j], v[j + 1]);
    }
  }
  std::uint64_t acc = 0;
  for (int k = 0; k < 6; ++k) acc += v[k] * static_cast<std::uint64_t>(k + 1);
  return acc;
}

std::uint64_t ref_insertion_sort(Args a) {
  std::uint64_t v[6], x = a[0];
  for (auto& e : v) {
    x = x * kLcgMul + kLcgAdd;
    e = (x >> 33) & 0xff;
  }
  for (int i = 1; i < 6; ++i) {
    const std::uint64_t key = v[i];
    int j = i;
    while (j > 0 && key < v[j - 1]) {
      v[j] = v[j - 1];
      --j;
    }
    v[j] = key;
  }
  std::uint64_t h = 0;
  for (auto e : v) h = h * 31 + e;
  return h;
}

std::uint64_t ref_binary_search(Args a) {
  std::uint64_t v[16];
  for (std::uint64_t i = 0; i < 16; ++i) v[i] = 3 * i + (a[1] & 7);
  const std::uint64_t key = a[0] & 0x3f;
  std::uint64_t lo = 0, hi = 16;
  while (lo < hi) {
    const std::uint64_t mid = (lo + hi) >> 1;
    if (v[mid] < key) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  return (key << 8) + lo;
}

std::uint64_t ref_fnv_hash(Args a) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (int i = 0; i < 8; ++i) {
    h ^= (a[0] >> (8 * i)) & 0xff;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t ref_crc_mix(Args a) {
  std::uint64_t crc = 0xffffffff;
  for (int i = 0; i < 16; ++i) {
    const std::uint64_t b = (crc ^ (a[0] >> i)) & 1;
    crc >>= 1;
    if (b) crc ^= 0xedb88320;
  }
  return crc ^ 0xffffffff;
}

std::uint64_t ref_modexp(Args a) {
  const std::uint64_t m = (a[2] & 0xfff) + 2;
  std::uint64_t e = a[1] & 0xff, base = a[0] % m, r = 1;
  while (e) {
    if (e & 1) r = r * base % m;
    base = base * base % m;
    e >>= 1;
  }
  return r;
}

std::uint64_t ref_minmax_scan(Args a) {
  std::uint64_t x = a[0], lo = ~0ull, hi = 0;
  for (int i = 0; i < 8; ++i) {
    x = x * kLcgMul + kLcgAdd;
    const std::uint64_t v = x >> 48;
    if (v < lo) lo = v;
    if (hi < v) hi = v;
  }
  return hi - lo;
}

std::uint64_t ref_strlen_scan(Args a) {
  std::uint64_t n = 0;
  while (n < 8 && ((a[0] >> (8 * n)) & 0x7) != 0) ++n;
  return n;
}

std::uint64_t ref_matmul2(Args a) {
  std::uint64_t A[4], B[4], C[4];
  for (int k = 0; k < 4; ++k) {
    A[k] = (a[0] >> (4 * k)) & 0xf;
    B[k] = (a[1] >> (4 * k)) & 0xf;
  }
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) C[2 * i + j] = A[2 * i] * B[j] + A[2 * i + 1] * B[2 + j];
  }
  std::uint64_t s = 0;
  for (int k = 0; k < 4; ++k) s += C[k] * static_cast<std::uint64_t>(2 * k + 1);
  return s;
}

struct Source {
  const char* name;
  int arity;
  const char* text;
  std::uint64_t (*reference)(Args);
};

const Source kSources[] = {
    {"factorial", 1, R"(func factorial(R0) entry=0
block 0:
  and R1, R0, 0xf
  store [BP-0x8], R1
  const R2, 0x1
  store [BP-0x10], R2
  store [BP-0x18], R2
  jump 1
block 1:
  load R1, [BP-0x18]
  load R2, [BP-0x8]
  cmp_lt R3, R2, R1
  branch R3, 3, 2
block 2:
  load R1, [BP-0x10]
  load R2, [BP-0x18]
  mul R1, R1, R2
  store [BP-0x10], R1
  add R2, R2, 0x1
  store [BP-0x18], R2
  jump 1
block 3:
  load R0, [BP-0x10]
  ret R0
)",
     ref_factorial},
    {"fibonacci", 1, R"(func fibonacci(R0) entry=0
block 0:
  and R1, R0, 0x1f
  store [BP-0x8], R1
  const R2, 0x0
  store [BP-0x10], R2
  const R3, 0x1
  store [BP-0x18], R3
  store [BP-0x20], R2
  jump 1
block 1:
  load R1, [BP-0x20]
  load R2, [BP-0x8]
  cmp_lt R3, R1, R2
  branch R3, 2, 3
block 2:
  load R4, [BP-0x10]
  load R5, [BP-0x18]
  add R6, R4, R5
  store [BP-0x10], R5
  store [BP-0x18], R6
  add R1, R1, 0x1
  store [BP-0x20], R1
  jump 1
block 3:
  load R0, [BP-0x10]
  ret R0
)",
     ref_fibonacci},
    {"gcd", 2, R"(func gcd(R0, R1) entry=0
block 0:
  and R2, R0, 0xffff
  and R3, R1, 0xffff
  store [BP-0x8], R2
  store [BP-0x10], R3
  jump 1
block 1:
  load R3, [BP-0x10]
  cmp_eq R4, R3, 0x0
  branch R4, 3, 2
block 2:
  load R2, [BP-0x8]
  umod R5, R2, R3
  store [BP-0x8], R3
  store [BP-0x10], R5
  jump 1
block 3:
  load R0, [BP-0x8]
  ret R0
)",
     ref_gcd},
    {"bubble_sort", 1, R"(func bubble_sort(R0) entry=0
block 0:
  store [BP-0x8], R0
  const R1, 0x0
  store [BP-0x10], R1
  jump 1
block 1:
  load R1, [BP-0x10]
  cmp_lt R2, R1, 0x6
  branch R2, 2, 3
block 2:
  load R3, [BP-0x8]
  mul R3, R3, 0x5851f42d4c957f2d
  add R3, R3, 0x14057b7ef767814f
  store [BP-0x8], R3
  shr R4, R3, 0x38
  shl R5, R1, 0x3
  add R5, R5, BP
  store [R5-0x1000], R4
  add R1, R1, 0x1
  store [BP-0x10], R1
  jump 1
block 3:
  const R1, 0x0
  store [BP-0x10], R1
  jump 4
block 4:
  load R1, [BP-0x10]
  cmp_lt R2, R1, 0x5
  branch R2, 5, 9
block 5:
  const R3, 0x0
  store [BP-0x18], R3
  jump 6
block 6:
  load R3, [BP-0x18]
  load R1, [BP-0x10]
  sub R4, 0x5, R1
  cmp_lt R2, R3, R4
  branch R2, 7, 8
block 7:
  shl R5, R3, 0x3
  add R5, R5, BP
  load R6, [R5-0x1000]
  load R7, [R5-0xff8]
  cmp_lt R2, R7, R6
  branch R2, 10, 11
block 10:
  store [R5-0x1000], R7
  store [R5-0xff8], R6
  jump 11
block 11:
  add R3, R3, 0x1
  store [BP-0x18], R3
  jump 6
block 8:
  load R1, [BP-0x10]
  add R1, R1, 0x1
  store [BP-0x10], R1
  jump 4
block 9:
  const R1, 0x0
  store [BP-0x10], R1
  store [BP-0x20], R1
  jump 12
block 12:
  load R1, [BP-0x10]
  cmp_lt R2, R1, 0x6
  branch R2, 13, 14
block 13:
  shl R5, R1, 0x3
  add R5, R5, BP
  load R6, [R5-0x1000]
  add R7, R1, 0x1
  mul R6, R6, R7
  load R4, [BP-0x20]
  add R4, R4, R6
  store [BP-0x20], R4
  add R1, R1, 0x1
  store [BP-0x10], R1
  jump 12
block 14:
  load R0, [BP-0x20]
  ret R0
)",
     ref_bubble_sort},
    {"insertion_sort", 1, R"(func insertion_sort(R0) entry=0
block 0:
  store [BP-0x8], R0
  const R1, 0x0
  store [BP-0x10], R1
  jump 1
block 1:
  load R1, [BP-0x10]
  cmp_lt R2, R1, 0x6
  branch R2, 2, 3
block 2:
  load R3, [BP-0x8]
  mul R3, R3, 0x5851f42d4c957f2d
  add R3, R3, 0x14057b7ef767814f
  store [BP-0x8], R3
  shr R4, R3, 0x21
  and R4, R4, 0xff
  shl R5, R1, 0x3
  add R5, R5, BP
  store [R5-0x1000], R4
  add R1, R1, 0x1
  store [BP-0x10], R1
  jump 1
block 3:
  const R1, 0x1
  store [BP-0x10], R1
  jump 4
block 4:
  load R1, [BP-0x10]
  cmp_lt R2, R1, 0x6
  branch R2, 5, 10
block 5:
  shl R5, R1, 0x3
  add R5, R5, BP
  load R6, [R5-0x1000]
  store [BP-0x18], R6
  store [BP-0x20], R1
  jump 6
block 6:
  load R3, [BP-0x20]
  cmp_eq R2, R3, 0x0
  branch R2, 9, 7
block 7:
  shl R5, R3, 0x3
  add R5, R5, BP
  load R7, [R5-0x1008]
  load R6, [BP-0x18]
  cmp_lt R2, R6, R7
  branch R2, 8, 9
block 8:
  store [R5-0x1000], R7
  sub R3, R3, 0x1
  store [BP-0x20], R3
  jump 6
block 9:
  load R3, [BP-0x20]
  shl R5, R3, 0x3
  add R5, R5, BP
  load R6, [BP-0x18]
  store [R5-0x1000], R6
  load R1, [BP-0x10]
  add R1, R1, 0x1
  store [BP-0x10], R1
  jump 4
block 10:
  const R1, 0x0
  store [BP-0x10], R1
  store [BP-0x28], R1
  jump 11
block 11:
  load R1, [BP-0x10]
  cmp_lt R2, R1, 0x6
  branch R2, 12, 13
block 12:
  load R4, [BP-0x28]
  mul R4, R4, 0x1f
  shl R5, R1, 0x3
  add R5, R5, BP
  load R6, [R5-0x1000]
  add R4, R4, R6
  store [BP-0x28], R4
  add R1, R1, 0x1
  store [BP-0x10], R1
  jump 11
block 13:
  load R0, [BP-0x28]
  ret R0
)",
     ref_insertion_sort},
    {"binary_search", 2, R"(func binary_search(R0, R1) entry=0
block 0:
  and R2, R1, 0x7
  const R3, 0x0
  store [BP-0x8], R3
  jump 1
block 1:
  load R3, [BP-0x8]
  cmp_lt R4, R3, 0x10
  branch R4, 2, 3
block 2:
  mul R5, R3, 0x3
  add R5, R5, R2
  shl R6, R3, 0x3
  add R6, R6, BP
  store [R6-0x1000], R5
  add R3, R3, 0x1
  store [BP-0x8], R3
  jump 1
block 3:
  and R0, R0, 0x3f
  store [BP-0x10], R0
  const R3, 0x0
  store [BP-0x18], R3
  const R3, 0x10
  store [BP-0x20], R3
  jump 4
block 4:
  load R3, [BP-0x18]
  load R4, [BP-0x20]
  cmp_lt R5, R3, R4
  branch R5, 5, 8
block 5:
  add R6, R3, R4
  shr R6, R6, 0x1
  shl R7, R6, 0x3
  add R7, R7, BP
  load R7, [R7-0x1000]
  load R0, [BP-0x10]
  cmp_lt R5, R7, R0
  branch R5, 6, 7
block 6:
  add R6, R6, 0x1
  store [BP-0x18], R6
  jump 4
block 7:
  store [BP-0x20], R6
  jump 4
block 8:
  load R0, [BP-0x10]
  shl R0, R0, 0x8
  load R3, [BP-0x18]
  add R0, R0, R3
  ret R0
)",
     ref_binary_search},
    {"fnv_hash", 1, R"(func fnv_hash(R0) entry=0
block 0:
  store [BP-0x8], R0
  const R1, 0xcbf29ce484222325
  store [BP-0x10], R1
  const R2, 0x0
  store [BP-0x18], R2
  jump 1
block 1:
  load R2, [BP-0x18]
  cmp_lt R3, R2, 0x8
  branch R3, 2, 3
block 2:
  load R4, [BP-0x8]
  shl R5, R2, 0x3
  shr R4, R4, R5
  and R4, R4, 0xff
  load R1, [BP-0x10]
  xor R1, R1, R4
  mul R1, R1, 0x100000001b3
  store [BP-0x10], R1
  add R2, R2, 0x1
  store [BP-0x18], R2
  jump 1
block 3:
  load R0, [BP-0x10]
  ret R0
)",
     ref_fnv_hash},
    {"crc_mix", 1, R"(func crc_mix(R0) entry=0
block 0:
  store [BP-0x8], R0
  const R1, 0xffffffff
  store [BP-0x10], R1
  const R2, 0x0
  store [BP-0x18], R2
  jump 1
block 1:
  load R2, [BP-0x18]
  cmp_lt R3, R2, 0x10
  branch R3, 2, 5
block 2:
  load R4, [BP-0x8]
  shr R4, R4, R2
  load R1, [BP-0x10]
  xor R5, R1, R4
  and R5, R5, 0x1
  shr R1, R1, 0x1
  store [BP-0x10], R1
  branch R5, 3, 4
block 3:
  load R1, [BP-0x10]
  xor R1, R1, 0xedb88320
  store [BP-0x10], R1
  jump 4
block 4:
  load R2, [BP-0x18]
  add R2, R2, 0x1
  store [BP-0x18], R2
  jump 1
block 5:
  load R0, [BP-0x10]
  xor R0, R0, 0xffffffff
  ret R0
)",
     ref_crc_mix},
    {"modexp", 3, R"(func modexp(R0, R1, R2) entry=0
block 0:
  and R3, R2, 0xfff
  add R3, R3, 0x2
  store [BP-0x8], R3
  and R4, R1, 0xff
  store [BP-0x10], R4
  umod R5, R0, R3
  store [BP-0x18], R5
  const R6, 0x1
  store [BP-0x20], R6
  jump 1
block 1:
  load R4, [BP-0x10]
  cmp_eq R7, R4, 0x0
  branch R7, 5, 2
block 2:
  and R7, R4, 0x1
  branch R7, 3, 4
block 3:
  load R6, [BP-0x20]
  load R5, [BP-0x18]
  mul R6, R6, R5
  load R3, [BP-0x8]
  umod R6, R6, R3
  store [BP-0x20], R6
  jump 4
block 4:
  load R5, [BP-0x18]
  mul R5, R5, R5
  load R3, [BP-0x8]
  umod R5, R5, R3
  store [BP-0x18], R5
  load R4, [BP-0x10]
  shr R4, R4, 0x1
  store [BP-0x10], R4
  jump 1
block 5:
  load R0, [BP-0x20]
  ret R0
)",
     ref_modexp},
    {"minmax_scan", 1, R"(func minmax_scan(R0) entry=0
block 0:
  store [BP-0x8], R0
  const R1, 0xffffffffffffffff
  store [BP-0x10], R1
  const R2, 0x0
  store [BP-0x18], R2
  store [BP-0x20], R2
  jump 1
block 1:
  load R3, [BP-0x20]
  cmp_lt R4, R3, 0x8
  branch R4, 2, 7
block 2:
  load R5, [BP-0x8]
  mul R5, R5, 0x5851f42d4c957f2d
  add R5, R5, 0x14057b7ef767814f
  store [BP-0x8], R5
  shr R5, R5, 0x30
  load R1, [BP-0x10]
  cmp_lt R4, R5, R1
  branch R4, 3, 4
block 3:
  store [BP-0x10], R5
  jump 4
block 4:
  load R2, [BP-0x18]
  cmp_lt R4, R2, R5
  branch R4, 5, 6
block 5:
  store [BP-0x18], R5
  jump 6
block 6:
  add R3, R3, 0x1
  store [BP-0x20], R3
  jump 1
block 7:
  load R0, [BP-0x18]
  load R1, [BP-0x10]
  sub R0, R0, R1
  ret R0
)",
     ref_minmax_scan},
    {"strlen_scan", 1, R"(func strlen_scan(R0) entry=0
block 0:
  store [BP-0x8], R0
  const R1, 0x0
  store [BP-0x10], R1
  jump 1
block 1:
  load R1, [BP-0x10]
  cmp_lt R2, R1, 0x8
  branch R2, 2, 3
block 2:
  load R3, [BP-0x8]
  shl R4, R1, 0x3
  shr R3, R3, R4
  and R3, R3, 0x7
  add R4, R4, BP
  store [R4-0x1000], R3
  add R1, R1, 0x1
  store [BP-0x10], R1
  jump 1
block 3:
  const R1, 0x0
  store [BP-0x18], R1
  jump 4
block 4:
  load R1, [BP-0x18]
  cmp_lt R2, R1, 0x8
  branch R2, 5, 7
block 5:
  shl R4, R1, 0x3
  add R4, R4, BP
  load R3, [R4-0x1000]
  cmp_eq R2, R3, 0x0
  branch R2, 7, 6
block 6:
  add R1, R1, 0x1
  store [BP-0x18], R1
  jump 4
block 7:
  load R0, [BP-0x18]
  ret R0
)",
     ref_strlen_scan},
    {"matmul2", 2, R"(func matmul2(R0, R1) entry=0
block 0:
  store [BP-0x8], R0
  store [BP-0x10], R1
  const R2, 0x0
  store [BP-0x18], R2
  jump 1
block 1:
  load R2, [BP-0x18]
  cmp_lt R3, R2, 0x4
  branch R3, 2, 3
block 2:
  shl R4, R2, 0x2
  load R5, [BP-0x8]
  shr R5, R5, R4
  and R5, R5, 0xf
  load R6, [BP-0x10]
  shr R6, R6, R4
  and R6, R6, 0xf
  shl R7, R2, 0x3
  add R7, R7, BP
  store [R7-0x1000], R5
  store [R7-0xfe0], R6
  add R2, R2, 0x1
  store [BP-0x18], R2
  jump 1
block 3:
  const R2, 0x0
  store [BP-0x20], R2
  jump 4
block 4:
  load R2, [BP-0x20]
  cmp_lt R3, R2, 0x2
  branch R3, 5, 9
block 5:
  const R3, 0x0
  store [BP-0x28], R3
  jump 6
block 6:
  load R3, [BP-0x28]
  cmp_lt R4, R3, 0x2
  branch R4, 7, 8
block 7:
  load R2, [BP-0x20]
  shl R4, R2, 0x4
  add R4, R4, BP
  load R5, [R4-0x1000]
  load R6, [R4-0xff8]
  shl R7, R3, 0x3
  add R7, R7, BP
  load R1, [R7-0xfe0]
  mul R5, R5, R1
  load R1, [R7-0xfd0]
  mul R6, R6, R1
  add R5, R5, R6
  shl R0, R3, 0x3
  add R0, R0, R4
  store [R0-0xfc0], R5
  add R3, R3, 0x1
  store [BP-0x28], R3
  jump 6
block 8:
  load R2, [BP-0x20]
  add R2, R2, 0x1
  store [BP-0x20], R2
  jump 4
block 9:
  const R2, 0x0
  store [BP-0x18], R2
  store [BP-0x30], R2
  jump 10
block 10:
  load R2, [BP-0x18]
  cmp_lt R3, R2, 0x4
  branch R3, 11, 12
block 11:
  shl R4, R2, 0x3
  add R4, R4, BP
  load R5, [R4-0xfc0]
  shl R6, R2, 0x1
  add R6, R6, 0x1
  mul R5, R5, R6
  load R7, [BP-0x30]
  add R7, R7, R5
  store [BP-0x30], R7
  add R2, R2, 0x1
  store [BP-0x18], R2
  jump 10
block 12:
  load R0, [BP-0x30]
  ret R0
)",
     ref_matmul2},
};

std::vector<Family> build_families() {
  std::vector<Family> out;
  for (const auto& s : kSources) {
    Family f;
    f.name = s.name;
    f.arity = s.arity;
    f.base = mir::parse_function(s.text);
    f.base.functionality_tag = s.name;
    mir::require_valid(f.base);
    f.reference = s.reference;
    out.push_back(std::move(f));
  }
  return out;
}

bool commutative(mir::Opcode op) {
  using mir::Opcode;
  return op == Opcode::Add || op == Opcode::Mul || op == Opcode::And || op == Opcode::Or ||
         op == Opcode::Xor || op == Opcode::CmpEq;
}

}  // namespace

const std::vector<Family>& families() {
  static const std::vector<Family> all = build_families();
  return all;
}

const Family& family(std::string_view name) {
  for (const auto& f : families()) {
    if (f.name == name) return f;
  }
  throw DataError("unknown family '" + std::string(name) + "'");
}

mir::Function make_variant(const Family& fam, std::mt19937_64& rng) {
  using namespace mir;
  auto below = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  Function f = fam.base;

  std::vector<int> perm(8);
  for (int i = 0; i < 8; ++i) perm[i] = i;
  for (int i = 7; i > 0; --i) std::swap(perm[i], perm[below(i + 1)]);
  auto rr = [&](Reg r) { return index_of(r) < 8 ? general_reg(perm[index_of(r)]) : r; };

  std::set<std::int64_t> offsets;
  for (const auto& b : f.blocks) {
    for (const auto& in : b.instrs) {
      if (in.dst.is_mem() && in.dst.reg == Reg::BP && in.dst.offset < 0 && in.dst.offset > -0x800) {
        offsets.insert(in.dst.offset);
      }
    }
  }
  std::vector<std::int64_t> pool;
  for (std::int64_t k = 1; k <= 32; ++k) pool.push_back(-8 * k);
  for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[below(i)]);
  std::map<std::int64_t, std::int64_t> slot;
  std::size_t next = 0;
  for (auto o : offsets) slot[o] = pool[next++];
  auto remap_mem = [&](Reg base, std::int64_t off) {
    if (base == Reg::BP && slot.contains(off)) return slot.at(off);
    return off;
  };

  for (auto& p : f.params) p = rr(p);
  for (auto& b : f.blocks) {
    for (auto& in : b.instrs) {
      if (in.dst.is_mem()) in.dst.offset = remap_mem(in.dst.reg, in.dst.offset);
      in.dst.reg = rr(in.dst.reg);
      for (auto& s : in.srcs) {
        if (s.is_mem()) s.offset = remap_mem(s.reg, s.offset);
        if (!s.is_imm()) s.reg = rr(s.reg);
      }
      if (commutative(in.op) && (rng() & 1)) std::swap(in.srcs[0], in.srcs[1]);
    }
    if (b.term.kind != Terminator::Kind::Jump) b.term.reg = rr(b.term.reg);
  }

  // renumber and reorder blocks, entry first
  std::vector<BlockId> ids;
  for (BlockId i = 0; i < 4 * f.blocks.size(); ++i) ids.push_back(i);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[below(i)]);
  std::map<BlockId, BlockId> renum;
  for (std::size_t i = 0; i < f.blocks.size(); ++i) renum[f.blocks[i].id] = ids[i];
  for (auto& b : f.blocks) {
    b.id = renum.at(b.id);
    for (auto& t : b.term.targets) t = renum.at(t);
  }
  f.entry_block = renum.at(f.entry_block);
  std::stable_partition(f.blocks.begin(), f.blocks.end(),
                        [&](const BasicBlock& b) { return b.id == f.entry_block; });
  for (std::size_t i = f.blocks.size(); i > 2; --i) std::swap(f.blocks[i - 1], f.blocks[1 + below(i - 1)]);
  return f;
}

}  // namespace obfdetect::corpus
