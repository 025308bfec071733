#pragma once

// Word-level kernels behind lfpw::Bitset.
//
// Every kernel has a scalar reference implementation. An AVX2 variant is
// compiled when the toolchain targets x86-64 and is selected at runtime when
// the CPU reports AVX2 support. Both variants must agree bit-for-bit; the
// equivalence suite in tests/test_simd_kernels.cpp enforces that.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace lfpw::simd {

using Word = std::uint64_t;

struct KernelTable {
  std::string_view name;
  // dst[i] = a[i] & b[i]
  void (*and_words)(Word* dst, const Word* a, const Word* b, std::size_t n);
  // dst[i] = a[i] | b[i]
  void (*or_words)(Word* dst, const Word* a, const Word* b, std::size_t n);
  // dst[i] = a[i] & ~b[i]
  void (*andnot_words)(Word* dst, const Word* a, const Word* b, std::size_t n);
  std::uint64_t (*popcount)(const Word* a, std::size_t n);
  // true iff (a & ~b) == 0
  bool (*is_subset)(const Word* a, const Word* b, std::size_t n);
  // true iff (a & b) != 0
  bool (*intersects)(const Word* a, const Word* b, std::size_t n);
  bool (*equal)(const Word* a, const Word* b, std::size_t n);
  bool (*any)(const Word* a, std::size_t n);
};

enum class Isa { Scalar, Avx2 };

const KernelTable& scalar_kernels();

// nullptr when the AVX2 translation unit was not built for this target.
const KernelTable* avx2_kernels();

bool cpu_has_avx2();

// The table used by Bitset. Defaults to the best variant the CPU supports.
const KernelTable& active_kernels();
Isa active_isa();

// Overrides runtime selection (tests and benchmarking). Requesting Avx2 on a
// machine without it falls back to Scalar; returns the ISA actually selected.
Isa select_isa(Isa requested);

}  // namespace lfpw::simd
