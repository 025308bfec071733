#include <atomic>

#include "lfpw/simd/bitset_kernels.hpp"

namespace lfpw::simd {
namespace {

const KernelTable* detect_best() {
  if (cpu_has_avx2()) {
    if (const KernelTable* t = avx2_kernels()) return t;
  }
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{detect_best()};
  return slot;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

const KernelTable& active_kernels() { return *active_slot().load(std::memory_order_relaxed); }

Isa active_isa() { return &active_kernels() == &scalar_kernels() ? Isa::Scalar : Isa::Avx2; }

Isa select_isa(Isa requested) {
  const KernelTable* table = &scalar_kernels();
  if (requested == Isa::Avx2 && cpu_has_avx2() && avx2_kernels() != nullptr) table = avx2_kernels();
  active_slot().store(table, std::memory_order_relaxed);
  return active_isa();
}

}  // namespace lfpw::simd
