#include <atomic>
#include <cstdlib>
#include <string>

#include "psfnet/simd/kernels.hpp"

namespace psfnet::simd {

#if defined(PSFNET_HAVE_AVX2)
const KernelTable& avx2_kernel_table();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(PSFNET_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* detect_default() {
  if (const char* env = std::getenv("PSFNET_SIMD")) {
    const std::string choice(env);
    if (choice == "scalar") return &scalar_kernels();
    if (choice == "avx2" && avx2_kernels() != nullptr) return avx2_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{detect_default()};
  return slot;
}

}  // namespace

const KernelTable* avx2_kernels() {
#if defined(PSFNET_HAVE_AVX2)
  static const bool available = cpu_has_avx2();
  return available ? &avx2_kernel_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active_kernels() { return *active_slot().load(std::memory_order_acquire); }

bool select_kernels(std::string_view name) {
  const KernelTable* table = nullptr;
  if (name == "scalar") {
    table = &scalar_kernels();
  } else if (name == "avx2") {
    table = avx2_kernels();
  } else if (name == "auto") {
    table = avx2_kernels() ? avx2_kernels() : &scalar_kernels();
  }
  if (table == nullptr) return false;
  active_slot().store(table, std::memory_order_release);
  return true;
}

}  // namespace psfnet::simd
