#include "dutd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace dutd::kernels {

#if DUTD_HAVE_AVX2
const KernelTable* avx2_table_impl() noexcept;
#endif

namespace {

const KernelTable* initial_table() noexcept {
  const char* env = std::getenv("DUTD_KERNELS");
  const std::string choice = env ? env : "auto";
  if (choice == "scalar") return &scalar_table();
  if (cpu_supports(Backend::avx2)) return avx2_table();
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable* avx2_table() noexcept {
#if DUTD_HAVE_AVX2
  return avx2_table_impl();
#else
  return nullptr;
#endif
}

bool cpu_supports(Backend b) noexcept {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if DUTD_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

void select(Backend b) {
  if (!cpu_supports(b)) {
    throw std::invalid_argument("kernel backend not supported: " + std::string(name(b)));
  }
  current().store(b == Backend::scalar ? &scalar_table() : avx2_table(),
                  std::memory_order_relaxed);
}

std::string_view name(Backend b) noexcept {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

}  // namespace dutd::kernels
