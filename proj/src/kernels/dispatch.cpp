#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "litatlas/error.hpp"

namespace litatlas::kernels {

namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* choose(std::string_view name) {
  if (name == "scalar") return &scalar_table();
  if (name == "avx2") return avx2_table();
  if (name == "auto" || name.empty()) {
    if (const auto* t = avx2_table()) return t;
    return &scalar_table();
  }
  return nullptr;
}

const KernelTable* initial() {
  const char* env = std::getenv("LITATLAS_KERNELS");
  if (env != nullptr) {
    if (const auto* t = choose(env)) return t;
  }
  return choose("auto");
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial()};
  return table;
}

}  // namespace

const KernelTable* avx2_table() {
  static const bool supported = cpu_has_avx2();
  return supported ? avx2_table_unchecked() : nullptr;
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void set_active(std::string_view name) {
  const auto* t = choose(name);
  if (t == nullptr) throw ValidationError("kernel table \"" + std::string(name) + "\" is not available");
  current().store(t, std::memory_order_release);
}

std::vector<std::string_view> available() {
  std::vector<std::string_view> names{scalar_table().name};
  if (const auto* t = avx2_table()) names.push_back(t->name);
  return names;
}

}  // namespace litatlas::kernels
